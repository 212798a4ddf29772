#include "grouping.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

namespace faramtn {

AttributeGrouping::AttributeGrouping(std::vector<std::string> attributes,
                                     std::vector<std::string> groups, std::vector<int> assignment)
    : attributes_(std::move(attributes)),
      groups_(std::move(groups)),
      assignment_(std::move(assignment)) {
    validate();
}

void AttributeGrouping::validate() const {
    if (attributes_.empty()) throw ValidationError("grouping: no attributes");
    if (groups_.empty()) throw ValidationError("grouping: no groups");
    if (assignment_.size() != attributes_.size()) {
        throw ValidationError("grouping: assignment length does not match attribute count");
    }
    std::set<std::string> seen_attr(attributes_.begin(), attributes_.end());
    if (seen_attr.size() != attributes_.size()) {
        throw ValidationError("grouping: duplicate attribute name");
    }
    std::set<std::string> seen_grp(groups_.begin(), groups_.end());
    if (seen_grp.size() != groups_.size()) throw ValidationError("grouping: duplicate group name");
    std::vector<int> counts(groups_.size(), 0);
    for (int g : assignment_) {
        if (g < 0 || g >= group_count()) {
            throw ValidationError("grouping: assignment refers to unknown group index");
        }
        ++counts[static_cast<std::size_t>(g)];
    }
    for (std::size_t g = 0; g < counts.size(); ++g) {
        if (counts[g] == 0) throw ValidationError("grouping: group '" + groups_[g] + "' is empty");
    }
}

const std::string& AttributeGrouping::attribute_name(int i) const {
    if (i < 0 || i >= attribute_count()) {
        throw LookupError("attribute index " + std::to_string(i) + " out of range");
    }
    return attributes_[static_cast<std::size_t>(i)];
}

const std::string& AttributeGrouping::group_name(int g) const {
    if (g < 0 || g >= group_count()) {
        throw LookupError("group index " + std::to_string(g) + " out of range");
    }
    return groups_[static_cast<std::size_t>(g)];
}

int AttributeGrouping::group_of(int attr_index) const {
    if (attr_index < 0 || attr_index >= attribute_count()) {
        throw LookupError("attribute index " + std::to_string(attr_index) + " out of range");
    }
    return assignment_[static_cast<std::size_t>(attr_index)];
}

int AttributeGrouping::attribute_index(const std::string& name) const {
    auto it = std::find(attributes_.begin(), attributes_.end(), name);
    if (it == attributes_.end()) throw LookupError("unknown attribute '" + name + "'");
    return static_cast<int>(it - attributes_.begin());
}

int AttributeGrouping::group_index(const std::string& name) const {
    auto it = std::find(groups_.begin(), groups_.end(), name);
    if (it == groups_.end()) throw LookupError("unknown group '" + name + "'");
    return static_cast<int>(it - groups_.begin());
}

std::vector<int> AttributeGrouping::group_members(int g) const {
    if (g < 0 || g >= group_count()) {
        throw LookupError("group index " + std::to_string(g) + " out of range");
    }
    std::vector<int> members;
    for (int i = 0; i < attribute_count(); ++i) {
        if (assignment_[static_cast<std::size_t>(i)] == g) members.push_back(i);
    }
    return members;
}

std::vector<int> AttributeGrouping::group_sizes() const {
    std::vector<int> sizes(groups_.size(), 0);
    for (int g : assignment_) ++sizes[static_cast<std::size_t>(g)];
    return sizes;
}

int AttributeGrouping::index_within_group(int attr_index) const {
    const int g = group_of(attr_index);
    int pos = 0;
    for (int i = 0; i < attr_index; ++i) {
        if (assignment_[static_cast<std::size_t>(i)] == g) ++pos;
    }
    return pos;
}

AttributeGrouping AttributeGrouping::default_celeba() {
    // Canonical CelebA spellings; the published table's "5 o' Clock Shadow"
    // and "Eyeglass" map to 5_o_Clock_Shadow and Eyeglasses.
    static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
        {"Mouth",
         {"5_o_Clock_Shadow", "Big_Lips", "Mouth_Slightly_Open", "Mustache", "Wearing_Lipstick",
          "No_Beard"}},
        {"Lower Face", {"Double_Chin", "Goatee", "Wearing_Necklace", "Wearing_Necktie"}},
        {"Cheeks", {"High_Cheekbones", "Rosy_Cheeks", "Sideburns", "Wearing_Earrings"}},
        {"Nose", {"Big_Nose", "Pointy_Nose"}},
        {"Eyes",
         {"Arched_Eyebrows", "Bags_Under_Eyes", "Bushy_Eyebrows", "Narrow_Eyes", "Eyeglasses"}},
        {"Hair",
         {"Bald", "Bangs", "Black_Hair", "Blond_Hair", "Brown_Hair", "Gray_Hair",
          "Receding_Hairline", "Straight_Hair", "Wavy_Hair", "Wearing_Hat"}},
        {"Global",
         {"Attractive", "Blurry", "Chubby", "Heavy_Makeup", "Male", "Oval_Face", "Pale_Skin",
          "Smiling", "Young"}},
    };
    // CelebA header order (alphabetical in the published attribute file).
    static const std::vector<std::string> header = {
        "5_o_Clock_Shadow", "Arched_Eyebrows",  "Attractive",    "Bags_Under_Eyes",
        "Bald",             "Bangs",            "Big_Lips",      "Big_Nose",
        "Black_Hair",       "Blond_Hair",       "Blurry",        "Brown_Hair",
        "Bushy_Eyebrows",   "Chubby",           "Double_Chin",   "Eyeglasses",
        "Goatee",           "Gray_Hair",        "Heavy_Makeup",  "High_Cheekbones",
        "Male",             "Mouth_Slightly_Open", "Mustache",   "Narrow_Eyes",
        "No_Beard",         "Oval_Face",        "Pale_Skin",     "Pointy_Nose",
        "Receding_Hairline", "Rosy_Cheeks",     "Sideburns",     "Smiling",
        "Straight_Hair",    "Wavy_Hair",        "Wearing_Earrings", "Wearing_Hat",
        "Wearing_Lipstick", "Wearing_Necklace", "Wearing_Necktie", "Young"};

    std::map<std::string, int> group_by_attr;
    std::vector<std::string> groups;
    for (std::size_t g = 0; g < table.size(); ++g) {
        groups.push_back(table[g].first);
        for (const std::string& a : table[g].second) group_by_attr[a] = static_cast<int>(g);
    }
    std::vector<int> assignment;
    assignment.reserve(header.size());
    for (const std::string& a : header) assignment.push_back(group_by_attr.at(a));
    return AttributeGrouping(header, std::move(groups), std::move(assignment));
}

AttributeGrouping AttributeGrouping::from_json_text(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("grouping config: ") + e.what());
    }
    if (!j.is_object() || !j.contains("groups") || !j["groups"].is_object()) {
        throw ParseError("grouping config: expected an object with a 'groups' table");
    }
    for (const auto& [key, _] : j.items()) {
        if (key != "groups" && key != "attributes") {
            throw ParseError("grouping config: unknown key '" + key + "'");
        }
    }

    std::vector<std::string> groups;
    std::map<std::string, int> group_of_attr;
    std::vector<std::string> declared_order;
    for (const auto& [gname, members] : j["groups"].items()) {
        if (!members.is_array() || members.empty()) {
            throw ValidationError("grouping config: group '" + gname + "' is empty");
        }
        const int g = static_cast<int>(groups.size());
        groups.push_back(gname);
        for (const auto& m : members) {
            if (!m.is_string()) {
                throw ParseError("grouping config: group '" + gname + "' has a non-string member");
            }
            const std::string attr = m.get<std::string>();
            if (group_of_attr.count(attr)) {
                throw ValidationError("grouping config: attribute '" + attr +
                                      "' assigned to more than one group");
            }
            group_of_attr[attr] = g;
            declared_order.push_back(attr);
        }
    }

    std::vector<std::string> attributes;
    if (j.contains("attributes")) {
        if (!j["attributes"].is_array()) {
            throw ParseError("grouping config: 'attributes' must be an array");
        }
        for (const auto& a : j["attributes"]) attributes.push_back(a.get<std::string>());
        if (attributes.size() != group_of_attr.size()) {
            throw ValidationError(
                "grouping config: 'attributes' does not list exactly the grouped attributes");
        }
        for (const std::string& a : attributes) {
            if (!group_of_attr.count(a)) {
                throw LookupError("grouping config: attribute '" + a + "' is not in any group");
            }
        }
    } else {
        attributes = std::move(declared_order);
    }

    std::vector<int> assignment;
    assignment.reserve(attributes.size());
    for (const std::string& a : attributes) assignment.push_back(group_of_attr.at(a));
    return AttributeGrouping(std::move(attributes), std::move(groups), std::move(assignment));
}

std::string AttributeGrouping::to_json_text() const {
    nlohmann::ordered_json j;
    j["attributes"] = attributes_;
    nlohmann::ordered_json groups = nlohmann::ordered_json::object();
    for (int g = 0; g < group_count(); ++g) {
        std::vector<std::string> members;
        for (int i : group_members(g)) members.push_back(attributes_[static_cast<std::size_t>(i)]);
        groups[groups_[static_cast<std::size_t>(g)]] = members;
    }
    j["groups"] = std::move(groups);
    return j.dump(2);
}

}  // namespace faramtn
