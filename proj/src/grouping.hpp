#pragma once

#include <string>
#include <vector>

#include "errors.hpp"

namespace faramtn {

// Registry mapping K attributes onto G named groups. Every module addresses
// attributes and groups only through the indices this class hands out, so the
// assignment is validated once and stable for the life of a run.
class AttributeGrouping {
public:
    AttributeGrouping() = default;

    // attributes in index order, groups in index order, assignment[i] = group
    // of attribute i. Validates the partition: every attribute lands in
    // exactly one group and no group is empty.
    AttributeGrouping(std::vector<std::string> attributes, std::vector<std::string> groups,
                      std::vector<int> assignment);

    // The published 40-attribute / 7-group assignment (Mouth, Lower Face,
    // Cheeks, Nose, Eyes, Hair, Global). Attribute indices follow the CelebA
    // attribute-file header order so label columns line up by construction.
    static AttributeGrouping default_celeba();

    // Grouping config: JSON object with a "groups" table (group name -> list
    // of attribute names, declaration order kept) and an optional
    // "attributes" array pinning the attribute index order.
    static AttributeGrouping from_json_text(const std::string& text);
    std::string to_json_text() const;

    int attribute_count() const { return static_cast<int>(attributes_.size()); }
    int group_count() const { return static_cast<int>(groups_.size()); }

    const std::string& attribute_name(int i) const;
    const std::string& group_name(int g) const;
    const std::vector<std::string>& attribute_names() const { return attributes_; }
    const std::vector<std::string>& group_names() const { return groups_; }

    int group_of(int attr_index) const;
    int attribute_index(const std::string& name) const;
    int group_index(const std::string& name) const;

    std::vector<int> group_members(int g) const;
    std::vector<int> group_sizes() const;
    // Position of the attribute inside its own group's member list.
    int index_within_group(int attr_index) const;

    bool operator==(const AttributeGrouping& other) const = default;

private:
    void validate() const;

    std::vector<std::string> attributes_;
    std::vector<std::string> groups_;
    std::vector<int> assignment_;
};

}  // namespace faramtn
