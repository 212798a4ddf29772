#include <doctest.h>

#include <set>

#include "grouping.hpp"

using namespace faramtn;

TEST_CASE("default grouping matches the published table") {
    const AttributeGrouping g = AttributeGrouping::default_celeba();
    CHECK(g.attribute_count() == 40);
    CHECK(g.group_count() == 7);

    SUBCASE("group sizes") {
        const std::vector<int> sizes = g.group_sizes();
        CHECK(sizes[g.group_index("Mouth")] == 6);
        CHECK(sizes[g.group_index("Lower Face")] == 4);
        CHECK(sizes[g.group_index("Cheeks")] == 4);
        CHECK(sizes[g.group_index("Nose")] == 2);
        CHECK(sizes[g.group_index("Eyes")] == 5);
        CHECK(sizes[g.group_index("Hair")] == 10);
        CHECK(sizes[g.group_index("Global")] == 9);
        int total = 0;
        for (int s : sizes) total += s;
        CHECK(total == 40);
    }
    SUBCASE("row membership") {
        CHECK(g.group_name(g.group_of(g.attribute_index("Big_Nose"))) == "Nose");
        CHECK(g.group_name(g.group_of(g.attribute_index("Wearing_Lipstick"))) == "Mouth");
        CHECK(g.group_name(g.group_of(g.attribute_index("Gray_Hair"))) == "Hair");
        CHECK(g.group_name(g.group_of(g.attribute_index("Smiling"))) == "Global");
        CHECK(g.group_name(g.group_of(g.attribute_index("5_o_Clock_Shadow"))) == "Mouth");
        CHECK(g.group_name(g.group_of(g.attribute_index("Eyeglasses"))) == "Eyes");
    }
    SUBCASE("group order follows the table rows") {
        CHECK(g.group_name(0) == "Mouth");
        CHECK(g.group_name(6) == "Global");
    }
    SUBCASE("attribute order follows the attribute-file header") {
        CHECK(g.attribute_name(0) == "5_o_Clock_Shadow");
        CHECK(g.attribute_name(20) == "Male");
        CHECK(g.attribute_name(39) == "Young");
    }
}

TEST_CASE("group_of bounds") {
    const AttributeGrouping g = AttributeGrouping::default_celeba();
    CHECK_THROWS_AS(g.group_of(40), LookupError);
    CHECK_THROWS_AS(g.group_of(-1), LookupError);
    CHECK_THROWS_AS(g.attribute_index("NotAnAttribute"), LookupError);
}

TEST_CASE("load_grouping") {
    SUBCASE("minimal valid config") {
        const AttributeGrouping g = AttributeGrouping::from_json_text(
            R"({"groups": {"A": ["x", "y"], "B": ["z"]}})");
        CHECK(g.attribute_count() == 3);
        CHECK(g.group_count() == 2);
        CHECK(g.group_name(g.group_of(g.attribute_index("z"))) == "B");
    }
    SUBCASE("attribute in two groups is rejected") {
        CHECK_THROWS_AS(AttributeGrouping::from_json_text(
                            R"({"groups": {"A": ["x", "y"], "B": ["x"]}})"),
                        ValidationError);
    }
    SUBCASE("empty group is rejected") {
        CHECK_THROWS_AS(AttributeGrouping::from_json_text(R"({"groups": {"A": ["x"], "B": []}})"),
                        ValidationError);
    }
    SUBCASE("attribute list referencing an ungrouped name is rejected") {
        CHECK_THROWS_AS(AttributeGrouping::from_json_text(
                            R"({"attributes": ["x", "q"], "groups": {"A": ["x", "y"]}})"),
                        Error);
    }
    SUBCASE("unknown top-level key is rejected") {
        CHECK_THROWS_AS(AttributeGrouping::from_json_text(
                            R"({"groups": {"A": ["x"]}, "extra": 1})"),
                        ParseError);
    }
    SUBCASE("malformed json") {
        CHECK_THROWS_AS(AttributeGrouping::from_json_text("{groups"), ParseError);
    }
}

TEST_CASE("serialization round trip") {
    const AttributeGrouping g = AttributeGrouping::default_celeba();
    const AttributeGrouping back = AttributeGrouping::from_json_text(g.to_json_text());
    CHECK(back == g);

    const AttributeGrouping small = AttributeGrouping::from_json_text(
        R"({"groups": {"left": ["a", "c"], "right": ["b"]}})");
    CHECK(AttributeGrouping::from_json_text(small.to_json_text()) == small);
}

TEST_CASE("assignment partitions the attribute set") {
    const AttributeGrouping g = AttributeGrouping::default_celeba();
    std::set<int> seen;
    for (int grp = 0; grp < g.group_count(); ++grp) {
        for (int m : g.group_members(grp)) {
            CHECK(g.group_of(m) == grp);
            CHECK(!seen.count(m));
            seen.insert(m);
        }
    }
    CHECK(static_cast<int>(seen.size()) == g.attribute_count());
}

TEST_CASE("index_within_group is the member-list position") {
    const AttributeGrouping g = AttributeGrouping::from_json_text(
        R"({"groups": {"A": ["x", "y", "z"], "B": ["w"]}})");
    CHECK(g.index_within_group(g.attribute_index("x")) == 0);
    CHECK(g.index_within_group(g.attribute_index("z")) == 2);
    CHECK(g.index_within_group(g.attribute_index("w")) == 0);
}
