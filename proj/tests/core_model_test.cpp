#include <gtest/gtest.h>

#include <json.hpp>

#include "mstan/parser.hpp"
#include "mstan/program.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

ModularProgram mean_stddev() { return ModularProgram(parse(fixture_text("mean_stddev.mstan"))); }

std::vector<std::string> names(const ModularProgram& p, const std::vector<int>& ids, bool holes) {
    std::vector<std::string> out;
    for (int id : ids) out.push_back(holes ? p.hole_name(id) : p.impl_name(id));
    return out;
}

}  // namespace

TEST(Program, HolesImplsAndParents) {
    auto p = mean_stddev();
    ASSERT_EQ(p.hole_count(), 3u);
    EXPECT_EQ(p.hole_name(0), "Mean");
    EXPECT_EQ(p.hole_name(1), "Stddev");
    EXPECT_EQ(p.hole_name(2), "StddevInformative");
    EXPECT_EQ(names(p, p.impls(0), false), (std::vector<std::string>{"normal", "standard"}));
    EXPECT_EQ(names(p, p.impls(2), false), (std::vector<std::string>{"no", "yes"}));
    int lognormal = p.find_impl("Stddev", "lognormal");
    ASSERT_GE(lognormal, 0);
    EXPECT_EQ(p.hole_name(p.par(lognormal)), "Stddev");
    EXPECT_EQ(names(p, p.holes_of(lognormal), true), (std::vector<std::string>{"StddevInformative"}));
    EXPECT_EQ(names(p, p.base_holes(), true), (std::vector<std::string>{"Mean", "Stddev"}));
    EXPECT_EQ(p.find_impl("Stddev", "nope"), -1);
}

TEST(Program, SitesRecordContainers) {
    auto p = mean_stddev();
    auto sites = p.sites();
    ASSERT_EQ(sites.size(), 3u);
    EXPECT_EQ(sites[0].hole, "Mean");
    ASSERT_TRUE(sites[0].container.block.has_value());
    EXPECT_EQ(*sites[0].container.block, BlockKind::Model);
    EXPECT_EQ(sites[2].hole, "StddevInformative");
    EXPECT_FALSE(sites[2].container.block.has_value());
    EXPECT_EQ(p.impl_name(sites[2].container.impl), "lognormal");
}

TEST(Program, TopologicalOrderPutsParentsFirst) {
    auto p = mean_stddev();
    auto order = p.topo_order();
    ASSERT_TRUE(order);
    EXPECT_EQ(names(p, *order, true), (std::vector<std::string>{"Mean", "Stddev", "StddevInformative"}));
}

TEST(Program, ValiditySiblingsAndClose) {
    auto p = mean_stddev();
    EXPECT_TRUE(valid_selection(p, {{"Mean", "normal"}, {"Stddev", "standard"}}).valid);
    EXPECT_TRUE(valid_selection(p, {{"Mean", "normal"}, {"Stddev", "lognormal"}, {"StddevInformative", "no"}}).valid);

    auto missing = valid_selection(p, {{"Mean", "normal"}, {"Stddev", "lognormal"}});
    EXPECT_FALSE(missing.valid);
    EXPECT_EQ(missing.missing, (std::vector<std::string>{"StddevInformative"}));

    auto extra = valid_selection(p, {{"Mean", "normal"}, {"Stddev", "standard"}, {"StddevInformative", "no"}});
    EXPECT_FALSE(extra.valid);
    ASSERT_EQ(extra.extra.size(), 1u);

    auto unknown = valid_selection(p, {{"Mean", "bogus"}, {"Stddev", "standard"}});
    EXPECT_FALSE(unknown.valid);
    EXPECT_FALSE(unknown.messages().empty());

    Selection a{{"Mean", "normal"}, {"Stddev", "lognormal"}, {"StddevInformative", "yes"}};
    Selection b{{"Mean", "normal"}, {"Stddev", "standard"}};
    auto sib = siblings(a, b);
    ASSERT_EQ(sib.size(), 1u);
    EXPECT_EQ(sib[0], (SiblingPair{"Stddev", "lognormal", "standard"}));

    Selection over{{"Mean", "normal"}, {"Stddev", "standard"}, {"StddevInformative", "yes"}};
    EXPECT_EQ(close(p, over), b);
}

TEST(Program, ModuleGraphJson) {
    auto p = mean_stddev();
    auto g = module_graph(p);
    auto j = nlohmann::json::parse(module_graph_json(g));
    EXPECT_EQ(j["nodes"].size(), 1u + 3u + 6u);
    EXPECT_EQ(j["nodes"][0]["id"], "(base)");
    bool found = false;
    for (const auto& e : j["edges"]) {
        if (e["from"] == "Stddev:lognormal" && e["to"] == "StddevInformative") found = true;
    }
    EXPECT_TRUE(found);
    EXPECT_NE(module_graph_dot(g).find("digraph"), std::string::npos);
}
