#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mstan/errors.hpp"
#include "mstan/graphs.hpp"
#include "mstan/parser.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

ModularProgram load(const std::string& name) { return ModularProgram(parse(fixture_text(name))); }

std::set<std::string> adjacency(const ModelGraphResult& g, const std::string& id) {
    std::set<std::string> out;
    for (const auto& e : g.edges) {
        if (e.a == id) out.insert(e.b);
        if (e.b == id) out.insert(e.a);
    }
    return out;
}

std::set<std::string> ids(const std::vector<Selection>& sels) {
    std::set<std::string> out;
    for (const auto& s : sels) out.insert(canonical(s));
    return out;
}

void expect_sound(const ModularProgram& p, const ModelGraphResult& g) {
    for (const auto& n : g.nodes) EXPECT_TRUE(valid_selection(p, n).valid) << canonical(n);
    std::map<std::string, Selection> by_id;
    for (const auto& n : g.nodes) by_id[canonical(n)] = n;
    for (const auto& e : g.edges) {
        auto sib = siblings(by_id.at(e.a), by_id.at(e.b));
        ASSERT_EQ(sib.size(), 1u);
        EXPECT_EQ(sib[0].hole, e.hole);
    }
}

}  // namespace

TEST(Graphs, MeanStddevOracleFirst) {
    auto p = load("mean_stddev.mstan");
    auto naive = naive_model_graph(p);
    EXPECT_EQ(naive.nodes.size(), 6u);
    EXPECT_EQ(naive.edges.size(), 9u);
    EXPECT_EQ(model_graph(p), naive);
    expect_sound(p, naive);
    EXPECT_EQ(ids(model_graph_nodes_only(p).selections()), ids(naive.nodes));
}

TEST(Graphs, TrivialShapes) {
    auto none = ModularProgram(parse("model { target += 1; }"));
    auto g = model_graph(none);
    ASSERT_EQ(g.nodes.size(), 1u);
    EXPECT_TRUE(g.nodes[0].empty());
    EXPECT_TRUE(g.edges.empty());
    EXPECT_EQ(model_graph_nodes_only(none).size(), 1u);

    auto single = ModularProgram(parse(R"(model { target += H(); }
module "a" H() { return 1; }
module "b" H() { return 2; }
module "c" H() { return 3; }
module "d" H() { return 4; }
)"));
    auto k = model_graph(single);
    EXPECT_EQ(k.nodes.size(), 4u);
    EXPECT_EQ(k.edges.size(), 6u);
    EXPECT_EQ(model_neighbors(single, {{"H", "b"}}).size(), 3u);
}

TEST(Graphs, CorpusMatchesOracle) {
    for (const char* name : {"mean_stddev.mstan", "golf.mstan", "birthday.mstan", "fields.mstan"}) {
        auto p = load(name);
        auto naive = naive_model_graph(p);
        EXPECT_EQ(model_graph(p), naive) << name;
        EXPECT_EQ(ids(model_graph_nodes_only(p).selections()), ids(naive.nodes)) << name;
        expect_sound(p, naive);
    }
    EXPECT_EQ(model_graph_nodes_only(load("birthday.mstan")).size(), 120u);
}

TEST(Graphs, RandomProgramsMatchOracle) {
    for (std::uint64_t seed = 1; seed <= 250; ++seed) {
        auto p = ModularProgram(parse(random_program(seed)));
        auto naive = naive_model_graph(p);
        auto fast = model_graph(p);
        ASSERT_EQ(fast, naive) << random_program(seed);
        EXPECT_EQ(ids(model_graph_nodes_only(p).selections()), ids(naive.nodes));
        for (const auto& n : naive.nodes) {
            EXPECT_EQ(ids(model_neighbors(p, n)), adjacency(naive, canonical(n))) << random_program(seed);
        }
    }
}

TEST(Graphs, NeighborsOfMeanStddev) {
    auto p = load("mean_stddev.mstan");
    auto nei = ids(model_neighbors(p, {{"Mean", "standard"}, {"Stddev", "standard"}}));
    EXPECT_EQ(nei, (std::set<std::string>{"Mean:normal,Stddev:standard",
                                          "Mean:standard,Stddev:lognormal,StddevInformative:no",
                                          "Mean:standard,Stddev:lognormal,StddevInformative:yes"}));
    EXPECT_THROW(model_neighbors(p, {{"Mean", "standard"}}), CompileError);
}

TEST(Graphs, Limit) {
    auto p = load("mean_stddev.mstan");
    auto one = limit(p, {{"Mean", "normal"}});
    EXPECT_EQ(one.impls(one.hole_id("Mean")).size(), 1u);
    EXPECT_EQ(one.impls(one.hole_id("Stddev")).size(), 2u);
    EXPECT_EQ(model_graph(limit(p, {})), model_graph(p));
    Selection full{{"Mean", "normal"}, {"Stddev", "lognormal"}, {"StddevInformative", "no"}};
    auto pinned = model_graph(limit(p, full));
    ASSERT_EQ(pinned.nodes.size(), 1u);
    EXPECT_EQ(pinned.nodes[0], full);
    EXPECT_EQ(model_graph(p, limit_mask(p, full)), pinned);
}

TEST(Graphs, TallChainHasDepthPlusOneNodes) {
    for (int depth : {1, 5, 50, 300}) {
        auto p = ModularProgram(parse(tall_chain(depth)));
        EXPECT_EQ(model_graph_nodes_only(p).size(), static_cast<std::size_t>(depth + 1));
    }
    auto p = ModularProgram(parse(tall_chain(12)));
    EXPECT_EQ(model_graph(p), naive_model_graph(p));
}

TEST(Graphs, CapExceeded) {
    auto p = ModularProgram(parse(tall_chain(25)));
    try {
        naive_model_graph(p, 1000);
        FAIL();
    } catch (const CompileError& e) {
        EXPECT_EQ(e.code(), "CAP_EXCEEDED");
    }
}

TEST(Graphs, Exports) {
    auto p = load("mean_stddev.mstan");
    auto g = model_graph(p);
    EXPECT_EQ(graph_from_json(graph_json(g)), g);
    auto dot = graph_dot(g);
    std::size_t edges = 0, lines = 0;
    for (std::size_t at = dot.find('\n'); at != std::string::npos; at = dot.find('\n', at + 1)) ++lines;
    for (std::size_t at = dot.find(" -- "); at != std::string::npos; at = dot.find(" -- ", at + 1)) ++edges;
    EXPECT_EQ(edges, 9u);
    EXPECT_EQ(lines, 2u + 6u + 9u);

    auto single = model_graph(ModularProgram(parse("model { target += 1; }")));
    EXPECT_EQ(graph_dot(single), "graph models {\n  \"\";\n}\n");
}
