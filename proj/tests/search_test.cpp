#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "mstan/errors.hpp"
#include "mstan/graphs.hpp"
#include "mstan/parser.hpp"
#include "mstan/search.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

Expansion load(const std::string& name) { return Expansion(parse(fixture_text(name))); }

const char* kThree = R"(model { target += H(); }
module "a" H() { return 1; }
module "b" H() { return 2; }
module "c" H() { return 3; }
)";

// Scores by the implementation chosen for H: a < b < c.
ScoreFn by_name(std::atomic<int>* calls = nullptr) {
    return [calls](const std::string& sel, const std::string&) {
        if (calls) ++*calls;
        return static_cast<double>(sel.back() - 'a');
    };
}

void expect_local_optimum(const Expansion& x, const SearchTrace& t, Scorer& s) {
    double best = *s.cached(t.result);
    for (const auto& n : x.neighbors(parse_selection(t.result))) {
        auto v = s.cached(n.text());
        ASSERT_TRUE(v.has_value()) << n.text();
        EXPECT_LE(*v, best) << n.text();
    }
}

}  // namespace

TEST(Search, ThreeImplementations) {
    Expansion x(parse(kThree));
    std::atomic<int> calls{0};
    Scorer s(by_name(&calls));
    auto t = greedy_search(x, parse_selection("H:a"), s);
    EXPECT_EQ(t.result, "H:c");
    EXPECT_EQ(t.evaluations, 3u);
    EXPECT_EQ(calls.load(), 3);
    EXPECT_EQ(t.path, (std::vector<std::string>{"H:a", "H:c"}));
    EXPECT_EQ(t.visited.front().selection, "H:a");
    EXPECT_FALSE(t.error.has_value());
}

TEST(Search, ConstantScorerStaysAtStart) {
    Expansion x(parse(kThree));
    Scorer s([](const std::string&, const std::string&) { return 1.0; });
    auto t = greedy_search(x, parse_selection("H:b"), s);
    EXPECT_EQ(t.result, "H:b");
    EXPECT_EQ(t.path.size(), 1u);
    EXPECT_EQ(t.evaluations, 3u);
}

TEST(Search, TiesGoToTheSmallestSelection) {
    Expansion x(parse(kThree));
    Scorer s([](const std::string& sel, const std::string&) { return sel == "H:a" ? 0.0 : 1.0; });
    auto t = greedy_search(x, parse_selection("H:a"), s);
    EXPECT_EQ(t.result, "H:b");
}

TEST(Search, MeanStddevByParameterCount) {
    auto x = load("mean_stddev.mstan");
    auto start = default_start(x);
    EXPECT_EQ(start.text(), "Mean:normal,Stddev:lognormal,StddevInformative:no");
    Scorer s(parameter_count_scorer());
    auto t = greedy_search(x, parse_selection("Mean:standard,Stddev:standard"), s);
    auto sel = parse_core_selection(t.result);
    EXPECT_EQ(sel.at("Mean"), "normal");
    EXPECT_EQ(sel.at("Stddev"), "lognormal");
    EXPECT_EQ(*s.cached(t.result), 2.0);
    expect_local_optimum(x, t, s);
}

TEST(Search, BirthdayReachesLocalOptimum) {
    auto x = load("birthday.mstan");
    std::atomic<int> calls{0};
    auto counted = [&calls](const std::string& sel, const std::string& program) {
        ++calls;
        return parameter_count(program);
    };
    Scorer s(counted);
    auto t = greedy_search(x, default_start(x), s, 4);
    ASSERT_FALSE(t.error.has_value()) << *t.error;
    EXPECT_EQ(static_cast<std::size_t>(calls.load()), t.evaluations);
    EXPECT_EQ(t.visited.size(), t.evaluations);
    EXPECT_LE(t.evaluations, 120u);
    expect_local_optimum(x, t, s);
    for (std::size_t k = 1; k < t.path.size(); ++k) EXPECT_GT(*s.cached(t.path[k]), *s.cached(t.path[k - 1]));
}

TEST(Search, CollectionsGrowMemberByMember) {
    auto x = load("collection3.mstan");
    auto start = default_start(x);
    EXPECT_EQ(start.text(), "Term:[]");
    Scorer s(parameter_count_scorer());
    auto t = greedy_search(x, start, s);
    EXPECT_EQ(t.result, "Term:[linear,offset,quadratic]");
    EXPECT_EQ(t.path.size(), 4u);
}

TEST(Search, RandomProgramsEndAtLocalOptima) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Expansion x(parse(random_program(seed)));
        Scorer s([](const std::string& sel, const std::string&) {
            return static_cast<double>(std::hash<std::string>{}(sel) % 1000);
        });
        auto t = greedy_search(x, default_start(x), s, 2);
        ASSERT_FALSE(t.error.has_value());
        expect_local_optimum(x, t, s);
    }
}

TEST(Search, ExternalScorer) {
    Expansion x(parse(kThree));
    Scorer fixed(external_scorer({"echo 1.5", 0}));
    EXPECT_EQ(fixed.score(x, parse_selection("H:a")), 1.5);

    auto log = std::filesystem::temp_directory_path() / "mstan-scorer-calls.txt";
    std::filesystem::remove(log);
    std::string cmd = "echo x >> " + log.string() + " && echo 2.5 {file}";
    Scorer counting(external_scorer({cmd, 10}));
    EXPECT_EQ(counting.score(x, parse_selection("H:b")), 2.5);
    EXPECT_EQ(counting.score(x, parse_selection("H:b")), 2.5);
    std::ifstream in(log);
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 1);
    std::filesystem::remove(log);

    Scorer failing(external_scorer({"false", 0}));
    auto t = greedy_search(x, parse_selection("H:a"), failing);
    ASSERT_TRUE(t.error.has_value());
    EXPECT_EQ(t.evaluations, 0u);

    Scorer garbled(external_scorer({"echo abc", 0}));
    try {
        garbled.score(x, parse_selection("H:a"));
        FAIL();
    } catch (const CompileError& e) {
        EXPECT_EQ(e.code(), "SCORER_FAILED");
    }
}

TEST(Search, TraceJson) {
    Expansion x(parse(kThree));
    Scorer s(by_name());
    auto j = trace_json(greedy_search(x, parse_selection("H:a"), s));
    EXPECT_NE(j.find("\"result\": \"H:c\""), std::string::npos) << j;
    EXPECT_NE(j.find("\"evaluations\": 3"), std::string::npos) << j;
}
