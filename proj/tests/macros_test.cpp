#include <gtest/gtest.h>

#include <chrono>
#include <set>

#include "mstan/checks.hpp"
#include "mstan/errors.hpp"
#include "mstan/macros.hpp"
#include "mstan/parser.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

Expansion load(const std::string& name) { return Expansion(parse(fixture_text(name))); }

std::string code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const CompileError& e) {
        return e.code();
    }
    return "";
}

std::set<std::string> texts(const std::vector<SelectionSpec>& specs) {
    std::set<std::string> out;
    for (const auto& s : specs) out.insert(s.text());
    return out;
}

std::set<std::string> adjacency(const ModelGraphResult& g, const std::string& id) {
    std::set<std::string> out;
    for (const auto& e : g.edges) {
        if (e.a == id) out.insert(e.b);
        if (e.b == id) out.insert(e.a);
    }
    return out;
}

// Every node concretizes to a hole-free program that reparses and checks.
void expect_nodes_concretize(const Expansion& x, const ModelGraphResult& g) {
    for (const auto& id : g.node_ids()) {
        auto text = x.concretize(parse_selection(id));
        auto again = ModularProgram(parse(text));
        EXPECT_EQ(again.hole_count(), 0u) << id;
        auto r = check_program(again);
        EXPECT_TRUE(r.ok()) << id << "\n" << text << diagnostics_text(r.diagnostics);
    }
}

}  // namespace

TEST(Ranges, ExponentCounts) {
    auto count = [](const std::string& spec) {
        auto ast = parse("model { target += H[" + spec + "](); }\nmodule \"f\" H[a, b, c]() { return 1; }\n");
        return IndexTuples(*ast.base[0].stmts[0].exprs[0].hole->operands[0].indexed).size();
    };
    EXPECT_EQ(count("(1..3)^3"), 27);
    EXPECT_EQ(count("(1..3)^P3"), 6);
    EXPECT_EQ(count("(1..3)^C3"), 1);
    EXPECT_EQ(count("1..3, 2, 4..5"), 6);
    EXPECT_EQ(choice_count(IndexItem::Kind::Power, 3, 2), 9);
    EXPECT_EQ(choice_count(IndexItem::Kind::Combination, 100, 3), 161700);
}

TEST(Ranges, EnumerationIsLexicographicAndComplete) {
    for (auto kind : {IndexItem::Kind::Power, IndexItem::Kind::Permutation, IndexItem::Kind::Combination}) {
        for (long m = 1; m <= 5; ++m) {
            for (int n = 1; n <= 3; ++n) {
                BigInt size = choice_count(kind, m, n);
                std::vector<std::vector<long>> seen;
                for (BigInt k = 0; k < size; ++k) seen.push_back(choice_at(kind, m, n, k));
                EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
                EXPECT_EQ(std::set<std::vector<long>>(seen.begin(), seen.end()).size(), seen.size());
                for (const auto& t : seen) {
                    if (kind == IndexItem::Kind::Permutation)
                        EXPECT_EQ(std::set<long>(t.begin(), t.end()).size(), t.size());
                    if (kind == IndexItem::Kind::Combination) EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
                }
            }
        }
    }
    auto ast = parse("model { target += H[(1..3)^P2](); }\nmodule \"f\" H[a, b]() { return 1; }\n");
    IndexTuples t(*ast.base[0].stmts[0].exprs[0].hole->operands[0].indexed);
    EXPECT_FALSE(t.contains({1, 1}));
    EXPECT_TRUE(t.contains({3, 1}));
    EXPECT_EQ(t.at(0), (std::vector<long>{1, 2}));
}

TEST(Collections, CubeGraph) {
    auto x = load("collection3.mstan");
    auto g = x.graph();
    EXPECT_EQ(g.nodes.size(), 8u);
    EXPECT_EQ(g.edges.size(), 12u);
    for (const auto& id : g.node_ids()) EXPECT_EQ(adjacency(g, id).size(), 3u) << id;
    expect_nodes_concretize(x, g);
}

TEST(Collections, TranslationFormula) {
    auto x = load("collection3.mstan");
    auto core = x.full();
    auto sel = x.translate(parse_selection("Term:[offset,linear]"), core);
    EXPECT_EQ(canonical(sel), "Term:merge_Term,Term_linear:yes,Term_offset:yes,Term_quadratic:no");
    EXPECT_EQ(x.inverse(sel, core).text(), "Term:[linear,offset]");
    auto empty = x.translate(parse_selection("Term:[]"), core);
    EXPECT_EQ(canonical(empty), "Term:merge_Term,Term_linear:no,Term_offset:no,Term_quadratic:no");
    auto text = x.concretize(parse_selection("Term:[]"));
    EXPECT_NE(text.find("sum({})"), std::string::npos) << text;
    EXPECT_EQ(code_of([&] { x.translate(parse_selection("Term:[cubic]"), core); }), "UNKNOWN_MEMBER");
    EXPECT_EQ(code_of([&] { x.translate(parse_selection("Term:linear"), core); }), "MACRO_CONFLICT");
}

TEST(Collections, MembersGetTheirOwnGlobals) {
    auto x = load("collection3.mstan");
    auto text = x.concretize(parse_selection("Term:[linear,quadratic]"));
    EXPECT_NE(text.find("real b1_Term_linear;"), std::string::npos) << text;
    EXPECT_NE(text.find("sum({b1_Term_linear * x, b2_Term_quadratic * x .* x})"), std::string::npos) << text;
}

TEST(Instances, ShareOneBinding) {
    auto x = load("instances.mstan");
    auto g = x.graph();
    EXPECT_EQ(g.nodes.size(), 8u);
    expect_nodes_concretize(x, g);
    auto text = x.concretize(parse_selection("Cloud:fitted,Wind<<1>>:calm,Wind<<2>>:gusty"));
    EXPECT_NE(text.find("real theta_Cloud_1;"), std::string::npos) << text;
    EXPECT_NE(text.find("real theta_Cloud_2;"), std::string::npos) << text;
    EXPECT_NE(text.find("gust_Wind_2"), std::string::npos) << text;
    EXPECT_EQ(text.find("gust_Wind_1"), std::string::npos) << text;
    EXPECT_EQ(code_of([&] { x.concretize(parse_selection("Cloud:fitted,Wind<<1>>:calm")); }),
              "MISSING_COPY_BINDING");
}

TEST(Instances, CopiesVersusInstances) {
    const std::string impls = "module \"a\" H() { parameters { real t; } return t; }\nmodule \"b\" H() { return 1; }\n";
    Expansion copies(parse("model { target += H<<1>>() + H<<2>>(); }\n" + impls));
    Expansion instances(parse("model { target += H<1>() + H<2>(); }\n" + impls));
    Expansion single(parse("model { target += H<1>(); }\n" + impls));
    EXPECT_EQ(copies.graph().nodes.size(), 4u);
    EXPECT_EQ(instances.graph().nodes.size(), 2u);
    EXPECT_EQ(single.graph().nodes.size(), 2u);
    auto text = instances.concretize(parse_selection("H:a"));
    EXPECT_NE(text.find("target += t_H_1 + t_H_2;"), std::string::npos) << text;
}

TEST(Instances, RangedInstancesBecomeArrays) {
    Expansion x(parse("model { target += sum(H<1..3>()); }\nmodule \"a\" H() { parameters { real t; } return t; }\n"));
    auto text = x.concretize(parse_selection("H:a"));
    EXPECT_NE(text.find("sum({t_H_1, t_H_2, t_H_3})"), std::string::npos) << text;
}

TEST(Indexed, TemplatesInstantiatePerIndex) {
    Expansion x(parse("data { vector[3] v; }\nmodel { target += H[1..3](); }\nmodule \"f\" H[n]() { return v[n]; }\n"));
    EXPECT_EQ(x.graph().nodes.size(), 3u);
    EXPECT_EQ(x.concretize(parse_selection("H:f[2]")), x.concretize(parse_selection("H:2")));
    EXPECT_NE(x.concretize(parse_selection("H:f[2]")).find("target += v[2];"), std::string::npos);
    EXPECT_EQ(code_of([&] { x.concretize(parse_selection("H:f[5]")); }), "INDEX_OUT_OF_RANGE");
    EXPECT_EQ(code_of([&] { x.concretize(parse_selection("H:g[1]")); }), "UNKNOWN_IMPL");
}

TEST(Products, CartesianImplementations) {
    const std::string impls = R"(module "a" A() { return 1; }
module "b" A() { return 2; }
module "x" B() { return 3; }
module "y" B() { return 4; }
module "z" B() { return 5; }
)";
    Expansion x(parse("model { target += sum(A*B()); }\n" + impls));
    EXPECT_EQ(x.family("A*B").size(), 6);
    EXPECT_EQ(x.graph().nodes.size(), 6u);
    EXPECT_NE(x.concretize(parse_selection("A*B:(b,y)")).find("sum((2, 4))"), std::string::npos);
    EXPECT_EQ(code_of([&] { x.concretize(parse_selection("A*B:(b,w)")); }), "UNKNOWN_IMPL");

    Expansion c(parse("model { target += sum(B^C2()); }\n" + impls));
    EXPECT_EQ(c.family("B^C2").size(), 3);
    Expansion p(parse("model { target += sum(B^P2()); }\n" + impls));
    EXPECT_EQ(p.family("B^P2").size(), 6);
}

TEST(Products, FixtureGraphAndConcretization) {
    auto x = load("products.mstan");
    EXPECT_EQ(x.family("Theta*Col").size(), 3);
    EXPECT_EQ(x.family("Theta*Col^C2").size(), 3);
    auto g = x.graph();
    EXPECT_EQ(g.nodes.size(), 64u);
    expect_nodes_concretize(x, g);
    auto text = x.concretize(parse_selection("Theta*Col:[(t,1),(t,3)],Theta*Col^C2:[(t,1,2)]"));
    EXPECT_NE(text.find("(theta_Theta_Col_t_1, x[1])"), std::string::npos) << text;
}

TEST(Regression, LazyCounts) {
    auto x = load("regression.mstan");
    auto counts = x.counts();
    EXPECT_EQ(counts.collection_members, 166750);
    EXPECT_EQ(counts.members.at("Feature"), 100);
    EXPECT_EQ(counts.members.at("FeaturePair"), 4950);
    EXPECT_EQ(counts.members.at("FeatureTriplet"), 161700);
    EXPECT_EQ(counts.nodes, "2^166750");
    EXPECT_EQ(x.instantiations(), 3u);
    EXPECT_EQ(code_of([&] { x.full(); }), "TOO_LARGE");
}

TEST(Regression, LazyNeighbors) {
    auto x = load("regression.mstan");
    auto spec = parse_selection("Feature:[1,2,3],FeaturePair:[(1,2)],FeatureTriplet:[]");
    auto start = std::chrono::steady_clock::now();
    auto ns = x.neighbors(spec);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(ns.size(), 166750u);
    EXPECT_LT(secs, 2.0);
    EXPECT_LT(x.instantiations(), 1000u);
    auto t = texts(ns);
    EXPECT_TRUE(t.count("Feature:[1,2],FeaturePair:[(1,2)],FeatureTriplet:[]"));
    EXPECT_TRUE(t.count("Feature:[1,2,3],FeaturePair:[(1,2)],FeatureTriplet:[(4,7,9)]"));
    auto text = x.concretize(spec);
    EXPECT_NE(text.find("theta_Feature_3 * x[3]"), std::string::npos) << text;
    EXPECT_TRUE(check_program(ModularProgram(parse(text))).ok()) << text;
}

TEST(Expansion, LazyNeighborsMatchFullExpansion) {
    for (const auto* name : {"collection3.mstan", "products.mstan", "instances.mstan"}) {
        auto x = load(name);
        auto g = x.graph();
        auto core = x.full();
        for (const auto& id : g.node_ids()) {
            auto lazy = texts(x.neighbors(parse_selection(id)));
            EXPECT_EQ(lazy, adjacency(g, id)) << name << " " << id;
        }
    }
}

TEST(Expansion, NestedHolesInMembers) {
    Expansion x(parse(R"(model { target += sum(K+()); }
module "a" K() { return P(); }
module "b" K() { return 2; }
module "p" P() { return 1; }
module "q" P() { return 3; }
)"));
    auto g = x.graph();
    EXPECT_EQ(g.nodes.size(), 6u);
    for (const auto& id : g.node_ids()) EXPECT_EQ(texts(x.neighbors(parse_selection(id))), adjacency(g, id)) << id;
    expect_nodes_concretize(x, g);
    EXPECT_EQ(x.counts().nodes, "6");
}

TEST(Expansion, IdempotentOnCorePrograms) {
    for (const auto* name : {"mean_stddev.mstan", "golf.mstan", "birthday.mstan", "fields.mstan"}) {
        auto ast = parse(fixture_text(name));
        Expansion x(ast);
        EXPECT_FALSE(x.has_macros()) << name;
        EXPECT_EQ(x.full().program.ast(), ast) << name;
    }
}

TEST(Expansion, TranslationRoundTrip) {
    struct Case {
        const char* fixture;
        const char* spec;
    };
    for (const auto& c : {Case{"collection3.mstan", "Term:[quadratic,linear]"},
                          Case{"products.mstan", "Theta*Col:[(t,3),(t,1)],Theta*Col^C2:[]"},
                          Case{"instances.mstan", "Wind<<2>>:calm,Cloud:fixed,Wind<<1>>:gusty"},
                          Case{"regression.mstan", "FeatureTriplet:[(1,2,3)],Feature:[f[7],2],FeaturePair:[]"}}) {
        auto x = load(c.fixture);
        auto canonical_text = x.normalize(parse_selection(c.spec)).text();
        auto core = x.core_for(parse_selection(canonical_text));
        auto back = x.inverse(x.translate(parse_selection(canonical_text), core), core);
        EXPECT_EQ(back.text(), canonical_text) << c.fixture;
        EXPECT_EQ(x.normalize(parse_selection(canonical_text)).text(), canonical_text);
    }
    EXPECT_EQ(load("regression.mstan").normalize(parse_selection("Feature:[f[7],2]")).text(), "Feature:[2,7]");
}

TEST(Expansion, Errors) {
    EXPECT_EQ(code_of([] { Expansion(parse("model { target += K+() + K(); }\nmodule \"a\" K() { return {1}; }\n")); }),
              "MACRO_CONFLICT");
    EXPECT_EQ(code_of([] { Expansion(parse("model { target += K<1>+(); }\nmodule \"a\" K() { return 1; }\n")); }),
              "UNSUPPORTED_MACRO");
    auto x = load("regression.mstan");
    EXPECT_EQ(code_of([&] { x.normalize(parse_selection("Feature:[101]")); }), "INDEX_OUT_OF_RANGE");
    EXPECT_EQ(code_of([&] { x.normalize(parse_selection("FeaturePair:[(2,1)]")); }), "INDEX_OUT_OF_RANGE");
    EXPECT_EQ(code_of([&] { x.normalize(parse_selection("Feature:[g[1]]")); }), "UNKNOWN_MEMBER");
}

TEST(Expansion, SampleChecksEveryTemplate) {
    for (const auto* name : {"collection3.mstan", "products.mstan", "instances.mstan", "regression.mstan"}) {
        auto r = load(name).check();
        EXPECT_TRUE(r.ok()) << name << diagnostics_text(r.diagnostics);
    }
}
