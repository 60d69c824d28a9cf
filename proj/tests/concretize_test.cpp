#include <gtest/gtest.h>

#include <algorithm>

#include "mstan/checks.hpp"
#include "mstan/concretize.hpp"
#include "mstan/errors.hpp"
#include "mstan/parser.hpp"
#include "mstan/render.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

ModularProgram load(const std::string& name) { return ModularProgram(parse(fixture_text(name))); }

std::string canon(const std::string& text) { return render(parse(text)); }

std::string block_text(const Ast& ast, BlockKind kind) {
    Ast only;
    if (const Block* b = ast.find_block(kind)) only.base.push_back(*b);
    return render(only);
}

}  // namespace

TEST(Concretize, MeanStddevGolden) {
    auto p = load("mean_stddev.mstan");
    auto out = concretize(p, {{"Mean", "normal"}, {"Stddev", "lognormal"}, {"StddevInformative", "yes"}});
    EXPECT_EQ(out, canon(fixture_text("golden/mean_stddev_normal_lognormal_yes.stan")));
}

TEST(Concretize, GolfGolden) {
    auto p = load("golf.mstan");
    auto out = concretize(p, {{"NSuccesses", "binomial"}, {"PSuccess", "logistic"}});
    EXPECT_EQ(out, canon(fixture_text("golden/golf_binomial_logistic.stan")));
}

TEST(Concretize, StandardSelectionInlinesLiterals) {
    auto p = load("mean_stddev.mstan");
    auto ast = concretize_ast(p, {{"Mean", "standard"}, {"Stddev", "standard"}});
    EXPECT_EQ(block_text(ast, BlockKind::Model), "model {\n  x ~ normal(0, 1);\n}\n");
    EXPECT_EQ(ast.find_block(BlockKind::Parameters), nullptr);
}

TEST(Concretize, InlineFunctionExamples) {
    Ast ast = parse("model { target += H(2 + 3); }\nmodule \"a\" H(real a) { real y = a; return y; }\n");
    Expr& site = ast.base[0].stmts[0].exprs[0];
    const auto& f = ast.impls[0].fields[0];
    inline_function(site, "H", f.body, f.params, f.ret);
    ast.impls.clear();
    EXPECT_EQ(render(lower(ast)), "model {\n  real y_H = 2 + 3;\n  target += y_H;\n}\n");

    Ast bare = parse("model { target += Mean(); }\nmodule \"s\" Mean() { return 0; }\n");
    const auto& g = bare.impls[0].fields[0];
    inline_function(bare.base[0].stmts[0].exprs[0], "Mean", g.body, g.params, g.ret);
    bare.impls.clear();
    EXPECT_EQ(render(lower(bare)), "model {\n  target += 0;\n}\n");
}

TEST(Concretize, RepeatedSitesGetFreshLocals) {
    auto p = ModularProgram(parse(R"(model { target += H(1) + H(2); }
module "a" H(real a) { real t = a * 2; return t; }
)"));
    auto out = concretize(p, {{"H", "a"}});
    EXPECT_NE(out.find("real t_H = 1 * 2;"), std::string::npos) << out;
    EXPECT_NE(out.find("real t_H_2 = 2 * 2;"), std::string::npos) << out;
    EXPECT_NE(out.find("target += t_H + t_H_2;"), std::string::npos) << out;
}

TEST(Concretize, ApplyImplInlinesAndAppends) {
    auto p = load("mean_stddev.mstan");
    auto applied = apply_impl(p, p.find_impl("Mean", "normal"));
    EXPECT_EQ(applied.find_impl("Mean", "normal"), -1);
    Ast ast = lower(applied.ast());
    EXPECT_EQ(block_text(ast, BlockKind::Parameters), "parameters {\n  real mu;\n}\n");
    auto model = block_text(ast, BlockKind::Model);
    EXPECT_LT(model.find("mu ~ normal(0, 1);"), model.find("x ~ normal(mu, Stddev());")) << model;

    auto none = apply_impl(ModularProgram(parse("model { target += 1; }\nmodule \"a\" H() { return 1; }\n")), 0);
    EXPECT_EQ(none.impl_count(), 0u);
    EXPECT_EQ(render(none.ast()), "model {\n  target += 1;\n}\n");
}

TEST(Concretize, ApplyImplsIsOrderIndependent) {
    auto p = load("mean_stddev.mstan");
    int a = p.find_impl("Stddev", "lognormal");
    int b = p.find_impl("StddevInformative", "yes");
    int c = p.find_impl("Mean", "normal");
    std::vector<int> ids{a, b, c};
    std::sort(ids.begin(), ids.end());
    std::string reference;
    do {
        auto out = apply_impls(p, ids);
        EXPECT_TRUE(out.base_holes().empty());
        Ast ast = out.ast();
        ast.impls.clear();
        auto text = render(lower(ast));
        if (reference.empty()) reference = text;
        EXPECT_EQ(text, reference);
    } while (std::next_permutation(ids.begin(), ids.end()));
}

TEST(Concretize, InvalidSelectionReportsViolations) {
    auto p = load("mean_stddev.mstan");
    try {
        concretize(p, {{"Mean", "normal"}, {"Stddev", "lognormal"}});
        FAIL() << "expected INVALID_SELECTION";
    } catch (const CompileError& e) {
        EXPECT_EQ(e.code(), "INVALID_SELECTION");
        EXPECT_NE(std::string(e.diagnostics()[0].message).find("StddevInformative"), std::string::npos);
    }
}

TEST(Concretize, SharedParametersAppendedOnce) {
    auto p = ModularProgram(parse(R"(model { target += A() + B(); }
module "a" A() { return S(); }
module "b" B() { return S(); }
module "s" S() { parameters { real shared; } return shared; }
)"));
    auto ast = concretize_ast(p, {{"A", "a"}, {"B", "b"}, {"S", "s"}});
    EXPECT_EQ(block_text(ast, BlockKind::Parameters), "parameters {\n  real shared;\n}\n");
    EXPECT_EQ(block_text(ast, BlockKind::Model), "model {\n  target += shared + shared;\n}\n");
}

TEST(Concretize, FieldsShareTheirImplementation) {
    auto p = load("fields.mstan");
    auto r = check_program(p);
    ASSERT_TRUE(r.ok()) << diagnostics_text(r.diagnostics);
    for (int i : p.impls(p.hole_id("Transformation"))) {
        Selection sel{{"Transformation", p.impl_name(i)}};
        auto text = concretize(p, sel);
        auto again = ModularProgram(parse(text));
        EXPECT_EQ(again.hole_count(), 0u);
        EXPECT_TRUE(check_program(again).ok()) << text;
    }
}

TEST(Concretize, GolfAngleSuccessIsValid) {
    auto p = load("golf.mstan");
    auto text = concretize(p, {{"NSuccesses", "binomial"}, {"PSuccess", "angle_success"}});
    auto again = ModularProgram(parse(text));
    auto r = check_program(again);
    EXPECT_TRUE(r.ok()) << text << diagnostics_text(r.diagnostics);
    EXPECT_NE(text.find("real r_PSuccess"), std::string::npos) << text;
}
