#include <gtest/gtest.h>

#include "mstan/errors.hpp"
#include "mstan/parser.hpp"
#include "mstan/render.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

std::vector<const Expr*> hole_calls(const Ast& ast) {
    std::vector<const Expr*> out;
    auto collect = [&](const Expr& e) {
        if (e.kind == Expr::Kind::Hole) out.push_back(&e);
    };
    auto stmts = [&](const std::vector<Stmt>& ss) {
        for (const auto& s : ss) visit_exprs(s, collect);
    };
    for (const auto& b : ast.base) stmts(b.stmts);
    for (const auto& impl : ast.impls) {
        for (const auto& [kind, ss] : impl.append) stmts(ss);
        for (const auto& f : impl.fields) {
            stmts(f.body);
            if (f.ret) visit_exprs(*f.ret, collect);
        }
    }
    return out;
}

std::string substring_at(const std::string& text, Span span) {
    std::size_t offset = 0;
    for (int line = 1; line < span.line; ++line) offset = text.find('\n', offset) + 1;
    return text.substr(offset + span.col - 1, span.len);
}

const char* kCorpus[] = {"mean_stddev.mstan", "golf.mstan", "regression.mstan", "collection3.mstan",
                         "birthday.mstan", "products.mstan", "fields.mstan", "instances.mstan"};

}  // namespace

TEST(Parse, MeanStddevStructure) {
    Ast ast = parse(fixture_text("mean_stddev.mstan"));
    ASSERT_EQ(ast.base.size(), 2u);
    EXPECT_EQ(ast.base[0].kind, BlockKind::Data);
    EXPECT_EQ(ast.base[1].kind, BlockKind::Model);
    EXPECT_EQ(ast.impls.size(), 6u);
    std::set<std::string> names;
    for (const auto* h : hole_calls(ast)) names.insert(h->hole->name());
    EXPECT_EQ(names, (std::set<std::string>{"Mean", "Stddev", "StddevInformative"}));
}

TEST(Parse, PlainProgramHasNoImplementations) {
    Ast ast = parse("data { int N; } model { N ~ poisson(3); }");
    EXPECT_TRUE(ast.impls.empty());
    EXPECT_EQ(render(ast).find("module"), std::string::npos);
}

TEST(Parse, RegressionCollectionDecoration) {
    Ast ast = parse(fixture_text("regression.mstan"));
    auto holes = hole_calls(ast);
    ASSERT_FALSE(holes.empty());
    const HoleRef& ref = *holes[0]->hole;
    EXPECT_EQ(ref.name(), "Feature");
    EXPECT_TRUE(ref.collection);
    ASSERT_TRUE(ref.operands[0].indexed);
    EXPECT_EQ(render_hole_ref(ref), "Feature[1..100]+");
}

TEST(Parse, TildeIntoHoleKeepsLhsAsFirstArgument) {
    Ast ast = parse(fixture_text("golf.mstan"));
    const Stmt& s = ast.base[1].stmts[0];
    ASSERT_EQ(s.kind, Stmt::Kind::ExprStmt);
    EXPECT_TRUE(s.exprs[0].lhs_arg);
    EXPECT_EQ(render_stmt(s), "y ~ NSuccesses(n, PSuccess(x));\n");
    EXPECT_TRUE(ast.impls[0].main_field().lhs_param);
}

TEST(Parse, UppercaseBuiltinIsNotAHole) {
    Ast ast = parse("model { target += Phi(1.0); }");
    EXPECT_TRUE(hole_calls(ast).empty());
}

TEST(Render, ModelBlockOfMeanStddev) {
    std::string text = render(parse(fixture_text("mean_stddev.mstan")));
    EXPECT_NE(text.find("x ~ normal(Mean(), Stddev());"), std::string::npos);
}

TEST(Render, PrecedenceIsPreserved) {
    for (std::string src : {"a - (b - c)", "(a + b) * c", "-(a ^ 2)", "(-a) ^ 2", "a ^ b ^ c",
                            "(a ^ b) ^ c", "(a ? b : c) + 1", "x[1, :]'", "(a + b)'",
                            "a .* b ./ (c * d)", "!(a && b) || c"}) {
        Ast ast = parse("model { z = " + src + "; }");
        std::string once = render(ast);
        EXPECT_EQ(parse(once), ast) << src << " -> " << once;
    }
}

TEST(Render, RoundTripOnCorpus) {
    for (const char* name : kCorpus) {
        Ast ast = parse(fixture_text(name));
        std::string once = render(ast);
        Ast again = parse(once);
        EXPECT_EQ(again, ast) << name;
        EXPECT_EQ(render(again), once) << name;
    }
}

TEST(Parse, HoleSpansCoverTheirText) {
    for (const char* name : kCorpus) {
        std::string text = fixture_text(name);
        Ast ast = parse(text);
        for (const Expr* h : hole_calls(ast)) {
            if (h->lhs_arg) continue;
            std::string sub = substring_at(text, h->span);
            std::string decls;
            for (const auto& op : h->hole->operands)
                decls += " module \"d\" " + op.name + "() { return 0; }";
            Ast probe = parse("model { z = " + sub + "; }" + decls);
            ASSERT_EQ(probe.base[0].stmts[0].exprs[1].kind, Expr::Kind::Hole) << name << ": " << sub;
            Expr copy = probe.base[0].stmts[0].exprs[1];
            EXPECT_EQ(render_expr(copy), render_expr(*h)) << name;
        }
    }
}

TEST(Parse, MutationsAreRejected) {
    const std::string good = fixture_text("mean_stddev.mstan");
    ASSERT_NO_THROW(parse(good));
    std::vector<std::string> bad = {
        "data { int N; ",                                      // dropped brace
        "model { } data { int N; }",                           // block order
        "data { int N; } data { int M; }",                     // repeated block
        "modle { }",                                           // unknown block
        "transformed stuff { }",                               // unknown block
        "model { z = H[3..1](); }",                            // empty range
        "model { z = H[1..](); }",                             // malformed range
        "model { z = H[(1..3)^Q2](); }",                       // malformed exponent
        "module Mean() { return 0; }",                         // missing impl name
        "module \"a\" () { return 0; }",                       // missing hole name
        "module \"a\" H() { return 0; return 1; }",            // two returns
        "module \"a\" H() { return 0; z = 1; }",               // return not last
        "module \"a\" H { }",                                  // no fields
        "module \"a\" H { field f() { return 1; } field f() { return 2; } }",
        "module \"a\" H { field () { return 1; } field g() { return 2; } }",
        "data { real x = 1; model { } }",
        "parameters { x ~ normal(0, 1); }",                    // statement in parameters
        "model { x ~ normal(0, 1) }",                          // missing semicolon
        "module \"a\" H() { data { int K; } return 0; }",      // data append
    };
    for (const auto& src : bad) {
        EXPECT_THROW(parse(src), ParseError) << src;
    }
}

TEST(Parse, ErrorCarriesLocationAndExpectations) {
    try {
        parse("data {\n  int N\n}");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.span().line, 3);
        EXPECT_FALSE(e.expected().empty());
    }
}

TEST(Selection, ParsesPlainBindings) {
    auto spec = parse_selection("Mean:normal,Stddev:lognormal,StddevInformative:yes");
    ASSERT_EQ(spec.bindings.size(), 3u);
    EXPECT_EQ(spec.bindings[1].hole, "Stddev");
    EXPECT_EQ(spec.bindings[1].impl.name, "lognormal");
}

TEST(Selection, ParsesMacroPayloads) {
    auto spec = parse_selection(" Feature : [1, 2, 3] , h<<1>>:i, Theta*Col:[(t,1),(t, 2)], g:i[5]");
    ASSERT_EQ(spec.bindings.size(), 4u);
    EXPECT_TRUE(spec.bindings[0].impl.subset);
    EXPECT_EQ(spec.bindings[0].impl.members, (std::vector<std::string>{"1", "2", "3"}));
    EXPECT_EQ(spec.bindings[1].hole, "h<<1>>");
    EXPECT_EQ(spec.bindings[2].hole, "Theta*Col");
    EXPECT_EQ(spec.bindings[2].impl.members, (std::vector<std::string>{"(t,1)", "(t,2)"}));
    EXPECT_EQ(spec.bindings[3].impl.name, "i[5]");
}

TEST(Selection, EmptyAndErrors) {
    EXPECT_TRUE(parse_selection("").bindings.empty());
    EXPECT_TRUE(parse_selection("   ").bindings.empty());
    EXPECT_THROW(parse_selection("Mean:normal,Mean:standard"), ParseError);
    EXPECT_THROW(parse_selection("Mean"), ParseError);
    EXPECT_THROW(parse_selection("Mean:"), ParseError);
    EXPECT_THROW(parse_selection("Mean:[a,b"), ParseError);
}

TEST(Selection, CanonicalRoundTrip) {
    Selection sel{{"b", "x"}, {"a", "y"}};
    EXPECT_EQ(canonical(sel), "a:y,b:x");
    EXPECT_EQ(parse_core_selection(canonical(sel)), sel);
    EXPECT_EQ(canonical(parse_core_selection("FeaturePair_fp[1,2]:yes,merge:m")),
              "FeaturePair_fp[1,2]:yes,merge:m");
}
