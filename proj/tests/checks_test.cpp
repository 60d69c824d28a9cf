#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mstan/checks.hpp"
#include "mstan/parser.hpp"
#include "test_util.hpp"

using namespace mstan;
using mstan::test::fixture_text;

namespace {

CheckResult check(const std::string& src) { return check_program(ModularProgram(parse(src))); }

bool has_code(const std::vector<Diagnostic>& ds, const std::string& code) {
    return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic& d) { return d.code == code; });
}

const char* kCorpus[] = {"mean_stddev.mstan", "golf.mstan", "regression.mstan", "collection3.mstan",
                         "birthday.mstan", "products.mstan", "fields.mstan", "instances.mstan"};

}  // namespace

TEST(Checks, MeanStddevSignatures) {
    auto r = check(fixture_text("mean_stddev.mstan"));
    ASSERT_TRUE(r.ok()) << diagnostics_text(r.diagnostics);
    const auto& mean = r.signatures.at("Mean");
    ASSERT_TRUE(mean.field(""));
    EXPECT_TRUE(mean.field("")->args.empty());
    EXPECT_EQ(mean.field("")->ret, Type::of(Type::Base::Real));
    EXPECT_EQ(mean.effects, unsigned(kEffectLpdf));
    EXPECT_EQ(mean.scope, (std::set<BlockKind>{BlockKind::Parameters}));

    const auto& info = r.signatures.at("StddevInformative");
    EXPECT_EQ(info.field("")->ret, Type::of(Type::Base::Int));
    EXPECT_EQ(info.effects, 0u);
    EXPECT_TRUE(info.scope.empty());

    EXPECT_EQ(r.signatures.at("Stddev").effects, unsigned(kEffectLpdf));
}

TEST(Checks, StructuralErrors) {
    auto cyc = check(R"(model { target += A(); }
module "a" A() { return B(); }
module "b" B() { return A(); }
)");
    EXPECT_TRUE(has_code(cyc.diagnostics, "CYCLE"));

    auto unfilled = check("model { target += Missing(); }\nmodule \"x\" Other() { return 1; }\n");
    ASSERT_TRUE(has_code(unfilled.diagnostics, "UNFILLED_HOLE"));
    EXPECT_EQ(unfilled.diagnostics[0].span.line, 1);

    auto dup = check("model { target += A(); }\nmodule \"a\" A() { return 1; }\nmodule \"a\" A() { return 2; }\n");
    EXPECT_TRUE(has_code(dup.diagnostics, "DUP_IMPL"));
}

TEST(Checks, ArgumentAndReturnMismatch) {
    auto args = check(R"(data { vector[3] x; }
model { x ~ normal(Loc(x), 1); }
module "a" Loc(vector v) { return mean(v); }
module "b" Loc(vector v, real w) { return w; }
)");
    EXPECT_TRUE(has_code(args.diagnostics, "ARGTYPE_MISMATCH"));

    auto site = check(R"(model { target += Loc("s"); }
module "a" Loc(real v) { return v; }
)");
    EXPECT_TRUE(has_code(site.diagnostics, "ARGTYPE_MISMATCH"));

    auto ret = check(R"(data { vector[3] x; }
model { target += Loc(); }
module "a" Loc() { return 1.0; }
module "b" Loc() { return x; }
)");
    EXPECT_TRUE(has_code(ret.diagnostics, "RETTYPE_MISMATCH"));
}

TEST(Checks, EffectsAndScope) {
    auto effect = check(R"(transformed data { real z = Draw(); }
module "a" Draw() { return normal_rng(0, 1); }
)");
    EXPECT_TRUE(has_code(effect.diagnostics, "EFFECT_NOT_ALLOWED"));

    auto lpdf = check(R"(generated quantities { real z = Prior(); }
module "a" Prior() { parameters { real mu; } mu ~ normal(0, 1); return mu; }
)");
    EXPECT_TRUE(has_code(lpdf.diagnostics, "EFFECT_NOT_ALLOWED"));

    auto scope = check(R"(data { real y; }
transformed data { real z = Uses(); }
module "a" Uses() { parameters { real mu; } return mu; }
)");
    EXPECT_TRUE(has_code(scope.diagnostics, "SCOPE_NOT_ALLOWED"));

    auto ok = check(R"(data { real y; }
transformed data { real z = Uses(); }
module "a" Uses() { return y; }
)");
    EXPECT_TRUE(ok.ok()) << diagnostics_text(ok.diagnostics);
}

TEST(Checks, TypeErrors) {
    EXPECT_TRUE(has_code(check("model { target += undefined_thing; }").diagnostics, "TYPE_ERROR"));
    EXPECT_TRUE(has_code(check("model { target += nosuchfn(1); }").diagnostics, "TYPE_ERROR"));
    EXPECT_TRUE(has_code(check("data { real y; } model { y ~ nosuchdist(1); }").diagnostics, "TYPE_ERROR"));
    EXPECT_TRUE(has_code(check("model { target += V(); }\nmodule \"a\" V() { print(1); }\n").diagnostics,
                         "TYPE_ERROR"));
}

TEST(Checks, CorpusIsValid) {
    for (const char* name : kCorpus) {
        auto r = check(fixture_text(name));
        // macro fixtures are checked after expansion
        if (std::string(name) == "mean_stddev.mstan" || std::string(name) == "golf.mstan" ||
            std::string(name) == "birthday.mstan" || std::string(name) == "fields.mstan")
            EXPECT_TRUE(r.ok()) << name << "\n" << diagnostics_text(r.diagnostics);
    }
}

TEST(Checks, SignaturesIndependentOfTopologicalOrder) {
    std::mt19937 rng(7);
    for (const char* name : {"mean_stddev.mstan", "golf.mstan", "birthday.mstan"}) {
        ModularProgram p(parse(fixture_text(name)));
        auto reference = infer_signatures(p).signatures;
        auto order = *p.topo_order();
        // any linear extension: repeatedly pick a random ready hole
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<int> indeg(p.hole_count(), 0);
            std::vector<std::vector<int>> kids(p.hole_count());
            for (std::size_t h = 0; h < p.hole_count(); ++h) {
                std::set<int> cs;
                for (int i : p.impls(h)) cs.insert(p.holes_of(i).begin(), p.holes_of(i).end());
                for (int c : cs) {
                    kids[h].push_back(c);
                    ++indeg[c];
                }
            }
            std::vector<int> ready, out;
            for (std::size_t h = 0; h < p.hole_count(); ++h)
                if (!indeg[h]) ready.push_back(static_cast<int>(h));
            while (!ready.empty()) {
                std::size_t k = rng() % ready.size();
                int h = ready[k];
                ready.erase(ready.begin() + k);
                out.push_back(h);
                for (int c : kids[h])
                    if (--indeg[c] == 0) ready.push_back(c);
            }
            ASSERT_EQ(out.size(), order.size());
            EXPECT_EQ(infer_signatures(p, &out).signatures, reference) << name;
        }
    }
}

TEST(Checks, DiagnosticsJsonShape) {
    auto r = check("model { target += Missing(); }");
    auto text = diagnostics_json(r.diagnostics);
    EXPECT_NE(text.find("\"code\":\"UNFILLED_HOLE\""), std::string::npos);
    EXPECT_NE(text.find("\"span\":{\"line\":1"), std::string::npos);
}
