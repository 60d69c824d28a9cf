#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "mstan/checks.hpp"
#include "mstan/concretize.hpp"
#include "mstan/graphs.hpp"
#include "mstan/macros.hpp"
#include "mstan/parser.hpp"
#include "mstan/render.hpp"
#include "mstan/search.hpp"

using namespace mstan;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fixture(const std::string& name) { return read_source(std::string(MSTAN_FIXTURES) + "/" + name).text; }

// Thrown by a criterion to report why it failed.
struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class... T>
void require(bool ok, const T&... what) {
    if (ok) return;
    std::ostringstream out;
    (out << ... << what);
    throw Failure(out.str());
}

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

std::string fixed(double v, int digits = 3) {
    std::ostringstream out;
    out.precision(digits);
    out << std::fixed << v;
    return out.str();
}

std::string mean_stddev_graph() {
    ModularProgram p(parse(fixture("mean_stddev.mstan")));
    auto t0 = Clock::now();
    ModelGraphResult oracle = naive_model_graph(p);
    require(oracle.nodes.size() == 6 && oracle.edges.size() == 9, "oracle found ", oracle.nodes.size(), " nodes, ",
            oracle.edges.size(), " edges");
    ModelGraphResult g = model_graph(p);
    double secs = seconds_since(t0);
    require(g == oracle, "model_graph differs from the oracle");
    require(secs < 1.0, "took ", secs, " s");
    return "6 nodes, 9 edges, oracle agrees, " + fixed(secs) + " s";
}

std::string goldens() {
    ModularProgram small(parse(fixture("mean_stddev.mstan")));
    std::string a = concretize(small, {{"Mean", "normal"}, {"Stddev", "lognormal"}, {"StddevInformative", "yes"}});
    require(a == render(parse(fixture("golden/mean_stddev_normal_lognormal_yes.stan"))), "mean-stddev program differs:\n", a);
    require(a.find("sigma ~ lognormal(0, 1);") != std::string::npos, "missing sigma prior");

    ModularProgram golf(parse(fixture("golf.mstan")));
    std::string b = concretize(golf, {{"NSuccesses", "binomial"}, {"PSuccess", "logistic"}});
    require(b == render(parse(fixture("golden/golf_binomial_logistic.stan"))), "golf program differs:\n", b);
    require(b.find("y ~ binomial(n, logit(a + b * x));") != std::string::npos, "missing golf likelihood");
    return "2 programs match";
}

std::string oracle_equivalence() {
    auto t0 = Clock::now();
    std::size_t programs = 0, nodes = 0;
    for (std::uint64_t seed = 1; programs < 250; ++seed) {
        ModularProgram p(parse(random_program(seed)));
        ModelGraphResult naive = naive_model_graph(p);
        ModelGraphResult g = model_graph(p);
        require(g == naive, "graph mismatch for seed ", seed);
        for (const auto& n : g.nodes) {
            require(ids(model_neighbors(p, n)) == adjacency(g, canonical(n)), "neighbor mismatch for seed ", seed,
                    " at ", canonical(n));
        }
        ++programs;
        nodes += g.nodes.size();
    }
    double secs = seconds_since(t0);
    require(secs < 60.0, "took ", secs, " s");
    return std::to_string(programs) + " programs, " + std::to_string(nodes) + " nodes, 0 mismatches, " + fixed(secs) +
           " s";
}

std::string birthday() {
    Expansion x(parse(fixture("birthday.mstan")));
    ModularProgram p(x.user());
    auto t0 = Clock::now();
    NodeSet ns = model_graph_nodes_only(p);
    ModelGraphResult g = model_graph(p);
    double secs = seconds_since(t0);
    require(ns.size() == 120 && g.nodes.size() == 120, "found ", ns.size(), " / ", g.nodes.size(), " nodes");
    require(secs < 5.0, "took ", secs, " s");

    std::mutex mu;
    std::map<std::string, int> calls;
    Scorer scorer([&](const std::string& sel, const std::string& program) {
        std::lock_guard<std::mutex> lock(mu);
        ++calls[sel];
        return parameter_count(program);
    });
    SearchTrace t = greedy_search(x, default_start(x), scorer, 4);
    require(!t.error, "search failed: ", t.error.value_or(""));
    require(t.evaluations <= g.nodes.size(), t.evaluations, " evaluations");
    require(t.visited.size() == calls.size(), "visited ", t.visited.size(), ", scored ", calls.size());
    for (const auto& v : t.visited) require(calls[v.selection] == 1, v.selection, " scored ", calls[v.selection], " times");
    double best = *scorer.cached(t.result);
    for (const auto& n : adjacency(g, t.result)) {
        auto v = scorer.cached(n);
        require(v.has_value(), "neighbor ", n, " not scored");
        require(*v <= best, "neighbor ", n, " scores higher");
    }
    return "120 nodes in " + fixed(secs) + " s; search ends at a local optimum after " +
           std::to_string(t.evaluations) + " evaluations";
}

std::string regression() {
    Expansion x(parse(fixture("regression.mstan")));
    MacroCounts c = x.counts();
    require(c.collection_members == 166750, "member count ", c.collection_members.str());
    double worst = 0;
    std::size_t most = 0;
    for (const char* sel : {"Feature:[],FeaturePair:[],FeatureTriplet:[]",
                            "Feature:[1,2,3],FeaturePair:[(1,2)],FeatureTriplet:[]",
                            "Feature:[5,50,100],FeaturePair:[(1,100),(2,3)],FeatureTriplet:[(1,2,3),(98,99,100)]"}) {
        std::size_t before = x.instantiations();
        auto t0 = Clock::now();
        auto ns = x.neighbors(parse_selection(sel));
        double secs = seconds_since(t0);
        std::size_t made = x.instantiations() - before;
        require(ns.size() == 166750, sel, ": ", ns.size(), " neighbors");
        require(secs < 2.0, sel, ": ", secs, " s");
        require(made < 1000, sel, ": ", made, " modules instantiated");
        worst = std::max(worst, secs);
        most = std::max(most, made);
    }
    return "166750 members; neighbors in <= " + fixed(worst) + " s with <= " + std::to_string(most) +
           " instantiations";
}

std::string scaling() {
    {
        ModularProgram small(parse(tall_chain(8)));
        require(model_graph(small) == naive_model_graph(small), "oracle disagrees at D = 8");
    }
    std::vector<double> times;
    for (int d : {100, 400, 1600}) {
        ModularProgram p(parse(tall_chain(d)));
        double best = 1e9;
        for (int run = 0; run < 5; ++run) {
            auto t0 = Clock::now();
            NodeSet ns = model_graph_nodes_only(p);
            best = std::min(best, seconds_since(t0));
            require(ns.size() == static_cast<std::size_t>(d + 1), "D = ", d, ": ", ns.size(), " nodes");
        }
        times.push_back(std::max(best, 1e-6));
    }
    double r1 = times[1] / times[0], r2 = times[2] / times[1];
    require(r1 <= 8 && r2 <= 8, "ratios ", r1, ", ", r2);
    return "D+1 nodes; ratios " + fixed(r1, 2) + ", " + fixed(r2, 2);
}

void require_valid_program(const std::string& text, const std::string& where) {
    ModularProgram p(parse(text));
    require(p.hole_count() == 0 && p.sites().empty(), where, ": holes remain");
    require(p.impl_count() == 0, where, ": implementations remain");
    CheckResult r = check_program(p);
    require(r.ok(), where, ": ", diagnostics_text(r.diagnostics));
}

std::string concretize_validity() {
    std::size_t programs = 0, fixtures = 0;
    std::vector<std::string> skipped;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(MSTAN_FIXTURES)) {
        if (e.path().extension() == ".mstan") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::string name = f.filename().string();
        Expansion x(parse(read_source(f.string()).text));
        std::string count = x.counts().nodes;
        if (count.size() > 4 || std::stoul(count) > 5000) {
            skipped.push_back(name);
            continue;
        }
        ModelGraphResult g = x.graph();
        for (const auto& id : g.node_ids()) {
            require_valid_program(x.concretize(parse_selection(id)), name + " " + id);
            ++programs;
        }
        ++fixtures;
    }
    std::string out = std::to_string(programs) + " programs from " + std::to_string(fixtures) + " fixtures";
    for (const auto& s : skipped) out += "; " + s + " above the cap";
    return out;
}

std::set<std::string> members(const std::string& set) {
    SelectionSpec spec = parse_selection("K:" + set);
    const auto& ms = spec.bindings.front().impl.members;
    return {ms.begin(), ms.end()};
}

std::string cube() {
    Expansion x(parse(fixture("collection3.mstan")));
    require(x.collection_keys().size() == 1, "expected one collection");
    ModelGraphResult g = x.graph();
    require(g.nodes.size() == 8 && g.edges.size() == 12, g.nodes.size(), " nodes, ", g.edges.size(), " edges");
    for (const auto& e : g.edges) {
        auto a = members(e.impl_a), b = members(e.impl_b);
        std::vector<std::string> diff;
        std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
        require(diff.size() == 1, e.a, " -- ", e.b, " differ in ", diff.size(), " members");
    }
    return "8 nodes, 12 edges, each one inclusion apart";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
        {"mean-stddev-model-graph", mean_stddev_graph},
        {"concretization-goldens", goldens},
        {"oracle-equivalence", oracle_equivalence},
        {"birthday-scale", birthday},
        {"macro-arithmetic", regression},
        {"tall-chain-scaling", scaling},
        {"concretize-validity", concretize_validity},
        {"collection-cube", cube},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        try {
            std::string detail = check();
            std::cout << "PASS " << name << ": " << detail << std::endl;
        } catch (const std::exception& e) {
            ++failed;
            std::cout << "FAIL " << name << ": " << e.what() << std::endl;
        }
    }
    return failed == 0 ? 0 : 1;
}
