#include "mstan/graphs.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mstan/errors.hpp"

namespace mstan {

bool GraphEdge::operator<(const GraphEdge& o) const {
    return std::tie(a, b, hole, impl_a, impl_b) < std::tie(o.a, o.b, o.hole, o.impl_a, o.impl_b);
}

std::vector<std::string> ModelGraphResult::node_ids() const {
    std::vector<std::string> out;
    out.reserve(nodes.size());
    for (const auto& n : nodes) out.push_back(canonical(n));
    return out;
}

namespace {

std::vector<int> order_of(const ModularProgram& p) {
    auto order = p.topo_order();
    if (!order) throw CompileError("CYCLE", "module dependency graph has a cycle");
    return *order;
}

std::vector<int> allowed(const ModularProgram& p, int h, const ImplMask& mask) {
    std::vector<int> out;
    for (int i : p.impls(h)) {
        if (mask.empty() || mask[i]) out.push_back(i);
    }
    return out;
}

GraphEdge make_edge(const Selection& x, const Selection& y, const std::string& hole) {
    GraphEdge e{canonical(x), canonical(y), hole, x.at(hole), y.at(hole)};
    if (e.b < e.a) {
        std::swap(e.a, e.b);
        std::swap(e.impl_a, e.impl_b);
    }
    return e;
}

ModelGraphResult finish(std::vector<Selection> nodes, std::vector<GraphEdge> edges) {
    std::vector<std::pair<std::string, Selection>> keyed;
    keyed.reserve(nodes.size());
    for (auto& n : nodes) keyed.emplace_back(canonical(n), std::move(n));
    std::sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first == y.first; }),
                keyed.end());
    ModelGraphResult g;
    for (auto& [key, sel] : keyed) g.nodes.push_back(std::move(sel));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    g.edges = std::move(edges);
    return g;
}

}  // namespace

ModelGraphResult naive_model_graph(const ModularProgram& p, std::size_t cap) {
    std::size_t n = p.hole_count();
    std::vector<std::vector<int>> choices(n);
    std::size_t total = 1;
    for (std::size_t h = 0; h < n; ++h) {
        choices[h] = p.impls(h);
        if (choices[h].empty()) throw CompileError("UNFILLED_HOLE", "hole " + p.hole_name(h) + " has no implementation");
        if (total > cap / choices[h].size() + 1) total = cap + 1;
        else total *= choices[h].size();
    }
    if (total > cap)
        throw CompileError("CAP_EXCEEDED", "more than " + std::to_string(cap) + " implementation combinations");

    std::set<std::string> seen;
    std::vector<Selection> nodes;
    std::vector<std::size_t> odometer(n, 0);
    for (;;) {
        // close: keep what is reachable from the base through the choices
        Selection sel;
        std::vector<int> stack(p.base_holes().begin(), p.base_holes().end());
        std::vector<bool> visited(n, false);
        while (!stack.empty()) {
            int h = stack.back();
            stack.pop_back();
            if (visited[h]) continue;
            visited[h] = true;
            int i = choices[h][odometer[h]];
            sel[p.hole_name(h)] = p.impl_name(i);
            for (int c : p.holes_of(i)) stack.push_back(c);
        }
        if (seen.insert(canonical(sel)).second) nodes.push_back(std::move(sel));
        std::size_t k = 0;
        while (k < n && ++odometer[k] == choices[k].size()) odometer[k++] = 0;
        if (k == n) break;
    }

    std::vector<GraphEdge> edges;
    for (std::size_t x = 0; x < nodes.size(); ++x) {
        for (std::size_t y = x + 1; y < nodes.size(); ++y) {
            auto sib = siblings(nodes[x], nodes[y]);
            if (sib.size() == 1) edges.push_back(make_edge(nodes[x], nodes[y], sib[0].hole));
        }
    }
    return finish(std::move(nodes), std::move(edges));
}

ModelGraphResult model_graph(const ModularProgram& p, const ImplMask& mask) {
    struct Prefix {
        std::vector<char> required;  // H
        std::vector<int> chosen;     // I, impl id per hole or -1
    };
    struct EdgePrefix {
        int a;
        int b;
        int hole;
    };
    std::size_t n = p.hole_count();
    std::vector<Prefix> nodes(1);
    nodes[0].required.assign(n, 0);
    nodes[0].chosen.assign(n, -1);
    for (int h : p.base_holes()) nodes[0].required[h] = 1;
    std::vector<EdgePrefix> edges;

    for (int h : order_of(p)) {
        auto impls = allowed(p, h, mask);
        std::vector<Prefix> next;
        std::vector<std::vector<int>> child(nodes.size());
        std::vector<EdgePrefix> next_edges;
        std::vector<char> req(nodes.size());
        for (std::size_t k = 0; k < nodes.size(); ++k) req[k] = nodes[k].required[h];
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            Prefix& node = nodes[k];
            if (!node.required[h]) {
                child[k].push_back(static_cast<int>(next.size()));
                next.push_back(std::move(node));
                continue;
            }
            for (int i : impls) {
                Prefix x = node;
                for (int c : p.holes_of(i)) x.required[c] = 1;
                x.chosen[h] = i;
                child[k].push_back(static_cast<int>(next.size()));
                next.push_back(std::move(x));
            }
            // new-edges: pairs of implementations of h
            for (std::size_t u = 0; u < child[k].size(); ++u) {
                for (std::size_t v = u + 1; v < child[k].size(); ++v) next_edges.push_back({child[k][u], child[k][v], h});
            }
        }
        // expand-edge
        for (const auto& e : edges) {
            const auto& ca = child[e.a];
            const auto& cb = child[e.b];
            if (ca.empty() || cb.empty()) continue;
            bool a_req = req[e.a];
            bool b_req = req[e.b];
            if (!a_req && !b_req) {
                next_edges.push_back({ca[0], cb[0], e.hole});
            } else if (a_req && !b_req) {
                for (int x : ca) next_edges.push_back({x, cb[0], e.hole});
            } else if (!a_req && b_req) {
                for (int y : cb) next_edges.push_back({ca[0], y, e.hole});
            } else {
                for (std::size_t k = 0; k < ca.size(); ++k) next_edges.push_back({ca[k], cb[k], e.hole});
            }
        }
        nodes = std::move(next);
        edges = std::move(next_edges);
    }

    std::vector<Selection> sels;
    sels.reserve(nodes.size());
    for (const auto& node : nodes) {
        Selection s;
        for (std::size_t h = 0; h < n; ++h) {
            if (node.chosen[h] >= 0) s[p.hole_name(h)] = p.impl_name(node.chosen[h]);
        }
        sels.push_back(std::move(s));
    }
    std::vector<GraphEdge> out;
    out.reserve(edges.size());
    for (const auto& e : edges) out.push_back(make_edge(sels[e.a], sels[e.b], p.hole_name(e.hole)));
    return finish(std::move(sels), std::move(out));
}

Selection NodeSet::at(std::size_t k) const {
    Selection s;
    for (int i : impls_at(k)) s[program_->impl(i).hole_name] = program_->impl_name(i);
    return s;
}

std::vector<int> NodeSet::impls_at(std::size_t k) const {
    std::vector<int> out;
    for (int link = leaves_[k]; link >= 0; link = links_[link].parent) out.push_back(links_[link].impl);
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<Selection> NodeSet::selections() const {
    std::vector<Selection> out;
    out.reserve(size());
    for (std::size_t k = 0; k < size(); ++k) out.push_back(at(k));
    std::sort(out.begin(), out.end(), [](const Selection& a, const Selection& b) { return canonical(a) < canonical(b); });
    return out;
}

NodeSet model_graph_nodes_only(const ModularProgram& p, const ImplMask& mask) {
    struct Prefix {
        int chain;
        std::vector<int> pending;  // topological positions of required, unvisited holes
    };
    NodeSet out;
    out.program_ = &p;
    auto order = order_of(p);
    std::vector<int> pos(p.hole_count());
    for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = static_cast<int>(k);
    std::vector<std::vector<int>> impl_pos(p.impl_count());
    for (std::size_t i = 0; i < p.impl_count(); ++i) {
        for (int c : p.holes_of(static_cast<int>(i))) impl_pos[i].push_back(pos[c]);
        std::sort(impl_pos[i].begin(), impl_pos[i].end());
    }

    std::vector<std::vector<Prefix>> buckets(order.size());
    Prefix root{-1, {}};
    for (int h : p.base_holes()) root.pending.push_back(pos[h]);
    std::sort(root.pending.begin(), root.pending.end());
    if (root.pending.empty()) out.leaves_.push_back(-1);
    else buckets[root.pending[0]].push_back(std::move(root));

    for (std::size_t j = 0; j < order.size(); ++j) {
        auto bucket = std::move(buckets[j]);
        if (bucket.empty()) continue;
        auto impls = allowed(p, order[j], mask);
        for (const auto& prefix : bucket) {
            for (int i : impls) {
                int link = static_cast<int>(out.links_.size());
                out.links_.push_back({prefix.chain, i});
                std::vector<int> pending;
                std::set_union(prefix.pending.begin() + 1, prefix.pending.end(), impl_pos[i].begin(),
                               impl_pos[i].end(), std::back_inserter(pending));
                if (pending.empty()) out.leaves_.push_back(link);
                else buckets[pending[0]].push_back({link, std::move(pending)});
            }
        }
    }
    return out;
}

ImplMask limit_mask(const ModularProgram& p, const Selection& sel) {
    ImplMask mask(p.impl_count(), true);
    for (const auto& [hole, impl] : sel) {
        int h = p.hole_id(hole);
        if (h < 0) continue;
        for (int i : p.impls(h)) mask[i] = p.impl_name(i) == impl;
    }
    return mask;
}

ModularProgram limit(const ModularProgram& p, const Selection& sel) {
    auto mask = limit_mask(p, sel);
    Ast ast = p.ast();
    ast.impls.clear();
    for (std::size_t i = 0; i < p.impl_count(); ++i) {
        if (mask[i]) ast.impls.push_back(p.impl(static_cast<int>(i)));
    }
    return ModularProgram(std::move(ast));
}

std::vector<Selection> model_neighbors(const ModularProgram& p, const Selection& sel) {
    auto report = valid_selection(p, sel);
    if (!report.valid) {
        std::vector<Diagnostic> ds;
        for (const auto& m : report.messages()) ds.push_back({"INVALID_SELECTION", {}, m});
        throw CompileError(std::move(ds));
    }
    std::map<std::string, Selection> found;
    for (const auto& [hole, impl] : sel) {
        int h = p.hole_id(hole);
        for (int other : p.impls(h)) {
            if (p.impl_name(other) == impl) continue;
            Selection moved = sel;
            moved[hole] = p.impl_name(other);
            auto nodes = model_graph_nodes_only(p, limit_mask(p, moved));
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                auto s = nodes.at(k);
                found.emplace(canonical(s), std::move(s));
            }
        }
    }
    std::vector<Selection> out;
    for (auto& [key, s] : found) out.push_back(std::move(s));
    return out;
}

std::string graph_json(const ModelGraphResult& g) {
    using nlohmann::ordered_json;
    ordered_json nodes = ordered_json::array();
    for (const auto& n : g.nodes) {
        ordered_json sel = ordered_json::array();
        for (const auto& [hole, impl] : n) sel.push_back({{"hole", hole}, {"impl", impl}});
        nodes.push_back({{"id", canonical(n)}, {"selection", sel}});
    }
    ordered_json edges = ordered_json::array();
    for (const auto& e : g.edges) {
        edges.push_back({{"a", e.a}, {"b", e.b}, {"hole", e.hole}, {"impls", {e.impl_a, e.impl_b}}});
    }
    return ordered_json{{"nodes", nodes}, {"edges", edges}}.dump();
}

ModelGraphResult graph_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ModelGraphResult g;
    for (const auto& n : j.at("nodes")) {
        Selection s;
        for (const auto& b : n.at("selection")) s[b.at("hole").get<std::string>()] = b.at("impl").get<std::string>();
        g.nodes.push_back(std::move(s));
    }
    for (const auto& e : j.at("edges")) {
        g.edges.push_back({e.at("a"), e.at("b"), e.at("hole"), e.at("impls").at(0), e.at("impls").at(1)});
    }
    return g;
}

std::string graph_dot(const ModelGraphResult& g) {
    auto quote = [](const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        return out + "\"";
    };
    std::ostringstream out;
    out << "graph models {\n";
    for (const auto& n : g.nodes) out << "  " << quote(canonical(n)) << ";\n";
    for (const auto& e : g.edges) {
        out << "  " << quote(e.a) << " -- " << quote(e.b) << " [label=" << quote(e.hole + ": " + e.impl_a + "/" + e.impl_b)
            << "];\n";
    }
    out << "}\n";
    return out.str();
}

std::string random_program(std::uint64_t seed, int max_holes, int max_impls) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    int k = 1 + pick(max_holes);
    auto name = [](int h) { return "H" + std::to_string(h); };
    auto calls = [&](int from) {
        // one or two distinct holes with index >= from
        int first = from + pick(k - from);
        std::string text = name(first) + "()";
        if (pick(2) && first + 1 < k) text += " + " + name(first + 1 + pick(k - first - 1)) + "()";
        return text;
    };
    std::ostringstream out;
    out << "model {\n  target += " << calls(0) << ";\n}\n";
    for (int h = 0; h < k; ++h) {
        int n = 1 + pick(max_impls);
        for (int i = 0; i < n; ++i) {
            out << "\nmodule \"i" << i << "\" " << name(h) << "() {\n  return ";
            if (h + 1 >= k || pick(3) == 0) out << pick(10);
            else out << calls(h + 1);
            out << ";\n}\n";
        }
    }
    return out.str();
}

std::string tall_chain(int depth) {
    auto name = [](int k) {
        std::string digits = std::to_string(k);
        return "Chain" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
    };
    std::ostringstream out;
    out << "model {\n  target += " << name(0) << "();\n}\n";
    for (int k = 0; k < depth; ++k) {
        out << "\nmodule \"stop\" " << name(k) << "() {\n  return 0;\n}\n";
        out << "\nmodule \"go\" " << name(k) << "() {\n  return " << (k + 1 < depth ? name(k + 1) + "()" : "1")
            << ";\n}\n";
    }
    return out.str();
}

}  // namespace mstan
