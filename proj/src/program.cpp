#include "mstan/program.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mstan {

void collect_holes(const Expr& e, std::vector<std::string>& out) {
    visit_exprs(e, [&](const Expr& x) {
        if (x.kind == Expr::Kind::Hole) out.push_back(x.hole->name());
    });
}

void collect_holes(const std::vector<Stmt>& stmts, std::vector<std::string>& out) {
    for (const auto& s : stmts) {
        visit_exprs(s, [&](const Expr& x) {
            if (x.kind == Expr::Kind::Hole) out.push_back(x.hole->name());
        });
    }
}

namespace {

std::vector<std::string> impl_hole_names(const ImplDecl& impl) {
    std::vector<std::string> names;
    for (const auto& [kind, stmts] : impl.append) collect_holes(stmts, names);
    for (const auto& f : impl.fields) {
        collect_holes(f.body, names);
        if (f.ret) collect_holes(*f.ret, names);
    }
    return names;
}

void sort_unique(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

ModularProgram::ModularProgram(Ast ast) : ast_(std::move(ast)) {
    std::vector<std::string> base_names;
    for (const auto& b : ast_.base) collect_holes(b.stmts, base_names);
    std::vector<std::vector<std::string>> per_impl;
    std::set<std::string> all(base_names.begin(), base_names.end());
    for (const auto& impl : ast_.impls) {
        per_impl.push_back(impl_hole_names(impl));
        all.insert(impl.hole_name);
        all.insert(per_impl.back().begin(), per_impl.back().end());
    }
    holes_.assign(all.begin(), all.end());
    for (std::size_t h = 0; h < holes_.size(); ++h) hole_ids_.emplace(holes_[h], static_cast<int>(h));

    impls_.resize(holes_.size());
    par_.resize(ast_.impls.size());
    impl_holes_.resize(ast_.impls.size());
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < ast_.impls.size(); ++i) {
        const auto& impl = ast_.impls[i];
        int h = hole_id(impl.hole_name);
        par_[i] = h;
        if (!seen.emplace(impl.hole_name, impl.impl_name).second) {
            duplicates_.push_back(static_cast<int>(i));
        } else {
            impls_[h].push_back(static_cast<int>(i));
        }
        for (const auto& name : per_impl[i]) impl_holes_[i].push_back(hole_id(name));
        sort_unique(impl_holes_[i]);
    }
    for (auto& list : impls_) {
        std::sort(list.begin(), list.end(), [&](int a, int b) { return impl_name(a) < impl_name(b); });
    }
    for (const auto& name : base_names) base_holes_.push_back(hole_id(name));
    sort_unique(base_holes_);
}

int ModularProgram::hole_id(std::string_view name) const {
    auto it = hole_ids_.find(std::string(name));
    return it == hole_ids_.end() ? -1 : it->second;
}

int ModularProgram::find_impl(std::string_view hole, std::string_view name) const {
    int h = hole_id(hole);
    if (h < 0) return -1;
    const auto& list = impls_[h];
    auto it = std::lower_bound(list.begin(), list.end(), name,
                               [&](int i, std::string_view n) { return impl_name(i) < n; });
    return it != list.end() && impl_name(*it) == name ? *it : -1;
}

std::vector<HoleSite> ModularProgram::sites() const {
    std::vector<HoleSite> out;
    auto scan = [&](const std::vector<Stmt>& stmts, const SiteContainer& where) {
        for (const auto& s : stmts) {
            visit_exprs(s, [&](const Expr& x) {
                if (x.kind != Expr::Kind::Hole) return;
                out.push_back({x.hole->name(), x.hole->field, &x, where, x.span});
            });
        }
    };
    auto scan_expr = [&](const Expr& e, const SiteContainer& where) {
        visit_exprs(e, [&](const Expr& x) {
            if (x.kind != Expr::Kind::Hole) return;
            out.push_back({x.hole->name(), x.hole->field, &x, where, x.span});
        });
    };
    for (const auto& b : ast_.base) scan(b.stmts, SiteContainer{b.kind, -1, {}, std::nullopt});
    for (std::size_t i = 0; i < ast_.impls.size(); ++i) {
        const auto& impl = ast_.impls[i];
        for (const auto& [kind, stmts] : impl.append)
            scan(stmts, SiteContainer{std::nullopt, static_cast<int>(i), {}, kind});
        for (const auto& f : impl.fields) {
            SiteContainer where{std::nullopt, static_cast<int>(i), f.name, std::nullopt};
            scan(f.body, where);
            if (f.ret) scan_expr(*f.ret, where);
        }
    }
    return out;
}

std::optional<std::vector<int>> ModularProgram::topo_order() const {
    std::size_t n = holes_.size();
    std::vector<std::vector<int>> succ(n);
    std::vector<int> indegree(n, 0);
    for (std::size_t h = 0; h < n; ++h) {
        std::vector<int> children;
        for (int i : impls_[h]) children.insert(children.end(), impl_holes_[i].begin(), impl_holes_[i].end());
        sort_unique(children);
        for (int c : children) {
            succ[h].push_back(c);
            ++indegree[c];
        }
    }
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (std::size_t h = 0; h < n; ++h) {
        if (indegree[h] == 0) ready.push(static_cast<int>(h));
    }
    std::vector<int> order;
    order.reserve(n);
    while (!ready.empty()) {
        int h = ready.top();
        ready.pop();
        order.push_back(h);
        for (int c : succ[h]) {
            if (--indegree[c] == 0) ready.push(c);
        }
    }
    if (order.size() != n) return std::nullopt;
    return order;
}

std::vector<int> ModularProgram::resolve(const Selection& sel) const {
    std::vector<int> out;
    for (const auto& [hole, name] : sel) {
        int i = find_impl(hole, name);
        if (i >= 0) out.push_back(i);
    }
    return out;
}

Selection ModularProgram::selection_of(const std::vector<int>& impl_ids) const {
    Selection sel;
    for (int i : impl_ids) sel[holes_[par_[i]]] = impl_name(i);
    return sel;
}

std::vector<SiblingPair> siblings(const Selection& i1, const Selection& i2) {
    std::vector<SiblingPair> out;
    for (const auto& [hole, a] : i1) {
        auto it = i2.find(hole);
        if (it != i2.end() && it->second != a) out.push_back({hole, a, it->second});
    }
    return out;
}

std::vector<std::string> ValidityReport::messages() const {
    std::vector<std::string> out;
    for (const auto& h : missing) out.push_back("missing hole " + h);
    for (const auto& b : extra)
        out.push_back("extra implementation " + b.hole + ":" + b.impl.name + " (hole " + b.hole +
                      " is not required)");
    for (const auto& b : unknown)
        out.push_back("implementation " + b.hole + ":" + b.impl.name + " is not in the program");
    return out;
}

ValidityReport valid_selection(const ModularProgram& p, const Selection& sel) {
    ValidityReport r;
    std::set<int> required(p.base_holes().begin(), p.base_holes().end());
    for (const auto& [hole, name] : sel) {
        int i = p.find_impl(hole, name);
        if (i < 0) {
            r.unknown.push_back({hole, {name, false, {}}});
            continue;
        }
        required.insert(p.holes_of(i).begin(), p.holes_of(i).end());
    }
    for (int h : required) {
        if (!sel.count(p.hole_name(h))) r.missing.push_back(p.hole_name(h));
    }
    for (const auto& [hole, name] : sel) {
        int h = p.hole_id(hole);
        if (h >= 0 && !required.count(h) && p.find_impl(hole, name) >= 0)
            r.extra.push_back({hole, {name, false, {}}});
    }
    r.valid = r.missing.empty() && r.extra.empty() && r.unknown.empty();
    return r;
}

Selection close(const ModularProgram& p, const Selection& sel) {
    Selection out;
    std::vector<int> stack(p.base_holes().rbegin(), p.base_holes().rend());
    std::vector<bool> seen(p.hole_count(), false);
    while (!stack.empty()) {
        int h = stack.back();
        stack.pop_back();
        if (seen[h]) continue;
        seen[h] = true;
        auto it = sel.find(p.hole_name(h));
        if (it == sel.end()) continue;
        int i = p.find_impl(it->first, it->second);
        if (i < 0) continue;
        out.insert(*it);
        for (int c : p.holes_of(i)) stack.push_back(c);
    }
    return out;
}

ModuleGraph module_graph(const ModularProgram& p) {
    ModuleGraph g;
    g.nodes.push_back({std::string(kBaseNodeId), ModuleGraph::Kind::Base});
    for (std::size_t h = 0; h < p.hole_count(); ++h) g.nodes.push_back({p.hole_name(h), ModuleGraph::Kind::Hole});
    auto impl_id = [&](int i) { return p.hole_name(p.par(i)) + ":" + p.impl_name(i); };
    for (std::size_t h = 0; h < p.hole_count(); ++h) {
        for (int i : p.impls(h)) g.nodes.push_back({impl_id(i), ModuleGraph::Kind::Impl});
    }
    for (int h : p.base_holes()) g.edges.emplace_back(std::string(kBaseNodeId), p.hole_name(h));
    for (std::size_t h = 0; h < p.hole_count(); ++h) {
        for (int i : p.impls(h)) {
            g.edges.emplace_back(p.hole_name(h), impl_id(i));
            for (int c : p.holes_of(i)) g.edges.emplace_back(impl_id(i), p.hole_name(c));
        }
    }
    return g;
}

namespace {

const char* kind_name(ModuleGraph::Kind k) {
    switch (k) {
        case ModuleGraph::Kind::Base:
            return "base";
        case ModuleGraph::Kind::Hole:
            return "hole";
        case ModuleGraph::Kind::Impl:
            return "impl";
    }
    return "";
}

std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string module_graph_json(const ModuleGraph& g) {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) j["nodes"].push_back({{"id", n.id}, {"kind", kind_name(n.kind)}});
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& [from, to] : g.edges) j["edges"].push_back({{"from", from}, {"to", to}});
    return j.dump();
}

std::string module_graph_dot(const ModuleGraph& g) {
    std::ostringstream out;
    out << "digraph modules {\n";
    for (const auto& n : g.nodes) {
        const char* shape = n.kind == ModuleGraph::Kind::Base   ? "box"
                            : n.kind == ModuleGraph::Kind::Hole ? "ellipse"
                                                                : "note";
        out << "  " << dot_quote(n.id) << " [shape=" << shape << "];\n";
    }
    for (const auto& [from, to] : g.edges) out << "  " << dot_quote(from) << " -> " << dot_quote(to) << ";\n";
    out << "}\n";
    return out.str();
}

}  // namespace mstan
