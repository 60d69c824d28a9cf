#include "mstan/concretize.hpp"

#include <cctype>
#include <map>
#include <set>

#include "mstan/errors.hpp"
#include "mstan/render.hpp"

namespace mstan {

namespace {

void declared_names(const std::vector<Stmt>& ss, std::vector<std::string>& out);

void declared_names(const Stmt& s, std::vector<std::string>& out) {
    switch (s.kind) {
        case Stmt::Kind::Decl:
            out.push_back(s.name);
            break;
        case Stmt::Kind::For:
            out.push_back(s.name);
            break;
        case Stmt::Kind::ForEach:
            if (s.names.empty()) out.push_back(s.name);
            out.insert(out.end(), s.names.begin(), s.names.end());
            break;
        default:
            break;
    }
    declared_names(s.body, out);
    declared_names(s.orelse, out);
}

void declared_names(const std::vector<Stmt>& ss, std::vector<std::string>& out) {
    for (const auto& s : ss) declared_names(s, out);
}

// Binds the free variables of an inlined body: parameters become argument
// expressions, locals get fresh names, everything gets marked resolved so an
// enclosing inlining leaves it alone. Declarations inside nested Lets were
// renamed by their own inlining and are kept.
class Binder {
public:
    Binder(std::map<std::string, const Expr*> args, std::map<std::string, std::string> locals)
        : args_(std::move(args)), locals_(std::move(locals)) {}

    void stmts(std::vector<Stmt>& ss, bool nested) {
        for (auto& s : ss) stmt(s, nested);
    }

    void stmt(Stmt& s, bool nested) {
        if (!nested) {
            s.name = rename(s.name);
            for (auto& n : s.names) n = rename(n);
        }
        for (auto& e : s.type.sizes) expr(e);
        for (auto& e : s.type.array_dims) expr(e);
        for (auto& e : s.exprs) expr(e);
        stmts(s.body, nested);
        stmts(s.orelse, nested);
    }

    void expr(Expr& e) {
        if (e.kind == Expr::Kind::Var && !e.resolved) {
            auto a = args_.find(e.text);
            if (a != args_.end()) {
                e = *a->second;
                return;
            }
            e.text = rename(e.text);
            e.resolved = true;
            return;
        }
        if (e.kind == Expr::Kind::Let) stmts(e.prelude, true);
        for (auto& a : e.args) expr(a);
    }

private:
    std::map<std::string, const Expr*> args_;
    std::map<std::string, std::string> locals_;

    std::string rename(const std::string& name) const {
        auto it = locals_.find(name);
        return it == locals_.end() ? name : it->second;
    }
};

void rename_all(std::vector<Stmt>& ss, const std::string& from, const std::string& to);

void rename_all(Expr& e, const std::string& from, const std::string& to) {
    if (e.kind == Expr::Kind::Var && e.text == from) e.text = to;
    rename_all(e.prelude, from, to);
    for (auto& a : e.args) rename_all(a, from, to);
}

void rename_all(std::vector<Stmt>& ss, const std::string& from, const std::string& to) {
    for (auto& s : ss) {
        if (s.kind != Stmt::Kind::Assign && s.name == from) s.name = to;
        for (auto& n : s.names) {
            if (n == from) n = to;
        }
        for (auto& e : s.type.sizes) rename_all(e, from, to);
        for (auto& e : s.type.array_dims) rename_all(e, from, to);
        for (auto& e : s.exprs) rename_all(e, from, to);
        rename_all(s.body, from, to);
        rename_all(s.orelse, from, to);
    }
}

class Lowerer {
public:
    explicit Lowerer(std::set<std::string> taken) : taken_(std::move(taken)) {}

    std::vector<Stmt> stmts(std::vector<Stmt> ss) {
        std::vector<Stmt> out;
        for (auto& s : ss) {
            if (s.kind == Stmt::Kind::ExprStmt && s.exprs[0].kind == Expr::Kind::Let) {
                // void hole at a statement site: only its statements remain
                std::vector<Stmt> hoisted;
                hoist(s.exprs[0], hoisted);
                for (auto& h : hoisted) h.origin = s.origin;
                out.insert(out.end(), std::make_move_iterator(hoisted.begin()),
                           std::make_move_iterator(hoisted.end()));
                continue;
            }
            std::vector<Stmt> hoisted;
            for (auto& e : s.type.sizes) hoist(e, hoisted);
            for (auto& e : s.type.array_dims) hoist(e, hoisted);
            for (auto& e : s.exprs) hoist(e, hoisted);
            s.body = stmts(std::move(s.body));
            s.orelse = stmts(std::move(s.orelse));
            for (auto& h : hoisted) {
                h.origin = s.origin;
                out.push_back(std::move(h));
            }
            out.push_back(std::move(s));
        }
        return out;
    }

private:
    std::set<std::string> taken_;

    // Replaces every Let in `e` (left to right) by its result, moving its
    // statements to `out`.
    void hoist(Expr& e, std::vector<Stmt>& out) {
        if (e.kind != Expr::Kind::Let) {
            for (auto& a : e.args) hoist(a, out);
            return;
        }
        std::vector<Stmt> prelude = stmts(std::move(e.prelude));
        std::optional<Expr> result;
        if (!e.args.empty()) {
            result = std::move(e.args[0]);
            hoist(*result, prelude);
        }
        std::vector<std::string> names;
        declared_names(prelude, names);
        for (const auto& n : names) {
            if (!taken_.count(n)) {
                taken_.insert(n);
                continue;
            }
            std::string fresh;
            for (int k = 2;; ++k) {
                fresh = n + "_" + std::to_string(k);
                if (!taken_.count(fresh)) break;
            }
            rename_all(prelude, n, fresh);
            if (result) rename_all(*result, n, fresh);
            taken_.insert(fresh);
        }
        out.insert(out.end(), std::make_move_iterator(prelude.begin()), std::make_move_iterator(prelude.end()));
        if (result) {
            e = std::move(*result);
        } else {
            e = Expr{};
        }
    }
};

struct SiteFiller {
    const std::string& hole;
    const ImplDecl& impl;

    void operator()(Expr& x) const {
        if (x.kind != Expr::Kind::Hole || x.hole->name() != hole) return;
        const FieldDecl* f = impl.find_field(x.hole->field);
        if (!f)
            throw CompileError("INTERNAL", "implementation '" + impl.impl_name + "' of " + hole +
                                               " has no field '" + x.hole->field + "'",
                               x.span);
        inline_function(x, f->tag.empty() ? sanitize_name(hole) : f->tag, f->body, f->params, f->ret);
    }
};

void fill_sites(std::vector<Stmt>& ss, const SiteFiller& fill) {
    for (auto& s : ss) rewrite_exprs(s, fill);
}

}  // namespace

std::string sanitize_name(std::string_view name) {
    std::string out;
    bool gap = false;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            if (gap && !out.empty()) out += '_';
            gap = false;
            out += c;
        } else {
            gap = true;
        }
    }
    return out;
}

void inline_function(Expr& site, const std::string& hole, const std::vector<Stmt>& stmts,
                     const std::vector<Param>& params, const std::optional<Expr>& ret) {
    if (params.size() != site.args.size())
        throw CompileError("INTERNAL",
                           "inlining " + hole + ": " + std::to_string(site.args.size()) + " arguments for " +
                               std::to_string(params.size()) + " parameters",
                           site.span);
    Expr let;
    let.kind = Expr::Kind::Let;
    let.text = hole;
    let.span = site.span;
    let.prelude = stmts;
    if (ret) let.args.push_back(*ret);

    std::map<std::string, const Expr*> args;
    for (std::size_t k = 0; k < params.size(); ++k) args[params[k].name] = &site.args[k];
    std::vector<std::string> names;
    declared_names(stmts, names);
    std::map<std::string, std::string> locals;
    for (const auto& n : names) locals.emplace(n, n + "_" + hole);
    Binder binder(std::move(args), std::move(locals));
    binder.stmts(let.prelude, false);
    for (auto& a : let.args) binder.expr(a);
    site = std::move(let);
}

Ast apply_impl(Ast ast, const std::string& hole, const std::string& impl_name) {
    std::size_t index = ast.impls.size();
    for (std::size_t k = 0; k < ast.impls.size(); ++k) {
        if (ast.impls[k].hole_name == hole && ast.impls[k].impl_name == impl_name) {
            index = k;
            break;
        }
    }
    if (index == ast.impls.size())
        throw CompileError("INTERNAL", "no implementation '" + impl_name + "' of " + hole);
    ImplDecl impl = std::move(ast.impls[index]);
    ast.impls.erase(ast.impls.begin() + static_cast<std::ptrdiff_t>(index));

    SiteFiller fill{hole, impl};
    for (auto& b : ast.base) fill_sites(b.stmts, fill);
    for (auto& other : ast.impls) {
        for (auto& [kind, ss] : other.append) fill_sites(ss, fill);
        for (auto& f : other.fields) {
            fill_sites(f.body, fill);
            if (f.ret) rewrite_exprs(*f.ret, fill);
        }
    }
    // base statements first, then appends ordered by hole
    for (const auto& [kind, ss] : impl.append) {
        auto& stmts = ast.ensure_block(kind).stmts;
        auto pos = stmts.begin();
        while (pos != stmts.end() && (pos->origin.empty() || pos->origin <= hole)) ++pos;
        for (const auto& s : ss) {
            Stmt copy = s;
            copy.origin = hole;
            pos = stmts.insert(pos, std::move(copy)) + 1;
        }
    }
    return ast;
}

ModularProgram apply_impl(const ModularProgram& p, int impl) {
    return ModularProgram(apply_impl(p.ast(), p.impl(impl).hole_name, p.impl_name(impl)));
}

ModularProgram apply_impls(const ModularProgram& p, const std::vector<int>& impls) {
    Ast ast = p.ast();
    for (int i : impls) ast = apply_impl(std::move(ast), p.impl(i).hole_name, p.impl_name(i));
    return ModularProgram(std::move(ast));
}

Ast lower(Ast ast) {
    std::set<std::string> taken;
    std::vector<std::string> names;
    for (const auto& b : ast.base) declared_names(b.stmts, names);
    taken.insert(names.begin(), names.end());
    Lowerer l(std::move(taken));
    for (auto& b : ast.base) b.stmts = l.stmts(std::move(b.stmts));
    return ast;
}

Ast concretize_ast(const ModularProgram& p, const Selection& sel) {
    auto report = valid_selection(p, sel);
    if (!report.valid) {
        std::vector<Diagnostic> ds;
        for (const auto& m : report.messages()) ds.push_back({"INVALID_SELECTION", {}, m});
        throw CompileError(std::move(ds));
    }
    Ast ast = p.ast();
    for (const auto& [hole, impl] : sel) ast = apply_impl(std::move(ast), hole, impl);
    ast.impls.clear();
    return lower(std::move(ast));
}

std::string concretize(const ModularProgram& p, const Selection& sel) { return render(concretize_ast(p, sel)); }

}  // namespace mstan
