#include "mstan/checks.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace mstan {

std::string effects_text(unsigned effects) {
    std::string out = "{";
    if (effects & kEffectLpdf) out += "LPDF";
    if (effects & kEffectRng) out += std::string(out.size() > 1 ? ", " : "") + "RNG";
    return out + "}";
}

unsigned block_effects(BlockKind kind) {
    switch (kind) {
        case BlockKind::Model:
        case BlockKind::TransformedParameters:
            return kEffectLpdf;
        case BlockKind::GeneratedQuantities:
            return kEffectRng;
        default:
            return 0;
    }
}

std::set<BlockKind> block_scope(BlockKind kind) {
    using K = BlockKind;
    switch (kind) {
        case K::TransformedData:
            return {K::Data};
        case K::TransformedParameters:
            return {K::Data, K::TransformedData, K::Parameters};
        case K::Model:
        case K::GeneratedQuantities:
            return {K::Data, K::TransformedData, K::Parameters, K::TransformedParameters};
        default:
            return {};
    }
}

const FieldSignature* HoleSignature::field(const std::string& name) const {
    auto it = fields.find(name);
    return it == fields.end() ? nullptr : &it->second;
}

namespace {

std::string scope_text(const std::set<BlockKind>& scope) {
    std::string out = "{";
    for (BlockKind k : scope) out += std::string(out.size() > 1 ? ", " : "") + std::string(block_name(k));
    return out + "}";
}

void dedupe(std::vector<Diagnostic>& ds) {
    std::vector<Diagnostic> out;
    for (auto& d : ds) {
        if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(std::move(d));
    }
    ds = std::move(out);
}

struct Global {
    Type type;
    BlockKind block;
};

struct UserFunction {
    std::vector<Type> params;
    Type ret;
};

struct Allowance {
    unsigned effects = 0;
    std::set<BlockKind> scope;
};

Allowance allowance_for(BlockKind kind) {
    Allowance a{block_effects(kind), block_scope(kind)};
    a.scope.insert(kind);  // earlier declarations of the same block
    return a;
}

struct Analysis {
    enum class State { Fresh, Running, Done };
    State state = State::Fresh;
    Type ret = Type::void_type();
    unsigned effects = 0;
    std::set<BlockKind> scope;
};

// Typing and effect/scope collection for one container of code. Hole
// signatures come from a callback so that inference can stay lazy.
class Walker {
public:
    struct Hooks {
        std::function<const HoleSignature*(const std::string& hole)> signature;
        std::function<void(const Expr* call, const std::vector<Type>& args)> site;
    };

    Walker(const std::unordered_map<std::string, Global>& globals,
           const std::unordered_map<std::string, Global>* own,
           const std::unordered_map<std::string, UserFunction>& functions, Hooks hooks,
           std::vector<Diagnostic>& diags)
        : globals_(globals), own_(own), functions_(functions), hooks_(std::move(hooks)), diags_(diags) {
        frames_.emplace_back();
    }

    std::optional<Allowance> allowance;
    bool in_function = false;
    bool in_module = false;
    Type function_ret = Type::void_type();
    // base top-level declarations of non-model blocks are globals already
    bool top_level_globals = false;

    unsigned effects = 0;
    std::set<BlockKind> scope;

    void declare(const std::string& name, Type t, Span span) {
        auto& frame = frames_.back();
        if (frame.count(name)) error("TYPE_ERROR", span, "'" + name + "' is already declared");
        frame[name] = std::move(t);
    }

    void stmts(const std::vector<Stmt>& ss, bool top = false) {
        for (const auto& s : ss) stmt(s, top);
    }

    void scoped(const std::vector<Stmt>& ss) {
        frames_.emplace_back();
        stmts(ss);
        frames_.pop_back();
    }

    void stmt(const Stmt& s, bool top = false) {
        switch (s.kind) {
            case Stmt::Kind::Decl: {
                for (const auto& d : s.type.sizes) expr(d);
                for (const auto& d : s.type.array_dims) expr(d);
                Type t = type_from_spec(s.type);
                if (!s.exprs.empty()) {
                    Type init = expr(s.exprs[0]);
                    if (!assignable(t, init))
                        error("TYPE_ERROR", s.span,
                              "cannot initialize " + type_name(t) + " '" + s.name + "' with " + type_name(init));
                }
                if (!(top && top_level_globals)) declare(s.name, t, s.span);
                break;
            }
            case Stmt::Kind::Assign: {
                Type lhs = expr(s.exprs[0]);
                Type rhs = expr(s.exprs[1]);
                if (s.op == "=" && !assignable(lhs, rhs))
                    error("TYPE_ERROR", s.span, "cannot assign " + type_name(rhs) + " to " + type_name(lhs));
                break;
            }
            case Stmt::Kind::Tilde: {
                expr(s.exprs[0]);
                const Expr& dist = s.exprs[1];
                for (const auto& a : dist.args) expr(a);
                if (!builtin_distribution(dist.text) && !functions_.count(dist.text + "_lpdf") &&
                    !functions_.count(dist.text + "_lpmf"))
                    error("TYPE_ERROR", dist.span, "unknown distribution '" + dist.text + "'");
                effect(kEffectLpdf, s.span);
                break;
            }
            case Stmt::Kind::Target:
                expr(s.exprs[0]);
                effect(kEffectLpdf, s.span);
                break;
            case Stmt::Kind::For:
                expr(s.exprs[0]);
                expr(s.exprs[1]);
                frames_.emplace_back();
                declare(s.name, Type::of(Type::Base::Int), s.span);
                stmts(s.body);
                frames_.pop_back();
                break;
            case Stmt::Kind::ForEach: {
                Type coll = expr(s.exprs[0]);
                Type elem = coll.dims > 0 ? Type::of(coll.base, coll.dims - 1) : Type::of(Type::Base::Real);
                if (coll.dims > 0 && coll.base == Type::Base::Tuple) elem.elems = coll.elems;
                if (coll.base == Type::Base::Unknown) elem = Type::unknown();
                frames_.emplace_back();
                if (s.names.empty()) {
                    declare(s.name, elem, s.span);
                } else if (elem.base == Type::Base::Tuple && elem.dims == 0 &&
                           elem.elems.size() == s.names.size()) {
                    for (std::size_t k = 0; k < s.names.size(); ++k) declare(s.names[k], elem.elems[k], s.span);
                } else if (elem.is_unknown()) {
                    for (const auto& n : s.names) declare(n, Type::unknown(), s.span);
                } else {
                    error("TYPE_ERROR", s.span,
                          "cannot destructure " + type_name(elem) + " into " + std::to_string(s.names.size()) +
                              " names");
                    for (const auto& n : s.names) declare(n, Type::unknown(), s.span);
                }
                stmts(s.body);
                frames_.pop_back();
                break;
            }
            case Stmt::Kind::While:
                expr(s.exprs[0]);
                scoped(s.body);
                break;
            case Stmt::Kind::If:
                expr(s.exprs[0]);
                scoped(s.body);
                scoped(s.orelse);
                break;
            case Stmt::Kind::ExprStmt: {
                const Expr& e = s.exprs[0];
                Type t = expr(e, true);
                if (e.kind == Expr::Kind::Hole && !t.is_void() && !t.is_unknown())
                    error("TYPE_ERROR", e.span,
                          "hole '" + e.hole->name() + "' returns " + type_name(t) + " but is used as a statement");
                break;
            }
            case Stmt::Kind::Return:
                if (!in_function) {
                    error("TYPE_ERROR", s.span, "return outside of a function");
                    break;
                }
                if (s.exprs.empty()) {
                    if (!function_ret.is_void()) error("TYPE_ERROR", s.span, "missing return value");
                } else {
                    Type t = expr(s.exprs[0]);
                    if (!assignable(function_ret, t))
                        error("TYPE_ERROR", s.span,
                              "returning " + type_name(t) + " from a function declared " + type_name(function_ret));
                }
                break;
            case Stmt::Kind::Block:
                scoped(s.body);
                break;
            case Stmt::Kind::Break:
            case Stmt::Kind::Continue:
                break;
            case Stmt::Kind::Print:
            case Stmt::Kind::Reject:
                for (const auto& e : s.exprs) expr(e);
                break;
            case Stmt::Kind::FunctionDef: {
                bool saved = in_function;
                Type saved_ret = function_ret;
                in_function = true;
                function_ret = s.void_return ? Type::void_type() : type_from_spec(s.type);
                frames_.emplace_back();
                for (const auto& p : s.params)
                    declare(p.name, p.type ? type_from_spec(*p.type) : Type::unknown(), s.span);
                stmts(s.body);
                frames_.pop_back();
                in_function = saved;
                function_ret = saved_ret;
                break;
            }
        }
    }

    Type expr(const Expr& e, bool statement = false) {
        using B = Type::Base;
        switch (e.kind) {
            case Expr::Kind::Int:
                return Type::of(B::Int);
            case Expr::Kind::Real:
                return Type::of(B::Real);
            case Expr::Kind::Str:
                return Type::of(B::String);
            case Expr::Kind::Var:
                return variable(e);
            case Expr::Kind::Call: {
                std::vector<Type> args;
                for (const auto& a : e.args) args.push_back(expr(a));
                auto uf = functions_.find(e.text);
                if (uf != functions_.end()) {
                    if (uf->second.params.size() != args.size())
                        error("TYPE_ERROR", e.span,
                              "function '" + e.text + "' expects " + std::to_string(uf->second.params.size()) +
                                  " arguments");
                    if (e.text.size() > 3 && e.text.compare(e.text.size() - 3, 3, "_lp") == 0)
                        effect(kEffectLpdf, e.span);
                    if (e.text.size() > 4 && e.text.compare(e.text.size() - 4, 4, "_rng") == 0)
                        effect(kEffectRng, e.span);
                    return uf->second.ret;
                }
                auto t = builtin_call(e.text, args);
                if (!t) {
                    error("TYPE_ERROR", e.span, "unknown function '" + e.text + "'");
                    return Type::unknown();
                }
                if (e.text.size() > 4 && e.text.compare(e.text.size() - 4, 4, "_rng") == 0)
                    effect(kEffectRng, e.span);
                return *t;
            }
            case Expr::Kind::Hole:
                return hole(e, statement);
            case Expr::Kind::Index:
                return index(e);
            case Expr::Kind::Slice:
                for (const auto& a : e.args) expr(a);
                return Type::of(B::Int, 1);
            case Expr::Kind::Binary: {
                Type l = expr(e.args[0]);
                Type r = expr(e.args[1]);
                if (l.base == B::String || r.base == B::String || l.is_void() || r.is_void()) {
                    error("TYPE_ERROR", e.span, "operator " + e.text + " applied to " + type_name(l) + " and " +
                                                    type_name(r));
                    return Type::unknown();
                }
                return arithmetic_result(e.text, l, r);
            }
            case Expr::Kind::Unary: {
                Type t = expr(e.args[0]);
                return e.text == "!" ? Type::of(B::Int) : t;
            }
            case Expr::Kind::Postfix: {
                Type t = expr(e.args[0]);
                if (t.dims == 0 && t.base == B::Vector) return Type::of(B::RowVector);
                if (t.dims == 0 && t.base == B::RowVector) return Type::of(B::Vector);
                return t;
            }
            case Expr::Kind::Array: {
                if (e.args.empty()) return Type::of(B::Unknown, 1);
                Type acc = expr(e.args[0]);
                for (std::size_t i = 1; i < e.args.size(); ++i) {
                    Type t = expr(e.args[i]);
                    auto j = join(acc, t);
                    if (!j) {
                        error("TYPE_ERROR", e.span, "array elements of types " + type_name(acc) + " and " +
                                                        type_name(t));
                        return Type::unknown();
                    }
                    acc = *j;
                }
                acc.dims += 1;
                return acc;
            }
            case Expr::Kind::Tuple: {
                Type t = Type::of(B::Tuple);
                for (const auto& a : e.args) t.elems.push_back(expr(a));
                return t;
            }
            case Expr::Kind::Cond: {
                expr(e.args[0]);
                Type a = expr(e.args[1]);
                Type b = expr(e.args[2]);
                auto j = join(a, b);
                if (!j) {
                    error("TYPE_ERROR", e.span, "branches of types " + type_name(a) + " and " + type_name(b));
                    return Type::unknown();
                }
                return *j;
            }
            case Expr::Kind::Let: {
                frames_.emplace_back();
                stmts(e.prelude);
                Type t = e.args.empty() ? Type::void_type() : expr(e.args[0]);
                frames_.pop_back();
                return t;
            }
        }
        return Type::unknown();
    }

private:
    const std::unordered_map<std::string, Global>& globals_;
    const std::unordered_map<std::string, Global>* own_;
    const std::unordered_map<std::string, UserFunction>& functions_;
    Hooks hooks_;
    std::vector<Diagnostic>& diags_;
    std::vector<std::unordered_map<std::string, Type>> frames_;

    void error(const std::string& code, Span span, const std::string& message) {
        diags_.push_back({code, span, message});
    }

    void effect(unsigned eff, Span span) {
        effects |= eff;
        if (allowance && (eff & ~allowance->effects))
            error("EFFECT_NOT_ALLOWED", span, "effect " + effects_text(eff) + " is not allowed here");
    }

    void use_block(BlockKind kind, Span span, const std::string& what) {
        scope.insert(kind);
        if (allowance && !allowance->scope.count(kind))
            error("SCOPE_NOT_ALLOWED", span,
                  what + " refers to the " + std::string(block_name(kind)) + " block, which is not in scope");
    }

    Type variable(const Expr& e) {
        for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
            auto f = it->find(e.text);
            if (f != it->end()) return f->second;
        }
        if (!in_function) {
            if (own_) {
                auto o = own_->find(e.text);
                if (o != own_->end()) {
                    use_block(o->second.block, e.span, "'" + e.text + "'");
                    return o->second.type;
                }
            }
            auto g = globals_.find(e.text);
            if (g != globals_.end()) {
                use_block(g->second.block, e.span, "'" + e.text + "'");
                return g->second.type;
            }
        }
        error("TYPE_ERROR", e.span, "undeclared identifier '" + e.text + "'");
        return Type::unknown();
    }

    Type hole(const Expr& e, bool statement) {
        std::vector<Type> args;
        for (const auto& a : e.args) args.push_back(expr(a));
        if (hooks_.site) hooks_.site(&e, args);
        const std::string& name = e.hole->name();
        const HoleSignature* sig = hooks_.signature ? hooks_.signature(name) : nullptr;
        if (!sig) return Type::unknown();
        const FieldSignature* f = sig->field(e.hole->field);
        if (!f) {
            error("TYPE_ERROR", e.span,
                  e.hole->field.empty() ? "hole '" + name + "' has no anonymous field"
                                        : "hole '" + name + "' has no field '" + e.hole->field + "'");
            return Type::unknown();
        }
        if (f->args.size() != args.size()) {
            error("ARGTYPE_MISMATCH", e.span,
                  "hole '" + name + "' takes " + std::to_string(f->args.size()) + " arguments, given " +
                      std::to_string(args.size()));
        } else {
            for (std::size_t k = 0; k < args.size(); ++k) {
                if (!assignable(f->args[k], args[k]))
                    error("ARGTYPE_MISMATCH", e.span,
                          "argument " + std::to_string(k + 1) + " of hole '" + name + "' is " + type_name(args[k]) +
                              ", expected " + type_name(f->args[k]));
            }
        }
        effects |= sig->effects;
        scope.insert(sig->scope.begin(), sig->scope.end());
        if (allowance) {
            unsigned bad = sig->effects & ~allowance->effects;
            if (bad)
                error("EFFECT_NOT_ALLOWED", e.span,
                      "hole '" + name + "' has effects " + effects_text(bad) + " not allowed here");
            std::set<BlockKind> missing;
            for (BlockKind k : sig->scope) {
                if (!allowance->scope.count(k)) missing.insert(k);
            }
            if (!missing.empty())
                error("SCOPE_NOT_ALLOWED", e.span,
                      "hole '" + name + "' needs scope " + scope_text(missing) + " not available here");
        }
        if (!statement && f->ret.is_void()) {
            error("TYPE_ERROR", e.span, "hole '" + name + "' has no value");
            return Type::unknown();
        }
        return f->ret;
    }

    Type index(const Expr& e) {
        using B = Type::Base;
        Type t = expr(e.args[0]);
        std::vector<bool> single;
        for (std::size_t k = 1; k < e.args.size(); ++k) {
            Type it = expr(e.args[k]);
            if (it.is_unknown()) {
                single.push_back(true);
                continue;
            }
            if (!(it.base == B::Int || (it.base == B::Unknown && it.dims == 1))) {
                error("TYPE_ERROR", e.args[k].span, "index of type " + type_name(it));
                single.push_back(true);
                continue;
            }
            single.push_back(it.dims == 0);
        }
        if (t.base == B::Unknown) return Type::unknown();
        std::size_t k = 0;
        int dims = t.dims;
        int kept = 0;
        while (k < single.size() && dims > 0) {
            if (!single[k]) ++kept;
            --dims;
            ++k;
        }
        Type out = Type::of(t.base, kept + dims);
        out.elems = t.elems;
        if (k == single.size()) return out;
        std::size_t rest = single.size() - k;
        if (t.base == B::Vector || t.base == B::RowVector) {
            if (rest > 1) {
                error("TYPE_ERROR", e.span, "too many indexes");
                return Type::unknown();
            }
            out.base = single[k] ? B::Real : t.base;
            return out;
        }
        if (t.base == B::Matrix) {
            if (rest > 2) {
                error("TYPE_ERROR", e.span, "too many indexes");
                return Type::unknown();
            }
            bool row_single = single[k];
            bool col_single = rest == 2 ? single[k + 1] : false;
            if (rest == 1) out.base = row_single ? B::RowVector : B::Matrix;
            else if (row_single && col_single) out.base = B::Real;
            else if (row_single) out.base = B::RowVector;
            else if (col_single) out.base = B::Vector;
            else out.base = B::Matrix;
            return out;
        }
        error("TYPE_ERROR", e.span, "cannot index " + type_name(t));
        return Type::unknown();
    }
};

class Checker {
public:
    explicit Checker(const ModularProgram& p) : p_(p) {
        for (const auto& b : p_.ast().base) {
            if (b.kind == BlockKind::Functions) {
                for (const auto& s : b.stmts) add_function(s);
                continue;
            }
            if (b.kind == BlockKind::Model) continue;
            for (const auto& s : b.stmts) {
                if (s.kind == Stmt::Kind::Decl) globals_[s.name] = {type_from_spec(s.type), b.kind};
            }
        }
        own_.resize(p_.impl_count());
        own_functions_.resize(p_.impl_count());
        for (std::size_t i = 0; i < p_.impl_count(); ++i) {
            own_functions_[i] = functions_;
            for (const auto& [kind, stmts] : p_.impl(i).append) {
                for (const auto& s : stmts) {
                    if (kind == BlockKind::Functions) {
                        add_function(s, &own_functions_[i]);
                    } else if (kind != BlockKind::Model && s.kind == Stmt::Kind::Decl) {
                        own_[i][s.name] = {type_from_spec(s.type), kind};
                    }
                }
            }
        }
        sigs_.resize(p_.hole_count());
        args_.resize(p_.hole_count());
        for (const auto& site : p_.sites()) {
            int h = p_.hole_id(site.hole);
            first_sites_.try_emplace({h, site.field}, site);
        }
    }

    const HoleSignature* signature(int h) {
        auto& slot = sigs_[h];
        if (slot.state == Analysis::State::Done) return &slot.sig;
        if (slot.state == Analysis::State::Running) return nullptr;
        slot.state = Analysis::State::Running;
        const auto& impls = p_.impls(h);
        if (impls.empty()) {
            slot.state = Analysis::State::Done;
            return nullptr;
        }
        HoleSignature sig;
        for (const auto& f : p_.impl(impls[0]).fields) sig.fields[f.name].args = field_args(h, f.name);
        for (int i : impls) {
            const auto& fields = p_.impl(i).fields;
            for (std::size_t k = 0; k < fields.size(); ++k) {
                const Analysis& a = field_analysis(i, k);
                sig.effects |= a.effects;
                sig.scope.insert(a.scope.begin(), a.scope.end());
                auto it = sig.fields.find(fields[k].name);
                if (it == sig.fields.end()) continue;
                if (i == impls[0]) {
                    it->second.ret = a.ret;
                } else if (auto j = join(it->second.ret, a.ret)) {
                    // int and real implementations unify to real
                    it->second.ret = *j;
                }
            }
        }
        slot.sig = std::move(sig);
        slot.state = Analysis::State::Done;
        return &slot.sig;
    }

    /// Argument types: declared types of the first implementation's
    /// parameters, or the types at the first call site for untyped ones.
    const std::vector<Type>& field_args(int h, const std::string& field) {
        auto& cache = args_[h];
        auto it = cache.find(field);
        if (it != cache.end()) return it->second;
        const auto& impls = p_.impls(h);
        std::vector<Type> out;
        const FieldDecl* f = impls.empty() ? nullptr : p_.impl(impls[0]).find_field(field);
        if (f) {
            std::optional<std::vector<Type>> site;
            for (std::size_t k = 0; k < f->params.size(); ++k) {
                const Param& prm = f->params[k];
                if (prm.type) {
                    out.push_back(type_from_spec(*prm.type));
                    continue;
                }
                if (!site) site = first_site_args(h, field);
                out.push_back(k < site->size() ? (*site)[k] : Type::unknown());
            }
        }
        return cache[field] = std::move(out);
    }

    // Base first, then holes parents-first: each hole's first site is then
    // analyzed before the hole itself, so memoized results are canonical.
    void prime() {
        for (std::size_t b = 0; b < p_.ast().base.size(); ++b) base_analysis(b);
        for (int h : p_.topo_order().value_or(std::vector<int>{})) signature(h);
    }

    void analyze_all() {
        prime();
        for (std::size_t i = 0; i < p_.impl_count(); ++i) {
            for (const auto& entry : p_.impl(i).append) append_analysis(i, entry.first);
            for (std::size_t k = 0; k < p_.impl(i).fields.size(); ++k) field_analysis(static_cast<int>(i), k);
        }
        for (std::size_t h = 0; h < p_.hole_count(); ++h) signature(static_cast<int>(h));
    }

    Signatures signatures() const {
        Signatures out;
        for (std::size_t h = 0; h < p_.hole_count(); ++h) {
            if (sigs_[h].state == Analysis::State::Done && !p_.impls(h).empty())
                out[p_.hole_name(h)] = sigs_[h].sig;
        }
        return out;
    }

    const Analysis& field_analysis(int i, std::size_t k) {
        auto& a = fields_[{i, k}];
        if (a.state != Analysis::State::Fresh) return a;
        a.state = Analysis::State::Running;
        const ImplDecl& impl = p_.impl(i);
        const FieldDecl& f = impl.fields[k];
        Analysis result;
        Walker w(globals_, &own_[i], own_functions_[i], hooks(), diags_);
        w.in_module = true;
        const std::vector<Type>* sig_args = nullptr;
        if (p_.impls(p_.par(i)).size() && p_.impl(p_.impls(p_.par(i))[0]).find_field(f.name))
            sig_args = &field_args(p_.par(i), f.name);
        for (std::size_t n = 0; n < f.params.size(); ++n) {
            const Param& prm = f.params[n];
            Type t = prm.type ? type_from_spec(*prm.type)
                              : (sig_args && n < sig_args->size() ? (*sig_args)[n] : Type::unknown());
            w.declare(prm.name, t, f.span);
        }
        for (const auto& s : f.body) {
            if (s.kind == Stmt::Kind::Return) {
                diags_.push_back({"TYPE_ERROR", s.span,
                                  "return inside a module body must be the final top-level statement"});
                continue;
            }
            w.stmt(s);
        }
        result.ret = f.ret ? w.expr(*f.ret) : Type::void_type();
        if (f.ret && result.ret.is_void())
            diags_.push_back({"TYPE_ERROR", f.ret->span, "returned expression has no value"});
        result.effects = w.effects;
        result.scope = std::move(w.scope);
        result.state = Analysis::State::Done;
        auto& slot = fields_[{i, k}];
        slot = std::move(result);
        return slot;
    }

    std::vector<Diagnostic> diagnostics() {
        dedupe(diags_);
        return diags_;
    }

    // Constraints 1 and 2 and field agreement.
    void check_implementations() {
        for (std::size_t h = 0; h < p_.hole_count(); ++h) {
            const auto& impls = p_.impls(h);
            if (impls.empty()) continue;
            const HoleSignature* sig = signature(static_cast<int>(h));
            if (!sig) continue;
            const ImplDecl& first = p_.impl(impls[0]);
            for (int i : impls) {
                const ImplDecl& impl = p_.impl(i);
                for (std::size_t k = 0; k < impl.fields.size(); ++k) {
                    const FieldDecl& f = impl.fields[k];
                    const FieldSignature* fs = sig->field(f.name);
                    std::string label = "implementation '" + impl.impl_name + "' of " + p_.hole_name(h) +
                                        (f.name.empty() ? "" : "." + f.name);
                    if (!fs) {
                        diags_.push_back({"FIELD_MISMATCH", impl.span,
                                          label + " is not a field of '" + first.impl_name + "'"});
                        continue;
                    }
                    if (f.params.size() != fs->args.size()) {
                        diags_.push_back({"ARGTYPE_MISMATCH", impl.span,
                                          label + " takes " + std::to_string(f.params.size()) +
                                              " arguments but the hole takes " + std::to_string(fs->args.size())});
                    } else {
                        for (std::size_t n = 0; n < f.params.size(); ++n) {
                            if (!f.params[n].type) continue;
                            Type t = type_from_spec(*f.params[n].type);
                            if (!assignable(t, fs->args[n]) || !assignable(fs->args[n], t))
                                diags_.push_back({"ARGTYPE_MISMATCH", impl.span,
                                                  label + " declares argument '" + f.params[n].name + "' as " +
                                                      type_name(t) + ", expected " + type_name(fs->args[n])});
                        }
                    }
                    const Analysis& a = field_analysis(i, k);
                    if (a.ret.is_void() != fs->ret.is_void() || !assignable(fs->ret, a.ret))
                        diags_.push_back({"RETTYPE_MISMATCH", impl.span,
                                          label + " returns " + type_name(a.ret) + ", expected " +
                                              type_name(fs->ret)});
                }
                for (const auto& [name, fs] : sig->fields) {
                    if (!impl.find_field(name))
                        diags_.push_back({"FIELD_MISMATCH", impl.span,
                                          "implementation '" + impl.impl_name + "' of " + p_.hole_name(h) +
                                              " lacks field " + (name.empty() ? "(anonymous)" : "'" + name + "'")});
                }
            }
        }
    }

private:
    struct SigSlot {
        Analysis::State state = Analysis::State::Fresh;
        HoleSignature sig;
    };

    const ModularProgram& p_;
    std::unordered_map<std::string, Global> globals_;
    std::vector<std::unordered_map<std::string, Global>> own_;
    std::unordered_map<std::string, UserFunction> functions_;
    std::vector<std::unordered_map<std::string, UserFunction>> own_functions_;
    std::vector<SigSlot> sigs_;
    std::vector<std::map<std::string, std::vector<Type>>> args_;
    std::map<std::pair<int, std::string>, HoleSite> first_sites_;
    std::unordered_map<const Expr*, std::vector<Type>> site_args_;
    std::map<std::pair<int, std::size_t>, Analysis> fields_;
    std::map<std::size_t, Analysis> bases_;
    std::map<std::pair<std::size_t, BlockKind>, Analysis> appends_;
    std::vector<Diagnostic> diags_;

    void add_function(const Stmt& s, std::unordered_map<std::string, UserFunction>* into = nullptr) {
        if (s.kind != Stmt::Kind::FunctionDef) return;
        UserFunction f;
        for (const auto& prm : s.params) f.params.push_back(prm.type ? type_from_spec(*prm.type) : Type::unknown());
        f.ret = s.void_return ? Type::void_type() : type_from_spec(s.type);
        (into ? *into : functions_)[s.name] = std::move(f);
    }

    Walker::Hooks hooks() {
        Walker::Hooks h;
        h.signature = [this](const std::string& name) -> const HoleSignature* {
            int id = p_.hole_id(name);
            return id < 0 ? nullptr : signature(id);
        };
        h.site = [this](const Expr* call, const std::vector<Type>& args) { site_args_.emplace(call, args); };
        return h;
    }

    std::vector<Type> first_site_args(int h, const std::string& field) {
        auto it = first_sites_.find({h, field});
        if (it == first_sites_.end()) return {};
        const HoleSite& site = it->second;
        auto known = site_args_.find(site.call);
        if (known != site_args_.end()) return known->second;
        const SiteContainer& c = site.container;
        if (c.block) {
            const auto& base = p_.ast().base;
            for (std::size_t b = 0; b < base.size(); ++b) {
                if (base[b].kind == *c.block) base_analysis(b);
            }
        } else if (c.append) {
            append_analysis(c.impl, *c.append);
        } else {
            const auto& fields = p_.impl(c.impl).fields;
            for (std::size_t k = 0; k < fields.size(); ++k) {
                if (fields[k].name == c.field) field_analysis(c.impl, k);
            }
        }
        known = site_args_.find(site.call);
        return known == site_args_.end() ? std::vector<Type>{} : known->second;
    }

    void base_analysis(std::size_t b) {
        auto& a = bases_[b];
        if (a.state != Analysis::State::Fresh) return;
        a.state = Analysis::State::Running;
        const Block& block = p_.ast().base[b];
        Walker w(globals_, nullptr, functions_, hooks(), diags_);
        if (block.kind != BlockKind::Functions) w.allowance = allowance_for(block.kind);
        w.top_level_globals = block.kind != BlockKind::Model;
        w.stmts(block.stmts, true);
        bases_[b].state = Analysis::State::Done;
    }

    void append_analysis(std::size_t i, BlockKind kind) {
        auto& a = appends_[{i, kind}];
        if (a.state != Analysis::State::Fresh) return;
        a.state = Analysis::State::Running;
        Walker w(globals_, &own_[i], own_functions_[i], hooks(), diags_);
        if (kind != BlockKind::Functions) w.allowance = allowance_for(kind);
        w.top_level_globals = kind != BlockKind::Model;
        w.stmts(p_.impl(i).append.at(kind), true);
        appends_[{i, kind}].state = Analysis::State::Done;
    }
};

// Depth-first search for a cycle in the hole dependency graph; returns the
// holes along it.
std::vector<int> find_cycle(const ModularProgram& p) {
    std::size_t n = p.hole_count();
    std::vector<int> color(n, 0);
    std::vector<int> parent(n, -1);
    for (std::size_t start = 0; start < n; ++start) {
        if (color[start]) continue;
        std::vector<std::pair<int, std::size_t>> stack;  // hole, next child position
        std::vector<std::vector<int>> children(n);
        auto kids = [&](int h) -> const std::vector<int>& {
            if (children[h].empty()) {
                for (int i : p.impls(h)) children[h].insert(children[h].end(), p.holes_of(i).begin(), p.holes_of(i).end());
            }
            return children[h];
        };
        stack.emplace_back(static_cast<int>(start), 0);
        color[start] = 1;
        while (!stack.empty()) {
            auto& [h, pos] = stack.back();
            const auto& cs = kids(h);
            if (pos == cs.size()) {
                color[h] = 2;
                stack.pop_back();
                continue;
            }
            int c = cs[pos++];
            if (color[c] == 1) {
                std::vector<int> cycle;
                for (std::size_t k = 0; k < stack.size(); ++k) {
                    if (stack[k].first == c) {
                        for (std::size_t m = k; m < stack.size(); ++m) cycle.push_back(stack[m].first);
                        break;
                    }
                }
                return cycle;
            }
            if (color[c] == 0) {
                color[c] = 1;
                stack.emplace_back(c, 0);
            }
        }
    }
    return {};
}

}  // namespace

std::vector<Diagnostic> validate_structure(const ModularProgram& p) {
    std::vector<Diagnostic> out;
    for (int i : p.duplicate_impls()) {
        const ImplDecl& impl = p.impl(i);
        out.push_back({"DUP_IMPL", impl.span,
                       "implementation '" + impl.impl_name + "' of hole " + impl.hole_name + " is defined twice"});
    }
    std::map<std::string, Span> first_site;
    for (const auto& site : p.sites()) first_site.try_emplace(site.hole, site.span);
    for (std::size_t h = 0; h < p.hole_count(); ++h) {
        if (p.impls(h).empty()) {
            auto it = first_site.find(p.hole_name(h));
            out.push_back({"UNFILLED_HOLE", it == first_site.end() ? Span{} : it->second,
                           "hole " + p.hole_name(h) + " has no implementation"});
        }
    }
    auto cycle = find_cycle(p);
    if (!cycle.empty()) {
        std::string path;
        for (int h : cycle) path += p.hole_name(h) + " -> ";
        path += p.hole_name(cycle.front());
        // blame an implementation of the first hole that reaches the next
        Span span;
        int next = cycle.size() > 1 ? cycle[1] : cycle[0];
        for (int i : p.impls(cycle[0])) {
            const auto& hs = p.holes_of(i);
            if (std::binary_search(hs.begin(), hs.end(), next)) {
                span = p.impl(i).span;
                break;
            }
        }
        out.push_back({"CYCLE", span, "module dependency cycle: " + path});
    }
    return out;
}

Inference infer_signatures(const ModularProgram& p, const std::vector<int>* order) {
    Checker c(p);
    c.prime();
    if (order) {
        for (auto it = order->rbegin(); it != order->rend(); ++it) c.signature(*it);
    }
    for (std::size_t h = 0; h < p.hole_count(); ++h) c.signature(static_cast<int>(h));
    return {c.signatures(), c.diagnostics()};
}

std::vector<Diagnostic> validate_semantics(const ModularProgram& p, const Signatures&) {
    Checker c(p);
    c.analyze_all();
    c.check_implementations();
    return c.diagnostics();
}

CheckResult check_program(const ModularProgram& p) {
    CheckResult r;
    r.diagnostics = validate_structure(p);
    if (!r.diagnostics.empty()) return r;
    Checker c(p);
    c.analyze_all();
    c.check_implementations();
    r.diagnostics = c.diagnostics();
    r.signatures = c.signatures();
    return r;
}

Type return_type(const TypeEnv& env, const std::vector<Stmt>& body, const std::optional<Expr>& ret,
                 const Signatures& sigs) {
    std::unordered_map<std::string, Global> globals;
    std::unordered_map<std::string, UserFunction> functions;
    std::vector<Diagnostic> diags;
    Walker::Hooks hooks;
    hooks.signature = [&](const std::string& name) -> const HoleSignature* {
        auto it = sigs.find(name);
        return it == sigs.end() ? nullptr : &it->second;
    };
    Walker w(globals, nullptr, functions, hooks, diags);
    for (const auto& [name, t] : env) w.declare(name, t, {});
    w.stmts(body);
    Type t = ret ? w.expr(*ret) : Type::void_type();
    if (!diags.empty()) throw CompileError(diags);
    return t;
}

std::string diagnostics_json(const std::vector<Diagnostic>& ds) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : ds) {
        arr.push_back({{"code", d.code},
                       {"span", {{"line", d.span.line}, {"col", d.span.col}, {"len", d.span.len}}},
                       {"message", d.message}});
    }
    return arr.dump();
}

std::string diagnostics_text(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds) out += to_text(d) + "\n";
    return out;
}

}  // namespace mstan
