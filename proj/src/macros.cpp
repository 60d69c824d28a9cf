#include "mstan/macros.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <set>

#include "mstan/concretize.hpp"
#include "mstan/errors.hpp"
#include "mstan/render.hpp"

namespace mstan {

namespace {

using Ix = unsigned __int128;
using Kind = IndexItem::Kind;

const BigInt& ix_limit() {
    static const BigInt limit = BigInt(1) << 120;
    return limit;
}

Ix to_ix(const BigInt& k) {
    if (k >= ix_limit()) throw CompileError("TOO_LARGE", "index space too large to enumerate");
    BigInt hi = k >> 64;
    BigInt lo = k & BigInt(~std::uint64_t{0});
    return (static_cast<Ix>(hi.convert_to<std::uint64_t>()) << 64) | lo.convert_to<std::uint64_t>();
}

Ix binom(long a, long b) {
    if (b < 0 || b > a) return 0;
    b = std::min(b, a - b);
    Ix r = 1;
    for (long i = 1; i <= b; ++i) r = r * static_cast<Ix>(a - b + i) / static_cast<Ix>(i);
    return r;
}

Ix perm(long a, long b) {
    if (b < 0 || b > a) return 0;
    Ix r = 1;
    for (long i = 0; i < b; ++i) r *= static_cast<Ix>(a - i);
    return r;
}

std::vector<long> choice_at_ix(Kind kind, long m, int n, Ix k) {
    std::vector<long> out;
    out.reserve(n);
    if (kind == Kind::Power || kind == Kind::Range || kind == Kind::Value) {
        out.resize(n);
        for (int p = n - 1; p >= 0; --p) {
            out[p] = static_cast<long>(k % static_cast<Ix>(m));
            k /= static_cast<Ix>(m);
        }
        return out;
    }
    if (kind == Kind::Permutation) {
        std::vector<long> free(m);
        for (long v = 0; v < m; ++v) free[v] = v;
        for (int p = 0; p < n; ++p) {
            Ix block = perm(m - p - 1, n - p - 1);
            auto d = static_cast<long>(k / block);
            k %= block;
            out.push_back(free[d]);
            free.erase(free.begin() + d);
        }
        return out;
    }
    long start = 0;
    for (int p = 0; p < n; ++p) {
        for (long v = start; v < m; ++v) {
            Ix c = binom(m - v - 1, n - p - 1);
            if (k < c) {
                out.push_back(v);
                start = v + 1;
                break;
            }
            k -= c;
        }
    }
    return out;
}

bool choice_ok(Kind kind, const std::vector<long>& v) {
    if (kind == Kind::Permutation) {
        std::set<long> seen(v.begin(), v.end());
        return seen.size() == v.size();
    }
    if (kind == Kind::Combination) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i - 1] >= v[i]) return false;
        }
    }
    return true;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string join_index(const std::vector<long>& idx, const std::string& sep = ",") {
    std::vector<std::string> parts;
    for (long v : idx) parts.push_back(std::to_string(v));
    return join(parts, sep);
}

// Splits on commas outside brackets and parentheses.
std::vector<std::string> split_commas(std::string_view s) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(cur);
            cur.clear();
            continue;
        }
        cur += c;
    }
    out.push_back(cur);
    return out;
}

std::optional<long> parse_long(const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(c); }))
        return std::nullopt;
    return std::stol(s);
}

// ---- AST helpers ----------------------------------------------------------

template <class Fn>
void each_stmt_list(ImplDecl& impl, Fn&& fn) {
    for (auto& [kind, ss] : impl.append) fn(ss);
    for (auto& f : impl.fields) fn(f.body);
}

template <class Fn>
void rewrite_impl(ImplDecl& impl, Fn&& fn) {
    each_stmt_list(impl, [&](std::vector<Stmt>& ss) {
        for (auto& s : ss) rewrite_exprs(s, fn);
    });
    for (auto& f : impl.fields) {
        if (f.ret) rewrite_exprs(*f.ret, fn);
    }
}

void rename_decls(std::vector<Stmt>& ss, const std::map<std::string, std::string>& names) {
    for (auto& s : ss) {
        if (s.kind == Stmt::Kind::Decl) {
            auto it = names.find(s.name);
            if (it != names.end()) s.name = it->second;
        }
        rename_decls(s.body, names);
        rename_decls(s.orelse, names);
    }
}

std::vector<std::string> globals_of(const ImplDecl& impl) {
    std::vector<std::string> out;
    for (const auto& [kind, ss] : impl.append) {
        if (kind == BlockKind::Functions) continue;
        for (const auto& s : ss) {
            if (s.kind == Stmt::Kind::Decl) out.push_back(s.name);
        }
    }
    return out;
}

void rename_globals(ImplDecl& impl, const std::string& suffix) {
    std::map<std::string, std::string> names;
    for (const auto& g : globals_of(impl)) names[g] = g + suffix;
    if (names.empty()) return;
    rewrite_impl(impl, [&](Expr& e) {
        if (e.kind != Expr::Kind::Var) return;
        auto it = names.find(e.text);
        if (it != names.end()) e.text = it->second;
    });
    each_stmt_list(impl, [&](std::vector<Stmt>& ss) { rename_decls(ss, names); });
}

void substitute_index(ImplDecl& impl, const std::vector<long>& index) {
    std::map<std::string, long> values;
    for (std::size_t k = 0; k < impl.index_params.size() && k < index.size(); ++k)
        values[impl.index_params[k]] = index[k];
    if (!values.empty()) {
        rewrite_impl(impl, [&](Expr& e) {
            if (e.kind != Expr::Kind::Var) return;
            auto it = values.find(e.text);
            if (it != values.end()) e = make_int(it->second);
        });
    }
    impl.index_style = ImplDecl::IndexStyle::None;
    impl.index_params.clear();
}

void clear_resolved(Expr& e);

void clear_resolved(std::vector<Stmt>& ss) {
    for (auto& s : ss) rewrite_exprs(s, [](Expr& e) { e.resolved = false; });
}

void clear_resolved(Expr& e) {
    rewrite_exprs(e, [](Expr& x) { x.resolved = false; });
}

bool has_sites(const ImplDecl& impl) {
    bool found = false;
    auto look = [&](const Expr& e) { found = found || e.kind == Expr::Kind::Hole; };
    for (const auto& [kind, ss] : impl.append) {
        for (const auto& s : ss) visit_exprs(s, look);
    }
    for (const auto& f : impl.fields) {
        for (const auto& s : f.body) visit_exprs(s, look);
        if (f.ret) visit_exprs(*f.ret, look);
    }
    return found;
}

Expr empty_array() {
    Expr e;
    e.kind = Expr::Kind::Array;
    return e;
}

Stmt expr_stmt(Expr e) {
    Stmt s;
    s.kind = Stmt::Kind::ExprStmt;
    s.exprs.push_back(std::move(e));
    return s;
}

// append_array of array literals folds into one literal.
void simplify(Expr& e);

void simplify(std::vector<Stmt>& ss) {
    for (auto& s : ss) {
        for (auto& d : s.type.sizes) simplify(d);
        for (auto& d : s.type.array_dims) simplify(d);
        for (auto& x : s.exprs) simplify(x);
        simplify(s.body);
        simplify(s.orelse);
    }
}

void simplify(Expr& e) {
    for (auto& a : e.args) simplify(a);
    if (e.kind == Expr::Kind::Call && e.text == "append_array" && e.args.size() == 2 &&
        e.args[0].kind == Expr::Kind::Array && e.args[1].kind == Expr::Kind::Array) {
        Expr out = std::move(e.args[0]);
        for (auto& a : e.args[1].args) out.args.push_back(std::move(a));
        out.span = e.span;
        e = std::move(out);
    }
}

std::string key_of(const HoleRef& ref) {
    std::vector<std::string> parts;
    for (const auto& op : ref.operands) {
        std::string s = op.name;
        if (op.exponent) {
            s += "^";
            if (op.exponent->kind == HoleExponent::Kind::Permutation) s += "P";
            if (op.exponent->kind == HoleExponent::Kind::Combination) s += "C";
            s += std::to_string(op.exponent->n);
        }
        parts.push_back(s);
    }
    return join(parts, "*");
}

std::string instance_field(const std::string& field, const std::string& j) {
    return (field.empty() ? "" : field + "_") + "instance_" + sanitize_name(j);
}

}  // namespace

// ---- counting and unranking ---------------------------------------------

BigInt choice_count(IndexItem::Kind kind, long m, int n) {
    BigInt r = 1;
    if (kind == Kind::Permutation) {
        if (n > m) return 0;
        for (long i = 0; i < n; ++i) r *= (m - i);
        return r;
    }
    if (kind == Kind::Combination) {
        if (n > m) return 0;
        long b = std::min<long>(n, m - n);
        for (long i = 1; i <= b; ++i) r = r * (m - b + i) / i;
        return r;
    }
    for (int i = 0; i < n; ++i) r *= m;
    return r;
}

std::vector<long> choice_at(IndexItem::Kind kind, long m, int n, BigInt k) {
    return choice_at_ix(kind, m, n, to_ix(k));
}

IndexTuples::IndexTuples(const IndexSpec& spec) : items_(spec.items) {
    for (const auto& item : items_) {
        BigInt n = 1;
        switch (item.kind) {
            case Kind::Value:
                if (!parse_long(item.value))
                    throw CompileError("UNSUPPORTED_MACRO",
                                       "index variable '" + item.value + "' at a hole site");
                arity_ += 1;
                break;
            case Kind::Range:
                n = item.hi - item.lo + 1;
                arity_ += 1;
                break;
            default:
                n = choice_count(item.kind, item.hi - item.lo + 1, item.exponent);
                arity_ += item.exponent;
                break;
        }
        sizes_.push_back(n);
        size_ *= n;
    }
}

std::vector<long> IndexTuples::at(BigInt k) const {
    Ix rest = to_ix(k);
    std::vector<std::vector<long>> parts(items_.size());
    for (std::size_t i = items_.size(); i-- > 0;) {
        const auto& item = items_[i];
        Ix n = to_ix(sizes_[i]);
        Ix d = rest % n;
        rest /= n;
        if (item.kind == Kind::Value) {
            parts[i] = {std::stol(item.value)};
        } else if (item.kind == Kind::Range) {
            parts[i] = {item.lo + static_cast<long>(d)};
        } else {
            parts[i] = choice_at_ix(item.kind, item.hi - item.lo + 1, item.exponent, d);
            for (auto& v : parts[i]) v += item.lo;
        }
    }
    std::vector<long> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

bool IndexTuples::contains(const std::vector<long>& t) const {
    if (t.size() != arity_) return false;
    std::size_t pos = 0;
    for (const auto& item : items_) {
        if (item.kind == Kind::Value) {
            if (t[pos++] != std::stol(item.value)) return false;
            continue;
        }
        int n = item.kind == Kind::Range ? 1 : item.exponent;
        std::vector<long> part(t.begin() + static_cast<std::ptrdiff_t>(pos),
                               t.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        for (long v : part) {
            if (v < item.lo || v > item.hi) return false;
        }
        if (!choice_ok(item.kind, part)) return false;
    }
    return true;
}

// ---- families ---------------------------------------------------------------

BigInt Operand::base_size() const {
    BigInt n = plain.size();
    if (tuples) n += BigInt(templates.size()) * tuples->size();
    return n;
}

Atom Operand::base_at(BigInt k) const {
    if (k < plain.size()) return {plain[k.convert_to<std::size_t>()], {}};
    k -= plain.size();
    BigInt t = templates.size();
    return {templates[static_cast<std::size_t>(k % t)], tuples->at(k / t)};
}

BigInt Family::size() const {
    BigInt n = 1;
    for (const auto& op : operands) n *= op.size();
    return n;
}

std::size_t Family::slots() const {
    std::size_t n = 0;
    for (const auto& op : operands) n += op.n;
    return n;
}

Member Family::at(BigInt k) const {
    std::vector<std::vector<Atom>> parts(operands.size());
    for (std::size_t i = operands.size(); i-- > 0;) {
        const auto& op = operands[i];
        BigInt n = op.size();
        BigInt d = k % n;
        k /= n;
        BigInt m = op.base_size();
        if (m > ix_limit() && op.n > 1) throw CompileError("TOO_LARGE", "family '" + key + "' is too large");
        std::vector<long> picks =
            op.n == 1 ? std::vector<long>{0} : choice_at(op.power, m.convert_to<long>(), op.n, d);
        for (long p : picks) parts[i].push_back(op.base_at(op.n == 1 ? d : BigInt(p)));
    }
    Member out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

namespace {

struct BaseKey {
    int group;  // plain before templates
    std::vector<long> index;
    std::size_t pos;

    auto operator<=>(const BaseKey&) const = default;
};

std::optional<BaseKey> base_key(const Operand& op, const Atom& a) {
    auto p = std::find(op.plain.begin(), op.plain.end(), a.impl);
    if (p != op.plain.end()) {
        if (!a.index.empty()) return std::nullopt;
        return BaseKey{0, {}, static_cast<std::size_t>(p - op.plain.begin())};
    }
    auto t = std::find(op.templates.begin(), op.templates.end(), a.impl);
    if (t == op.templates.end() || !op.tuples || !op.tuples->contains(a.index)) return std::nullopt;
    return BaseKey{1, a.index, static_cast<std::size_t>(t - op.templates.begin())};
}

}  // namespace

bool Family::less(const Member& a, const Member& b) const {
    std::size_t slot = 0;
    for (const auto& op : operands) {
        for (int k = 0; k < op.n; ++k, ++slot) {
            auto ka = base_key(op, a[slot]);
            auto kb = base_key(op, b[slot]);
            if (ka != kb) return ka < kb;
        }
    }
    return false;
}

bool Family::contains(const Member& m) const {
    if (m.size() != slots()) return false;
    std::size_t slot = 0;
    for (const auto& op : operands) {
        std::vector<long> order;
        std::vector<BaseKey> keys;
        for (int k = 0; k < op.n; ++k, ++slot) {
            auto key = base_key(op, m[slot]);
            if (!key) return false;
            keys.push_back(*key);
        }
        if (op.power == Kind::Permutation) {
            std::set<BaseKey> seen(keys.begin(), keys.end());
            if (seen.size() != keys.size()) return false;
        }
        if (op.power == Kind::Combination) {
            for (std::size_t i = 1; i < keys.size(); ++i) {
                if (!(keys[i - 1] < keys[i])) return false;
            }
        }
    }
    return true;
}

std::string Family::name(const Member& m) const {
    std::vector<std::string> tokens;
    std::size_t slot = 0;
    for (const auto& op : operands) {
        for (int k = 0; k < op.n; ++k, ++slot) {
            const Atom& a = m[slot];
            if (op.bare()) {
                for (long v : a.index) tokens.push_back(std::to_string(v));
                continue;
            }
            auto p = std::find(op.plain.begin(), op.plain.end(), a.impl);
            if (p != op.plain.end()) {
                tokens.push_back(op.plain_names[p - op.plain.begin()]);
                continue;
            }
            auto t = std::find(op.templates.begin(), op.templates.end(), a.impl);
            tokens.push_back(op.template_names[t - op.templates.begin()] + "[" + join_index(a.index) + "]");
        }
    }
    if (tokens.size() == 1) return tokens[0];
    return "(" + join(tokens, ",") + ")";
}

Member Family::parse(std::string_view text, const std::string& unknown_code) const {
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    }
    auto unknown = [&](const std::string& why) -> CompileError {
        return CompileError(unknown_code, "'" + s + "' is not an implementation of " + key + why);
    };
    std::string inner = s;
    if (inner.size() >= 2 && inner.front() == '(' && inner.back() == ')') inner = inner.substr(1, inner.size() - 2);
    auto tokens = split_commas(inner);
    std::size_t next = 0;
    Member m;
    bool out_of_range = false;
    auto take = [&]() -> std::string {
        if (next >= tokens.size()) throw unknown(": too few components");
        return tokens[next++];
    };
    for (const auto& op : operands) {
        for (int k = 0; k < op.n; ++k) {
            std::string tok = take();
            auto bracket = tok.find('[');
            if (bracket != std::string::npos) {
                if (tok.back() != ']') throw unknown("");
                std::string name = tok.substr(0, bracket);
                auto t = std::find(op.template_names.begin(), op.template_names.end(), name);
                if (t == op.template_names.end()) throw unknown(": no template '" + name + "'");
                Atom a{op.templates[t - op.template_names.begin()], {}};
                for (const auto& v : split_commas(tok.substr(bracket + 1, tok.size() - bracket - 2))) {
                    auto n = parse_long(v);
                    if (!n) throw unknown(": malformed index");
                    a.index.push_back(*n);
                }
                if (a.index.size() != op.tuples->arity()) throw unknown(": wrong number of indices");
                out_of_range = out_of_range || !op.tuples->contains(a.index);
                m.push_back(std::move(a));
                continue;
            }
            if (op.bare()) {
                Atom a{op.templates[0], {}};
                for (std::size_t i = 0; i < op.tuples->arity(); ++i) {
                    std::string v = i == 0 ? tok : take();
                    auto n = parse_long(v);
                    if (!n) throw unknown(": malformed index '" + v + "'");
                    a.index.push_back(*n);
                }
                out_of_range = out_of_range || !op.tuples->contains(a.index);
                m.push_back(std::move(a));
                continue;
            }
            auto p = std::find(op.plain_names.begin(), op.plain_names.end(), tok);
            if (p == op.plain_names.end()) throw unknown(": no implementation '" + tok + "' of " + op.hole);
            m.push_back({op.plain[p - op.plain_names.begin()], {}});
        }
    }
    if (next != tokens.size()) throw unknown(": too many components");
    if (out_of_range) throw CompileError("INDEX_OUT_OF_RANGE", "'" + s + "': index out of range for " + key);
    if (!contains(m)) throw unknown(": components violate the exponent");
    return m;
}

// ---- expansion --------------------------------------------------------------

namespace {

enum class Use { Plain, Family, Collection };

struct Pick {
    std::map<std::string, std::vector<Member>> members;  // per family or collection key
};

}  // namespace

struct Expansion::State {
    Ast user;
    std::vector<Block> base;        // sites rewritten
    std::vector<ImplDecl> impls;    // sites rewritten, same indices as user.impls
    std::vector<bool> impl_has_sites;
    std::map<std::string, Family> families;
    std::map<std::string, Family> collections;
    std::map<std::string, std::set<std::string>> instances;  // hole -> index texts
    std::map<std::string, std::vector<long>> instance_values;
    std::set<std::string> plain_used;
    std::map<std::string, std::pair<std::string, std::string>> copies;  // key -> (hole, index text)
    bool macros = false;

    mutable std::mutex mu;
    mutable std::map<std::pair<std::string, std::string>, ImplDecl> cache;
    mutable std::atomic<std::size_t> instantiated{0};

    void analyse();
    Operand make_operand(const HoleOperand& op) const;
    ImplDecl element(const Family& f, const Member& m) const;
    ImplDecl build_element(const Family& f, const Member& m) const;
    CoreProgram build(const Pick& pick) const;
    std::string member_hole(const std::string& key, const Family& f, const Member& m) const {
        return sanitize_name(key) + "_" + sanitize_name(f.name(m));
    }
    const Family* any_family(const std::string& key) const {
        auto c = collections.find(key);
        if (c != collections.end()) return &c->second;
        auto f = families.find(key);
        return f == families.end() ? nullptr : &f->second;
    }
    void all_members(const std::string& key, const Family& f, Pick& pick) const {
        if (f.size() > kMaterializeCap)
            throw CompileError("TOO_LARGE", "'" + key + "' has " + f.size().str() +
                                                " implementations; too many to materialize");
        auto& out = pick.members[key];
        out.clear();
        for (BigInt k = 0; k < f.size(); ++k) out.push_back(f.at(k));
    }
};

namespace {

template <class Fn>
void each_site(std::vector<Block>& base, std::vector<ImplDecl>& impls, Fn&& fn) {
    for (auto& b : base) {
        for (auto& s : b.stmts) rewrite_exprs(s, fn);
    }
    for (auto& impl : impls) rewrite_impl(impl, fn);
}

}  // namespace

Operand Expansion::State::make_operand(const HoleOperand& hop) const {
    Operand op;
    op.hole = hop.name;
    std::vector<std::pair<std::string, int>> plain;
    std::vector<std::pair<std::string, int>> templates;
    for (std::size_t i = 0; i < user.impls.size(); ++i) {
        const auto& impl = user.impls[i];
        if (impl.hole_name != hop.name) continue;
        if (impl.index_style == ImplDecl::IndexStyle::Bracket) {
            templates.emplace_back(impl.impl_name, static_cast<int>(i));
        } else {
            plain.emplace_back(impl.impl_name, static_cast<int>(i));
        }
    }
    std::sort(plain.begin(), plain.end());
    std::sort(templates.begin(), templates.end());
    for (const auto& [n, i] : plain) {
        op.plain.push_back(i);
        op.plain_names.push_back(n);
    }
    for (const auto& [n, i] : templates) {
        op.templates.push_back(i);
        op.template_names.push_back(n);
    }
    if (hop.indexed) {
        op.tuples = IndexTuples(*hop.indexed);
        for (int t : op.templates) {
            if (user.impls[t].index_params.size() != op.tuples->arity())
                throw CompileError("MACRO_CONFLICT", "implementation '" + user.impls[t].impl_name + "' of " +
                                                         hop.name + " takes " +
                                                         std::to_string(user.impls[t].index_params.size()) +
                                                         " indices, the site gives " +
                                                         std::to_string(op.tuples->arity()),
                                   user.impls[t].span);
        }
    } else if (!op.templates.empty()) {
        throw CompileError("MACRO_CONFLICT", "hole " + hop.name + " has indexed implementations; use " + hop.name +
                                                 "[...]",
                           user.impls[op.templates[0]].span);
    }
    if (hop.exponent) {
        op.n = hop.exponent->n;
        op.power = hop.exponent->kind == HoleExponent::Kind::Power         ? Kind::Power
                   : hop.exponent->kind == HoleExponent::Kind::Permutation ? Kind::Permutation
                                                                           : Kind::Combination;
    }
    return op;
}

void Expansion::State::analyse() {
    base = user.base;
    impls = user.impls;
    for (const auto& impl : user.impls) macros = macros || impl.index_style != ImplDecl::IndexStyle::None;

    std::map<std::string, Use> uses;
    std::map<std::string, std::vector<HoleOperand>> shapes;
    auto use = [&](const std::string& key, Use u, Span span) {
        auto [it, fresh] = uses.emplace(key, u);
        if (!fresh && it->second != u)
            throw CompileError("MACRO_CONFLICT", "'" + key + "' is used both as a collection, a macro hole or a plain hole",
                               span);
    };
    auto unsupported = [](const std::string& what, Span span) {
        return CompileError("UNSUPPORTED_MACRO", what, span);
    };

    each_site(base, impls, [&](Expr& e) {
        if (e.kind != Expr::Kind::Hole) return;
        const HoleRef& r = *e.hole;
        if (r.is_plain()) {
            use(r.name(), Use::Plain, e.span);
            plain_used.insert(r.name());
            return;
        }
        macros = true;
        bool simple = r.operands.size() == 1 && !r.operands[0].indexed && !r.operands[0].exponent;
        if (r.instance) {
            if (!simple || r.collection) throw unsupported("instances and copies apply to plain holes only", e.span);
            IndexTuples tuples(*r.instance);
            if (tuples.size() > kMaterializeCap) throw unsupported("too many instances", e.span);
            for (BigInt k = 0; k < tuples.size(); ++k) {
                auto j = tuples.at(k);
                std::string text = join_index(j);
                if (r.copy) {
                    copies[r.name() + "<<" + text + ">>"] = {r.name(), text};
                } else {
                    use(r.name(), Use::Plain, e.span);
                    instances[r.name()].insert(text);
                    instance_values[r.name() + "<" + text + ">"] = j;
                }
            }
            return;
        }
        std::string key = key_of(r);
        if (r.collection) {
            if (!r.field.empty()) throw unsupported("collections of named fields", e.span);
            if (e.lhs_arg) throw unsupported("collections on the right of '~'", e.span);
        } else if (r.operands.size() > 1 && !r.field.empty()) {
            throw unsupported("products of named fields", e.span);
        }
        use(key, r.collection ? Use::Collection : Use::Family, e.span);
        auto [it, fresh] = shapes.emplace(key, r.operands);
        if (!fresh && it->second != r.operands)
            throw CompileError("MACRO_CONFLICT", "'" + key + "' is used with different index ranges", e.span);
        if (!fresh) return;
        Family f;
        f.key = key;
        for (const auto& op : r.operands) f.operands.push_back(make_operand(op));
        (r.collection ? collections : families).emplace(key, std::move(f));
    });
    for (const auto& h : plain_used) {
        for (const auto& impl : user.impls) {
            if (impl.hole_name == h && impl.index_style == ImplDecl::IndexStyle::Bracket)
                throw CompileError("MACRO_CONFLICT",
                                   "hole " + h + " has indexed implementations but is used without an index",
                                   impl.span);
        }
    }
    for (const auto& [key, f] : collections) {
        if (f.size() == 0) throw CompileError("UNFILLED_HOLE", "collection " + key + " has no implementations");
    }

    // rewrite the sites to core holes
    each_site(base, impls, [&](Expr& e) {
        if (e.kind != Expr::Kind::Hole || e.hole->is_plain()) return;
        HoleRef r = *e.hole;
        auto retarget = [&](const std::string& hole, const std::string& field) {
            Expr call = e;
            HoleOperand op;
            op.name = hole;
            call.hole = HoleRef{};
            call.hole->operands.push_back(op);
            call.hole->field = field;
            call.text = hole;
            return call;
        };
        if (r.instance) {
            IndexTuples tuples(*r.instance);
            std::vector<Expr> calls;
            for (BigInt k = 0; k < tuples.size(); ++k) {
                std::string text = join_index(tuples.at(k));
                calls.push_back(r.copy ? retarget(r.name() + "<<" + text + ">>", r.field)
                                       : retarget(r.name(), instance_field(r.field, text)));
            }
            bool ranged = std::any_of(r.instance->items.begin(), r.instance->items.end(),
                                      [](const IndexItem& i) { return i.kind != Kind::Value; });
            if (!ranged) {
                e = std::move(calls[0]);
                return;
            }
            Expr arr;
            arr.kind = Expr::Kind::Array;
            arr.span = e.span;
            arr.args = std::move(calls);
            e = std::move(arr);
            return;
        }
        e = retarget(key_of(r), r.field);
    });
    for (const auto& impl : impls) impl_has_sites.push_back(has_sites(impl));
}

ImplDecl Expansion::State::element(const Family& f, const Member& m) const {
    auto id = std::make_pair(f.key, f.name(m));
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(id);
        if (it != cache.end()) return it->second;
    }
    ImplDecl out = build_element(f, m);
    std::lock_guard<std::mutex> lock(mu);
    if (cache.emplace(id, out).second) ++instantiated;
    return out;
}

ImplDecl Expansion::State::build_element(const Family& f, const Member& m) const {
    std::vector<ImplDecl> atoms;
    std::vector<std::string> holes;
    for (const auto& op : f.operands) {
        for (int k = 0; k < op.n; ++k) holes.push_back(op.hole);
    }
    for (const auto& a : m) {
        ImplDecl impl = impls[a.impl];
        if (impl.index_style == ImplDecl::IndexStyle::Bracket) substitute_index(impl, a.index);
        atoms.push_back(std::move(impl));
    }
    if (atoms.size() == 1) {
        ImplDecl out = std::move(atoms[0]);
        out.hole_name = f.key;
        out.impl_name = f.name(m);
        return out;
    }
    ImplDecl out;
    out.hole_name = f.key;
    out.impl_name = f.name(m);
    FieldDecl field;
    std::set<std::string> taken;
    std::vector<Expr> results;
    for (std::size_t s = 0; s < atoms.size(); ++s) {
        ImplDecl& a = atoms[s];
        if (a.fields.size() != 1 || !a.fields[0].name.empty() || a.fields[0].lhs_param)
            throw CompileError("UNSUPPORTED_MACRO", "products need implementations with one anonymous field",
                               a.span);
        bool repeated = std::count(holes.begin(), holes.end(), holes[s]) > 1;
        std::string tag = sanitize_name(holes[s]);
        if (repeated) {
            tag += "_" + std::to_string(s + 1);
            rename_globals(a, "_" + std::to_string(s + 1));
        }
        const FieldDecl& main = a.fields[0];
        std::vector<Expr> args;
        for (const auto& p : main.params) {
            std::string name = p.name;
            for (int k = 2; taken.count(name); ++k) name = p.name + "_" + std::to_string(k);
            taken.insert(name);
            Param q = p;
            q.name = name;
            field.params.push_back(q);
            args.push_back(make_var(name));
        }
        Expr site = make_hole_call(tag, std::move(args));
        inline_function(site, tag, main.body, main.params, main.ret);
        if (site.args.empty())
            throw CompileError("UNSUPPORTED_MACRO", "products of void implementations", a.span);
        field.body.insert(field.body.end(), site.prelude.begin(), site.prelude.end());
        results.push_back(std::move(site.args[0]));
        for (auto& [kind, ss] : a.append) {
            auto& dst = out.append[kind];
            dst.insert(dst.end(), ss.begin(), ss.end());
        }
    }
    Expr tuple;
    tuple.kind = Expr::Kind::Tuple;
    tuple.args = std::move(results);
    field.ret = std::move(tuple);
    clear_resolved(field.body);
    clear_resolved(*field.ret);
    out.fields.push_back(std::move(field));
    return out;
}

CoreProgram Expansion::State::build(const Pick& pick) const {
    Ast core;
    core.base = base;
    std::map<std::string, std::pair<std::string, Member>> member_holes;
    for (const auto& impl : impls) {
        if (impl.index_style == ImplDecl::IndexStyle::Bracket) continue;
        if (families.count(impl.hole_name) || collections.count(impl.hole_name)) continue;
        auto inst = instances.find(impl.hole_name);
        if (inst == instances.end()) {
            core.impls.push_back(impl);
            continue;
        }
        ImplDecl out = impl;
        if (!plain_used.count(impl.hole_name)) {
            out.fields.clear();
            out.append.clear();
        }
        for (const auto& j : inst->second) {
            ImplDecl v = impl;
            if (v.index_style == ImplDecl::IndexStyle::Angle)
                substitute_index(v, instance_values.at(impl.hole_name + "<" + j + ">"));
            std::string tag = sanitize_name(impl.hole_name + "_" + j);
            rename_globals(v, "_" + tag);
            for (auto& f : v.fields) {
                f.name = instance_field(f.name, j);
                f.tag = tag;
                out.fields.push_back(std::move(f));
            }
            for (auto& [kind, ss] : v.append) {
                auto& dst = out.append[kind];
                dst.insert(dst.end(), ss.begin(), ss.end());
            }
        }
        out.named_fields = true;
        out.index_style = ImplDecl::IndexStyle::None;
        out.index_params.clear();
        core.impls.push_back(std::move(out));
    }
    for (const auto& [key, hj] : copies) {
        const auto& [hole, j] = hj;
        std::vector<long> values;
        for (const auto& v : split_commas(j)) values.push_back(std::stol(v));
        for (const auto& impl : impls) {
            if (impl.hole_name != hole || impl.index_style == ImplDecl::IndexStyle::Bracket) continue;
            ImplDecl v = impl;
            if (v.index_style == ImplDecl::IndexStyle::Angle) substitute_index(v, values);
            std::string tag = sanitize_name(hole + "_" + j);
            rename_globals(v, "_" + tag);
            for (auto& f : v.fields) f.tag = tag;
            v.hole_name = key;
            core.impls.push_back(std::move(v));
        }
    }
    for (const auto& [key, f] : families) {
        auto it = pick.members.find(key);
        if (it == pick.members.end()) continue;
        for (const auto& m : it->second) core.impls.push_back(element(f, m));
    }
    for (const auto& [key, f] : collections) {
        ImplDecl proto = element(f, f.at(0));
        const FieldDecl& pf = proto.main_field();
        if (pf.lhs_param) throw CompileError("UNSUPPORTED_MACRO", "collections of '~' implementations", proto.span);
        bool is_void = !pf.ret.has_value();
        std::vector<Expr> args;
        for (const auto& p : pf.params) args.push_back(make_var(p.name));

        ImplDecl merge;
        merge.hole_name = key;
        merge.impl_name = "merge_" + sanitize_name(key);
        FieldDecl mf;
        mf.params = pf.params;
        std::optional<Expr> acc;
        auto it = pick.members.find(key);
        static const std::vector<Member> none;
        const auto& members = it == pick.members.end() ? none : it->second;
        for (const auto& m : members) {
            std::string mh = member_hole(key, f, m);
            member_holes[mh] = {key, m};
            Expr call = make_hole_call(mh, args);
            if (is_void) {
                mf.body.push_back(expr_stmt(std::move(call)));
            } else {
                acc = acc ? make_call("append_array", {std::move(*acc), std::move(call)}) : std::move(call);
            }

            ImplDecl yes = element(f, m);
            rename_globals(yes, "_" + mh);
            yes.hole_name = mh;
            yes.impl_name = "yes";
            yes.fields.resize(1);
            yes.named_fields = false;
            yes.fields[0].name.clear();
            if (yes.fields[0].ret) {
                Expr arr = empty_array();
                arr.args.push_back(std::move(*yes.fields[0].ret));
                yes.fields[0].ret = std::move(arr);
            }
            ImplDecl no;
            no.hole_name = mh;
            no.impl_name = "no";
            FieldDecl nf;
            nf.params = pf.params;
            if (!is_void) nf.ret = empty_array();
            no.fields.push_back(std::move(nf));
            core.impls.push_back(std::move(yes));
            core.impls.push_back(std::move(no));
        }
        if (!is_void) mf.ret = acc ? std::move(*acc) : empty_array();
        merge.fields.push_back(std::move(mf));
        core.impls.push_back(std::move(merge));
    }
    return CoreProgram{ModularProgram(std::move(core)), std::move(member_holes)};
}

Expansion::Expansion(Ast user) : s_(std::make_unique<State>()) {
    s_->user = std::move(user);
    s_->analyse();
}

Expansion::~Expansion() = default;
Expansion::Expansion(Expansion&&) noexcept = default;
Expansion& Expansion::operator=(Expansion&&) noexcept = default;

const Ast& Expansion::user() const { return s_->user; }
bool Expansion::has_macros() const { return s_->macros; }

std::vector<std::string> Expansion::collection_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, f] : s_->collections) out.push_back(k);
    return out;
}

std::vector<std::string> Expansion::family_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, f] : s_->families) out.push_back(k);
    return out;
}

const Family& Expansion::family(const std::string& key) const {
    const Family* f = s_->any_family(key);
    if (!f) throw CompileError("UNKNOWN_HOLE", "no macro hole '" + key + "'");
    return *f;
}

std::size_t Expansion::instantiations() const { return s_->instantiated.load(); }

CoreProgram Expansion::full() const {
    Pick pick;
    for (const auto& [k, f] : s_->families) s_->all_members(k, f, pick);
    for (const auto& [k, f] : s_->collections) s_->all_members(k, f, pick);
    return s_->build(pick);
}

CoreProgram Expansion::sample() const {
    Pick pick;
    auto add = [&](const std::string& key, const Family& f) {
        if (f.size() <= kMaterializeCap) {
            s_->all_members(key, f, pick);
            return;
        }
        // one member per combination of written implementations
        std::set<std::vector<int>> groups;
        auto& out = pick.members[key];
        for (BigInt k = 0; k < f.size() && k < kMaterializeCap; ++k) {
            Member m = f.at(k);
            std::vector<int> g;
            for (const auto& a : m) g.push_back(a.impl);
            if (groups.insert(g).second) out.push_back(m);
        }
    };
    for (const auto& [k, f] : s_->families) add(k, f);
    for (const auto& [k, f] : s_->collections) add(k, f);
    return s_->build(pick);
}

CoreProgram Expansion::skeleton() const {
    Pick pick;
    for (const auto& [k, f] : s_->families) {
        if (f.size() <= kMaterializeCap) {
            s_->all_members(k, f, pick);
        } else {
            pick.members[k].push_back(f.at(0));
        }
    }
    return s_->build(pick);
}

SelectionSpec Expansion::normalize(const SelectionSpec& spec) const {
    SelectionSpec out;
    for (const auto& b : spec.bindings) {
        Binding nb = b;
        if (const auto c = s_->collections.find(b.hole); c != s_->collections.end()) {
            if (!b.impl.subset)
                throw CompileError("MACRO_CONFLICT", b.hole + " is a collection; bind it to a list like " + b.hole +
                                                         ":[...]");
            std::vector<Member> ms;
            for (const auto& name : b.impl.members) {
                Member m = c->second.parse(name, "UNKNOWN_MEMBER");
                if (std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(std::move(m));
            }
            std::sort(ms.begin(), ms.end(), [&](const Member& x, const Member& y) { return c->second.less(x, y); });
            nb.impl.members.clear();
            for (const auto& m : ms) nb.impl.members.push_back(c->second.name(m));
        } else if (b.impl.subset) {
            throw CompileError("MACRO_CONFLICT", b.hole + " is not a collection");
        } else if (const auto f = s_->families.find(b.hole); f != s_->families.end()) {
            nb.impl.name = f->second.name(f->second.parse(b.impl.name, "UNKNOWN_IMPL"));
        }
        out.bindings.push_back(std::move(nb));
    }
    std::sort(out.bindings.begin(), out.bindings.end(),
              [](const Binding& a, const Binding& b) { return a.hole < b.hole; });
    return out;
}

Selection Expansion::translate(const SelectionSpec& spec, const CoreProgram& core) const {
    SelectionSpec norm = normalize(spec);
    Selection out;
    for (const auto& b : norm.bindings) {
        auto c = s_->collections.find(b.hole);
        if (c == s_->collections.end()) {
            out[b.hole] = b.impl.name;
            continue;
        }
        out[b.hole] = "merge_" + sanitize_name(b.hole);
        std::set<std::string> chosen;
        for (const auto& name : b.impl.members) {
            std::string mh = sanitize_name(b.hole) + "_" + sanitize_name(name);
            chosen.insert(mh);
            out[mh] = "yes";
        }
        for (const auto& [mh, km] : core.member_holes) {
            if (km.first == b.hole && !chosen.count(mh)) out[mh] = "no";
        }
    }
    return out;
}

SelectionSpec Expansion::inverse(const Selection& sel, const CoreProgram& core) const {
    SelectionSpec out;
    std::map<std::string, std::vector<Member>> yes;
    for (const auto& [h, i] : sel) {
        if (auto m = core.member_holes.find(h); m != core.member_holes.end()) {
            if (i == "yes") yes[m->second.first].push_back(m->second.second);
            continue;
        }
        if (s_->collections.count(h)) {
            yes[h];
            continue;
        }
        out.bindings.push_back({h, {i, false, {}}});
    }
    for (auto& [key, ms] : yes) {
        if (!sel.count(key)) continue;
        const Family& f = s_->collections.at(key);
        std::sort(ms.begin(), ms.end(), [&](const Member& x, const Member& y) { return f.less(x, y); });
        Binding b{key, {"", true, {}}};
        for (const auto& m : ms) b.impl.members.push_back(f.name(m));
        out.bindings.push_back(std::move(b));
    }
    std::sort(out.bindings.begin(), out.bindings.end(),
              [](const Binding& a, const Binding& b) { return a.hole < b.hole; });
    return out;
}

CoreProgram Expansion::core_for(const SelectionSpec& spec) const {
    Pick pick;
    for (const auto& b : normalize(spec).bindings) {
        const Family* f = s_->any_family(b.hole);
        if (!f) continue;
        auto& out = pick.members[b.hole];
        if (b.impl.subset) {
            for (const auto& name : b.impl.members) out.push_back(f->parse(name, "UNKNOWN_MEMBER"));
        } else {
            out.push_back(f->parse(b.impl.name, "UNKNOWN_IMPL"));
        }
    }
    return s_->build(pick);
}

namespace {

void require_valid(const ModularProgram& p, const Selection& sel, const std::map<std::string, std::pair<std::string, std::string>>& copies) {
    auto report = valid_selection(p, sel);
    if (report.valid) return;
    std::vector<Diagnostic> ds;
    for (const auto& h : report.missing) {
        if (copies.count(h)) ds.push_back({"MISSING_COPY_BINDING", {}, "copy " + h + " needs its own binding"});
    }
    for (const auto& m : report.messages()) ds.push_back({"INVALID_SELECTION", {}, m});
    throw CompileError(std::move(ds));
}

}  // namespace

std::string Expansion::concretize(const SelectionSpec& spec) const {
    CoreProgram core = core_for(spec);
    Selection sel = translate(spec, core);
    require_valid(core.program, sel, s_->copies);
    Ast ast = concretize_ast(core.program, sel);
    for (auto& b : ast.base) simplify(b.stmts);
    return render(ast);
}

ModelGraphResult Expansion::graph() const {
    CoreProgram core = full();
    ModelGraphResult g = model_graph(core.program);
    auto to_user = [&](const Selection& sel) {
        Selection out;
        for (const auto& b : inverse(sel, core).bindings) out[b.hole] = b.impl.text();
        return out;
    };
    std::vector<Selection> users;
    std::map<std::string, std::size_t> by_id;
    for (const auto& n : g.nodes) {
        users.push_back(to_user(n));
        by_id[canonical(n)] = users.size() - 1;
    }
    ModelGraphResult out;
    std::set<std::string> seen;
    for (const auto& u : users) {
        if (seen.insert(canonical(u)).second) out.nodes.push_back(u);
    }
    std::sort(out.nodes.begin(), out.nodes.end(),
              [](const Selection& a, const Selection& b) { return canonical(a) < canonical(b); });
    std::set<GraphEdge> edges;
    for (const auto& e : g.edges) {
        const Selection& ua = users[by_id.at(e.a)];
        const Selection& ub = users[by_id.at(e.b)];
        std::string hole = e.hole;
        if (auto m = core.member_holes.find(e.hole); m != core.member_holes.end()) hole = m->second.first;
        GraphEdge ue{canonical(ua), canonical(ub), hole, ua.at(hole), ub.at(hole)};
        if (ue.b < ue.a) {
            std::swap(ue.a, ue.b);
            std::swap(ue.impl_a, ue.impl_b);
        }
        edges.insert(ue);
    }
    out.edges.assign(edges.begin(), edges.end());
    return out;
}

std::vector<SelectionSpec> Expansion::neighbors(const SelectionSpec& spec) const {
    SelectionSpec norm = normalize(spec);
    Pick pick;
    std::map<std::string, std::vector<Member>> selected;
    for (const auto& [key, f] : s_->collections) {
        const Binding* b = norm.find(key);
        if (!b) {
            s_->all_members(key, f, pick);
            continue;
        }
        auto& ms = selected[key];
        for (const auto& name : b->impl.members) ms.push_back(f.parse(name, "UNKNOWN_MEMBER"));
        pick.members[key] = ms;
    }
    for (const auto& [key, f] : s_->families) s_->all_members(key, f, pick);
    CoreProgram core = s_->build(pick);
    Selection sel = translate(norm, core);
    require_valid(core.program, sel, s_->copies);

    std::map<std::string, SelectionSpec> found;
    for (const auto& n : model_neighbors(core.program, sel)) {
        SelectionSpec u = inverse(n, core);
        found.emplace(u.text(), std::move(u));
    }

    // adding one member to a bound collection
    for (const auto& [key, ms] : selected) {
        const Family& f = s_->collections.at(key);
        std::map<std::vector<int>, std::vector<SelectionSpec>> groups;
        for (BigInt k = 0; k < f.size(); ++k) {
            Member m = f.at(k);
            if (std::find(ms.begin(), ms.end(), m) != ms.end()) continue;
            std::vector<int> g;
            bool plain = true;
            for (const auto& a : m) {
                g.push_back(a.impl);
                plain = plain && !s_->impl_has_sites[a.impl];
            }
            auto it = groups.find(g);
            if (it == groups.end()) {
                std::vector<SelectionSpec> bases;
                if (plain) {
                    bases.push_back(norm);
                } else {
                    Pick rep = pick;
                    rep.members[key].push_back(m);
                    CoreProgram core2 = s_->build(rep);
                    std::string mh = s_->member_hole(key, f, m);
                    Selection with = sel;
                    with[mh] = "yes";
                    for (const auto& node : model_graph_nodes_only(core2.program, limit_mask(core2.program, with))
                                                .selections()) {
                        SelectionSpec u = inverse(node, core2);
                        for (auto& b : u.bindings) {
                            if (b.hole != key) continue;
                            auto& names = b.impl.members;
                            names.erase(std::remove(names.begin(), names.end(), f.name(m)), names.end());
                        }
                        bases.push_back(std::move(u));
                    }
                }
                it = groups.emplace(g, std::move(bases)).first;
            }
            for (const auto& base : it->second) {
                SelectionSpec u = base;
                for (auto& b : u.bindings) {
                    if (b.hole != key) continue;
                    std::vector<Member> all = ms;
                    auto pos = std::upper_bound(all.begin(), all.end(), m,
                                                [&](const Member& x, const Member& y) { return f.less(x, y); });
                    all.insert(pos, m);
                    b.impl.members.clear();
                    for (const auto& x : all) b.impl.members.push_back(f.name(x));
                }
                found.emplace(u.text(), std::move(u));
            }
        }
    }
    std::vector<SelectionSpec> out;
    for (auto& [t, u] : found) out.push_back(std::move(u));
    return out;
}

MacroCounts Expansion::counts() const {
    MacroCounts out;
    std::map<std::string, std::size_t> plain;
    for (const auto& impl : s_->user.impls) {
        if (impl.index_style != ImplDecl::IndexStyle::Bracket) ++plain[impl.hole_name];
    }
    for (const auto& [h, n] : plain) out.members[h] = n;
    for (const auto& [k, f] : s_->families) out.members[k] = f.size();
    for (const auto& [k, f] : s_->collections) {
        out.members[k] = f.size();
        out.collection_members += f.size();
    }

    bool hole_free = true;
    for (const auto& [k, f] : s_->collections) {
        for (const auto& op : f.operands) {
            for (int i : op.plain) hole_free = hole_free && !s_->impl_has_sites[i];
            for (int i : op.templates) hole_free = hole_free && !s_->impl_has_sites[i];
        }
    }
    if (!hole_free) {
        CoreProgram core = full();
        out.nodes = std::to_string(model_graph_nodes_only(core.program).size());
        return out;
    }
    // each node of the program without members stands for 2^(members of its collections) nodes
    Pick pick;
    for (const auto& [k, f] : s_->families) s_->all_members(k, f, pick);
    CoreProgram skeleton = s_->build(pick);
    NodeSet ns = model_graph_nodes_only(skeleton.program);
    std::map<BigInt, BigInt> terms;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        BigInt e = 0;
        for (const auto& [h, i] : ns.at(k)) {
            if (auto c = s_->collections.find(h); c != s_->collections.end()) e += c->second.size();
        }
        terms[e] += 1;
    }
    BigInt max_e = terms.empty() ? BigInt(0) : terms.rbegin()->first;
    if (max_e <= 256) {
        BigInt total = 0;
        for (const auto& [e, c] : terms) total += c << e.convert_to<unsigned>();
        out.nodes = total.str();
        return out;
    }
    std::vector<std::string> parts;
    for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
        std::string t = it->first == 0 ? "" : "2^" + it->first.str();
        if (it->second != 1 || t.empty()) t = it->second.str() + (t.empty() ? "" : "*" + t);
        parts.push_back(t);
    }
    out.nodes = join(parts, " + ");
    return out;
}

CheckResult Expansion::check() const { return check_program(sample().program); }

}  // namespace mstan
