#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mstan/ast.hpp"
#include "mstan/checks.hpp"
#include "mstan/graphs.hpp"
#include "mstan/program.hpp"
#include "mstan/selection.hpp"

namespace mstan {

using BigInt = boost::multiprecision::cpp_int;

/// Families larger than this are never materialized in full.
inline constexpr std::size_t kMaterializeCap = 4096;

/// Number of ways to pick `n` values out of `m`: m^n, m!/(m-n)! or C(m, n).
BigInt choice_count(IndexItem::Kind kind, long m, int n);
/// The k-th pick (0-based values, lexicographic order).
std::vector<long> choice_at(IndexItem::Kind kind, long m, int n, BigInt k);

/// Integer tuples denoted by an index specification, in lexicographic order.
class IndexTuples {
public:
    IndexTuples() = default;
    /// Throws CompileError(UNSUPPORTED_MACRO) for index variables.
    explicit IndexTuples(const IndexSpec& spec);

    std::size_t arity() const { return arity_; }
    const BigInt& size() const { return size_; }
    std::vector<long> at(BigInt k) const;
    bool contains(const std::vector<long>& t) const;

private:
    std::vector<IndexItem> items_;
    std::vector<BigInt> sizes_;
    std::size_t arity_ = 0;
    BigInt size_ = 1;
};

/// One implementation of an operand hole, instantiated at `index` when it is
/// an indexed template.
struct Atom {
    int impl = -1;  // implementation index in the user program
    std::vector<long> index;

    bool operator==(const Atom&) const = default;
};

/// One implementation of a macro hole: an atom per slot (products and
/// exponents have several slots).
using Member = std::vector<Atom>;

struct Operand {
    std::string hole;
    std::vector<int> plain;      // sorted by name
    std::vector<int> templates;  // sorted by name
    std::vector<std::string> plain_names;
    std::vector<std::string> template_names;
    std::optional<IndexTuples> tuples;
    IndexItem::Kind power = IndexItem::Kind::Power;
    int n = 1;

    /// A single template and nothing else: members are written by index only.
    bool bare() const { return plain.empty() && templates.size() == 1; }
    BigInt base_size() const;
    Atom base_at(BigInt k) const;
    BigInt size() const { return choice_count(power, base_size().convert_to<long>(), n); }
};

/// Lazily enumerated implementations of a macro hole (indexed, exponent or
/// product), ordered by (index, name).
class Family {
public:
    std::string key;
    std::vector<Operand> operands;

    BigInt size() const;
    Member at(BigInt k) const;
    std::size_t slots() const;
    /// `Feature` members print as `5`, products as `(t,1)`, templates as `f[5]`.
    std::string name(const Member& m) const;
    /// Inverse of name(); also accepts `f[5]` for bare operands. Throws
    /// CompileError with `unknown_code` or INDEX_OUT_OF_RANGE.
    Member parse(std::string_view text, const std::string& unknown_code) const;
    bool less(const Member& a, const Member& b) const;
    bool contains(const Member& m) const;
};

/// Program counts for a macro program; `nodes` is exact decimal text when
/// small and a sum of powers of two (`2^166750`) otherwise.
struct MacroCounts {
    std::map<std::string, BigInt> members;  // per hole key
    BigInt collection_members = 0;
    std::string nodes;
};

/// A core program built from a macro program, with the collection member
/// holes it contains.
struct CoreProgram {
    ModularProgram program;
    std::map<std::string, std::pair<std::string, Member>> member_holes;  // hole -> (key, member)
};

/// The macro layer of a program: analyses every hole site once, then builds
/// core programs containing only the synthetic modules asked for.
class Expansion {
public:
    /// Throws CompileError (MACRO_CONFLICT, UNSUPPORTED_MACRO, ...).
    explicit Expansion(Ast user);
    ~Expansion();
    Expansion(Expansion&&) noexcept;
    Expansion& operator=(Expansion&&) noexcept;

    const Ast& user() const;
    bool has_macros() const;
    /// Collection keys (`Feature`, `Theta*Col`) and other macro keys.
    std::vector<std::string> collection_keys() const;
    std::vector<std::string> family_keys() const;
    const Family& family(const std::string& key) const;

    /// Every synthetic module. Throws CompileError(TOO_LARGE) above the cap.
    CoreProgram full() const;
    /// Enough of the program to type-check every written implementation.
    CoreProgram sample() const;
    /// Collections without members; other macro holes in full when small,
    /// otherwise their first member only.
    CoreProgram skeleton() const;

    /// User bindings with members parsed, sorted and printed canonically.
    SelectionSpec normalize(const SelectionSpec& spec) const;
    /// Core selection for `core`; members of bound collections that `core`
    /// holds but `spec` leaves out are bound to `no`.
    Selection translate(const SelectionSpec& spec, const CoreProgram& core) const;
    SelectionSpec inverse(const Selection& sel, const CoreProgram& core) const;

    /// The smallest core program `spec` can be concretized against.
    CoreProgram core_for(const SelectionSpec& spec) const;

    std::string concretize(const SelectionSpec& spec) const;
    ModelGraphResult graph() const;
    /// Neighbors of `spec` in the model graph of the full expansion,
    /// computed without materializing unselected collection members.
    std::vector<SelectionSpec> neighbors(const SelectionSpec& spec) const;
    MacroCounts counts() const;
    CheckResult check() const;

    /// Synthetic modules instantiated so far by this expansion.
    std::size_t instantiations() const;

private:
    struct State;
    std::unique_ptr<State> s_;
};

}  // namespace mstan
