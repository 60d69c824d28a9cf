#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mstan/ast.hpp"
#include "mstan/selection.hpp"

namespace mstan {

/// Where a hole site occurs.
struct SiteContainer {
    std::optional<BlockKind> block;  // set iff the site is in the base
    int impl = -1;                   // implementation id otherwise
    std::string field;               // field name, empty for the anonymous field
    std::optional<BlockKind> append; // append block of `impl`, if the site is there
};

struct HoleSite {
    std::string hole;
    std::string field;
    const Expr* call = nullptr;  // points into the program's AST
    SiteContainer container;
    Span span;
};

/// A core (macro-free) modular program with its derived indexes. Hole and
/// implementation ids are dense integers; hole ids follow lexicographic hole
/// order and each hole's implementations are listed by name.
class ModularProgram {
public:
    explicit ModularProgram(Ast ast);

    const Ast& ast() const { return ast_; }

    std::size_t hole_count() const { return holes_.size(); }
    const std::string& hole_name(int h) const { return holes_[h]; }
    int hole_id(std::string_view name) const;

    std::size_t impl_count() const { return ast_.impls.size(); }
    const ImplDecl& impl(int i) const { return ast_.impls[i]; }
    const std::string& impl_name(int i) const { return ast_.impls[i].impl_name; }
    int par(int i) const { return par_[i]; }
    /// Duplicate (hole, name) pairs are indexed once; later copies are listed
    /// here for validate_structure.
    const std::vector<int>& duplicate_impls() const { return duplicates_; }

    const std::vector<int>& impls(int h) const { return impls_[h]; }
    int find_impl(std::string_view hole, std::string_view name) const;
    /// Hole ids referenced by an implementation (all fields, returns, appends).
    const std::vector<int>& holes_of(int i) const { return impl_holes_[i]; }
    const std::vector<int>& base_holes() const { return base_holes_; }

    std::vector<HoleSite> sites() const;

    /// Topological order of the hole dependency graph (h before every hole
    /// referenced by an implementation of h), ready holes taken in
    /// lexicographic order; nullopt if there is a cycle.
    std::optional<std::vector<int>> topo_order() const;

    /// Selection with names resolved to ids; unknown bindings are dropped.
    std::vector<int> resolve(const Selection& sel) const;
    Selection selection_of(const std::vector<int>& impl_ids) const;

private:
    Ast ast_;
    std::vector<std::string> holes_;
    std::unordered_map<std::string, int> hole_ids_;
    std::vector<std::vector<int>> impls_;
    std::vector<int> par_;
    std::vector<std::vector<int>> impl_holes_;
    std::vector<int> base_holes_;
    std::vector<int> duplicates_;
};

/// Hole names referenced anywhere inside the given statements or expression.
void collect_holes(const std::vector<Stmt>& stmts, std::vector<std::string>& out);
void collect_holes(const Expr& e, std::vector<std::string>& out);

struct SiblingPair {
    std::string hole;
    std::string a;
    std::string b;

    bool operator==(const SiblingPair&) const = default;
};

/// {(a, b) : a ∈ I1, b ∈ I2, a ≠ b, par(a) = par(b)}, ordered by hole.
std::vector<SiblingPair> siblings(const Selection& i1, const Selection& i2);

struct ValidityReport {
    bool valid = true;
    std::vector<std::string> missing;  // required holes without a binding
    std::vector<Binding> extra;        // bindings for holes that are not required
    std::vector<Binding> unknown;      // bindings naming no implementation of the program

    std::vector<std::string> messages() const;
};

ValidityReport valid_selection(const ModularProgram& p, const Selection& sel);

/// Bindings of `sel` reachable from the base through selected implementations.
Selection close(const ModularProgram& p, const Selection& sel);

struct ModuleGraph {
    enum class Kind { Base, Hole, Impl };
    struct Node {
        std::string id;
        Kind kind;
    };
    std::vector<Node> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
};

inline constexpr std::string_view kBaseNodeId = "(base)";
/// Implementation node ids are `hole:impl`.
ModuleGraph module_graph(const ModularProgram& p);
std::string module_graph_json(const ModuleGraph& g);
std::string module_graph_dot(const ModuleGraph& g);

}  // namespace mstan
