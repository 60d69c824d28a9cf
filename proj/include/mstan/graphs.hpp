#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mstan/program.hpp"
#include "mstan/selection.hpp"

namespace mstan {

/// Implementations usable per impl id; empty means all.
using ImplMask = std::vector<bool>;

struct GraphEdge {
    std::string a;  // canonical selection strings, a < b
    std::string b;
    std::string hole;
    std::string impl_a;
    std::string impl_b;

    bool operator==(const GraphEdge&) const = default;
    bool operator<(const GraphEdge& o) const;
};

/// Nodes sorted by canonical string; edges sorted.
struct ModelGraphResult {
    std::vector<Selection> nodes;
    std::vector<GraphEdge> edges;

    std::vector<std::string> node_ids() const;
    bool operator==(const ModelGraphResult&) const = default;
};

inline constexpr std::size_t kNaiveCap = 1000000;

/// Every combination of implementations, closed and deduplicated; edges by
/// pairwise sibling count. Throws CompileError(CAP_EXCEEDED) when the number
/// of combinations is above `cap`.
ModelGraphResult naive_model_graph(const ModularProgram& p, std::size_t cap = kNaiveCap);

/// Prefix expansion over a topological order of the hole dependency graph.
ModelGraphResult model_graph(const ModularProgram& p, const ImplMask& mask = {});

/// Node set of model_graph as shared prefix chains: selections are built only
/// when asked for.
class NodeSet {
public:
    std::size_t size() const { return leaves_.size(); }
    Selection at(std::size_t k) const;
    /// Implementation ids of node k, in visiting order.
    std::vector<int> impls_at(std::size_t k) const;
    /// All nodes, sorted by canonical string.
    std::vector<Selection> selections() const;

private:
    friend NodeSet model_graph_nodes_only(const ModularProgram&, const ImplMask&);
    struct Link {
        int parent;
        int impl;
    };
    const ModularProgram* program_ = nullptr;
    std::vector<Link> links_;
    std::vector<int> leaves_;
};

/// Nodes only, skipping edge bookkeeping. Prefixes waiting on the same next
/// hole are bucketed, so each visit touches only the prefixes that need it.
/// `p` must outlive the result.
NodeSet model_graph_nodes_only(const ModularProgram& p, const ImplMask& mask = {});

/// Restricts the implementations of every hole bound in `sel` to the bound one.
ImplMask limit_mask(const ModularProgram& p, const Selection& sel);
ModularProgram limit(const ModularProgram& p, const Selection& sel);

/// Union over each binding i and each sibling i' of the nodes of
/// ModelGraph(Limit(sel - {i} + {i'})). Throws CompileError(INVALID_SELECTION).
std::vector<Selection> model_neighbors(const ModularProgram& p, const Selection& sel);

std::string graph_json(const ModelGraphResult& g);
std::string graph_dot(const ModelGraphResult& g);
/// Parses graph_json output.
ModelGraphResult graph_from_json(const std::string& text);

/// Small valid program: at most `max_holes` holes and `max_impls`
/// implementations per hole; each body returns a literal or calls up to two
/// later holes.
std::string random_program(std::uint64_t seed, int max_holes = 5, int max_impls = 3);

/// Chain of `depth` holes; each has "stop" and "go", and "go" calls the next.
std::string tall_chain(int depth);

}  // namespace mstan
