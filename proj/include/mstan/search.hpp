#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mstan/macros.hpp"
#include "mstan/selection.hpp"

namespace mstan {

/// Scores a concretized program; higher is better. `selection` is the
/// canonical selection string. Throws on failure.
using ScoreFn = std::function<double(const std::string& selection, const std::string& program)>;

/// Number of declarations in the parameters block of `program`.
double parameter_count(const std::string& program);
ScoreFn parameter_count_scorer();

struct ExternalScorerConfig {
    /// Shell command; `{file}` is replaced by the path of the concretized
    /// program, which is appended when the placeholder is absent.
    std::string command;
    int timeout_seconds = 0;  // 0: no limit
};

/// Runs the command; the score is the first word of the last non-empty line
/// of its standard output.
/// Throws CompileError(SCORER_FAILED) on a nonzero exit or other output.
ScoreFn external_scorer(ExternalScorerConfig config);

/// Caches scores by canonical selection string.
class Scorer {
public:
    explicit Scorer(ScoreFn fn) : fn_(std::move(fn)) {}

    double score(const Expansion& x, const SelectionSpec& spec);
    std::size_t evaluations() const;
    std::optional<double> cached(const std::string& selection) const;

private:
    ScoreFn fn_;
    mutable std::mutex mu_;
    std::map<std::string, double> cache_;
    std::size_t evaluations_ = 0;
};

struct ScoredSelection {
    std::string selection;
    double score = 0;
};

struct SearchTrace {
    std::vector<ScoredSelection> visited;  // in scoring order
    std::size_t evaluations = 0;
    std::vector<std::string> path;  // selections moved through, start first
    std::string result;
    std::optional<std::string> error;  // set when the scorer failed
};

/// The lexicographically first implementation for every reachable hole;
/// collections start empty.
SelectionSpec default_start(const Expansion& x);

/// Scores the start, then repeatedly scores all neighbors of the current
/// selection and moves to the best selection seen so far (ties broken by the
/// smallest canonical string) while it beats the current one. Neighbors of
/// one round are scored by up to `jobs` threads.
SearchTrace greedy_search(const Expansion& x, const SelectionSpec& start, Scorer& scorer, int jobs = 1);

std::string trace_json(const SearchTrace& t);

}  // namespace mstan
