#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "mstan/macros.hpp"

namespace mstan {

inline constexpr std::size_t kDefaultGraphCap = 5000;

/// A JSON body with its HTTP status. The CLI prints the same bodies, so both
/// front ends share one serialization path.
struct Reply {
    int status = 200;
    std::string body;

    bool ok() const { return status == 200; }
};

/// Diagnostics as a reply body: {"diagnostics": [...]}.
Reply error_reply(int status, const std::vector<Diagnostic>& ds);

/// A compiled program; immutable once built.
class Compiled {
public:
    /// Throws ParseError or CompileError.
    explicit Compiled(std::string source);

    const std::string& source() const { return source_; }
    const Expansion& expansion() const { return x_; }
    /// Diagnostics of the check phase; empty when the program is valid.
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }
    /// Core program used for the module graph.
    const ModularProgram& modules() const { return modules_; }

private:
    std::string source_;
    Expansion x_;
    std::vector<Diagnostic> diagnostics_;
    ModularProgram modules_;
};

/// {"moduleGraph": ..., "diagnostics": [...]}; 400 with moduleGraph null when
/// the source does not parse. `compiled` receives the program when it parsed.
Reply compile_reply(std::string source, std::shared_ptr<const Compiled>* compiled = nullptr);

Reply check_reply(const Compiled& c);
Reply module_graph_reply(const Compiled& c);

/// Graph JSON, or 404 {"error": "TOO_LARGE", "nodes": count, "cap": cap}
/// when the program has more than `cap` models.
Reply model_graph_reply(const Compiled& c, std::size_t cap = kDefaultGraphCap);
/// {"nodes": [ids]} without edges.
Reply model_nodes_reply(const Compiled& c, std::size_t cap = kDefaultGraphCap);

/// {"selection", "program"} or 400 {"selection", "violations"}; both carry
/// "compatibleModels", the model ids agreeing with every binding of the
/// (possibly partial) selection, or null above `cap`.
Reply concretize_reply(const Compiled& c, const std::string& selection, std::size_t cap = kDefaultGraphCap);
/// {"selection", "neighbors": [ids]}.
Reply neighbors_reply(const Compiled& c, const std::string& selection);
/// {"implementations": {"hole": count, ...}, "collectionMembers": n, "nodes": count}.
Reply count_reply(const Compiled& c);

/// Labels and notes per model, kept as {"models": {"<selection>": {"label",
/// "notes"}}} in a JSON file.
class AnnotationStore {
public:
    /// `<dir>/<stem>.annotations.json` for a source path.
    static std::string path_for(const std::string& source_path);

    explicit AnnotationStore(std::string path) : path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    /// The whole file, or one model's entry (404 when absent).
    Reply get(const std::optional<std::string>& selection = std::nullopt, const Compiled* c = nullptr) const;
    /// Merges {"models": {...}} or a single {"selection", "label", "notes"}
    /// into the file. Keys are canonicalized by `c` when given.
    Reply put(const std::string& body, const Compiled* c = nullptr);

private:
    std::string path_;
    mutable std::mutex mu_;
};

}  // namespace mstan
