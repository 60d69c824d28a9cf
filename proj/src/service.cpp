#include "mstan/service.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "mstan/errors.hpp"
#include "mstan/parser.hpp"

namespace mstan {

namespace {

using nlohmann::ordered_json;

ordered_json diag_array(const std::vector<Diagnostic>& ds) { return ordered_json::parse(diagnostics_json(ds)); }

std::vector<Diagnostic> diagnostics_of(const std::exception& e) {
    if (auto* p = dynamic_cast<const ParseError*>(&e)) return {p->diagnostic()};
    if (auto* c = dynamic_cast<const CompileError*>(&e)) return c->diagnostics();
    return {{"INTERNAL", {}, e.what()}};
}

Reply json_reply(int status, const ordered_json& j) { return {status, j.dump()}; }

ModularProgram module_program(const Expansion& x) {
    return x.has_macros() ? x.skeleton().program : ModularProgram(x.user());
}

std::vector<Diagnostic> check_diagnostics(const Expansion& x) { return x.check().diagnostics; }

// Number of models when it is known to be at most `cap`.
std::optional<std::size_t> small_count(const Compiled& c, std::size_t cap, std::string* text = nullptr) {
    std::string nodes = c.expansion().counts().nodes;
    if (text) *text = nodes;
    if (nodes.empty() || !std::all_of(nodes.begin(), nodes.end(), ::isdigit) || nodes.size() > 18) return std::nullopt;
    std::size_t n = std::stoull(nodes);
    if (n > cap) return std::nullopt;
    return n;
}

Reply too_large(const std::string& nodes, std::size_t cap) {
    return json_reply(404, ordered_json{{"error", "TOO_LARGE"},
                                        {"nodes", nodes},
                                        {"cap", cap},
                                        {"message", "the program has " + nodes +
                                                        " models; query neighbors of a selection instead"}});
}

// Binding values of a user-level node: collection sets as `[a,b]`.
bool agrees(const Selection& node, const SelectionSpec& spec) {
    for (const auto& b : spec.bindings) {
        auto it = node.find(b.hole);
        if (it == node.end() || it->second != b.impl.text()) return false;
    }
    return true;
}

}  // namespace

Reply error_reply(int status, const std::vector<Diagnostic>& ds) {
    return json_reply(status, ordered_json{{"diagnostics", diag_array(ds)}});
}

Compiled::Compiled(std::string source)
    : source_(std::move(source)),
      x_(parse(source_)),
      diagnostics_(check_diagnostics(x_)),
      modules_(module_program(x_)) {}

Reply compile_reply(std::string source, std::shared_ptr<const Compiled>* compiled) {
    try {
        auto c = std::make_shared<const Compiled>(std::move(source));
        if (compiled) *compiled = c;
        ordered_json j;
        j["moduleGraph"] = ordered_json::parse(module_graph_json(module_graph(c->modules())));
        j["diagnostics"] = diag_array(c->diagnostics());
        return json_reply(200, j);
    } catch (const std::exception& e) {
        return json_reply(400, ordered_json{{"moduleGraph", nullptr}, {"diagnostics", diag_array(diagnostics_of(e))}});
    }
}

Reply check_reply(const Compiled& c) {
    return error_reply(c.diagnostics().empty() ? 200 : 400, c.diagnostics());
}

Reply module_graph_reply(const Compiled& c) { return {200, module_graph_json(module_graph(c.modules()))}; }

Reply model_graph_reply(const Compiled& c, std::size_t cap) {
    try {
        std::string nodes;
        if (!small_count(c, cap, &nodes)) return too_large(nodes, cap);
        return {200, graph_json(c.expansion().graph())};
    } catch (const std::exception& e) {
        return error_reply(400, diagnostics_of(e));
    }
}

Reply model_nodes_reply(const Compiled& c, std::size_t cap) {
    try {
        const Expansion& x = c.expansion();
        std::vector<std::string> ids;
        if (!x.has_macros()) {
            // no edge bookkeeping, so no cap either
            NodeSet ns = model_graph_nodes_only(c.modules());
            for (const auto& s : ns.selections()) ids.push_back(canonical(s));
        } else {
            std::string nodes;
            if (!small_count(c, cap, &nodes)) return too_large(nodes, cap);
            ids = x.graph().node_ids();
        }
        return json_reply(200, ordered_json{{"nodes", ids}});
    } catch (const std::exception& e) {
        return error_reply(400, diagnostics_of(e));
    }
}

Reply concretize_reply(const Compiled& c, const std::string& selection, std::size_t cap) {
    const Expansion& x = c.expansion();
    ordered_json j;
    j["selection"] = selection;
    SelectionSpec spec;
    bool known = false;
    int status = 200;
    try {
        spec = x.normalize(parse_selection(selection));
        known = true;
        j["selection"] = spec.text();
        j["program"] = x.concretize(spec);
    } catch (const std::exception& e) {
        status = 400;
        j.erase("program");
        j["violations"] = diag_array(diagnostics_of(e));
    }
    try {
        if (small_count(c, cap)) {
            ordered_json ids = ordered_json::array();
            for (const auto& n : x.graph().nodes) {
                if (known && agrees(n, spec)) ids.push_back(canonical(n));
            }
            j["compatibleModels"] = ids;
        } else {
            j["compatibleModels"] = nullptr;
        }
    } catch (const std::exception&) {
        j["compatibleModels"] = nullptr;
    }
    return json_reply(status, j);
}

Reply neighbors_reply(const Compiled& c, const std::string& selection) {
    try {
        const Expansion& x = c.expansion();
        SelectionSpec spec = x.normalize(parse_selection(selection));
        std::vector<std::string> ids;
        for (const auto& n : x.neighbors(spec)) ids.push_back(n.text());
        std::sort(ids.begin(), ids.end());
        return json_reply(200, ordered_json{{"selection", spec.text()}, {"neighbors", ids}});
    } catch (const std::exception& e) {
        return error_reply(400, diagnostics_of(e));
    }
}

Reply count_reply(const Compiled& c) {
    try {
        MacroCounts m = c.expansion().counts();
        ordered_json models = ordered_json::object();
        for (const auto& [k, n] : m.members) models[k] = n.str();
        return json_reply(200, ordered_json{{"implementations", models},
                                            {"collectionMembers", m.collection_members.str()},
                                            {"nodes", m.nodes}});
    } catch (const std::exception& e) {
        return error_reply(400, diagnostics_of(e));
    }
}

std::string AnnotationStore::path_for(const std::string& source_path) {
    std::filesystem::path p(source_path);
    return (p.parent_path() / (p.stem().string() + ".annotations.json")).string();
}

namespace {

ordered_json load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) return ordered_json{{"models", ordered_json::object()}};
    ordered_json j = ordered_json::parse(in);
    if (!j.is_object() || !j.contains("models") || !j["models"].is_object())
        throw CompileError("BAD_ANNOTATIONS", path + " has no \"models\" object");
    return j;
}

std::string annotation_key(const std::string& selection, const Compiled* c) {
    if (!c) return parse_selection(selection).text();
    return c->expansion().normalize(parse_selection(selection)).text();
}

ordered_json annotation_entry(const ordered_json& v) {
    if (!v.is_object()) throw CompileError("BAD_ANNOTATIONS", "an annotation must be an object");
    ordered_json e = ordered_json::object();
    for (const char* k : {"label", "notes"}) {
        if (!v.contains(k)) continue;
        if (!v[k].is_string()) throw CompileError("BAD_ANNOTATIONS", std::string(k) + " must be a string");
        e[k] = v[k];
    }
    return e;
}

}  // namespace

Reply AnnotationStore::get(const std::optional<std::string>& selection, const Compiled* c) const {
    std::lock_guard<std::mutex> lock(mu_);
    try {
        ordered_json j = load_annotations(path_);
        if (!selection) return json_reply(200, j);
        std::string key = annotation_key(*selection, c);
        if (!j["models"].contains(key))
            return error_reply(404, {{"NOT_FOUND", {}, "no annotation for " + key}});
        return json_reply(200, ordered_json{{"selection", key}, {"annotation", j["models"][key]}});
    } catch (const std::exception& e) {
        return error_reply(400, diagnostics_of(e));
    }
}

Reply AnnotationStore::put(const std::string& body, const Compiled* c) {
    std::lock_guard<std::mutex> lock(mu_);
    try {
        ordered_json in;
        try {
            in = ordered_json::parse(body);
        } catch (const std::exception& e) {
            throw CompileError("BAD_REQUEST", std::string("invalid JSON: ") + e.what());
        }
        ordered_json updates = ordered_json::object();
        if (in.is_object() && in.contains("models") && in["models"].is_object()) {
            for (const auto& [k, v] : in["models"].items()) updates[annotation_key(k, c)] = annotation_entry(v);
        } else if (in.is_object() && in.contains("selection") && in["selection"].is_string()) {
            updates[annotation_key(in["selection"].get<std::string>(), c)] = annotation_entry(in);
        } else {
            throw CompileError("BAD_REQUEST", "expected {\"models\": {...}} or {\"selection\", \"label\", \"notes\"}");
        }
        ordered_json j = load_annotations(path_);
        for (const auto& [k, v] : updates.items()) j["models"][k] = v;
        // keep the file in canonical key order
        std::map<std::string, ordered_json> sorted;
        for (const auto& [k, v] : j["models"].items()) sorted[k] = v;
        j["models"] = ordered_json::object();
        for (const auto& [k, v] : sorted) j["models"][k] = v;
        std::string tmp = path_ + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw CompileError("IO_ERROR", "cannot write " + path_);
            out << j.dump(2) << "\n";
        }
        std::filesystem::rename(tmp, path_);
        return json_reply(200, j);
    } catch (const std::exception& e) {
        return error_reply(400, diagnostics_of(e));
    }
}

}  // namespace mstan
