#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "mstan/errors.hpp"
#include "mstan/parser.hpp"
#include "mstan/search.hpp"
#include "mstan/server.hpp"
#include "mstan/service.hpp"

using namespace mstan;

namespace {

enum Exit { kOk = 0, kDiagnostics = 1, kIoError = 2 };

struct Options {
    std::string file;
    std::string selection;
    std::string out;
    std::string format = "json";
    std::string start;
    std::string scorer_cmd;
    std::string host = "127.0.0.1";
    bool json = false;
    bool nodes_only = false;
    std::size_t cap = kDefaultGraphCap;
    int timeout = 0;
    int jobs = 1;
    int port = 8080;
};

// Thrown for unreadable inputs and unwritable outputs.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit(const Options& o, std::string text) {
    if (!text.empty() && text.back() != '\n') text += '\n';
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(o.out);
    if (!f) throw IoError("cannot write " + o.out);
    f << text;
}

int report(const Options& o, const std::vector<Diagnostic>& ds) {
    if (o.json) {
        std::cerr << error_reply(400, ds).body << "\n";
    } else {
        std::cerr << diagnostics_text(ds);
    }
    return kDiagnostics;
}

// Prints a successful reply, or its body to stderr.
int finish(const Options& o, const Reply& r) {
    if (!r.ok()) {
        std::cerr << r.body << "\n";
        return kDiagnostics;
    }
    emit(o, r.body);
    return kOk;
}

std::unique_ptr<Compiled> load(const Options& o) {
    std::string text;
    try {
        text = read_source(o.file).text;
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
    return std::make_unique<Compiled>(std::move(text));
}

int cmd_check(const Options& o) {
    auto c = load(o);
    if (!c->diagnostics().empty()) return report(o, c->diagnostics());
    if (o.json) emit(o, check_reply(*c).body);
    return kOk;
}

int cmd_concretize(const Options& o) {
    auto c = load(o);
    if (o.json) return finish(o, concretize_reply(*c, o.selection));
    try {
        emit(o, c->expansion().concretize(c->expansion().normalize(parse_selection(o.selection))));
        return kOk;
    } catch (const ParseError& e) {
        return report(o, {e.diagnostic()});
    } catch (const CompileError& e) {
        return report(o, e.diagnostics());
    }
}

int cmd_graph(const Options& o) {
    auto c = load(o);
    if (o.format == "json") return finish(o, o.nodes_only ? model_nodes_reply(*c, o.cap) : model_graph_reply(*c, o.cap));
    Reply r = o.nodes_only ? model_nodes_reply(*c, o.cap) : model_graph_reply(*c, o.cap);
    if (!r.ok()) return finish(o, r);
    ModelGraphResult g;
    if (o.nodes_only) {
        // the reply holds ids only; dot output needs the bindings back
        for (const auto& id : nlohmann::json::parse(r.body).at("nodes")) {
            Selection s;
            for (const auto& b : parse_selection(id.get<std::string>()).bindings) s[b.hole] = b.impl.text();
            g.nodes.push_back(std::move(s));
        }
    } else {
        g = graph_from_json(r.body);
    }
    emit(o, graph_dot(g));
    return kOk;
}

int cmd_neighbors(const Options& o) { return finish(o, neighbors_reply(*load(o), o.selection)); }

int cmd_module_graph(const Options& o) {
    auto c = load(o);
    if (o.format == "dot") {
        emit(o, module_graph_dot(module_graph(c->modules())));
        return kOk;
    }
    return finish(o, module_graph_reply(*c));
}

int cmd_count(const Options& o) { return finish(o, count_reply(*load(o))); }

int cmd_search(const Options& o) {
    auto c = load(o);
    const Expansion& x = c->expansion();
    SelectionSpec start;
    try {
        start = o.start.empty() ? default_start(x) : x.normalize(parse_selection(o.start));
    } catch (const ParseError& e) {
        return report(o, {e.diagnostic()});
    } catch (const CompileError& e) {
        return report(o, e.diagnostics());
    }
    Scorer scorer(o.scorer_cmd.empty() ? parameter_count_scorer() : external_scorer({o.scorer_cmd, o.timeout}));
    SearchTrace t = greedy_search(x, start, scorer, o.jobs);
    emit(o, trace_json(t));
    if (t.error) {
        std::cerr << *t.error << "\n";
        return kDiagnostics;
    }
    return kOk;
}

Server* g_server = nullptr;

int cmd_serve(const Options& o) {
    std::unique_ptr<Server> server;
    try {
        server = std::make_unique<Server>(ServerOptions{o.file, o.cap});
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
    int port = server->bind(o.host, o.port);
    if (port < 0) throw IoError("cannot listen on " + o.host + ":" + std::to_string(o.port));
    std::cerr << "serving " << server->source_path() << " on http://" << o.host << ":" << port << "\n";
    g_server = server.get();
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    bool ok = server->run();
    g_server = nullptr;
    return ok ? kOk : kIoError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modular Stan compiler"};
    app.require_subcommand(1);
    Options o;

    auto file_arg = [&](CLI::App* sub) { sub->add_option("file", o.file, "modular program")->required(); };
    auto out_opt = [&](CLI::App* sub) { sub->add_option("-o,--output", o.out, "write to a file instead of stdout"); };
    auto json_flag = [&](CLI::App* sub) { sub->add_flag("--json", o.json, "JSON output and diagnostics"); };
    auto cap_opt = [&](CLI::App* sub) {
        sub->add_option("--cap", o.cap, "largest model graph to materialize")->capture_default_str();
    };

    auto* check = app.add_subcommand("check", "parse and validate a program");
    file_arg(check);
    json_flag(check);
    out_opt(check);

    auto* concretize = app.add_subcommand("concretize", "print the program picked by a selection");
    file_arg(concretize);
    concretize->add_option("selection", o.selection, "e.g. Mean:normal,Stddev:lognormal")->required();
    json_flag(concretize);
    out_opt(concretize);

    auto* graph = app.add_subcommand("graph", "model graph");
    file_arg(graph);
    graph->add_flag("--nodes-only", o.nodes_only, "list models without edges");
    graph->add_option("--format", o.format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
    cap_opt(graph);
    out_opt(graph);

    auto* neighbors = app.add_subcommand("neighbors", "models one substitution away from a selection");
    file_arg(neighbors);
    neighbors->add_option("selection", o.selection)->required();
    out_opt(neighbors);

    auto* modules = app.add_subcommand("module-graph", "holes and implementations");
    file_arg(modules);
    modules->add_option("--format", o.format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
    out_opt(modules);

    auto* count = app.add_subcommand("count", "implementation and model counts");
    file_arg(count);
    out_opt(count);

    auto* search = app.add_subcommand("search", "greedy search over the model graph");
    file_arg(search);
    search->add_option("--start", o.start, "starting selection (default: first implementation of every hole)");
    search->add_option("--scorer-cmd", o.scorer_cmd,
                       "scoring command; {file} is replaced by the program path (default: parameter count)");
    search->add_option("--timeout", o.timeout, "seconds per scorer run");
    search->add_option("--jobs", o.jobs, "scorer runs in parallel")->check(CLI::PositiveNumber);
    out_opt(search);

    auto* serve = app.add_subcommand("serve", "HTTP service for the explorer");
    serve->add_option("path", o.file, "program or workspace directory")->required();
    serve->add_option("--port", o.port)->capture_default_str();
    serve->add_option("--host", o.host)->capture_default_str();
    cap_opt(serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kIoError;
    }

    try {
        if (*check) return cmd_check(o);
        if (*concretize) return cmd_concretize(o);
        if (*graph) return cmd_graph(o);
        if (*neighbors) return cmd_neighbors(o);
        if (*modules) return cmd_module_graph(o);
        if (*count) return cmd_count(o);
        if (*search) return cmd_search(o);
        if (*serve) return cmd_serve(o);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const ParseError& e) {
        return report(o, {e.diagnostic()});
    } catch (const CompileError& e) {
        return report(o, e.diagnostics());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDiagnostics;
    }
    return kIoError;
}
