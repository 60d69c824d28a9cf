#include "mstan/server.hpp"

#include <filesystem>
#include <httplib.h>
#include <json.hpp>
#include <mutex>
#include <stdexcept>

#include "mstan/errors.hpp"
#include "mstan/parser.hpp"

namespace mstan {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string resolve_source(const std::string& path) {
    if (!fs::is_directory(path)) return path;
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".mstan") found.push_back(e.path());
    }
    if (found.empty()) throw std::runtime_error("no .mstan file in " + path);
    std::sort(found.begin(), found.end());
    return found.front().string();
}

void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
}

Reply bad_request(const std::string& message) { return error_reply(400, {{"BAD_REQUEST", {}, message}}); }

// The string field `key` of a JSON request body.
std::optional<std::string> body_field(const std::string& body, const std::string& key, Reply& error) {
    try {
        auto j = nlohmann::json::parse(body);
        if (j.is_object() && j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
        error = bad_request("expected a JSON object with a string \"" + key + "\"");
    } catch (const std::exception& e) {
        error = bad_request(std::string("invalid JSON: ") + e.what());
    }
    return std::nullopt;
}

}  // namespace

struct Server::Impl {
    ServerOptions options;
    std::string source_path;
    AnnotationStore annotations;
    httplib::Server http;
    mutable std::mutex mu;
    std::shared_ptr<const Compiled> compiled;

    Impl(ServerOptions o, std::string path)
        : options(std::move(o)), source_path(path), annotations(AnnotationStore::path_for(path)) {}

    std::shared_ptr<const Compiled> snapshot() const {
        std::lock_guard<std::mutex> lock(mu);
        return compiled;
    }

    void routes() {
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
        http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        http.Get("/source", [this](const httplib::Request&, httplib::Response& res) {
            send(res, {200, ordered_json{{"path", source_path}, {"source", snapshot()->source()}}.dump()});
        });
        http.Post("/compile", [this](const httplib::Request& req, httplib::Response& res) {
            Reply err;
            auto source = body_field(req.body, "source", err);
            if (!source) return send(res, err);
            std::shared_ptr<const Compiled> c;
            Reply r = compile_reply(*source, &c);
            if (c && c->diagnostics().empty()) {
                std::lock_guard<std::mutex> lock(mu);
                compiled = c;
            }
            send(res, r);
        });
        http.Get("/module-graph", [this](const httplib::Request&, httplib::Response& res) {
            send(res, module_graph_reply(*snapshot()));
        });
        http.Get("/model-graph", [this](const httplib::Request&, httplib::Response& res) {
            send(res, model_graph_reply(*snapshot(), options.cap));
        });
        http.Post("/concretize", [this](const httplib::Request& req, httplib::Response& res) {
            Reply err;
            auto sel = body_field(req.body, "selection", err);
            send(res, sel ? concretize_reply(*snapshot(), *sel, options.cap) : err);
        });
        http.Post("/neighbors", [this](const httplib::Request& req, httplib::Response& res) {
            Reply err;
            auto sel = body_field(req.body, "selection", err);
            send(res, sel ? neighbors_reply(*snapshot(), *sel) : err);
        });
        http.Get("/annotations", [this](const httplib::Request& req, httplib::Response& res) {
            std::optional<std::string> model;
            if (req.has_param("model")) model = req.get_param_value("model");
            auto c = snapshot();
            send(res, annotations.get(model, c.get()));
        });
        http.Put("/annotations", [this](const httplib::Request& req, httplib::Response& res) {
            auto c = snapshot();
            send(res, annotations.put(req.body, c.get()));
        });
    }
};

Server::Server(ServerOptions options) {
    std::string path = resolve_source(options.path);
    impl_ = std::make_unique<Impl>(std::move(options), path);
    std::string text = read_source(path).text;
    std::shared_ptr<const Compiled> c;
    Reply r = compile_reply(text, &c);
    if (!c) throw std::runtime_error("cannot compile " + path + ": " + r.body);
    impl_->compiled = c;
    impl_->routes();
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
    if (port == 0) return impl_->http.bind_to_any_port(host);
    return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool Server::run() { return impl_->http.listen_after_bind(); }

void Server::stop() {
    if (impl_) impl_->http.stop();
}

const std::string& Server::source_path() const { return impl_->source_path; }

std::shared_ptr<const Compiled> Server::current() const { return impl_->snapshot(); }

}  // namespace mstan
