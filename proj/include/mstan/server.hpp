#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "mstan/service.hpp"

namespace mstan {

struct ServerOptions {
    /// A modular program, or a directory holding one (`*.mstan`, first by name).
    std::string path;
    std::size_t cap = kDefaultGraphCap;
};

/// HTTP front end for one program:
///   GET  /source          {"path", "source"}
///   POST /compile         {"source"} -> compile reply; valid programs replace the served one
///   GET  /module-graph
///   GET  /model-graph
///   POST /concretize      {"selection"}
///   POST /neighbors       {"selection"}
///   GET  /annotations     [?model=<selection>]
///   PUT  /annotations
/// Requests read an immutable snapshot of the program, so they may run
/// concurrently with recompilation.
class Server {
public:
    /// Throws std::runtime_error when the program cannot be read or compiled.
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds to `port` (0: any free port); returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); returns false on a socket error.
    bool run();
    void stop();

    const std::string& source_path() const;
    std::shared_ptr<const Compiled> current() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mstan
