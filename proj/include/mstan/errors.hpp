#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mstan/ast.hpp"

namespace mstan {

/// A located message produced by any compiler phase.
struct Diagnostic {
    std::string code;
    Span span;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

std::string to_text(const Diagnostic& d);

class ParseError : public std::runtime_error {
public:
    ParseError(Span span, std::string message, std::vector<std::string> expected = {});

    const Span& span() const { return span_; }
    const std::vector<std::string>& expected() const { return expected_; }
    Diagnostic diagnostic() const;

private:
    Span span_;
    std::vector<std::string> expected_;
};

/// Carries one or more diagnostics out of a phase that cannot continue.
class CompileError : public std::runtime_error {
public:
    explicit CompileError(std::vector<Diagnostic> diagnostics);
    CompileError(std::string code, std::string message, Span span = {});

    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }
    const std::string& code() const { return diagnostics_.front().code; }

private:
    std::vector<Diagnostic> diagnostics_;
};

}  // namespace mstan
