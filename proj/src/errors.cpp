#include "mstan/errors.hpp"

#include <sstream>

namespace mstan {

std::string to_text(const Diagnostic& d) {
    std::ostringstream out;
    out << d.span.line << ":" << d.span.col << ": " << d.code << ": " << d.message;
    return out.str();
}

namespace {

std::string with_expected(const std::string& message, const std::vector<std::string>& expected) {
    if (expected.empty()) return message;
    std::string out = message + " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i) out += ", ";
        out += expected[i];
    }
    return out + ")";
}

std::string summarize(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds) {
        if (!out.empty()) out += "; ";
        out += d.code + ": " + d.message;
    }
    return out;
}

}  // namespace

ParseError::ParseError(Span span, std::string message, std::vector<std::string> expected)
    : std::runtime_error(with_expected(message, expected)),
      span_(span),
      expected_(std::move(expected)) {}

Diagnostic ParseError::diagnostic() const { return {"SYNTAX_ERROR", span_, what()}; }

CompileError::CompileError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {
    if (diagnostics_.empty()) diagnostics_.push_back({"INTERNAL", {}, "unknown error"});
}

CompileError::CompileError(std::string code, std::string message, Span span)
    : CompileError(std::vector<Diagnostic>{{std::move(code), span, std::move(message)}}) {}

}  // namespace mstan
