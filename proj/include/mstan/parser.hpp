#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mstan/ast.hpp"
#include "mstan/selection.hpp"

namespace mstan {

struct SourceProgram {
    std::string text;
    std::optional<std::string> path;
};

/// Parses a modular program: host blocks in grammar order followed by any
/// number of `module` implementations. Throws ParseError with the location
/// and the set of expected tokens.
Ast parse(std::string_view source);
inline Ast parse(const SourceProgram& source) { return parse(source.text); }

/// Reads a source file; throws std::runtime_error when it cannot be opened.
SourceProgram read_source(const std::string& path);

/// Built-in functions whose names start with an upper-case letter and must
/// therefore not be mistaken for holes.
bool is_uppercase_builtin(std::string_view name);

}  // namespace mstan
