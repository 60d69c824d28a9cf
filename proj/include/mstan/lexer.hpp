#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mstan/ast.hpp"

namespace mstan {

enum class Tok {
    Ident,
    Int,
    Real,
    String,
    Punct,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    Span span;
    std::size_t offset = 0;  // byte offset of the first character
    bool space_before = false;  // whitespace or comment precedes the token
};

/// Splits modular source text into tokens. `//`, `#` and `/* */` comments are
/// dropped. Throws ParseError on an unterminated string or comment or on a
/// character outside the language.
std::vector<Token> tokenize(std::string_view source);

}  // namespace mstan
