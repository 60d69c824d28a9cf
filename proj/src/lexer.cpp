#include "mstan/lexer.hpp"

#include <array>
#include <cctype>

#include "mstan/errors.hpp"

namespace mstan {

namespace {

constexpr std::array<std::string_view, 16> kMultiPunct = {
    ".*=", "./=", "..", ".*", "./", ".^", "+=", "-=", "*=", "/=",
    "<=",  ">=",  "==", "!=", "&&", "||",
};

constexpr std::string_view kSinglePunct = "{}()[]<>,;:|.+-*/%^'~=!?\\";

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    int col = 1;
    bool space = false;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };

    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            space = true;
            continue;
        }
        if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
            while (i < src.size() && src[i] != '\n') advance(1);
            space = true;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
            Span start{line, col, 2};
            advance(2);
            while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance(1);
            if (i + 1 >= src.size()) throw ParseError(start, "unterminated block comment");
            advance(2);
            space = true;
            continue;
        }

        Token tok;
        tok.span = {line, col, 0};
        tok.space_before = space;
        space = false;
        std::size_t start = i;
        tok.offset = i;

        if (ident_start(c)) {
            while (i < src.size() && ident_char(src[i])) advance(1);
            tok.kind = Tok::Ident;
        } else if (digit(c) || (c == '.' && i + 1 < src.size() && digit(src[i + 1]) &&
                                (out.empty() || out.back().text != "."))) {
            bool real = false;
            while (i < src.size() && digit(src[i])) advance(1);
            if (i < src.size() && src[i] == '.' && !(i + 1 < src.size() && src[i + 1] == '.')) {
                real = true;
                advance(1);
                while (i < src.size() && digit(src[i])) advance(1);
            }
            if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
                if (j < src.size() && digit(src[j])) {
                    real = true;
                    advance(j - i);
                    while (i < src.size() && digit(src[i])) advance(1);
                }
            }
            tok.kind = real ? Tok::Real : Tok::Int;
        } else if (c == '"') {
            advance(1);
            while (i < src.size() && src[i] != '"' && src[i] != '\n') advance(1);
            if (i >= src.size() || src[i] != '"')
                throw ParseError(tok.span, "unterminated string literal");
            advance(1);
            tok.kind = Tok::String;
        } else {
            std::string_view rest = src.substr(i);
            std::size_t len = 0;
            for (auto p : kMultiPunct) {
                if (rest.substr(0, p.size()) == p) {
                    len = p.size();
                    break;
                }
            }
            if (len == 0 && kSinglePunct.find(c) != std::string_view::npos) len = 1;
            if (len == 0) {
                throw ParseError(tok.span, std::string("unexpected character '") + c + "'");
            }
            advance(len);
            tok.kind = Tok::Punct;
        }
        tok.text = std::string(src.substr(start, i - start));
        if (tok.kind == Tok::String) tok.text = tok.text.substr(1, tok.text.size() - 2);
        tok.span.len = static_cast<int>(i - start);
        out.push_back(std::move(tok));
    }
    Token end;
    end.kind = Tok::End;
    end.span = {line, col, 0};
    end.offset = src.size();
    out.push_back(end);
    return out;
}

}  // namespace mstan
