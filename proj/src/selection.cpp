#include "mstan/selection.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "mstan/errors.hpp"

namespace mstan {

namespace {

struct Piece {
    std::string text;
    int col = 1;
};

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string squeeze(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    }
    return out;
}

// Splits on `sep` outside (), [] and <> nesting.
std::vector<Piece> split_top(std::string_view s, char sep, int base_col) {
    std::vector<Piece> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        char c = i < s.size() ? s[i] : sep;
        if (c == '(' || c == '[' || c == '<') ++depth;
        if (c == ')' || c == ']' || c == '>') {
            if (--depth < 0)
                throw ParseError({1, base_col + static_cast<int>(i), 1},
                                 std::string("unbalanced '") + c + "' in selection");
        }
        if (c == sep && depth == 0) {
            out.push_back({std::string(s.substr(start, i - start)), base_col + static_cast<int>(start)});
            start = i + 1;
        }
    }
    if (depth != 0) throw ParseError({1, base_col, static_cast<int>(s.size())}, "unbalanced brackets in selection");
    return out;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("_[](),<>*^.").find(c) != std::string_view::npos;
    });
}

}  // namespace

std::string canonical(const Selection& selection) {
    std::string out;
    for (const auto& [hole, impl] : selection) {
        if (!out.empty()) out += ',';
        out += hole;
        out += ':';
        out += impl;
    }
    return out;
}

std::string ImplRef::text() const {
    if (!subset) return name;
    std::string out = "[";
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out += ',';
        out += members[i];
    }
    return out + "]";
}

const Binding* SelectionSpec::find(std::string_view hole) const {
    for (const auto& b : bindings) {
        if (b.hole == hole) return &b;
    }
    return nullptr;
}

std::string SelectionSpec::text() const {
    std::vector<const Binding*> sorted;
    for (const auto& b : bindings) sorted.push_back(&b);
    std::sort(sorted.begin(), sorted.end(),
              [](const Binding* a, const Binding* b) { return a->hole < b->hole; });
    std::string out;
    for (const auto* b : sorted) {
        if (!out.empty()) out += ',';
        out += b->hole + ":" + b->impl.text();
    }
    return out;
}

SelectionSpec parse_selection(std::string_view text) {
    SelectionSpec spec;
    if (trim(text).empty()) return spec;
    std::set<std::string> seen;
    for (const auto& piece : split_top(text, ',', 1)) {
        Span span{1, piece.col, static_cast<int>(piece.text.size())};
        auto parts = split_top(piece.text, ':', piece.col);
        if (parts.size() != 2) throw ParseError(span, "expected 'hole:implementation'", {":"});
        Binding b;
        b.hole = squeeze(parts[0].text);
        std::string impl = trim(parts[1].text);
        if (!valid_name(b.hole)) throw ParseError(span, "malformed hole name '" + b.hole + "'");
        if (impl.empty()) throw ParseError(span, "missing implementation for '" + b.hole + "'");
        if (impl.front() == '[') {
            if (impl.back() != ']') throw ParseError(span, "unterminated implementation list", {"]"});
            b.impl.subset = true;
            std::string inner = impl.substr(1, impl.size() - 2);
            if (!trim(inner).empty()) {
                for (const auto& m : split_top(inner, ',', parts[1].col + 1)) {
                    std::string member = squeeze(m.text);
                    if (!valid_name(member))
                        throw ParseError(span, "malformed collection member '" + member + "'");
                    b.impl.members.push_back(member);
                }
            }
        } else {
            b.impl.name = squeeze(impl);
            if (!valid_name(b.impl.name))
                throw ParseError(span, "malformed implementation name '" + b.impl.name + "'");
        }
        if (!seen.insert(b.hole).second)
            throw ParseError(span, "hole '" + b.hole + "' bound more than once");
        spec.bindings.push_back(std::move(b));
    }
    return spec;
}

Selection parse_core_selection(std::string_view text) {
    Selection out;
    for (const auto& b : parse_selection(text).bindings) {
        if (b.impl.subset)
            throw ParseError({1, 1, 0}, "collection subsets are not allowed in a core selection");
        out[b.hole] = b.impl.name;
    }
    return out;
}

SelectionSpec to_spec(const Selection& selection) {
    SelectionSpec spec;
    for (const auto& [hole, impl] : selection) spec.bindings.push_back({hole, {impl, false, {}}});
    return spec;
}

}  // namespace mstan
