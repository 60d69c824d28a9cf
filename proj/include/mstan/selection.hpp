#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mstan {

/// Core selection: one implementation name per hole. Iteration order is
/// lexicographic by hole, which is also the canonical string order.
using Selection = std::map<std::string, std::string>;

/// "h1:i1,h2:i2" with bindings sorted by hole name.
std::string canonical(const Selection& selection);

/// Parses a canonical core selection string. Unlike parse_selection this
/// accepts only plain `hole:impl` bindings.
Selection parse_core_selection(std::string_view text);

/// The implementation side of a user-facing binding.
struct ImplRef {
    /// Plain implementation reference, e.g. `normal`, `i[5]`, `(t,1)`.
    std::string name;
    /// Collection subset `[a,b]`; members in the order written.
    bool subset = false;
    std::vector<std::string> members;

    std::string text() const;
    bool operator==(const ImplRef&) const = default;
};

struct Binding {
    std::string hole;  // user key: `h`, `h<<1>>`, `Theta*Col`, `Col^C2`
    ImplRef impl;

    bool operator==(const Binding&) const = default;
};

/// A parsed user selection string, possibly carrying macro payloads.
struct SelectionSpec {
    std::vector<Binding> bindings;

    const Binding* find(std::string_view hole) const;
    /// Bindings sorted by hole, members kept in written order.
    std::string text() const;
    bool operator==(const SelectionSpec&) const = default;
};

/// Parses `hole:impl,hole:[a,b],h<<1>>:i,Theta*Col:[(t,1)]`. Whitespace around
/// separators is ignored. Throws ParseError on malformed text or on a hole
/// bound twice.
SelectionSpec parse_selection(std::string_view text);

/// Plain spec with one binding per core selection entry.
SelectionSpec to_spec(const Selection& selection);

}  // namespace mstan
