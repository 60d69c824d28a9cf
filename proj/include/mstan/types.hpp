#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mstan/ast.hpp"

namespace mstan {

/// Structural host type: a base kind plus array dimensions. `Unknown` unifies
/// with anything and is used where the subset cannot tell (e.g. `{}`).
struct Type {
    enum class Base { Int, Real, Complex, Vector, RowVector, Matrix, String, Tuple, Void, Unknown };
    Base base = Base::Unknown;
    int dims = 0;
    std::vector<Type> elems;  // Tuple members

    static Type of(Base b, int dims = 0) { return Type{b, dims, {}}; }
    static Type unknown() { return of(Base::Unknown); }
    static Type void_type() { return of(Base::Void); }

    bool is_void() const { return base == Base::Void; }
    bool is_unknown() const { return base == Base::Unknown && dims == 0; }
    bool is_scalar() const { return dims == 0 && (base == Base::Int || base == Base::Real); }
    bool is_int() const { return dims == 0 && base == Base::Int; }
    bool is_container() const {
        return dims == 0 && (base == Base::Vector || base == Base::RowVector || base == Base::Matrix);
    }

    bool operator==(const Type&) const = default;
};

std::string type_name(const Type& t);
Type type_from_spec(const TypeSpec& spec);

/// Whether a value of type `from` may be used where `to` is expected
/// (int promotes to real and complex; Unknown matches anything).
bool assignable(const Type& to, const Type& from);

/// Least common type, or nullopt when the two types do not unify.
std::optional<Type> join(const Type& a, const Type& b);

Type arithmetic_result(const std::string& op, const Type& l, const Type& r);

/// Result type of a built-in function call, or nullopt for an unknown name.
std::optional<Type> builtin_call(const std::string& name, const std::vector<Type>& args);

/// Whether `name` is a built-in distribution usable on the right of `~`.
bool builtin_distribution(const std::string& name);

}  // namespace mstan
