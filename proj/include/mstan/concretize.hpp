#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mstan/ast.hpp"
#include "mstan/program.hpp"
#include "mstan/selection.hpp"

namespace mstan {

/// `name` with every run of characters other than letters, digits and `_`
/// replaced by one `_`, and trailing `_` dropped: `Wind<<1>>` -> `Wind_1`.
std::string sanitize_name(std::string_view name);

/// Replaces the call `site` with an inlined Let expression: `params` are
/// substituted by the call's arguments, locals of `stmts` are renamed with a
/// `_<hole>` suffix, and the Let's result is `ret` (absent for void bodies).
/// Statements are hoisted out of expressions by lower().
void inline_function(Expr& site, const std::string& hole, const std::vector<Stmt>& stmts,
                     const std::vector<Param>& params, const std::optional<Expr>& ret);

/// Fills every site of par(i) (in the base, in other implementations and in
/// already appended statements) with i, appends i's append blocks to the base
/// once, and removes i from the program. Throws CompileError(INTERNAL) if a
/// site names a field that i lacks.
Ast apply_impl(Ast ast, const std::string& hole, const std::string& impl);
ModularProgram apply_impl(const ModularProgram& p, int impl);

/// Left fold of apply_impl over the implementation ids of `p`.
ModularProgram apply_impls(const ModularProgram& p, const std::vector<int>& impls);

/// Hoists Let preludes in front of their enclosing statement and renames
/// hoisted declarations that would collide (`_2`, `_3`, ...).
Ast lower(Ast ast);

/// Base of ApplyImpls(P, sel), lowered, with no implementations. Throws
/// CompileError(INVALID_SELECTION) listing each violation of valid_P.
Ast concretize_ast(const ModularProgram& p, const Selection& sel);
std::string concretize(const ModularProgram& p, const Selection& sel);

}  // namespace mstan
