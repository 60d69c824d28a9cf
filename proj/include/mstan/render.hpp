#pragma once

#include <string>

#include "mstan/ast.hpp"
#include "mstan/parser.hpp"

namespace mstan {

/// Canonical text: two-space indentation, one statement per line, blocks in
/// grammar order, comments dropped. Always braces loop and branch bodies.
std::string render(const Ast& ast);
inline SourceProgram render_program(const Ast& ast) { return {render(ast), std::nullopt}; }

std::string render_expr(const Expr& e);
std::string render_stmt(const Stmt& s, int indent = 0);
std::string render_type(const TypeSpec& t);
std::string render_impl(const ImplDecl& impl);

/// `Theta*Col[1..100]^C2<1>+.field` without the argument list.
std::string render_hole_ref(const HoleRef& ref);
std::string render_index_spec(const IndexSpec& spec);

}  // namespace mstan
