#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mstan {

struct Span {
    int line = 0;
    int col = 0;
    int len = 0;

    bool operator==(const Span&) const = default;
};

enum class BlockKind {
    Functions,
    Data,
    TransformedData,
    Parameters,
    TransformedParameters,
    Model,
    GeneratedQuantities,
};

inline constexpr std::array<BlockKind, 7> kBlockOrder = {
    BlockKind::Functions,  BlockKind::Data,
    BlockKind::TransformedData, BlockKind::Parameters,
    BlockKind::TransformedParameters, BlockKind::Model,
    BlockKind::GeneratedQuantities,
};

std::string_view block_name(BlockKind kind);
std::optional<BlockKind> block_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Macro decorations on hole references.
// ---------------------------------------------------------------------------

/// One item of an index specification: a single value (literal or index
/// variable), an inclusive range `lo..hi`, or a range exponent `(lo..hi)^n`,
/// `^Pn`, `^Cn`.
struct IndexItem {
    enum class Kind { Value, Range, Power, Permutation, Combination };
    Kind kind = Kind::Value;
    std::string value;  // Value: integer literal or index variable name
    long lo = 0;
    long hi = 0;
    int exponent = 0;

    bool operator==(const IndexItem&) const = default;
};

/// Comma separated index items; the tuples it denotes are the Cartesian
/// product of the items' tuples.
struct IndexSpec {
    std::vector<IndexItem> items;

    bool operator==(const IndexSpec&) const = default;
};

struct HoleExponent {
    enum class Kind { Power, Permutation, Combination };
    Kind kind = Kind::Power;
    int n = 0;

    bool operator==(const HoleExponent&) const = default;
};

struct HoleOperand {
    std::string name;
    std::optional<IndexSpec> indexed;
    std::optional<HoleExponent> exponent;

    bool operator==(const HoleOperand&) const = default;
};

struct HoleRef {
    std::vector<HoleOperand> operands;  // more than one: hole product
    std::optional<IndexSpec> instance;  // <j> or <<j>>
    bool copy = false;                  // instance uses << >>
    bool collection = false;            // trailing +
    std::string field;                  // .field, empty for the anonymous field

    const std::string& name() const { return operands.front().name; }
    bool is_plain() const;

    bool operator==(const HoleRef&) const = default;
};

// ---------------------------------------------------------------------------
// Expressions and statements.
// ---------------------------------------------------------------------------

struct Stmt;

struct Expr {
    enum class Kind {
        Int,
        Real,
        Str,
        Var,
        Call,
        Hole,
        Index,
        Slice,   // a:b, :b, a:, :   args holds the present bounds, text the shape
        Binary,
        Unary,
        Postfix, // transpose
        Array,   // { a, b }
        Tuple,   // ( a, b )
        Cond,    // c ? a : b
        Let,     // inlined hole: prelude statements, then optional result in args[0]
    };

    Kind kind = Kind::Int;
    std::string text;
    std::vector<Expr> args;
    std::optional<HoleRef> hole;
    std::vector<Stmt> prelude;
    bool lhs_arg = false;  // Hole from `lhs ~ H(...)`: args[0] is the sampled value
    bool resolved = false; // Var already bound by an inlining; not compared
    Span span;

    bool operator==(const Expr& other) const;
};

struct TypeSpec {
    std::string base;                 // int, real, vector, row_vector, matrix, ...
    std::vector<std::string> constraint;  // tokens between < > (opaque)
    std::vector<Expr> sizes;
    std::vector<Expr> array_dims;
    bool array_prefix = false;        // `array[N] real x` rather than `real x[N]`

    bool operator==(const TypeSpec&) const = default;
};

struct Param {
    std::optional<TypeSpec> type;
    std::string name;
    bool data_only = false;

    bool operator==(const Param&) const = default;
};

struct Stmt {
    enum class Kind {
        Decl,
        Assign,
        Tilde,
        Target,
        For,
        ForEach,
        While,
        If,
        ExprStmt,
        Return,
        Block,
        Break,
        Continue,
        Print,
        Reject,
        FunctionDef,
    };

    Kind kind = Kind::ExprStmt;
    TypeSpec type;                   // Decl, FunctionDef return type
    std::string name;                // Decl, For/ForEach variable, FunctionDef name
    std::vector<std::string> names;  // ForEach tuple destructuring
    std::string op;                  // Assign operator
    std::vector<Expr> exprs;
    std::vector<Param> params;       // FunctionDef
    bool void_return = false;        // FunctionDef
    std::vector<Stmt> body;
    std::vector<Stmt> orelse;
    std::string origin;  // hole whose append block contributed the statement; not compared
    Span span;

    bool operator==(const Stmt& other) const;
};

struct Block {
    BlockKind kind = BlockKind::Model;
    std::vector<Stmt> stmts;

    bool operator==(const Block&) const = default;
};

struct FieldDecl {
    std::string name;  // empty = anonymous
    std::vector<Param> params;
    bool lhs_param = false;  // declared as (y | a, b)
    std::vector<Stmt> body;
    std::optional<Expr> ret;
    std::string tag;  // suffix for inlined locals instead of the hole name; not compared
    Span span;

    bool operator==(const FieldDecl& other) const;
};

struct ImplDecl {
    enum class IndexStyle { None, Bracket, Angle };

    std::string impl_name;
    std::string hole_name;
    IndexStyle index_style = IndexStyle::None;
    std::vector<std::string> index_params;
    std::map<BlockKind, std::vector<Stmt>> append;
    bool named_fields = false;
    std::vector<FieldDecl> fields;  // always non-empty
    Span span;

    const FieldDecl& main_field() const { return fields.front(); }
    const FieldDecl* find_field(std::string_view name) const;

    bool operator==(const ImplDecl& other) const;
};

struct Ast {
    std::vector<Block> base;  // grammar order, only present blocks
    std::vector<ImplDecl> impls;

    const Block* find_block(BlockKind kind) const;
    Block& ensure_block(BlockKind kind);

    bool operator==(const Ast&) const = default;
};

// ---------------------------------------------------------------------------
// Construction helpers and traversal.
// ---------------------------------------------------------------------------

Expr make_int(long value);
Expr make_var(std::string name);
Expr make_call(std::string callee, std::vector<Expr> args);
Expr make_hole_call(std::string hole, std::vector<Expr> args, std::string field = {});

/// Calls `fn(expr)` on every expression reachable from `stmt`, including
/// nested statements and Let preludes, in source order (pre-order).
template <class Fn>
void visit_exprs(const Expr& e, Fn&& fn);
template <class Fn>
void visit_exprs(const Stmt& s, Fn&& fn);

template <class Fn>
void visit_exprs(const Expr& e, Fn&& fn) {
    fn(e);
    for (const auto& p : e.prelude) visit_exprs(p, fn);
    for (const auto& a : e.args) visit_exprs(a, fn);
}

template <class Fn>
void visit_exprs(const Stmt& s, Fn&& fn) {
    for (const auto& d : s.type.sizes) visit_exprs(d, fn);
    for (const auto& d : s.type.array_dims) visit_exprs(d, fn);
    for (const auto& e : s.exprs) visit_exprs(e, fn);
    for (const auto& b : s.body) visit_exprs(b, fn);
    for (const auto& b : s.orelse) visit_exprs(b, fn);
}

/// Mutable pre-order rewrite: `fn` may replace the node in place; children
/// of the (possibly replaced) node are visited afterwards.
template <class Fn>
void rewrite_exprs(Expr& e, Fn&& fn);
template <class Fn>
void rewrite_exprs(Stmt& s, Fn&& fn);

template <class Fn>
void rewrite_exprs(Expr& e, Fn&& fn) {
    fn(e);
    for (auto& p : e.prelude) rewrite_exprs(p, fn);
    for (auto& a : e.args) rewrite_exprs(a, fn);
}

template <class Fn>
void rewrite_exprs(Stmt& s, Fn&& fn) {
    for (auto& d : s.type.sizes) rewrite_exprs(d, fn);
    for (auto& d : s.type.array_dims) rewrite_exprs(d, fn);
    for (auto& e : s.exprs) rewrite_exprs(e, fn);
    for (auto& b : s.body) rewrite_exprs(b, fn);
    for (auto& b : s.orelse) rewrite_exprs(b, fn);
}

}  // namespace mstan
