#include "mstan/ast.hpp"

#include <algorithm>

namespace mstan {

namespace {

constexpr std::array<std::string_view, 7> kBlockNames = {
    "functions",  "data",  "transformed data",     "parameters",
    "transformed parameters", "model", "generated quantities",
};

}  // namespace

std::string_view block_name(BlockKind kind) { return kBlockNames[static_cast<int>(kind)]; }

std::optional<BlockKind> block_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kBlockNames.size(); ++i) {
        if (kBlockNames[i] == name) return static_cast<BlockKind>(i);
    }
    return std::nullopt;
}

bool HoleRef::is_plain() const {
    return operands.size() == 1 && !operands[0].indexed && !operands[0].exponent && !instance &&
           !collection;
}

// Spans are deliberately excluded: structural equality is what the
// round-trip law talks about.
bool Expr::operator==(const Expr& o) const {
    return kind == o.kind && text == o.text && args == o.args && hole == o.hole &&
           prelude == o.prelude && lhs_arg == o.lhs_arg;
}

bool Stmt::operator==(const Stmt& o) const {
    return kind == o.kind && type == o.type && name == o.name && names == o.names && op == o.op &&
           exprs == o.exprs && params == o.params && void_return == o.void_return &&
           body == o.body && orelse == o.orelse;
}

bool FieldDecl::operator==(const FieldDecl& o) const {
    return name == o.name && params == o.params && lhs_param == o.lhs_param && body == o.body &&
           ret == o.ret;
}

bool ImplDecl::operator==(const ImplDecl& o) const {
    return impl_name == o.impl_name && hole_name == o.hole_name &&
           index_style == o.index_style && index_params == o.index_params &&
           append == o.append && named_fields == o.named_fields && fields == o.fields;
}

const FieldDecl* ImplDecl::find_field(std::string_view name) const {
    for (const auto& f : fields) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

const Block* Ast::find_block(BlockKind kind) const {
    for (const auto& b : base) {
        if (b.kind == kind) return &b;
    }
    return nullptr;
}

Block& Ast::ensure_block(BlockKind kind) {
    auto it = std::find_if(base.begin(), base.end(),
                           [&](const Block& b) { return static_cast<int>(b.kind) >= static_cast<int>(kind); });
    if (it != base.end() && it->kind == kind) return *it;
    Block b;
    b.kind = kind;
    return *base.insert(it, std::move(b));
}

Expr make_int(long value) {
    Expr e;
    e.kind = Expr::Kind::Int;
    e.text = std::to_string(value);
    return e;
}

Expr make_var(std::string name) {
    Expr e;
    e.kind = Expr::Kind::Var;
    e.text = std::move(name);
    return e;
}

Expr make_call(std::string callee, std::vector<Expr> args) {
    Expr e;
    e.kind = Expr::Kind::Call;
    e.text = std::move(callee);
    e.args = std::move(args);
    return e;
}

Expr make_hole_call(std::string hole, std::vector<Expr> args, std::string field) {
    Expr e;
    e.kind = Expr::Kind::Hole;
    HoleRef ref;
    HoleOperand op;
    op.name = hole;
    ref.operands.push_back(std::move(op));
    ref.field = std::move(field);
    e.hole = std::move(ref);
    e.text = std::move(hole);
    e.args = std::move(args);
    return e;
}

}  // namespace mstan
