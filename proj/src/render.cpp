#include "mstan/render.hpp"

#include <sstream>

namespace mstan {

namespace {

int binary_prec(const std::string& op) {
    if (op == "||") return 2;
    if (op == "&&") return 3;
    if (op == "==" || op == "!=") return 4;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 5;
    if (op == "+" || op == "-") return 6;
    if (op == "^" || op == ".^") return 9;
    return 7;  // * / % .* ./ backslash
}

int prec(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Cond:
            return 1;
        case Expr::Kind::Binary:
            return binary_prec(e.text);
        case Expr::Kind::Unary:
            return 8;
        case Expr::Kind::Index:
        case Expr::Kind::Postfix:
            return 10;
        case Expr::Kind::Let:
            return e.args.empty() ? 11 : prec(e.args[0]);
        default:
            return 11;
    }
}

std::string wrap(const Expr& e, int min_prec) {
    std::string s = render_expr(e);
    return prec(e) < min_prec ? "(" + s + ")" : s;
}

std::string join_exprs(const std::vector<Expr>& es, std::size_t from = 0) {
    std::string out;
    for (std::size_t i = from; i < es.size(); ++i) {
        if (i > from) out += ", ";
        out += render_expr(es[i]);
    }
    return out;
}

std::string render_dims(const std::vector<Expr>& dims) {
    std::string out = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ", ";
        const Expr& d = dims[i];
        if (!(d.kind == Expr::Kind::Slice && d.text == ":")) out += render_expr(d);
    }
    return out + "]";
}

std::string render_constraint(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& t : toks) {
        out += t;
        if (t == ",") out += ' ';
    }
    return out;
}

std::string render_item(const IndexItem& item) {
    std::string range = std::to_string(item.lo) + ".." + std::to_string(item.hi);
    switch (item.kind) {
        case IndexItem::Kind::Value:
            return item.value;
        case IndexItem::Kind::Range:
            return range;
        case IndexItem::Kind::Power:
            return "(" + range + ")^" + std::to_string(item.exponent);
        case IndexItem::Kind::Permutation:
            return "(" + range + ")^P" + std::to_string(item.exponent);
        case IndexItem::Kind::Combination:
            return "(" + range + ")^C" + std::to_string(item.exponent);
    }
    return {};
}

std::string render_param(const Param& p) {
    std::string out;
    if (p.data_only) out += "data ";
    if (p.type) out += render_type(*p.type) + " ";
    return out + p.name;
}

std::string render_params(const std::vector<Param>& params, bool lhs_param) {
    std::string out = "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += (i == 1 && lhs_param) ? " | " : ", ";
        out += render_param(params[i]);
    }
    return out + ")";
}

void render_stmts(std::ostringstream& out, const std::vector<Stmt>& stmts, int indent) {
    for (const auto& s : stmts) out << render_stmt(s, indent);
}

std::string pad(int indent) { return std::string(static_cast<std::size_t>(indent) * 2, ' '); }

void render_body(std::ostringstream& out, const std::vector<Stmt>& body, int indent) {
    out << " {\n";
    render_stmts(out, body, indent + 1);
    out << pad(indent) << "}";
}

}  // namespace

std::string render_index_spec(const IndexSpec& spec) {
    std::string out;
    for (std::size_t i = 0; i < spec.items.size(); ++i) {
        if (i) out += ", ";
        out += render_item(spec.items[i]);
    }
    return out;
}

std::string render_hole_ref(const HoleRef& ref) {
    std::string out;
    for (std::size_t i = 0; i < ref.operands.size(); ++i) {
        const auto& op = ref.operands[i];
        if (i) out += "*";
        out += op.name;
        if (op.indexed) out += "[" + render_index_spec(*op.indexed) + "]";
        if (op.exponent) {
            out += "^";
            if (op.exponent->kind == HoleExponent::Kind::Permutation) out += "P";
            if (op.exponent->kind == HoleExponent::Kind::Combination) out += "C";
            out += std::to_string(op.exponent->n);
        }
    }
    if (ref.instance) {
        std::string inner = render_index_spec(*ref.instance);
        out += ref.copy ? "<<" + inner + ">>" : "<" + inner + ">";
    }
    if (ref.collection) out += "+";
    if (!ref.field.empty()) out += "." + ref.field;
    return out;
}

std::string render_type(const TypeSpec& t) {
    std::string out;
    if (t.array_prefix) out += "array" + render_dims(t.array_dims) + " ";
    out += t.base;
    if (!t.constraint.empty()) out += "<" + render_constraint(t.constraint) + ">";
    if (!t.sizes.empty()) out += render_dims(t.sizes);
    // unsized parameter arrays in the old style: real[]
    if (!t.array_prefix && !t.array_dims.empty()) {
        bool unsized = true;
        for (const auto& d : t.array_dims) unsized = unsized && d.kind == Expr::Kind::Slice && d.text == ":";
        if (unsized) out += render_dims(t.array_dims);
    }
    return out;
}

std::string render_expr(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Int:
        case Expr::Kind::Real:
        case Expr::Kind::Var:
            return e.text;
        case Expr::Kind::Str:
            return "\"" + e.text + "\"";
        case Expr::Kind::Call:
            return e.text + "(" + join_exprs(e.args) + ")";
        case Expr::Kind::Hole:
            if (e.lhs_arg && !e.args.empty())
                return render_expr(e.args[0]) + " ~ " + render_hole_ref(*e.hole) + "(" +
                       join_exprs(e.args, 1) + ")";
            return render_hole_ref(*e.hole) + "(" + join_exprs(e.args) + ")";
        case Expr::Kind::Index: {
            std::string out = wrap(e.args[0], 10) + "[";
            for (std::size_t i = 1; i < e.args.size(); ++i) {
                if (i > 1) out += ", ";
                out += render_expr(e.args[i]);
            }
            return out + "]";
        }
        case Expr::Kind::Slice:
            if (e.text == ":") return ":";
            if (e.text == ":b") return ":" + render_expr(e.args[0]);
            if (e.text == "a:") return render_expr(e.args[0]) + ":";
            return render_expr(e.args[0]) + ":" + render_expr(e.args[1]);
        case Expr::Kind::Binary: {
            int p = binary_prec(e.text);
            if (p == 9) return wrap(e.args[0], p + 1) + e.text + wrap(e.args[1], 8);
            return wrap(e.args[0], p) + " " + e.text + " " + wrap(e.args[1], p + 1);
        }
        case Expr::Kind::Unary:
            return e.text + wrap(e.args[0], 8);
        case Expr::Kind::Postfix:
            return wrap(e.args[0], 10) + e.text;
        case Expr::Kind::Array:
            return "{" + join_exprs(e.args) + "}";
        case Expr::Kind::Tuple:
            return "(" + join_exprs(e.args) + ")";
        case Expr::Kind::Cond:
            return wrap(e.args[0], 2) + " ? " + render_expr(e.args[1]) + " : " +
                   wrap(e.args[2], 1);
        case Expr::Kind::Let:
            return e.args.empty() ? std::string() : render_expr(e.args[0]);
    }
    return {};
}

std::string render_stmt(const Stmt& s, int indent) {
    std::ostringstream out;
    out << pad(indent);
    switch (s.kind) {
        case Stmt::Kind::Decl:
            if (s.type.array_prefix) {
                out << render_type(s.type) << " " << s.name;
            } else {
                TypeSpec t = s.type;
                t.array_dims.clear();
                out << render_type(t) << " " << s.name;
                if (!s.type.array_dims.empty()) out << render_dims(s.type.array_dims);
            }
            if (!s.exprs.empty()) out << " = " << render_expr(s.exprs[0]);
            out << ";";
            break;
        case Stmt::Kind::Assign:
            out << render_expr(s.exprs[0]) << " " << s.op << " " << render_expr(s.exprs[1]) << ";";
            break;
        case Stmt::Kind::Tilde:
            out << render_expr(s.exprs[0]) << " ~ " << render_expr(s.exprs[1]) << ";";
            break;
        case Stmt::Kind::Target:
            out << "target += " << render_expr(s.exprs[0]) << ";";
            break;
        case Stmt::Kind::For:
            out << "for (" << s.name << " in " << wrap(s.exprs[0], 2) << ":" << wrap(s.exprs[1], 2)
                << ")";
            render_body(out, s.body, indent);
            break;
        case Stmt::Kind::ForEach:
            out << "for (";
            if (s.names.empty()) {
                out << s.name;
            } else {
                out << "(";
                for (std::size_t i = 0; i < s.names.size(); ++i) out << (i ? ", " : "") << s.names[i];
                out << ")";
            }
            out << " in " << render_expr(s.exprs[0]) << ")";
            render_body(out, s.body, indent);
            break;
        case Stmt::Kind::While:
            out << "while (" << render_expr(s.exprs[0]) << ")";
            render_body(out, s.body, indent);
            break;
        case Stmt::Kind::If: {
            const Stmt* cur = &s;
            while (true) {
                out << "if (" << render_expr(cur->exprs[0]) << ")";
                render_body(out, cur->body, indent);
                if (cur->orelse.empty()) break;
                out << " else ";
                if (cur->orelse.size() == 1 && cur->orelse[0].kind == Stmt::Kind::If) {
                    cur = &cur->orelse[0];
                    continue;
                }
                out << "{\n";
                render_stmts(out, cur->orelse, indent + 1);
                out << pad(indent) << "}";
                break;
            }
            break;
        }
        case Stmt::Kind::ExprStmt:
            out << render_expr(s.exprs[0]) << ";";
            break;
        case Stmt::Kind::Return:
            out << "return";
            if (!s.exprs.empty()) out << " " << render_expr(s.exprs[0]);
            out << ";";
            break;
        case Stmt::Kind::Block:
            out << "{\n";
            render_stmts(out, s.body, indent + 1);
            out << pad(indent) << "}";
            break;
        case Stmt::Kind::Break:
            out << "break;";
            break;
        case Stmt::Kind::Continue:
            out << "continue;";
            break;
        case Stmt::Kind::Print:
        case Stmt::Kind::Reject:
            out << (s.kind == Stmt::Kind::Print ? "print(" : "reject(") << join_exprs(s.exprs)
                << ");";
            break;
        case Stmt::Kind::FunctionDef:
            out << (s.void_return ? std::string("void") : render_type(s.type)) << " " << s.name
                << render_params(s.params, false);
            render_body(out, s.body, indent);
            break;
    }
    out << "\n";
    return out.str();
}

std::string render_impl(const ImplDecl& impl) {
    std::ostringstream out;
    out << "module \"" << impl.impl_name << "\" " << impl.hole_name;
    if (impl.index_style != ImplDecl::IndexStyle::None) {
        bool bracket = impl.index_style == ImplDecl::IndexStyle::Bracket;
        out << (bracket ? "[" : "<");
        for (std::size_t i = 0; i < impl.index_params.size(); ++i)
            out << (i ? ", " : "") << impl.index_params[i];
        out << (bracket ? "]" : ">");
    }
    auto field_body = [&](const FieldDecl& f, int indent) {
        render_stmts(out, f.body, indent);
        if (f.ret) out << pad(indent) << "return " << render_expr(*f.ret) << ";\n";
    };
    auto appends = [&] {
        for (const auto& [kind, stmts] : impl.append) {
            out << pad(1) << block_name(kind) << " {\n";
            render_stmts(out, stmts, 2);
            out << pad(1) << "}\n";
        }
    };
    if (!impl.named_fields) {
        const FieldDecl& f = impl.main_field();
        out << render_params(f.params, f.lhs_param) << " {\n";
        appends();
        field_body(f, 1);
    } else {
        out << " {\n";
        appends();
        for (const auto& f : impl.fields) {
            out << pad(1) << "field " << f.name << render_params(f.params, f.lhs_param) << " {\n";
            field_body(f, 2);
            out << pad(1) << "}\n";
        }
    }
    out << "}\n";
    return out.str();
}

std::string render(const Ast& ast) {
    std::ostringstream out;
    for (BlockKind kind : kBlockOrder) {
        const Block* b = ast.find_block(kind);
        if (!b) continue;
        out << block_name(kind) << " {\n";
        render_stmts(out, b->stmts, 1);
        out << "}\n";
    }
    for (const auto& impl : ast.impls) out << "\n" << render_impl(impl);
    return out.str();
}

}  // namespace mstan
