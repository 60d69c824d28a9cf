#include "mstan/parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "mstan/errors.hpp"
#include "mstan/lexer.hpp"

namespace mstan {

namespace {

const std::set<std::string, std::less<>> kTypeKeywords = {
    "int",           "real",          "complex",          "vector",
    "row_vector",    "matrix",        "simplex",          "ordered",
    "positive_ordered", "unit_vector", "cov_matrix",     "corr_matrix",
    "cholesky_factor_cov", "cholesky_factor_corr", "array", "sum_to_zero_vector",
};

const std::set<std::string, std::less<>> kSizedTypes = {
    "vector",      "row_vector",  "matrix",      "simplex",
    "ordered",     "positive_ordered", "unit_vector", "cov_matrix",
    "corr_matrix", "cholesky_factor_cov", "cholesky_factor_corr", "sum_to_zero_vector",
};

const std::set<std::string, std::less<>> kUpperBuiltins = {
    "Phi", "Phi_approx", "inv_Phi",
};

const std::set<std::string, std::less<>> kAssignOps = {
    "=", "+=", "-=", "*=", "/=", ".*=", "./=",
};

bool is_block_keyword(const std::string& s) {
    return s == "functions" || s == "data" || s == "transformed" || s == "parameters" ||
           s == "model" || s == "generated";
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) { prescan(); }

    Ast parse_program() {
        Ast ast;
        int last_block = -1;
        bool seen_module = false;
        while (!at_end()) {
            if (peek_ident("module")) {
                ast.impls.push_back(parse_module());
                seen_module = true;
                continue;
            }
            if (peek().kind == Tok::Ident && is_block_keyword(peek().text)) {
                Token start = peek();
                BlockKind kind = parse_block_name();
                if (seen_module) {
                    throw ParseError(start.span, "host block '" + std::string(block_name(kind)) +
                                                     "' after module implementations");
                }
                int order = static_cast<int>(kind);
                if (order <= last_block) {
                    throw ParseError(start.span, "block '" + std::string(block_name(kind)) +
                                                     "' out of order or repeated");
                }
                last_block = order;
                Block block;
                block.kind = kind;
                block.stmts = parse_block_body(kind);
                ast.base.push_back(std::move(block));
                continue;
            }
            fail("expected a block or module implementation",
                 {"functions", "data", "transformed", "parameters", "model", "generated", "module"});
        }
        return ast;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::set<std::string, std::less<>> holes_;
    std::set<std::string, std::less<>> functions_;

    // ---- token helpers ---------------------------------------------------

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    bool at_end() const { return peek().kind == Tok::End; }
    bool peek_punct(std::string_view p, std::size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
    }
    bool peek_ident(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Ident && peek(ahead).text == s;
    }
    Token take() {
        Token t = peek();
        if (!at_end()) ++pos_;
        return t;
    }
    bool accept(std::string_view p) {
        if (peek_punct(p)) {
            ++pos_;
            return true;
        }
        return false;
    }
    Token expect(std::string_view p) {
        if (!peek_punct(p)) fail("expected '" + std::string(p) + "'", {std::string(p)});
        return take();
    }
    std::string expect_ident(std::string_view what = "identifier") {
        if (peek().kind != Tok::Ident) fail("expected " + std::string(what), {std::string(what)});
        return take().text;
    }
    [[noreturn]] void fail(const std::string& message, std::vector<std::string> expected = {}) const {
        const Token& t = peek();
        std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        throw ParseError(t.span, message + ", found " + found, std::move(expected));
    }
    Span span_from(const Token& start) const {
        const Token& last = toks_[pos_ == 0 ? 0 : pos_ - 1];
        std::size_t end = last.offset + static_cast<std::size_t>(last.span.len);
        Span s = start.span;
        s.len = static_cast<int>(end > start.offset ? end - start.offset : 0);
        return s;
    }

    // ---- prescan ---------------------------------------------------------

    void prescan() {
        for (std::size_t i = 0; i + 2 < toks_.size(); ++i) {
            if (toks_[i].kind == Tok::Ident && toks_[i].text == "module" &&
                toks_[i + 1].kind == Tok::String && toks_[i + 2].kind == Tok::Ident) {
                holes_.insert(toks_[i + 2].text);
            }
        }
    }

    bool is_hole_start() const {
        const Token& t = peek();
        if (t.kind != Tok::Ident) return false;
        if (holes_.count(t.text)) return true;
        if (!peek_punct("(", 1)) return false;
        if (!std::isupper(static_cast<unsigned char>(t.text[0]))) return false;
        return !is_uppercase_builtin(t.text) && !functions_.count(t.text);
    }

    // ---- blocks ----------------------------------------------------------

    BlockKind parse_block_name() {
        Token t = take();
        std::string name = t.text;
        if (name == "transformed") {
            std::string second = expect_ident("'data' or 'parameters'");
            if (second != "data" && second != "parameters")
                throw ParseError(t.span, "unknown block 'transformed " + second + "'",
                                 {"data", "parameters"});
            name += " " + second;
        } else if (name == "generated") {
            std::string second = expect_ident("'quantities'");
            if (second != "quantities")
                throw ParseError(t.span, "unknown block 'generated " + second + "'", {"quantities"});
            name += " " + second;
        }
        auto kind = block_from_name(name);
        if (!kind) throw ParseError(t.span, "unknown block '" + name + "'");
        return *kind;
    }

    std::vector<Stmt> parse_block_body(BlockKind kind) {
        expect("{");
        std::vector<Stmt> stmts;
        while (!peek_punct("}")) {
            if (at_end()) fail("unterminated block", {"}"});
            if (kind == BlockKind::Functions) {
                stmts.push_back(parse_function_def());
                continue;
            }
            Token start = peek();
            Stmt s = parse_stmt();
            if ((kind == BlockKind::Data || kind == BlockKind::Parameters) &&
                s.kind != Stmt::Kind::Decl) {
                throw ParseError(start.span, "only declarations are allowed in the " +
                                                 std::string(block_name(kind)) + " block");
            }
            stmts.push_back(std::move(s));
        }
        expect("}");
        return stmts;
    }

    Stmt parse_function_def() {
        Token start = peek();
        Stmt s;
        s.kind = Stmt::Kind::FunctionDef;
        if (peek_ident("void")) {
            take();
            s.void_return = true;
        } else {
            s.type = parse_type(false);
        }
        s.name = expect_ident("function name");
        functions_.insert(s.name);
        s.params = parse_params(nullptr);
        if (accept(";")) {
            s.span = span_from(start);
            return s;
        }
        expect("{");
        while (!peek_punct("}")) {
            if (at_end()) fail("unterminated function body", {"}"});
            s.body.push_back(parse_stmt());
        }
        expect("}");
        s.span = span_from(start);
        return s;
    }

    // ---- modules ---------------------------------------------------------

    ImplDecl parse_module() {
        Token start = take();  // module
        ImplDecl impl;
        if (peek().kind != Tok::String) fail("expected implementation name string", {"\"name\""});
        impl.impl_name = take().text;
        if (impl.impl_name.empty()) throw ParseError(start.span, "empty implementation name");
        impl.hole_name = expect_ident("hole name");
        if (accept("[")) {
            impl.index_style = ImplDecl::IndexStyle::Bracket;
            impl.index_params = parse_ident_list("]");
        } else if (peek_punct("<")) {
            take();
            impl.index_style = ImplDecl::IndexStyle::Angle;
            impl.index_params = parse_ident_list(">");
        }
        if (peek_punct("(")) {
            FieldDecl field;
            field.params = parse_params(&field.lhs_param);
            expect("{");
            parse_module_items(impl, &field);
            impl.fields.push_back(std::move(field));
        } else if (peek_punct("{")) {
            take();
            impl.named_fields = true;
            parse_module_items(impl, nullptr);
            if (impl.fields.empty())
                throw ParseError(start.span, "module without parameter list must declare fields");
            bool anonymous = std::any_of(impl.fields.begin(), impl.fields.end(),
                                         [](const FieldDecl& f) { return f.name.empty(); });
            if (anonymous && impl.fields.size() > 1)
                throw ParseError(start.span,
                                 "anonymous and named fields cannot be mixed in one module");
            if (anonymous) impl.named_fields = false;
        } else {
            fail("expected '(' or '{' after hole name", {"(", "{"});
        }
        impl.span = span_from(start);
        return impl;
    }

    std::vector<std::string> parse_ident_list(std::string_view close) {
        std::vector<std::string> out;
        if (!peek_punct(close)) {
            do {
                out.push_back(expect_ident("index variable"));
            } while (accept(","));
        }
        expect(close);
        return out;
    }

    bool at_append_block() const {
        const Token& t = peek();
        if (t.kind != Tok::Ident) return false;
        if (t.text == "transformed" || t.text == "generated")
            return peek(1).kind == Tok::Ident && peek_punct("{", 2);
        if (t.text == "functions" || t.text == "parameters" || t.text == "model")
            return peek_punct("{", 1);
        return false;
    }

    // Parses the module body after '{' up to and including the closing '}'.
    // With `field == nullptr` the module uses explicit field declarations.
    void parse_module_items(ImplDecl& impl, FieldDecl* field) {
        while (!peek_punct("}")) {
            if (at_end()) fail("unterminated module implementation", {"}"});
            if (at_append_block()) {
                Token bt = peek();
                BlockKind kind = parse_block_name();
                if (kind == BlockKind::Data)
                    throw ParseError(bt.span, "modules cannot append to the data block");
                if (impl.append.count(kind))
                    throw ParseError(bt.span, "duplicate append block '" +
                                                  std::string(block_name(kind)) + "'");
                impl.append[kind] = parse_block_body(kind);
                continue;
            }
            if (field == nullptr) {
                if (!peek_ident("field")) fail("expected 'field' or an append block", {"field"});
                impl.fields.push_back(parse_field(impl));
                continue;
            }
            if (peek_ident("field"))
                throw ParseError(peek().span, "fields require a module header without parameters");
            if (field->ret) fail("a module may contain at most one return, as its final statement",
                                 {"}"});
            if (peek_ident("return")) {
                take();
                field->ret = parse_expr();
                expect(";");
                continue;
            }
            field->body.push_back(parse_stmt());
        }
        expect("}");
    }

    FieldDecl parse_field(const ImplDecl& impl) {
        Token start = take();  // field
        FieldDecl f;
        if (peek().kind == Tok::Ident) f.name = take().text;
        for (const auto& other : impl.fields) {
            if (other.name == f.name)
                throw ParseError(start.span, "duplicate field '" + f.name + "'");
        }
        f.params = parse_params(&f.lhs_param);
        expect("{");
        while (!peek_punct("}")) {
            if (at_end()) fail("unterminated field", {"}"});
            if (f.ret) fail("a field may contain at most one return, as its final statement", {"}"});
            if (peek_ident("return")) {
                take();
                f.ret = parse_expr();
                expect(";");
                continue;
            }
            f.body.push_back(parse_stmt());
        }
        expect("}");
        f.span = span_from(start);
        return f;
    }

    std::vector<Param> parse_params(bool* lhs_param) {
        expect("(");
        std::vector<Param> params;
        if (!peek_punct(")")) {
            while (true) {
                Param p;
                if (peek_ident("data")) {
                    take();
                    p.data_only = true;
                }
                if (peek().kind == Tok::Ident && kTypeKeywords.count(peek().text) &&
                    peek(1).kind != Tok::Punct) {
                    p.type = parse_type(false);
                } else if (peek().kind == Tok::Ident && kTypeKeywords.count(peek().text) &&
                           (peek_punct("[", 1) || peek_punct("<", 1))) {
                    p.type = parse_type(false);
                }
                p.name = expect_ident("parameter name");
                params.push_back(std::move(p));
                if (accept(",")) continue;
                if (peek_punct("|")) {
                    if (lhs_param == nullptr || params.size() != 1)
                        fail("'|' may only follow the first module argument");
                    take();
                    *lhs_param = true;
                    continue;
                }
                break;
            }
        }
        expect(")");
        return params;
    }

    // ---- types and declarations -----------------------------------------

    TypeSpec parse_type(bool sized) {
        TypeSpec t;
        if (peek_ident("array")) {
            take();
            t.array_prefix = true;
            expect("[");
            t.array_dims = parse_dims(sized);
            TypeSpec elem = parse_type(sized);
            t.base = elem.base;
            t.constraint = elem.constraint;
            t.sizes = std::move(elem.sizes);
            return t;
        }
        if (peek().kind != Tok::Ident || !kTypeKeywords.count(peek().text))
            fail("expected a type", {"int", "real", "vector", "matrix"});
        t.base = take().text;
        if (peek_punct("<")) {
            take();
            int depth = 0;
            while (true) {
                if (at_end()) fail("unterminated type constraint", {">"});
                if (peek_punct(">") && depth == 0) break;
                if (peek_punct("(") || peek_punct("[")) ++depth;
                if (peek_punct(")") || peek_punct("]")) --depth;
                t.constraint.push_back(take().text);
            }
            expect(">");
        }
        if (kSizedTypes.count(t.base) && peek_punct("[")) {
            take();
            t.sizes = parse_dims(sized);
        } else if (!sized && peek_punct("[")) {
            // unsized array parameter type, e.g. real[] or real[,]
            take();
            t.array_dims = parse_dims(false);
        }
        return t;
    }

    // Parses dimension expressions after '[' up to and including ']'.
    std::vector<Expr> parse_dims(bool sized) {
        std::vector<Expr> dims;
        Expr unsized;
        unsized.kind = Expr::Kind::Slice;
        unsized.text = ":";
        if (peek_punct("]")) {
            take();
            dims.push_back(unsized);
            return dims;
        }
        do {
            if (!sized && (peek_punct(",") || peek_punct("]"))) {
                dims.push_back(unsized);
            } else {
                dims.push_back(parse_expr());
            }
        } while (accept(","));
        expect("]");
        return dims;
    }

    Stmt parse_decl() {
        Token start = peek();
        Stmt s;
        s.kind = Stmt::Kind::Decl;
        s.type = parse_type(true);
        s.name = expect_ident("variable name");
        if (accept("[")) {
            if (s.type.array_prefix) fail("array dimensions given twice");
            s.type.array_dims = parse_dims(true);
        }
        if (accept("=")) s.exprs.push_back(parse_expr());
        expect(";");
        s.span = span_from(start);
        return s;
    }

    // ---- statements ------------------------------------------------------

    std::vector<Stmt> parse_body() {
        Stmt s = parse_stmt();
        if (s.kind == Stmt::Kind::Block) return std::move(s.body);
        std::vector<Stmt> out;
        out.push_back(std::move(s));
        return out;
    }

    Stmt parse_stmt() {
        Token start = peek();
        Stmt s;
        if (peek_punct("{")) {
            take();
            s.kind = Stmt::Kind::Block;
            while (!peek_punct("}")) {
                if (at_end()) fail("unterminated block statement", {"}"});
                s.body.push_back(parse_stmt());
            }
            expect("}");
        } else if (peek().kind == Tok::Ident && kTypeKeywords.count(peek().text) &&
                   (peek(1).kind == Tok::Ident || peek_punct("<", 1) || peek_punct("[", 1))) {
            return parse_decl();
        } else if (peek_ident("for")) {
            take();
            expect("(");
            if (accept("(")) {
                s.kind = Stmt::Kind::ForEach;
                do {
                    s.names.push_back(expect_ident("loop variable"));
                } while (accept(","));
                expect(")");
                if (!peek_ident("in")) fail("expected 'in'", {"in"});
                take();
                s.exprs.push_back(parse_expr());
            } else {
                s.name = expect_ident("loop variable");
                if (!peek_ident("in")) fail("expected 'in'", {"in"});
                take();
                s.exprs.push_back(parse_expr());
                if (accept(":")) {
                    s.kind = Stmt::Kind::For;
                    s.exprs.push_back(parse_expr());
                } else {
                    s.kind = Stmt::Kind::ForEach;
                }
            }
            expect(")");
            s.body = parse_body();
        } else if (peek_ident("while")) {
            take();
            s.kind = Stmt::Kind::While;
            expect("(");
            s.exprs.push_back(parse_expr());
            expect(")");
            s.body = parse_body();
        } else if (peek_ident("if")) {
            take();
            s.kind = Stmt::Kind::If;
            expect("(");
            s.exprs.push_back(parse_expr());
            expect(")");
            s.body = parse_body();
            if (peek_ident("else")) {
                take();
                s.orelse = parse_body();
            }
        } else if (peek_ident("return")) {
            take();
            s.kind = Stmt::Kind::Return;
            if (!peek_punct(";")) s.exprs.push_back(parse_expr());
            expect(";");
        } else if (peek_ident("break") || peek_ident("continue")) {
            s.kind = take().text == "break" ? Stmt::Kind::Break : Stmt::Kind::Continue;
            expect(";");
        } else if ((peek_ident("print") || peek_ident("reject")) && peek_punct("(", 1)) {
            s.kind = take().text == "print" ? Stmt::Kind::Print : Stmt::Kind::Reject;
            expect("(");
            if (!peek_punct(")")) {
                do {
                    s.exprs.push_back(parse_expr());
                } while (accept(","));
            }
            expect(")");
            expect(";");
        } else if (peek_ident("target") && peek_punct("+=", 1)) {
            take();
            take();
            s.kind = Stmt::Kind::Target;
            s.exprs.push_back(parse_expr());
            expect(";");
        } else {
            Expr lhs = parse_expr();
            if (accept("~")) {
                Expr dist = parse_distribution();
                if (dist.kind == Expr::Kind::Hole) {
                    dist.args.insert(dist.args.begin(), std::move(lhs));
                    dist.lhs_arg = true;
                    s.kind = Stmt::Kind::ExprStmt;
                    s.exprs.push_back(std::move(dist));
                } else {
                    s.kind = Stmt::Kind::Tilde;
                    s.exprs.push_back(std::move(lhs));
                    s.exprs.push_back(std::move(dist));
                }
                expect(";");
            } else if (peek().kind == Tok::Punct && kAssignOps.count(peek().text)) {
                s.kind = Stmt::Kind::Assign;
                s.op = take().text;
                s.exprs.push_back(std::move(lhs));
                s.exprs.push_back(parse_expr());
                expect(";");
            } else {
                if (lhs.kind != Expr::Kind::Call && lhs.kind != Expr::Kind::Hole)
                    fail("expected a statement", {";", "~", "="});
                s.kind = Stmt::Kind::ExprStmt;
                s.exprs.push_back(std::move(lhs));
                expect(";");
            }
        }
        s.span = span_from(start);
        return s;
    }

    Expr parse_distribution() {
        Token start = peek();
        if (is_hole_start()) return parse_hole();
        std::string name = expect_ident("distribution name");
        Expr e;
        e.kind = Expr::Kind::Call;
        e.text = name;
        e.args = parse_args();
        e.span = span_from(start);
        return e;
    }

    // ---- expressions -----------------------------------------------------

    Expr binary(std::string op, Expr l, Expr r, Span span) {
        Expr e;
        e.kind = Expr::Kind::Binary;
        e.text = std::move(op);
        e.args.push_back(std::move(l));
        e.args.push_back(std::move(r));
        e.span = span;
        return e;
    }

    Expr parse_expr() { return parse_cond(); }

    Expr parse_cond() {
        Token start = peek();
        Expr c = parse_or();
        if (accept("?")) {
            Expr a = parse_expr();
            expect(":");
            Expr b = parse_cond();
            Expr e;
            e.kind = Expr::Kind::Cond;
            e.args = {std::move(c), std::move(a), std::move(b)};
            e.span = span_from(start);
            return e;
        }
        return c;
    }

    template <class Next>
    Expr parse_left_assoc(std::initializer_list<std::string_view> ops, Next next) {
        Token start = peek();
        Expr lhs = (this->*next)();
        while (true) {
            bool matched = false;
            for (auto op : ops) {
                if (peek_punct(op)) {
                    take();
                    Expr rhs = (this->*next)();
                    lhs = binary(std::string(op), std::move(lhs), std::move(rhs), span_from(start));
                    matched = true;
                    break;
                }
            }
            if (!matched) return lhs;
        }
    }

    Expr parse_or() { return parse_left_assoc({"||"}, &Parser::parse_and); }
    Expr parse_and() { return parse_left_assoc({"&&"}, &Parser::parse_eq); }
    Expr parse_eq() { return parse_left_assoc({"==", "!="}, &Parser::parse_cmp); }
    Expr parse_cmp() { return parse_left_assoc({"<=", ">=", "<", ">"}, &Parser::parse_add); }
    Expr parse_add() { return parse_left_assoc({"+", "-"}, &Parser::parse_mul); }
    Expr parse_mul() {
        return parse_left_assoc({"*", "/", "%", ".*", "./", "\\"}, &Parser::parse_unary);
    }

    Expr parse_unary() {
        Token start = peek();
        if (peek_punct("-") || peek_punct("!") || peek_punct("+")) {
            std::string op = take().text;
            Expr operand = parse_unary();
            Expr e;
            e.kind = Expr::Kind::Unary;
            e.text = op;
            e.args.push_back(std::move(operand));
            e.span = span_from(start);
            return e;
        }
        return parse_pow();
    }

    Expr parse_pow() {
        Token start = peek();
        Expr base = parse_postfix();
        if (peek_punct("^") || peek_punct(".^")) {
            std::string op = take().text;
            Expr exponent = parse_unary();
            return binary(op, std::move(base), std::move(exponent), span_from(start));
        }
        return base;
    }

    Expr parse_postfix() {
        Token start = peek();
        Expr e = parse_primary();
        while (true) {
            if (peek_punct("[")) {
                take();
                Expr idx;
                idx.kind = Expr::Kind::Index;
                idx.args.push_back(std::move(e));
                do {
                    idx.args.push_back(parse_index());
                } while (accept(","));
                expect("]");
                idx.span = span_from(start);
                e = std::move(idx);
            } else if (peek_punct("'")) {
                take();
                Expr t;
                t.kind = Expr::Kind::Postfix;
                t.text = "'";
                t.args.push_back(std::move(e));
                t.span = span_from(start);
                e = std::move(t);
            } else {
                return e;
            }
        }
    }

    Expr parse_index() {
        Token start = peek();
        Expr s;
        s.kind = Expr::Kind::Slice;
        if (peek_punct(":")) {
            take();
            if (peek_punct(",") || peek_punct("]")) {
                s.text = ":";
            } else {
                s.text = ":b";
                s.args.push_back(parse_expr());
            }
            s.span = span_from(start);
            return s;
        }
        Expr lo = parse_expr();
        if (!accept(":")) return lo;
        s.args.push_back(std::move(lo));
        if (peek_punct(",") || peek_punct("]")) {
            s.text = "a:";
        } else {
            s.text = "a:b";
            s.args.push_back(parse_expr());
        }
        s.span = span_from(start);
        return s;
    }

    std::vector<Expr> parse_args() {
        expect("(");
        std::vector<Expr> args;
        if (!peek_punct(")")) {
            do {
                args.push_back(parse_expr());
            } while (accept(","));
        }
        expect(")");
        return args;
    }

    Expr parse_primary() {
        Token start = peek();
        Expr e;
        e.span = start.span;
        switch (start.kind) {
            case Tok::Int:
                e.kind = Expr::Kind::Int;
                e.text = take().text;
                return e;
            case Tok::Real:
                e.kind = Expr::Kind::Real;
                e.text = take().text;
                return e;
            case Tok::String:
                e.kind = Expr::Kind::Str;
                e.text = take().text;
                return e;
            case Tok::Ident:
                if (is_hole_start()) return parse_hole();
                e.text = take().text;
                if (peek_punct("(")) {
                    e.kind = Expr::Kind::Call;
                    e.args = parse_args();
                } else {
                    e.kind = Expr::Kind::Var;
                }
                e.span = span_from(start);
                return e;
            case Tok::Punct:
                if (start.text == "(") {
                    take();
                    Expr inner = parse_expr();
                    if (accept(",")) {
                        e.kind = Expr::Kind::Tuple;
                        e.args.push_back(std::move(inner));
                        do {
                            e.args.push_back(parse_expr());
                        } while (accept(","));
                        expect(")");
                        e.span = span_from(start);
                        return e;
                    }
                    expect(")");
                    return inner;
                }
                if (start.text == "{") {
                    take();
                    e.kind = Expr::Kind::Array;
                    if (!peek_punct("}")) {
                        do {
                            e.args.push_back(parse_expr());
                        } while (accept(","));
                    }
                    expect("}");
                    e.span = span_from(start);
                    return e;
                }
                break;
            case Tok::End:
                break;
        }
        fail("expected an expression", {"identifier", "literal", "(", "{"});
    }

    // ---- holes and macro decorations ------------------------------------

    long parse_nonneg_int() {
        if (peek().kind != Tok::Int) fail("expected a non-negative integer literal", {"integer"});
        return std::stol(take().text);
    }

    std::optional<std::pair<IndexItem::Kind, int>> parse_exponent_suffix() {
        // after '^'
        if (peek().kind == Tok::Int) {
            int n = static_cast<int>(std::stol(take().text));
            if (n < 1) fail("exponent must be at least 1");
            return std::make_pair(IndexItem::Kind::Power, n);
        }
        if (peek().kind == Tok::Ident) {
            const std::string& t = peek().text;
            if (t.size() >= 2 && (t[0] == 'P' || t[0] == 'C') &&
                std::all_of(t.begin() + 1, t.end(), [](char c) { return std::isdigit(c); })) {
                int n = std::stoi(t.substr(1));
                if (n < 1) fail("exponent must be at least 1");
                auto kind = t[0] == 'P' ? IndexItem::Kind::Permutation : IndexItem::Kind::Combination;
                take();
                return std::make_pair(kind, n);
            }
        }
        fail("malformed exponent", {"n", "Pn", "Cn"});
    }

    IndexItem parse_index_item() {
        IndexItem item;
        Token start = peek();
        if (peek_punct("(")) {
            take();
            long lo = parse_nonneg_int();
            expect("..");
            long hi = parse_nonneg_int();
            expect(")");
            if (lo > hi) throw ParseError(start.span, "malformed macro range: empty range");
            expect("^");
            auto [kind, n] = *parse_exponent_suffix();
            item.kind = kind;
            item.lo = lo;
            item.hi = hi;
            item.exponent = n;
            return item;
        }
        if (peek().kind == Tok::Ident) {
            item.kind = IndexItem::Kind::Value;
            item.value = take().text;
            return item;
        }
        long lo = parse_nonneg_int();
        if (accept("..")) {
            long hi = parse_nonneg_int();
            if (lo > hi) throw ParseError(start.span, "malformed macro range: empty range");
            item.kind = IndexItem::Kind::Range;
            item.lo = lo;
            item.hi = hi;
            return item;
        }
        item.kind = IndexItem::Kind::Value;
        item.value = std::to_string(lo);
        return item;
    }

    IndexSpec parse_index_spec(std::string_view close) {
        IndexSpec spec;
        if (peek_punct(close)) fail("malformed macro range: empty index list", {"integer"});
        do {
            spec.items.push_back(parse_index_item());
        } while (accept(","));
        expect(close);
        return spec;
    }

    HoleOperand parse_operand() {
        HoleOperand op;
        op.name = expect_ident("hole name");
        while (true) {
            if (peek_punct("[")) {
                if (op.indexed) fail("hole already indexed");
                take();
                op.indexed = parse_index_spec("]");
            } else if (peek_punct("^") && !op.exponent) {
                take();
                auto [kind, n] = *parse_exponent_suffix();
                HoleExponent ex;
                ex.n = n;
                ex.kind = kind == IndexItem::Kind::Power         ? HoleExponent::Kind::Power
                          : kind == IndexItem::Kind::Permutation ? HoleExponent::Kind::Permutation
                                                                 : HoleExponent::Kind::Combination;
                op.exponent = ex;
            } else {
                return op;
            }
        }
    }

    Expr parse_hole() {
        Token start = peek();
        HoleRef ref;
        ref.operands.push_back(parse_operand());
        while (peek_punct("*") && peek(1).kind == Tok::Ident && holes_.count(peek(1).text)) {
            take();
            ref.operands.push_back(parse_operand());
        }
        if (peek_punct("<")) {
            take();
            if (accept("<")) {
                ref.copy = true;
                ref.instance = parse_index_spec(">");
                expect(">");
            } else {
                ref.instance = parse_index_spec(">");
            }
        }
        if (peek_punct("+") && (peek_punct("(", 1) || peek_punct(".", 1))) {
            take();
            ref.collection = true;
        }
        if (accept(".")) ref.field = expect_ident("field name");
        Expr e;
        e.kind = Expr::Kind::Hole;
        e.text = ref.name();
        e.hole = std::move(ref);
        e.args = parse_args();
        e.span = span_from(start);
        return e;
    }
};

}  // namespace

bool is_uppercase_builtin(std::string_view name) { return kUpperBuiltins.count(name) > 0; }

Ast parse(std::string_view source) {
    Parser p(tokenize(source));
    return p.parse_program();
}

SourceProgram read_source(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return SourceProgram{ss.str(), path};
}

}  // namespace mstan
