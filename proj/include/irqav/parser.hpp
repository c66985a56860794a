#pragma once

#include <optional>
#include <string>
#include <vector>

#include "irqav/ast.hpp"
#include "irqav/errors.hpp"
#include "irqav/lexer.hpp"

namespace irqav {

// Parsed top-level entities. The parser accepts a restricted C subset:
// int/unsigned/char scalars, fixed-size arrays of scalars, single-level
// structs, pointers to scalar globals, and a statement set of assignment,
// compound assignment, ++/--, if/else, while, for, statement-position calls,
// and return. Anything outside the subset raises UnsupportedConstruct with
// the offending line rather than being silently dropped.

enum class GlobalKind { Scalar, Array, Struct, Pointer };

struct StructField {
    std::string name;
    std::string type;
};

struct RawGlobal {
    std::string name;
    GlobalKind kind = GlobalKind::Scalar;
    std::string type;              // element/base type spelling
    std::string struct_tag;        // for Struct kind
    int array_size = 0;            // for Array kind
    bool has_init = false;
    long long init_value = 0;      // Scalar initializer
    std::optional<Expr> init_expr; // Pointer initializer (&g or cond ? &a : &b)
    int line = 0;
};

struct RawParam {
    std::string name;
    std::string type;
};

struct RawFunction {
    std::string name;
    std::string return_type;
    std::vector<RawParam> params;
    std::vector<Stmt> body;
    bool proto_only = false;
    int line = 0;
    int end_line = 0;
};

struct RawStructDef {
    std::string tag;
    std::vector<StructField> fields;
    int line = 0;
};

struct ParsedUnit {
    std::vector<RawGlobal> globals;
    std::vector<RawFunction> functions;
    std::vector<RawStructDef> structs;
};

namespace detail {

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ParsedUnit parse_unit() {
        ParsedUnit unit;
        while (!at(Tok::End)) {
            skip_qualifiers();
            if (peek_kw("typedef") || peek_kw("enum") || peek_kw("union"))
                throw UnsupportedConstruct(cur().line,
                                           "'" + cur().text + "' is outside the supported C subset");
            if (peek_kw("struct")) {
                parse_struct_or_instance(unit);
                continue;
            }
            parse_typed_toplevel(unit);
        }
        for (auto& fn : unit.functions) number_stmts(fn);
        return unit;
    }

private:
    // --- token helpers -----------------------------------------------------
    const Token& cur() const { return toks_[pos_]; }
    const Token& ahead(std::size_t n) const {
        std::size_t i = pos_ + n;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    bool at(Tok k) const { return cur().kind == k; }
    bool at_punct(const std::string& p) const { return at(Tok::Punct) && cur().text == p; }
    bool peek_kw(const std::string& kw) const { return at(Tok::Ident) && cur().text == kw; }
    Token eat() { return toks_[pos_++]; }
    Token expect_punct(const std::string& p) {
        if (!at_punct(p))
            throw SyntaxError(cur().line, "expected '" + p + "' but found '" + cur().text + "'");
        return eat();
    }
    Token expect_ident() {
        if (!at(Tok::Ident))
            throw SyntaxError(cur().line, "expected identifier but found '" + cur().text + "'");
        return eat();
    }
    void skip_qualifiers() {
        while (peek_kw("volatile") || peek_kw("const") || peek_kw("static")) eat();
    }

    bool at_type_keyword() const {
        return peek_kw("int") || peek_kw("unsigned") || peek_kw("char") || peek_kw("void");
    }

    // Parses a base type spelling; rejects anything outside the subset.
    std::string parse_base_type() {
        if (peek_kw("float") || peek_kw("double"))
            throw UnsupportedConstruct(cur().line, "floating-point types are not supported");
        if (!at_type_keyword())
            throw SyntaxError(cur().line, "expected a type but found '" + cur().text + "'");
        std::string t = eat().text;
        if (t == "unsigned" && peek_kw("int")) {
            eat();
            t = "unsigned int";
        }
        return t;
    }

    // --- top level ---------------------------------------------------------
    void parse_struct_or_instance(ParsedUnit& unit) {
        int line = cur().line;
        eat();  // struct
        Token tag = expect_ident();
        if (at_punct("{")) {
            eat();
            RawStructDef def;
            def.tag = tag.text;
            def.line = line;
            while (!at_punct("}")) {
                skip_qualifiers();
                std::string ftype = parse_base_type();
                if (at_punct("*"))
                    throw UnsupportedConstruct(cur().line, "pointer struct fields are not supported");
                Token fname = expect_ident();
                if (at_punct("["))
                    throw UnsupportedConstruct(cur().line, "array struct fields are not supported");
                def.fields.push_back({fname.text, ftype});
                expect_punct(";");
            }
            eat();  // }
            expect_punct(";");
            unit.structs.push_back(std::move(def));
            return;
        }
        RawGlobal g;
        g.kind = GlobalKind::Struct;
        g.struct_tag = tag.text;
        g.line = line;
        g.name = expect_ident().text;
        if (at_punct("="))
            throw UnsupportedConstruct(cur().line, "struct initializers are not supported");
        expect_punct(";");
        unit.globals.push_back(std::move(g));
    }

    void parse_typed_toplevel(ParsedUnit& unit) {
        int line = cur().line;
        std::string type = parse_base_type();
        bool is_ptr = false;
        if (at_punct("*")) {
            eat();
            is_ptr = true;
            if (at_punct("*"))
                throw UnsupportedConstruct(cur().line, "multi-level pointers are not supported");
        }
        if (at_punct("("))
            throw UnsupportedConstruct(line, "function pointers are not supported");
        Token name = expect_ident();
        if (at_punct("(")) {
            if (is_ptr)
                throw UnsupportedConstruct(line, "functions returning pointers are not supported");
            parse_function(unit, type, name.text, line);
            return;
        }
        parse_global_var(unit, type, name.text, is_ptr, line);
    }

    void parse_global_var(ParsedUnit& unit, const std::string& type, const std::string& name,
                          bool is_ptr, int line) {
        if (type == "void")
            throw SyntaxError(line, "variable '" + name + "' declared void");
        RawGlobal g;
        g.name = name;
        g.type = type;
        g.line = line;
        if (is_ptr) {
            g.kind = GlobalKind::Pointer;
            if (at_punct("=")) {
                eat();
                g.has_init = true;
                g.init_expr = parse_expr();
            }
            expect_punct(";");
            unit.globals.push_back(std::move(g));
            return;
        }
        if (at_punct("[")) {
            eat();
            if (!at(Tok::IntLit))
                throw UnsupportedConstruct(cur().line, "array size must be an integer literal");
            g.array_size = static_cast<int>(eat().value);
            if (g.array_size <= 0)
                throw SyntaxError(line, "array '" + name + "' must have positive size");
            expect_punct("]");
            g.kind = GlobalKind::Array;
            if (at_punct("="))
                throw UnsupportedConstruct(cur().line, "initializer lists are not supported");
            expect_punct(";");
            unit.globals.push_back(std::move(g));
            return;
        }
        g.kind = GlobalKind::Scalar;
        if (at_punct("=")) {
            eat();
            if (at_punct("{"))
                throw UnsupportedConstruct(cur().line, "initializer lists are not supported");
            g.has_init = true;
            g.init_value = parse_const_int();
        }
        expect_punct(";");
        unit.globals.push_back(std::move(g));
    }

    long long parse_const_int() {
        bool neg = false;
        if (at_punct("-")) {
            eat();
            neg = true;
        }
        if (!at(Tok::IntLit))
            throw UnsupportedConstruct(cur().line, "global initializer must be an integer constant");
        long long v = eat().value;
        return neg ? -v : v;
    }

    void parse_function(ParsedUnit& unit, const std::string& ret, const std::string& name,
                        int line) {
        RawFunction fn;
        fn.name = name;
        fn.return_type = ret;
        fn.line = line;
        expect_punct("(");
        if (peek_kw("void") && ahead(1).kind == Tok::Punct && ahead(1).text == ")") {
            eat();
        } else if (!at_punct(")")) {
            while (true) {
                if (at_punct("."))
                    throw UnsupportedConstruct(cur().line, "variadic parameters are not supported");
                skip_qualifiers();
                std::string ptype = parse_base_type();
                if (at_punct("*"))
                    throw UnsupportedConstruct(cur().line, "pointer parameters are not supported");
                RawParam p;
                p.type = ptype;
                if (at(Tok::Ident)) p.name = eat().text;
                fn.params.push_back(std::move(p));
                if (at_punct(",")) {
                    eat();
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        if (at_punct(";")) {
            fn.end_line = eat().line;
            fn.proto_only = true;
            unit.functions.push_back(std::move(fn));
            return;
        }
        expect_punct("{");
        fn.body = parse_stmt_seq();
        fn.end_line = expect_punct("}").line;
        unit.functions.push_back(std::move(fn));
    }

    // --- statements ----------------------------------------------------------
    std::vector<Stmt> parse_stmt_seq() {
        std::vector<Stmt> out;
        while (!at_punct("}") && !at(Tok::End)) out.push_back(parse_stmt());
        return out;
    }

    std::vector<Stmt> parse_braced_or_single() {
        if (at_punct("{")) {
            eat();
            auto body = parse_stmt_seq();
            expect_punct("}");
            return body;
        }
        std::vector<Stmt> body;
        body.push_back(parse_stmt());
        return body;
    }

    Stmt parse_stmt() {
        int line = cur().line, col = cur().col;
        if (peek_kw("break") || peek_kw("continue") || peek_kw("goto") || peek_kw("switch") ||
            peek_kw("do"))
            throw UnsupportedConstruct(line, "'" + cur().text + "' is outside the supported C subset");
        skip_qualifiers();
        if (at_type_keyword()) return parse_local_decl();
        if (peek_kw("if")) return parse_if();
        if (peek_kw("while")) return parse_while();
        if (peek_kw("for")) return parse_for();
        if (peek_kw("return")) {
            eat();
            Stmt s = make_stmt(StmtKind::Return, line, col);
            if (!at_punct(";")) {
                s.rhs = parse_expr();
                s.has_rhs = true;
            }
            expect_punct(";");
            return s;
        }
        if (at_punct("{")) {
            eat();
            Stmt s = make_stmt(StmtKind::Block, line, col);
            s.body = parse_stmt_seq();
            expect_punct("}");
            return s;
        }
        Stmt s = parse_simple_stmt();
        expect_punct(";");
        return s;
    }

    Stmt parse_local_decl() {
        int line = cur().line, col = cur().col;
        std::string type = parse_base_type();
        if (type == "void") throw SyntaxError(line, "local variable declared void");
        if (at_punct("*"))
            throw UnsupportedConstruct(cur().line, "local pointer variables are not supported");
        Token name = expect_ident();
        if (at_punct("["))
            throw UnsupportedConstruct(cur().line, "local arrays are not supported");
        Stmt s = make_stmt(StmtKind::LocalDecl, line, col);
        s.decl_name = name.text;
        s.op = type;
        if (at_punct("=")) {
            eat();
            if (at_punct("{"))
                throw UnsupportedConstruct(cur().line, "initializer lists are not supported");
            s.rhs = parse_expr();
            s.has_rhs = true;
        }
        expect_punct(";");
        return s;
    }

    Stmt parse_if() {
        int line = cur().line, col = cur().col;
        eat();  // if
        expect_punct("(");
        Stmt s = make_stmt(StmtKind::If, line, col);
        s.cond = parse_expr();
        s.has_cond = true;
        expect_punct(")");
        s.body = parse_braced_or_single();
        if (peek_kw("else")) {
            eat();
            s.else_body = parse_braced_or_single();
        }
        return s;
    }

    Stmt parse_while() {
        int line = cur().line, col = cur().col;
        eat();  // while
        expect_punct("(");
        Stmt s = make_stmt(StmtKind::While, line, col);
        s.cond = parse_expr();
        s.has_cond = true;
        expect_punct(")");
        s.body = parse_braced_or_single();
        return s;
    }

    Stmt parse_for() {
        int line = cur().line, col = cur().col;
        eat();  // for
        expect_punct("(");
        Stmt s = make_stmt(StmtKind::For, line, col);
        if (!at_punct(";")) {
            skip_qualifiers();
            if (at_type_keyword()) {
                s.init.push_back(parse_local_decl());
            } else {
                s.init.push_back(parse_simple_stmt());
                expect_punct(";");
            }
        } else {
            eat();
        }
        if (!at_punct(";")) {
            s.cond = parse_expr();
            s.has_cond = true;
        }
        expect_punct(";");
        if (!at_punct(")")) s.step.push_back(parse_simple_stmt());
        expect_punct(")");
        s.body = parse_braced_or_single();
        return s;
    }

    // Assignment, compound assignment, ++/--, or a statement-position call.
    Stmt parse_simple_stmt() {
        int line = cur().line, col = cur().col;
        if (at_punct("++") || at_punct("--")) {
            std::string op = eat().text;
            Stmt s = make_stmt(StmtKind::IncDec, line, col);
            s.is_increment = (op == "++");
            s.lhs = parse_lvalue();
            return s;
        }
        if (at(Tok::Ident) && ahead(1).kind == Tok::Punct && ahead(1).text == "(") {
            Token callee = eat();
            eat();  // (
            Stmt s = make_stmt(StmtKind::Call, line, col);
            s.callee = callee.text;
            if (!at_punct(")")) {
                while (true) {
                    s.args.push_back(parse_expr());
                    if (at_punct(",")) {
                        eat();
                        continue;
                    }
                    break;
                }
            }
            expect_punct(")");
            return s;
        }
        Expr lhs = parse_lvalue();
        if (at_punct("++") || at_punct("--")) {
            std::string op = eat().text;
            Stmt s = make_stmt(StmtKind::IncDec, line, col);
            s.is_increment = (op == "++");
            s.lhs = std::move(lhs);
            return s;
        }
        static const char* compound_ops[] = {"+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="};
        for (const char* op : compound_ops) {
            if (at_punct(op)) {
                eat();
                Stmt s = make_stmt(StmtKind::CompoundAssign, line, col);
                s.op = std::string(op).substr(0, 1);
                s.lhs = std::move(lhs);
                s.rhs = parse_expr();
                s.has_rhs = true;
                return s;
            }
        }
        if (at_punct("=")) {
            eat();
            Stmt s = make_stmt(StmtKind::Assign, line, col);
            s.lhs = std::move(lhs);
            s.rhs = parse_expr();
            s.has_rhs = true;
            return s;
        }
        throw SyntaxError(cur().line, "expected an assignment or call but found '" + cur().text + "'");
    }

    Expr parse_lvalue() {
        int line = cur().line, col = cur().col;
        if (at_punct("*")) {
            eat();
            Token name = expect_ident();
            Expr e = make_expr(ExprKind::Unary, line, col);
            e.un_op = UnOp::Deref;
            Expr v = make_expr(ExprKind::VarRef, name.line, name.col);
            v.name = name.text;
            e.kids.push_back(std::move(v));
            return e;
        }
        Token name = expect_ident();
        Expr base = make_expr(ExprKind::VarRef, name.line, name.col);
        base.name = name.text;
        if (at_punct("[")) {
            eat();
            Expr idx = make_expr(ExprKind::Index, line, col);
            idx.name = name.text;
            idx.kids.push_back(parse_expr());
            expect_punct("]");
            return idx;
        }
        if (at_punct(".")) {
            eat();
            Token field = expect_ident();
            Expr fe = make_expr(ExprKind::Field, line, col);
            fe.name = name.text;
            fe.field = field.text;
            return fe;
        }
        return base;
    }

    // --- expressions (precedence climbing; no assignment, no calls) ---------
    Expr parse_expr() { return parse_ternary(); }

    Expr parse_ternary() {
        Expr cond = parse_binary(0);
        if (at_punct("?")) {
            int line = cur().line, col = cur().col;
            eat();
            Expr then_e = parse_expr();
            expect_punct(":");
            Expr else_e = parse_ternary();
            Expr e = make_expr(ExprKind::Cond, line, col);
            e.kids.push_back(std::move(cond));
            e.kids.push_back(std::move(then_e));
            e.kids.push_back(std::move(else_e));
            return e;
        }
        return cond;
    }

    struct OpLevel {
        const char* text;
        BinOp op;
        int prec;
    };
    static const OpLevel* op_table() {
        static const OpLevel table[] = {
            {"||", BinOp::Or, 1},     {"&&", BinOp::And, 2},    {"|", BinOp::BitOr, 3},
            {"^", BinOp::BitXor, 4},  {"&", BinOp::BitAnd, 5},  {"==", BinOp::Eq, 6},
            {"!=", BinOp::Ne, 6},     {"<", BinOp::Lt, 7},      {">", BinOp::Gt, 7},
            {"<=", BinOp::Le, 7},     {">=", BinOp::Ge, 7},     {"<<", BinOp::Shl, 8},
            {">>", BinOp::Shr, 8},    {"+", BinOp::Add, 9},     {"-", BinOp::Sub, 9},
            {"*", BinOp::Mul, 10},    {"/", BinOp::Div, 10},    {"%", BinOp::Mod, 10},
            {nullptr, BinOp::Add, 0},
        };
        return table;
    }

    Expr parse_binary(int min_prec) {
        Expr lhs = parse_unary();
        while (at(Tok::Punct)) {
            const OpLevel* match = nullptr;
            for (const OpLevel* l = op_table(); l->text; ++l) {
                if (cur().text == l->text && l->prec >= min_prec) {
                    match = l;
                    break;
                }
            }
            if (!match) break;
            int line = cur().line, col = cur().col;
            eat();
            Expr rhs = parse_binary(match->prec + 1);
            Expr e = make_expr(ExprKind::Binary, line, col);
            e.bin_op = match->op;
            e.kids.push_back(std::move(lhs));
            e.kids.push_back(std::move(rhs));
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr parse_unary() {
        int line = cur().line, col = cur().col;
        if (at_punct("-") || at_punct("!") || at_punct("~") || at_punct("*") || at_punct("&")) {
            std::string op = eat().text;
            Expr e = make_expr(ExprKind::Unary, line, col);
            if (op == "-") e.un_op = UnOp::Neg;
            else if (op == "!") e.un_op = UnOp::Not;
            else if (op == "~") e.un_op = UnOp::BitNot;
            else if (op == "*") e.un_op = UnOp::Deref;
            else e.un_op = UnOp::AddrOf;
            Expr kid = parse_unary();
            if (e.un_op == UnOp::AddrOf && kid.kind != ExprKind::VarRef)
                throw UnsupportedConstruct(line, "address-of is only supported on named globals");
            if (e.un_op == UnOp::Deref && kid.kind != ExprKind::VarRef)
                throw UnsupportedConstruct(line, "dereference is only supported on named pointers");
            e.kids.push_back(std::move(kid));
            return e;
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        int line = cur().line, col = cur().col;
        if (at_punct("(")) {
            eat();
            Expr e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (at(Tok::IntLit)) {
            Token t = eat();
            Expr e = make_expr(ExprKind::IntLit, t.line, t.col);
            e.value = t.value;
            return e;
        }
        Token name = expect_ident();
        if (at_punct("("))
            throw UnsupportedConstruct(name.line,
                                       "function calls are only supported as standalone statements");
        if (at_punct("[")) {
            eat();
            Expr e = make_expr(ExprKind::Index, line, col);
            e.name = name.text;
            e.kids.push_back(parse_expr());
            expect_punct("]");
            return e;
        }
        if (at_punct(".")) {
            eat();
            Token field = expect_ident();
            Expr e = make_expr(ExprKind::Field, line, col);
            e.name = name.text;
            e.field = field.text;
            return e;
        }
        Expr e = make_expr(ExprKind::VarRef, name.line, name.col);
        e.name = name.text;
        return e;
    }

    // --- construction helpers ------------------------------------------------
    static Stmt make_stmt(StmtKind k, int line, int col) {
        Stmt s;
        s.kind = k;
        s.line = line;
        s.col = col;
        return s;
    }
    static Expr make_expr(ExprKind k, int line, int col) {
        Expr e;
        e.kind = k;
        e.line = line;
        e.col = col;
        return e;
    }

    // Assigns ids and ordinals in a preorder walk, which matches source order
    // for this grammar.
    static void number_stmts(RawFunction& fn) {
        int next = 0;
        number_seq(fn.body, next);
    }
    static void number_seq(std::vector<Stmt>& stmts, int& next) {
        for (auto& s : stmts) {
            s.id = next;
            s.ordinal = next;
            ++next;
            number_seq(s.init, next);
            number_seq(s.body, next);
            number_seq(s.step, next);
            number_seq(s.else_body, next);
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline ParsedUnit parse_tokens(std::vector<Token> toks) {
    return detail::Parser(std::move(toks)).parse_unit();
}

}  // namespace irqav
