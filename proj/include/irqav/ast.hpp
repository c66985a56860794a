#pragma once

#include <memory>
#include <string>
#include <vector>

namespace irqav {

enum class UnOp { Neg, Not, BitNot, Deref, AddrOf };
enum class BinOp {
    Add, Sub, Mul, Div, Mod,
    Lt, Gt, Le, Ge, Eq, Ne,
    And, Or,
    BitAnd, BitOr, BitXor,
    Shl, Shr,
};

enum class ExprKind {
    IntLit,   // value
    VarRef,   // name
    Index,    // kids[0] = base VarRef, kids[1] = index
    Field,    // kids[0] = base VarRef, field
    Unary,    // un_op, kids[0]
    Binary,   // bin_op, kids[0], kids[1]
    Cond,     // kids[0] ? kids[1] : kids[2]
};

struct Expr {
    ExprKind kind = ExprKind::IntLit;
    long long value = 0;
    std::string name;
    std::string field;
    UnOp un_op = UnOp::Neg;
    BinOp bin_op = BinOp::Add;
    std::vector<Expr> kids;
    int line = 0;
    int col = 0;
};

enum class StmtKind {
    LocalDecl,       // name, opt rhs (has_rhs)
    Assign,          // lhs = rhs
    CompoundAssign,  // lhs op= rhs
    IncDec,          // lhs ++ / --
    If,              // cond, body, else_body
    While,           // cond, body
    For,             // init (0..1 in init), cond (opt), step (0..1 in step), body
    Call,            // callee, args
    Return,          // opt rhs
    Block,           // body
};

struct Stmt {
    StmtKind kind = StmtKind::Block;
    int id = -1;       // unique within the function, preorder
    int ordinal = -1;  // source-order ordinal of leaf/cond statements
    int line = 0;
    int col = 0;

    Expr lhs;
    Expr rhs;
    Expr cond;
    bool has_rhs = false;
    bool has_cond = false;
    bool is_increment = false;  // IncDec
    std::string op;             // CompoundAssign token, e.g. "+="
    std::string callee;         // Call
    std::vector<Expr> args;     // Call
    std::string decl_name;      // LocalDecl

    std::vector<Stmt> init;  // For
    std::vector<Stmt> step;  // For
    std::vector<Stmt> body;
    std::vector<Stmt> else_body;
};

}  // namespace irqav
