#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irqav/access_analysis.hpp"
#include "irqav/config.hpp"
#include "irqav/errors.hpp"
#include "irqav/highlighter.hpp"
#include "irqav/program_model.hpp"

namespace irqav {

// Bounded exhaustive interleaving exploration. Programs compile to a small
// stack machine where every global access, interrupt-control call, and branch
// evaluation is one observable micro-step; everything else (local math,
// jumps, call/return plumbing) is silent and glues to the preceding step.
// Preemption decisions happen exactly between observable steps, so the trace
// count is the number of distinct observable interleavings.

struct SimOptions {
    int max_firings_per_isr = 1;
    int max_loop_iterations = 4;
    long max_traces = 100000;
    bool gate_interrupts = true;  // false: eligibility ignores enable bits

    static SimOptions from(const AnalysisConfig& cfg) {
        SimOptions o;
        o.max_firings_per_isr = cfg.max_firings_per_isr;
        o.max_loop_iterations = cfg.max_loop_iterations;
        o.max_traces = cfg.max_traces;
        return o;
    }
};

struct SimEvent {
    enum class Kind { Access, Branch, Irq, Fire, Done };
    Kind kind = Kind::Access;
    std::string task;
    int instance = 0;
    int priority = 0;
    AccessEvent ev;          // Kind::Access, path concretized
    long long value = 0;     // value read or written
    bool enable = false;     // Kind::Irq
    int target = 0;          // Kind::Irq
    std::string fired;       // Kind::Fire / Done: handler name
    int line = 0;
};

struct Trace {
    int id = 0;
    std::vector<SimEvent> events;
    std::map<std::string, long long> finals;    // concrete location → value
    std::map<std::string, std::string> ptr_finals;
    bool truncated = false;  // some loop hit the iteration bound
};

struct SimResult {
    std::vector<Trace> traces;
    bool budget_exceeded = false;
};

struct DynamicViolation {
    CandidateViolation core;
    int witness_trace = 0;
    std::string location;  // concrete storage the triple collided on
};

namespace detail {

enum class OpCode {
    PushConst,
    PushLocal,
    StoreLocal,
    Pop,
    Dup,
    Swap,
    Rot3,  // [a b c] -> [b c a]: brings the value under two operands to the top
    BinaryOp,
    UnaryOp,
    ReadGlobal,
    WriteGlobal,
    ReadElem,
    WriteElem,
    ReadField,
    WriteField,
    ReadDeref,
    WriteDeref,
    PushAddr,
    PushPtr,
    StorePtr,
    Jmp,
    Jz,        // observable branch evaluation
    JmpSilent,
    JzSilent,  // ternary select
    LoopReset,
    LoopGuard,
    Call,
    CallExternal,
    Ret,
    Intrinsic
};

struct Instr {
    OpCode op = OpCode::PushConst;
    long long imm = 0;
    int jump = -1;
    int loop_id = -1;
    std::string name;
    std::string field;
    int nargs = 0;
    bool enable = false;
    int target = 0;
    BinOp bop = BinOp::Add;
    UnOp uop = UnOp::Neg;
    AccessEvent ev;
    std::vector<std::pair<std::string, AccessEvent>> deref_events;
    int line = 0;
};

struct FnCode {
    std::vector<Instr> code;
    std::vector<std::string> params;
    std::string name;
};

inline bool is_yield(OpCode op) {
    switch (op) {
        case OpCode::ReadGlobal:
        case OpCode::WriteGlobal:
        case OpCode::ReadElem:
        case OpCode::WriteElem:
        case OpCode::ReadField:
        case OpCode::WriteField:
        case OpCode::ReadDeref:
        case OpCode::WriteDeref:
        case OpCode::Jz:
        case OpCode::Intrinsic:
            return true;
        default:
            return false;
    }
}

// Compiles functions by mirroring the access walker's traversal order and
// consuming its per-statement event list, so every access instruction carries
// exactly the static identity (statement id, micro ordinal) the analysis
// assigned. A mismatch is an internal error, not a user error.
class Compiler {
public:
    Compiler(const ProgramModel& model, const AccessAnalysis& acc, const AnalysisConfig& cfg)
        : model_(model), acc_(acc), cfg_(cfg) {}

    std::map<std::string, FnCode> compile() {
        std::map<std::string, FnCode> out;
        for (const auto& fn : model_.functions) {
            if (fn.proto_only) continue;
            cur_ = FnCode{};
            cur_.name = fn.name;
            for (const auto& p : fn.params) cur_.params.push_back(p.name);
            fn_ = &fn;
            loop_counter_ = 0;
            compile_seq(fn.body);
            out[fn.name] = std::move(cur_);
        }
        return out;
    }

private:
    // --- event consumption ---------------------------------------------------
    void begin_stmt(const Stmt& s) {
        events_ = nullptr;
        cursor_ = 0;
        auto fit = acc_.stmt_events.find(fn_->name);
        if (fit != acc_.stmt_events.end()) {
            auto sit = fit->second.find(s.id);
            if (sit != fit->second.end()) events_ = &sit->second;
        }
    }
    void end_stmt(const Stmt& s) {
        std::size_t total = events_ ? events_->size() : 0;
        if (cursor_ != total)
            throw AnalysisError(s.line, "internal: decomposition mismatch in '" + fn_->name + "'");
    }
    AccessEvent consume(AccessOp op) {
        if (!events_ || cursor_ >= events_->size())
            throw AnalysisError(0, "internal: event list exhausted in '" + fn_->name + "'");
        AccessEvent ev = (*events_)[cursor_++];
        if (ev.op != op) throw AnalysisError(ev.line, "internal: event kind mismatch");
        return ev;
    }
    std::vector<AccessEvent> consume_deref(AccessOp op) {
        std::vector<AccessEvent> evs;
        if (!events_ || cursor_ >= events_->size()) return evs;  // unresolved deref: no events
        int slot = (*events_)[cursor_].slot;
        if (slot < 0) return evs;
        while (cursor_ < events_->size() && (*events_)[cursor_].slot == slot &&
               (*events_)[cursor_].op == op)
            evs.push_back((*events_)[cursor_++]);
        return evs;
    }

    // --- emission helpers ------------------------------------------------------
    int emit(Instr i) {
        cur_.code.push_back(std::move(i));
        return static_cast<int>(cur_.code.size()) - 1;
    }
    Instr make(OpCode op, int line) {
        Instr i;
        i.op = op;
        i.line = line;
        return i;
    }
    int here() const { return static_cast<int>(cur_.code.size()); }

    // --- statements -------------------------------------------------------------
    void compile_seq(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) compile_stmt(s);
    }

    void compile_stmt(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block:
                compile_seq(s.body);
                return;
            case StmtKind::LocalDecl: {
                begin_stmt(s);
                if (s.has_rhs)
                    compile_expr(s.rhs);
                else
                    emit(make(OpCode::PushConst, s.line));
                Instr st = make(OpCode::StoreLocal, s.line);
                st.name = s.decl_name;
                emit(st);
                end_stmt(s);
                return;
            }
            case StmtKind::Assign:
                compile_assign(s);
                return;
            case StmtKind::CompoundAssign:
                compile_compound(s, s.op);
                return;
            case StmtKind::IncDec:
                compile_incdec(s);
                return;
            case StmtKind::If: {
                begin_stmt(s);
                compile_expr(s.cond);
                end_stmt(s);
                Instr jz = make(OpCode::Jz, s.line);
                int jz_at = emit(jz);
                compile_seq(s.body);
                if (!s.else_body.empty()) {
                    int jmp_at = emit(make(OpCode::Jmp, s.line));
                    cur_.code[static_cast<std::size_t>(jz_at)].jump = here();
                    compile_seq(s.else_body);
                    cur_.code[static_cast<std::size_t>(jmp_at)].jump = here();
                } else {
                    cur_.code[static_cast<std::size_t>(jz_at)].jump = here();
                }
                return;
            }
            case StmtKind::While: {
                int loop_id = loop_counter_++;
                Instr rst = make(OpCode::LoopReset, s.line);
                rst.loop_id = loop_id;
                emit(rst);
                int head = here();
                begin_stmt(s);
                compile_expr(s.cond);
                end_stmt(s);
                int jz_at = emit(make(OpCode::Jz, s.line));
                Instr guard = make(OpCode::LoopGuard, s.line);
                guard.loop_id = loop_id;
                int guard_at = emit(guard);
                compile_seq(s.body);
                Instr back = make(OpCode::Jmp, s.line);
                back.jump = head;
                emit(back);
                cur_.code[static_cast<std::size_t>(jz_at)].jump = here();
                cur_.code[static_cast<std::size_t>(guard_at)].jump = here();
                return;
            }
            case StmtKind::For: {
                compile_seq(s.init);
                int loop_id = loop_counter_++;
                Instr rst = make(OpCode::LoopReset, s.line);
                rst.loop_id = loop_id;
                emit(rst);
                int head = here();
                int jz_at = -1;
                begin_stmt(s);
                if (s.has_cond) compile_expr(s.cond);
                end_stmt(s);
                if (s.has_cond) jz_at = emit(make(OpCode::Jz, s.line));
                Instr guard = make(OpCode::LoopGuard, s.line);
                guard.loop_id = loop_id;
                int guard_at = emit(guard);
                compile_seq(s.body);
                compile_seq(s.step);
                Instr back = make(OpCode::Jmp, s.line);
                back.jump = head;
                emit(back);
                if (jz_at >= 0) cur_.code[static_cast<std::size_t>(jz_at)].jump = here();
                cur_.code[static_cast<std::size_t>(guard_at)].jump = here();
                return;
            }
            case StmtKind::Call:
                compile_call(s);
                return;
            case StmtKind::Return: {
                begin_stmt(s);
                if (s.has_rhs) {
                    compile_expr(s.rhs);
                    emit(make(OpCode::Pop, s.line));
                }
                end_stmt(s);
                emit(make(OpCode::Ret, s.line));
                return;
            }
        }
    }

    void compile_assign(const Stmt& s) {
        begin_stmt(s);
        if (s.lhs.kind == ExprKind::VarRef && !fn_->locals.count(s.lhs.name)) {
            const GlobalVar* g = model_.find_global(s.lhs.name);
            if (g && g->kind == GlobalKind::Pointer) {
                compile_ptr_expr(s.rhs);
                Instr st = make(OpCode::StorePtr, s.line);
                st.name = s.lhs.name;
                emit(st);
                end_stmt(s);
                return;
            }
        }
        compile_expr(s.rhs);
        compile_store(s.lhs, s.line);
        end_stmt(s);
    }

    void compile_compound(const Stmt& s, const std::string& op) {
        begin_stmt(s);
        compile_expr(s.rhs);
        compile_read_modify_write(s.lhs, op, s.line);
        end_stmt(s);
    }

    void compile_incdec(const Stmt& s) {
        begin_stmt(s);
        Instr one = make(OpCode::PushConst, s.line);
        one.imm = 1;
        emit(one);
        compile_read_modify_write(s.lhs, s.is_increment ? "+" : "-", s.line);
        end_stmt(s);
    }

    BinOp binop_from(const std::string& op) {
        if (op == "+") return BinOp::Add;
        if (op == "-") return BinOp::Sub;
        if (op == "*") return BinOp::Mul;
        if (op == "/") return BinOp::Div;
        if (op == "%") return BinOp::Mod;
        if (op == "&") return BinOp::BitAnd;
        if (op == "|") return BinOp::BitOr;
        return BinOp::BitXor;
    }

    // Stack on entry: [rhs]; performs read-old, combine, write-back.
    void compile_read_modify_write(const Expr& lv, const std::string& op, int line) {
        BinOp bop = binop_from(op);
        auto combine = [&] {
            Instr b = make(OpCode::BinaryOp, line);
            b.bop = bop;
            emit(b);
        };
        switch (lv.kind) {
            case ExprKind::VarRef: {
                if (fn_->locals.count(lv.name)) {  // pure local update, no events
                    Instr rd = make(OpCode::PushLocal, line);
                    rd.name = lv.name;
                    emit(rd);
                    emit(make(OpCode::Swap, line));
                    combine();
                    Instr st = make(OpCode::StoreLocal, line);
                    st.name = lv.name;
                    emit(st);
                    return;
                }
                Instr rd = make(OpCode::ReadGlobal, line);
                rd.name = lv.name;
                rd.ev = consume(AccessOp::Read);
                emit(rd);
                emit(make(OpCode::Swap, line));
                combine();
                Instr wr = make(OpCode::WriteGlobal, line);
                wr.name = lv.name;
                wr.ev = consume(AccessOp::Write);
                emit(wr);
                return;
            }
            case ExprKind::Index: {
                compile_expr(lv.kids[0]);
                emit(make(OpCode::Dup, line));
                Instr rd = make(OpCode::ReadElem, line);
                rd.name = lv.name;
                rd.ev = consume(AccessOp::Read);
                emit(rd);
                emit(make(OpCode::Rot3, line));
                combine();
                emit(make(OpCode::Swap, line));
                Instr wr = make(OpCode::WriteElem, line);
                wr.name = lv.name;
                wr.ev = consume(AccessOp::Write);
                emit(wr);
                return;
            }
            case ExprKind::Field: {
                Instr rd = make(OpCode::ReadField, line);
                rd.name = lv.name;
                rd.field = lv.field;
                rd.ev = consume(AccessOp::Read);
                emit(rd);
                emit(make(OpCode::Swap, line));
                combine();
                Instr wr = make(OpCode::WriteField, line);
                wr.name = lv.name;
                wr.field = lv.field;
                wr.ev = consume(AccessOp::Write);
                emit(wr);
                return;
            }
            case ExprKind::Unary: {  // *p op= v
                Instr rd = make(OpCode::ReadDeref, line);
                rd.name = lv.kids[0].name;
                for (auto& ev : consume_deref(AccessOp::Read))
                    rd.deref_events.emplace_back(ev.path.base, ev);
                emit(rd);
                emit(make(OpCode::Swap, line));
                combine();
                Instr wr = make(OpCode::WriteDeref, line);
                wr.name = lv.kids[0].name;
                for (auto& ev : consume_deref(AccessOp::Write))
                    wr.deref_events.emplace_back(ev.path.base, ev);
                emit(wr);
                return;
            }
            default:
                throw AnalysisError(line, "internal: bad compound target");
        }
    }

    // Stack on entry: [value]; stores it to the lvalue.
    void compile_store(const Expr& lv, int line) {
        switch (lv.kind) {
            case ExprKind::VarRef: {
                if (fn_->locals.count(lv.name)) {
                    Instr st = make(OpCode::StoreLocal, line);
                    st.name = lv.name;
                    emit(st);
                    return;
                }
                Instr wr = make(OpCode::WriteGlobal, line);
                wr.name = lv.name;
                wr.ev = consume(AccessOp::Write);
                emit(wr);
                return;
            }
            case ExprKind::Index: {
                compile_expr(lv.kids[0]);
                Instr wr = make(OpCode::WriteElem, line);
                wr.name = lv.name;
                wr.ev = consume(AccessOp::Write);
                emit(wr);
                return;
            }
            case ExprKind::Field: {
                Instr wr = make(OpCode::WriteField, line);
                wr.name = lv.name;
                wr.field = lv.field;
                wr.ev = consume(AccessOp::Write);
                emit(wr);
                return;
            }
            case ExprKind::Unary: {
                Instr wr = make(OpCode::WriteDeref, line);
                wr.name = lv.kids[0].name;
                for (auto& ev : consume_deref(AccessOp::Write))
                    wr.deref_events.emplace_back(ev.path.base, ev);
                emit(wr);
                return;
            }
            default:
                throw AnalysisError(line, "internal: bad assignment target");
        }
    }

    void compile_call(const Stmt& s) {
        if (model_.is_intrinsic(s.callee, cfg_)) {
            Instr in = make(OpCode::Intrinsic, s.line);
            in.enable = (s.callee == cfg_.enable_intrinsic);
            in.target = intrinsic_target(s);
            emit(in);
            return;
        }
        begin_stmt(s);
        for (const auto& a : s.args) compile_expr(a);
        end_stmt(s);
        const FunctionDef* callee = model_.find_function(s.callee);
        Instr c = make(callee && !callee->proto_only ? OpCode::Call : OpCode::CallExternal, s.line);
        c.name = s.callee;
        c.nargs = static_cast<int>(s.args.size());
        emit(c);
    }

    // --- expressions ---------------------------------------------------------
    void compile_expr(const Expr& e) {
        switch (e.kind) {
            case ExprKind::IntLit: {
                Instr i = make(OpCode::PushConst, e.line);
                i.imm = e.value;
                emit(i);
                return;
            }
            case ExprKind::VarRef: {
                if (fn_->locals.count(e.name)) {
                    Instr i = make(OpCode::PushLocal, e.line);
                    i.name = e.name;
                    emit(i);
                    return;
                }
                Instr i = make(OpCode::ReadGlobal, e.line);
                i.name = e.name;
                i.ev = consume(AccessOp::Read);
                emit(i);
                return;
            }
            case ExprKind::Index: {
                compile_expr(e.kids[0]);
                Instr i = make(OpCode::ReadElem, e.line);
                i.name = e.name;
                i.ev = consume(AccessOp::Read);
                emit(i);
                return;
            }
            case ExprKind::Field: {
                Instr i = make(OpCode::ReadField, e.line);
                i.name = e.name;
                i.field = e.field;
                i.ev = consume(AccessOp::Read);
                emit(i);
                return;
            }
            case ExprKind::Unary: {
                if (e.un_op == UnOp::Deref) {
                    Instr i = make(OpCode::ReadDeref, e.line);
                    i.name = e.kids[0].name;
                    for (auto& ev : consume_deref(AccessOp::Read))
                        i.deref_events.emplace_back(ev.path.base, ev);
                    emit(i);
                    return;
                }
                compile_expr(e.kids[0]);
                Instr i = make(OpCode::UnaryOp, e.line);
                i.uop = e.un_op;
                emit(i);
                return;
            }
            case ExprKind::Binary: {
                compile_expr(e.kids[0]);
                compile_expr(e.kids[1]);
                Instr i = make(OpCode::BinaryOp, e.line);
                i.bop = e.bin_op;
                emit(i);
                return;
            }
            case ExprKind::Cond: {
                compile_expr(e.kids[0]);
                int jz_at = emit(make(OpCode::JzSilent, e.line));
                compile_expr(e.kids[1]);
                int jmp_at = emit(make(OpCode::JmpSilent, e.line));
                cur_.code[static_cast<std::size_t>(jz_at)].jump = here();
                compile_expr(e.kids[2]);
                cur_.code[static_cast<std::size_t>(jmp_at)].jump = here();
                return;
            }
        }
    }

    // Pointer-valued expression (rhs of a pointer assignment).
    void compile_ptr_expr(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Cond: {
                compile_expr(e.kids[0]);
                int jz_at = emit(make(OpCode::JzSilent, e.line));
                compile_ptr_expr(e.kids[1]);
                int jmp_at = emit(make(OpCode::JmpSilent, e.line));
                cur_.code[static_cast<std::size_t>(jz_at)].jump = here();
                compile_ptr_expr(e.kids[2]);
                cur_.code[static_cast<std::size_t>(jmp_at)].jump = here();
                return;
            }
            case ExprKind::Unary: {  // &g
                Instr i = make(OpCode::PushAddr, e.line);
                i.name = e.kids[0].name;
                emit(i);
                return;
            }
            case ExprKind::VarRef: {
                Instr i = make(OpCode::PushPtr, e.line);
                i.name = e.name;
                emit(i);
                return;
            }
            case ExprKind::IntLit: {  // null
                emit(make(OpCode::PushAddr, e.line));
                return;
            }
            default:
                throw AnalysisError(e.line, "internal: bad pointer expression");
        }
    }

    const ProgramModel& model_;
    const AccessAnalysis& acc_;
    const AnalysisConfig& cfg_;
    FnCode cur_;
    const FunctionDef* fn_ = nullptr;
    const std::vector<AccessEvent>* events_ = nullptr;
    std::size_t cursor_ = 0;
    int loop_counter_ = 0;
};

// --- runtime -------------------------------------------------------------------

struct Frame {
    std::string fn;
    std::size_t pc = 0;
    std::map<std::string, long long> locals;
    std::vector<long long> stack;
    std::vector<std::string> pstack;            // pointer operand stack
    std::map<int, int> loop_counts;
};

struct Activation {
    std::string task;
    int instance = 0;
    int priority = 0;
    std::vector<Frame> frames;
};

struct World {
    std::map<std::string, long long> mem;        // concrete location → value
    std::map<std::string, std::string> ptrs;     // pointer → target ("" = null)
    std::map<int, bool> irq;                     // priority → enabled
    std::map<std::string, int> firings;
    std::vector<Activation> stack;
    Trace trace;
    bool truncated = false;
    int next_instance = 1;
};

class Interpreter {
public:
    Interpreter(const ProgramModel& model, const AccessAnalysis& acc, const AnalysisConfig& cfg,
                SimOptions opt)
        : model_(model), cfg_(cfg), opt_(opt), code_(Compiler(model, acc, cfg).compile()) {}

    const std::map<std::string, FnCode>& code() const { return code_; }

    SimResult run() {
        SimResult result;
        World w = initial_world();
        run_silent(w);
        if (!w.stack.empty()) step_top(w);  // no preemption before the first observable step
        dfs(std::move(w), result);
        return result;
    }

private:
    World initial_world() {
        World w;
        for (const auto& g : model_.globals) {
            switch (g.kind) {
                case GlobalKind::Scalar:
                    w.mem[g.name] = g.has_init ? g.init_value : 0;
                    break;
                case GlobalKind::Array:
                    for (int i = 0; i < g.array_size; ++i)
                        w.mem[g.name + "[" + std::to_string(i) + "]"] = 0;
                    break;
                case GlobalKind::Struct:
                    for (const auto& f : g.fields) w.mem[g.name + "." + f.name] = 0;
                    break;
                case GlobalKind::Pointer:
                    w.ptrs[g.name] = "";
                    break;
            }
        }
        for (const auto& g : model_.globals)
            if (g.kind == GlobalKind::Pointer && g.init_expr)
                w.ptrs[g.name] = eval_init_ptr(*g.init_expr, w);
        for (int i : model_.isr_indices) {
            int prio = model_.functions[static_cast<std::size_t>(i)].priority;
            w.irq[prio] = cfg_.initial_irq_enabled;
        }
        Activation main_act;
        main_act.task = "main";
        main_act.instance = 0;
        main_act.priority = 0;
        Frame f;
        f.fn = "main";
        main_act.frames.push_back(std::move(f));
        w.stack.push_back(std::move(main_act));
        return w;
    }

    long long eval_init_int(const Expr& e, const World& w) const {
        switch (e.kind) {
            case ExprKind::IntLit: return e.value;
            case ExprKind::VarRef: {
                auto it = w.mem.find(e.name);
                if (it == w.mem.end())
                    throw SimError(e.line, "initializer reads unknown '" + e.name + "'");
                return it->second;
            }
            case ExprKind::Unary:
                if (e.un_op == UnOp::Neg) return -eval_init_int(e.kids[0], w);
                if (e.un_op == UnOp::Not) return eval_init_int(e.kids[0], w) == 0 ? 1 : 0;
                if (e.un_op == UnOp::BitNot) return ~eval_init_int(e.kids[0], w);
                throw SimError(e.line, "unsupported initializer expression");
            case ExprKind::Binary:
                return apply_binop(e.bin_op, eval_init_int(e.kids[0], w),
                                   eval_init_int(e.kids[1], w), e.line);
            case ExprKind::Cond:
                return eval_init_int(e.kids[0], w) != 0 ? eval_init_int(e.kids[1], w)
                                                        : eval_init_int(e.kids[2], w);
            default:
                throw SimError(e.line, "unsupported initializer expression");
        }
    }

    std::string eval_init_ptr(const Expr& e, const World& w) const {
        switch (e.kind) {
            case ExprKind::Cond:
                return eval_init_int(e.kids[0], w) != 0 ? eval_init_ptr(e.kids[1], w)
                                                        : eval_init_ptr(e.kids[2], w);
            case ExprKind::Unary: return e.kids[0].name;   // &g
            case ExprKind::VarRef: {
                auto it = w.ptrs.find(e.name);
                return it == w.ptrs.end() ? "" : it->second;
            }
            case ExprKind::IntLit: return "";
            default:
                throw SimError(e.line, "unsupported pointer initializer");
        }
    }

    static long long apply_binop(BinOp op, long long l, long long r, int line) {
        switch (op) {
            case BinOp::Add: return l + r;
            case BinOp::Sub: return l - r;
            case BinOp::Mul: return l * r;
            case BinOp::Div:
                if (r == 0) throw SimError(line, "division by zero");
                return l / r;
            case BinOp::Mod:
                if (r == 0) throw SimError(line, "modulo by zero");
                return l % r;
            case BinOp::Lt: return l < r;
            case BinOp::Gt: return l > r;
            case BinOp::Le: return l <= r;
            case BinOp::Ge: return l >= r;
            case BinOp::Eq: return l == r;
            case BinOp::Ne: return l != r;
            case BinOp::And: return (l != 0 && r != 0) ? 1 : 0;
            case BinOp::Or: return (l != 0 || r != 0) ? 1 : 0;
            case BinOp::BitAnd: return l & r;
            case BinOp::BitOr: return l | r;
            case BinOp::BitXor: return l ^ r;
            case BinOp::Shl: return l << (r & 63);
            case BinOp::Shr: return l >> (r & 63);
        }
        return 0;
    }

    // --- one observable step -------------------------------------------------
    // Executes silent instructions, popping finished frames and activations,
    // until the next instruction is observable or the stack drains.
    void run_silent(World& w) const {
        while (!w.stack.empty()) {
            Activation& act = w.stack.back();
            if (act.frames.empty()) {
                SimEvent done;
                done.kind = SimEvent::Kind::Done;
                done.task = act.task;
                done.instance = act.instance;
                done.priority = act.priority;
                done.fired = act.task;
                w.trace.events.push_back(done);
                w.stack.pop_back();
                continue;
            }
            Frame& fr = act.frames.back();
            const FnCode& fc = code_.at(fr.fn);
            if (fr.pc >= fc.code.size()) {
                act.frames.pop_back();
                continue;
            }
            const Instr& I = fc.code[fr.pc];
            if (is_yield(I.op)) return;
            exec_silent(w, act, fr, I);
        }
    }

    void exec_silent(World& w, Activation& act, Frame& fr, const Instr& I) const {
        switch (I.op) {
            case OpCode::PushConst:
                fr.stack.push_back(I.imm);
                ++fr.pc;
                return;
            case OpCode::PushLocal: {
                auto it = fr.locals.find(I.name);
                fr.stack.push_back(it == fr.locals.end() ? 0 : it->second);
                ++fr.pc;
                return;
            }
            case OpCode::StoreLocal:
                fr.locals[I.name] = pop(fr);
                ++fr.pc;
                return;
            case OpCode::Pop:
                pop(fr);
                ++fr.pc;
                return;
            case OpCode::Dup:
                fr.stack.push_back(fr.stack.back());
                ++fr.pc;
                return;
            case OpCode::Swap: {
                auto n = fr.stack.size();
                std::swap(fr.stack[n - 1], fr.stack[n - 2]);
                ++fr.pc;
                return;
            }
            case OpCode::Rot3: {
                auto n = fr.stack.size();
                long long a = fr.stack[n - 3], b = fr.stack[n - 2], c = fr.stack[n - 1];
                fr.stack[n - 3] = b;
                fr.stack[n - 2] = c;
                fr.stack[n - 1] = a;
                ++fr.pc;
                return;
            }
            case OpCode::BinaryOp: {
                long long r = pop(fr), l = pop(fr);
                fr.stack.push_back(apply_binop(I.bop, l, r, I.line));
                ++fr.pc;
                return;
            }
            case OpCode::UnaryOp: {
                long long v = pop(fr);
                if (I.uop == UnOp::Neg) v = -v;
                else if (I.uop == UnOp::Not) v = (v == 0);
                else if (I.uop == UnOp::BitNot) v = ~v;
                fr.stack.push_back(v);
                ++fr.pc;
                return;
            }
            case OpCode::PushAddr:
                fr.pstack.push_back(I.name);
                ++fr.pc;
                return;
            case OpCode::PushPtr:
                fr.pstack.push_back(w.ptrs.at(I.name));
                ++fr.pc;
                return;
            case OpCode::StorePtr: {
                w.ptrs[I.name] = fr.pstack.back();
                fr.pstack.pop_back();
                ++fr.pc;
                return;
            }
            case OpCode::Jmp:
            case OpCode::JmpSilent:
                fr.pc = static_cast<std::size_t>(I.jump);
                return;
            case OpCode::JzSilent: {
                long long v = pop(fr);
                fr.pc = (v == 0) ? static_cast<std::size_t>(I.jump) : fr.pc + 1;
                return;
            }
            case OpCode::LoopReset:
                fr.loop_counts[I.loop_id] = 0;
                ++fr.pc;
                return;
            case OpCode::LoopGuard: {
                int& count = fr.loop_counts[I.loop_id];
                ++count;
                if (count > opt_.max_loop_iterations) {
                    w.truncated = true;
                    fr.pc = static_cast<std::size_t>(I.jump);
                } else {
                    ++fr.pc;
                }
                return;
            }
            case OpCode::Call: {
                const FnCode& callee = code_.at(I.name);
                Frame nf;
                nf.fn = I.name;
                for (int k = I.nargs - 1; k >= 0; --k) {
                    long long v = pop(fr);
                    if (k < static_cast<int>(callee.params.size()) && !callee.params[static_cast<std::size_t>(k)].empty())
                        nf.locals[callee.params[static_cast<std::size_t>(k)]] = v;
                }
                ++fr.pc;
                act.frames.push_back(std::move(nf));
                return;
            }
            case OpCode::CallExternal:
                for (int k = 0; k < I.nargs; ++k) pop(fr);
                ++fr.pc;
                return;
            case OpCode::Ret:
                act.frames.pop_back();
                return;
            default:
                throw SimError(I.line, "internal: silent executor hit observable op");
        }
    }

    static long long pop(Frame& fr) {
        long long v = fr.stack.back();
        fr.stack.pop_back();
        return v;
    }

    // Executes exactly one observable instruction at the top of the stack,
    // records its event, then glues the following silent run.
    void step_top(World& w) const {
        Activation& act = w.stack.back();
        Frame& fr = act.frames.back();
        const Instr& I = code_.at(fr.fn).code[fr.pc];
        SimEvent ev;
        ev.task = act.task;
        ev.instance = act.instance;
        ev.priority = act.priority;
        ev.line = I.line;
        switch (I.op) {
            case OpCode::ReadGlobal: {
                long long v = w.mem.at(I.name);
                fr.stack.push_back(v);
                ev.kind = SimEvent::Kind::Access;
                ev.ev = I.ev;
                ev.value = v;
                break;
            }
            case OpCode::WriteGlobal: {
                long long v = pop(fr);
                w.mem[I.name] = v;
                ev.kind = SimEvent::Kind::Access;
                ev.ev = I.ev;
                ev.value = v;
                break;
            }
            case OpCode::ReadElem: {
                long long idx = pop(fr);
                std::string loc = elem_loc(I, idx);
                long long v = w.mem.at(loc);
                fr.stack.push_back(v);
                ev.kind = SimEvent::Kind::Access;
                ev.ev = I.ev;
                ev.ev.path.sel = VarPath::Sel::IndexConst;
                ev.ev.path.index = static_cast<int>(idx);
                ev.value = v;
                break;
            }
            case OpCode::WriteElem: {
                long long idx = pop(fr);
                long long v = pop(fr);
                std::string loc = elem_loc(I, idx);
                w.mem[loc] = v;
                ev.kind = SimEvent::Kind::Access;
                ev.ev = I.ev;
                ev.ev.path.sel = VarPath::Sel::IndexConst;
                ev.ev.path.index = static_cast<int>(idx);
                ev.value = v;
                break;
            }
            case OpCode::ReadField: {
                long long v = w.mem.at(I.name + "." + I.field);
                fr.stack.push_back(v);
                ev.kind = SimEvent::Kind::Access;
                ev.ev = I.ev;
                ev.value = v;
                break;
            }
            case OpCode::WriteField: {
                long long v = pop(fr);
                w.mem[I.name + "." + I.field] = v;
                ev.kind = SimEvent::Kind::Access;
                ev.ev = I.ev;
                ev.value = v;
                break;
            }
            case OpCode::ReadDeref: {
                std::string target = w.ptrs.at(I.name);
                if (target.empty())
                    throw SimError(I.line, "dereference of null pointer '" + I.name + "'");
                long long v = w.mem.at(target);
                fr.stack.push_back(v);
                ev.kind = SimEvent::Kind::Access;
                ev.ev = deref_event(I, target);
                ev.value = v;
                break;
            }
            case OpCode::WriteDeref: {
                std::string target = w.ptrs.at(I.name);
                if (target.empty())
                    throw SimError(I.line, "dereference of null pointer '" + I.name + "'");
                long long v = pop(fr);
                w.mem[target] = v;
                ev.kind = SimEvent::Kind::Access;
                ev.ev = deref_event(I, target);
                ev.value = v;
                break;
            }
            case OpCode::Jz: {
                long long v = pop(fr);
                ev.kind = SimEvent::Kind::Branch;
                ev.value = v;
                w.trace.events.push_back(ev);
                fr.pc = (v == 0) ? static_cast<std::size_t>(I.jump) : fr.pc + 1;
                run_silent(w);
                return;
            }
            case OpCode::Intrinsic: {
                apply_irq(w, I.enable, I.target);
                ev.kind = SimEvent::Kind::Irq;
                ev.enable = I.enable;
                ev.target = I.target;
                break;
            }
            default:
                throw SimError(I.line, "internal: step on silent instruction");
        }
        w.trace.events.push_back(ev);
        ++fr.pc;
        run_silent(w);
    }

    AccessEvent deref_event(const Instr& I, const std::string& target) const {
        for (const auto& [name, ev] : I.deref_events)
            if (name == target) return ev;
        throw SimError(I.line, "dereference target '" + target + "' outside the points-to set");
    }

    std::string elem_loc(const Instr& I, long long idx) const {
        const GlobalVar* g = model_.find_global(I.name);
        if (idx < 0 || idx >= g->array_size)
            throw SimError(I.line, "index " + std::to_string(idx) + " out of bounds for '" +
                                       I.name + "'");
        return I.name + "[" + std::to_string(idx) + "]";
    }

    void apply_irq(World& w, bool enable, int target) const {
        if (target == -1) {
            for (auto& [p, b] : w.irq) b = enable;
        } else {
            auto it = w.irq.find(target);
            if (it != w.irq.end()) it->second = enable;
        }
    }

    // --- enumeration -----------------------------------------------------------
    bool eligible(const World& w, int isr_index, int top_prio) const {
        const FunctionDef& isr = model_.functions[static_cast<std::size_t>(isr_index)];
        if (isr.priority <= top_prio) return false;
        auto it = w.firings.find(isr.name);
        int used = it == w.firings.end() ? 0 : it->second;
        if (used >= opt_.max_firings_per_isr) return false;
        if (opt_.gate_interrupts && !w.irq.at(isr.priority)) return false;
        return true;
    }

    void fire(World& w, int isr_index) const {
        const FunctionDef& isr = model_.functions[static_cast<std::size_t>(isr_index)];
        ++w.firings[isr.name];
        Activation act;
        act.task = isr.name;
        act.instance = w.next_instance++;
        act.priority = isr.priority;
        Frame f;
        f.fn = isr.name;
        act.frames.push_back(std::move(f));
        SimEvent ev;
        ev.kind = SimEvent::Kind::Fire;
        ev.task = isr.name;
        ev.instance = act.instance;
        ev.priority = isr.priority;
        ev.fired = isr.name;
        ev.line = isr.line;
        w.trace.events.push_back(ev);
        w.stack.push_back(std::move(act));
        run_silent(w);
    }

    void dfs(World w, SimResult& result) const {
        if (result.budget_exceeded) return;
        if (w.stack.empty()) {
            if (static_cast<long>(result.traces.size()) >= opt_.max_traces) {
                result.budget_exceeded = true;
                return;
            }
            Trace t = w.trace;
            t.id = static_cast<int>(result.traces.size());
            t.finals = w.mem;
            t.ptr_finals = w.ptrs;
            t.truncated = w.truncated;
            result.traces.push_back(std::move(t));
            for (int i : model_.isr_indices) {
                if (!eligible(w, i, -1)) continue;
                World w2 = w;
                fire(w2, i);
                dfs(std::move(w2), result);
                if (result.budget_exceeded) return;
            }
            return;
        }
        {
            World w2 = w;
            step_top(w2);
            dfs(std::move(w2), result);
            if (result.budget_exceeded) return;
        }
        int top_prio = w.stack.back().priority;
        for (int i : model_.isr_indices) {
            if (!eligible(w, i, top_prio)) continue;
            World w2 = w;
            fire(w2, i);
            dfs(std::move(w2), result);
            if (result.budget_exceeded) return;
        }
    }

    const ProgramModel& model_;
    const AnalysisConfig& cfg_;
    SimOptions opt_;
    std::map<std::string, FnCode> code_;
};

}  // namespace detail

inline SimResult enumerate_traces(const ProgramModel& model, const AccessAnalysis& acc,
                                  const AnalysisConfig& cfg, SimOptions opt) {
    return detail::Interpreter(model, acc, cfg, opt).run();
}

// Static accesses as seen by the compiled code: every access instruction's
// (function, line, op, base), including each possible dereference target.
// Used to cross-check compiler and analyzer.
inline std::set<std::tuple<std::string, int, std::string, std::string>> coverage_accesses(
    const ProgramModel& model, const AccessAnalysis& acc, const AnalysisConfig& cfg) {
    detail::Interpreter interp(model, acc, cfg, SimOptions{});
    std::set<std::tuple<std::string, int, std::string, std::string>> out;
    for (const auto& [fn, fc] : interp.code()) {
        for (const auto& I : fc.code) {
            if (!I.deref_events.empty()) {
                for (const auto& [name, ev] : I.deref_events)
                    out.insert({fn, ev.line, to_string(ev.op), ev.path.base});
            } else if (detail::is_yield(I.op) && I.op != detail::OpCode::Jz &&
                       I.op != detail::OpCode::Intrinsic && I.op != detail::OpCode::ReadDeref &&
                       I.op != detail::OpCode::WriteDeref) {
                out.insert({fn, I.ev.line, to_string(I.ev.op), I.ev.path.base});
            }
        }
    }
    return out;
}

// Scans traces for unserializable triples: a same-instance consecutive access
// pair on one concrete location with a strictly higher-priority access to the
// same location interleaved between them.
inline std::vector<DynamicViolation> detect_dynamic(const SimResult& sim) {
    std::vector<DynamicViolation> out;
    std::set<std::string> seen;
    for (const auto& trace : sim.traces) {
        struct Acc {
            std::size_t pos;
            const SimEvent* ev;
        };
        std::map<std::string, std::vector<Acc>> per_loc;  // concrete location → accesses
        for (std::size_t i = 0; i < trace.events.size(); ++i) {
            const SimEvent& e = trace.events[i];
            if (e.kind != SimEvent::Kind::Access) continue;
            per_loc[e.ev.path.display()].push_back({i, &e});
        }
        for (const auto& [loc, accs] : per_loc) {
            for (std::size_t i = 0; i < accs.size(); ++i) {
                const SimEvent& e1 = *accs[i].ev;
                // consecutive same-instance successor on this location
                for (std::size_t j = i + 1; j < accs.size(); ++j) {
                    const SimEvent& e3 = *accs[j].ev;
                    if (e3.instance != e1.instance) continue;
                    // candidates strictly between
                    for (std::size_t k = i + 1; k < j; ++k) {
                        const SimEvent& e2 = *accs[k].ev;
                        if (e2.instance == e1.instance) continue;
                        if (e2.priority <= e1.priority) continue;
                        auto pat = pattern_of(e1.ev.op, e2.ev.op, e3.ev.op);
                        if (!pat) continue;
                        DynamicViolation dv;
                        dv.core.var = e1.ev.path.base;
                        dv.core.pattern = *pat;
                        dv.core.a1 = e1.ev;
                        dv.core.a2 = e2.ev;
                        dv.core.a3 = e3.ev;
                        dv.core.task_low = e1.task;
                        dv.core.task_high = e2.task;
                        dv.core.prio_low = e1.priority;
                        dv.core.prio_high = e2.priority;
                        dv.witness_trace = trace.id;
                        dv.location = loc;
                        auto key_of = [](const AccessEvent& e) {
                            return e.function + "#" + std::to_string(e.stmt_id) + "#" +
                                   std::to_string(e.micro);
                        };
                        std::string key = dv.core.var + "|" + loc + "|" + to_string(*pat) + "|" +
                                          key_of(dv.core.a1) + "|" + dv.core.task_high + "|" +
                                          key_of(dv.core.a2) + "|" + key_of(dv.core.a3);
                        if (seen.insert(key).second) out.push_back(std::move(dv));
                    }
                    break;  // j is e1's consecutive successor; later ones are not
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const DynamicViolation& x, const DynamicViolation& y) {
        if (x.core.var != y.core.var) return x.core.var < y.core.var;
        if (x.core.pattern != y.core.pattern)
            return static_cast<int>(x.core.pattern) < static_cast<int>(y.core.pattern);
        auto loc = [](const AccessEvent& e) {
            return std::tuple<int, int, int>(e.line, e.stmt_id, e.micro);
        };
        if (loc(x.core.a1) != loc(y.core.a1)) return loc(x.core.a1) < loc(y.core.a1);
        if (x.core.task_high != y.core.task_high) return x.core.task_high < y.core.task_high;
        if (loc(x.core.a2) != loc(y.core.a2)) return loc(x.core.a2) < loc(y.core.a2);
        return loc(x.core.a3) < loc(y.core.a3);
    });
    return out;
}

}  // namespace irqav
