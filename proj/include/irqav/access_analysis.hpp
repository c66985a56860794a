#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irqav/config.hpp"
#include "irqav/errors.hpp"
#include "irqav/program_model.hpp"

namespace irqav {

// Operation analysis: every read and write of a global variable (direct, via
// resolved pointer, via array index, via struct field) becomes an AccessEvent.
// Compound statements decompose into micro-ordered events (reads before the
// write for read-modify-write forms), so `x++` and `x = x + 1` yield the same
// sequence.

enum class AccessOp { Read, Write };

inline const char* to_string(AccessOp op) { return op == AccessOp::Read ? "R" : "W"; }

struct VarPath {
    enum class Sel { Scalar, Field, IndexConst, IndexRange, IndexUnknown };
    std::string base;
    Sel sel = Sel::Scalar;
    std::string field;
    int index = 0;
    int lo = 0;
    int hi = 0;

    std::string display() const {
        switch (sel) {
            case Sel::Scalar: return base;
            case Sel::Field: return base + "." + field;
            case Sel::IndexConst: return base + "[" + std::to_string(index) + "]";
            case Sel::IndexRange:
                return base + "[" + std::to_string(lo) + ".." + std::to_string(hi) + "]";
            case Sel::IndexUnknown: return base + "[*]";
        }
        return base;
    }
    bool operator==(const VarPath& o) const {
        return base == o.base && sel == o.sel && field == o.field && index == o.index &&
               lo == o.lo && hi == o.hi;
    }
};

// Two paths may refer to overlapping storage. Distinct fields of one struct
// and disjoint constant/interval array selectors are the only provable
// non-overlaps; unknown indices alias everything in their array.
inline bool may_alias(const VarPath& a, const VarPath& b) {
    if (a.base != b.base) return false;
    if (a.sel == VarPath::Sel::Field && b.sel == VarPath::Sel::Field) return a.field == b.field;
    auto bounds = [](const VarPath& p, long long& lo, long long& hi) {
        if (p.sel == VarPath::Sel::IndexConst) {
            lo = hi = p.index;
            return true;
        }
        if (p.sel == VarPath::Sel::IndexRange) {
            lo = p.lo;
            hi = p.hi;
            return true;
        }
        return false;  // unknown: treat as the whole array
    };
    bool a_idx = a.sel != VarPath::Sel::Scalar && a.sel != VarPath::Sel::Field;
    bool b_idx = b.sel != VarPath::Sel::Scalar && b.sel != VarPath::Sel::Field;
    if (a_idx && b_idx) {
        long long alo, ahi, blo, bhi;
        if (!bounds(a, alo, ahi) || !bounds(b, blo, bhi)) return true;
        return alo <= bhi && blo <= ahi;
    }
    return true;
}

struct AccessEvent {
    std::string function;
    AccessOp op = AccessOp::Read;
    VarPath path;
    int line = 0;
    int col = 0;
    int stmt_id = -1;
    int stmt_ordinal = -1;
    int micro = 0;
    bool via_pointer = false;
    std::string pointer;   // dereferenced pointer variable when via_pointer
    int slot = -1;         // per-statement dereference slot id
    int pointee_rank = 0;  // rank of path.base in the slot's sorted points-to set
};

struct CallEdge {
    std::string caller;
    std::string callee;
    int line = 0;
};

struct AccessAnalysis {
    std::vector<AccessEvent> events;  // sorted by (function order, line, stmt ordinal, micro)
    std::map<std::string, std::vector<std::size_t>> by_function;
    std::map<std::string, std::vector<std::size_t>> by_global;  // keyed by base name
    std::map<std::string, std::map<int, std::vector<AccessEvent>>> stmt_events;  // fn → stmt id
    std::map<std::string, std::set<std::string>> points_to;
    std::vector<CallEdge> call_edges;       // caller → defined callee
    std::vector<CallEdge> external_calls;   // caller → prototype-only callee
    std::vector<std::string> diagnostics;
    std::map<std::string, std::set<std::string>> task_reach;  // entry → reachable defined fns
    std::vector<std::string> shared_globals;  // bases touched by >= 2 task contexts, sorted

    std::size_t read_count(const std::string& base) const { return count_ops(base, AccessOp::Read); }
    std::size_t write_count(const std::string& base) const {
        return count_ops(base, AccessOp::Write);
    }

private:
    std::size_t count_ops(const std::string& base, AccessOp op) const {
        auto it = by_global.find(base);
        if (it == by_global.end()) return 0;
        std::size_t n = 0;
        for (auto i : it->second)
            if (events[i].op == op) ++n;
        return n;
    }
};

namespace detail {

// Flow-insensitive inclusion-based points-to over global pointers. The
// subset has no pointer locals, parameters, or multi-level pointers, so the
// constraint forms are exactly p ⊇ {g} and p ⊇ q.
class PointsToSolver {
public:
    explicit PointsToSolver(const ProgramModel& model) : model_(model) {
        for (const auto& g : model.globals)
            if (g.kind == GlobalKind::Pointer && g.init_expr)
                collect(g.name, *g.init_expr, g.line);
        for (const auto& fn : model.functions)
            if (!fn.proto_only) walk_stmts(fn.body);
    }

    std::map<std::string, std::set<std::string>> solve() {
        std::map<std::string, std::set<std::string>> pts = addr_;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [dst, srcs] : copies_) {
                for (const auto& src : srcs) {
                    for (const auto& target : pts[src]) {
                        if (pts[dst].insert(target).second) changed = true;
                    }
                }
            }
        }
        return pts;
    }

private:
    void walk_stmts(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) {
            if (s.kind == StmtKind::Assign && s.lhs.kind == ExprKind::VarRef) {
                const GlobalVar* g = model_.find_global(s.lhs.name);
                if (g && g->kind == GlobalKind::Pointer) collect(s.lhs.name, s.rhs, s.line);
            }
            walk_stmts(s.init);
            walk_stmts(s.body);
            walk_stmts(s.step);
            walk_stmts(s.else_body);
        }
    }

    void collect(const std::string& ptr, const Expr& rhs, int line) {
        switch (rhs.kind) {
            case ExprKind::Cond:
                collect(ptr, rhs.kids[1], line);
                collect(ptr, rhs.kids[2], line);
                return;
            case ExprKind::Unary:
                if (rhs.un_op == UnOp::AddrOf) {
                    const std::string& target = rhs.kids[0].name;
                    const GlobalVar* g = model_.find_global(target);
                    if (!g)
                        throw SyntaxError(rhs.line, "address-of unknown global '" + target + "'");
                    if (g->kind != GlobalKind::Scalar)
                        throw UnsupportedConstruct(
                            rhs.line, "pointers may only target scalar globals, not '" + target + "'");
                    addr_[ptr].insert(target);
                    return;
                }
                break;
            case ExprKind::VarRef: {
                const GlobalVar* g = model_.find_global(rhs.name);
                if (g && g->kind == GlobalKind::Pointer) {
                    copies_[ptr].insert(rhs.name);
                    return;
                }
                break;
            }
            case ExprKind::IntLit:
                if (rhs.value == 0) return;  // null assignment
                break;
            default:
                break;
        }
        throw UnsupportedConstruct(line, "pointer '" + ptr +
                                             "' may only be assigned &global, another pointer, "
                                             "a ternary of those, or 0");
    }

    const ProgramModel& model_;
    std::map<std::string, std::set<std::string>> addr_;
    std::map<std::string, std::set<std::string>> copies_;
};

class AccessWalker {
public:
    AccessWalker(const ProgramModel& model, const AnalysisConfig& cfg, AccessAnalysis& out)
        : model_(model), cfg_(cfg), out_(out) {}

    void run() {
        out_.points_to = PointsToSolver(model_).solve();
        for (const auto& fn : model_.functions) {
            if (fn.proto_only) continue;
            fn_ = &fn;
            loop_env_.clear();
            walk_seq(fn.body);
        }
        finalize();
    }

private:
    // --- statement traversal -------------------------------------------------
    void walk_seq(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) walk_stmt(s);
    }

    void walk_stmt(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block:
                walk_seq(s.body);
                return;
            case StmtKind::If:
                emit_stmt(s, [&] { collect_reads(s.cond); });
                walk_seq(s.body);
                walk_seq(s.else_body);
                return;
            case StmtKind::While:
                emit_stmt(s, [&] { collect_reads(s.cond); });
                walk_seq(s.body);
                return;
            case StmtKind::For: {
                walk_seq(s.init);
                emit_stmt(s, [&] {
                    if (s.has_cond) collect_reads(s.cond);
                });
                auto ind = induction_of(s);
                if (ind) loop_env_[ind->first] = ind->second;
                walk_seq(s.body);
                walk_seq(s.step);
                if (ind) loop_env_.erase(ind->first);
                return;
            }
            case StmtKind::LocalDecl:
                emit_stmt(s, [&] {
                    if (s.has_rhs) collect_reads(s.rhs);
                });
                return;
            case StmtKind::Return:
                emit_stmt(s, [&] {
                    if (s.has_rhs) collect_reads(s.rhs);
                });
                return;
            case StmtKind::Call:
                handle_call(s);
                return;
            case StmtKind::Assign:
                handle_assign(s);
                return;
            case StmtKind::CompoundAssign:
                emit_stmt(s, [&] {
                    collect_reads(s.rhs);
                    emit_lvalue(s.lhs, true, true);
                });
                return;
            case StmtKind::IncDec:
                emit_stmt(s, [&] { emit_lvalue(s.lhs, true, true); });
                return;
        }
    }

    void handle_assign(const Stmt& s) {
        if (s.lhs.kind == ExprKind::VarRef) {
            const GlobalVar* g = model_.find_global(s.lhs.name);
            if (g && g->kind == GlobalKind::Pointer && !fn_->locals.count(s.lhs.name)) {
                // Pointer routing: the address flow is captured by the
                // points-to solver; only embedded guard reads are events.
                emit_stmt(s, [&] { collect_pointer_rhs_reads(s.rhs); });
                return;
            }
        }
        emit_stmt(s, [&] {
            collect_reads(s.rhs);
            emit_lvalue(s.lhs, false, true);
        });
    }

    void handle_call(const Stmt& s) {
        if (model_.is_intrinsic(s.callee, cfg_)) return;  // control point, not an access
        const FunctionDef* callee = model_.find_function(s.callee);
        emit_stmt(s, [&] {
            for (const auto& a : s.args) collect_reads(a);
        });
        std::size_t emitted = pending_count_after_;
        if (callee && callee->proto_only) {
            out_.external_calls.push_back({fn_->name, s.callee, s.line});
        } else {
            out_.call_edges.push_back({fn_->name, s.callee, s.line});
        }
        if (emitted > 0)
            out_.diagnostics.push_back("global reads in arguments of '" + s.callee + "' at line " +
                                       std::to_string(s.line) +
                                       " are recorded at the call site");
    }

    // --- expression decomposition --------------------------------------------
    template <typename Fn>
    void emit_stmt(const Stmt& s, Fn&& body) {
        pending_.clear();
        slot_counter_ = 0;
        cur_stmt_ = &s;
        body();
        pending_count_after_ = pending_.size();
        for (std::size_t i = 0; i < pending_.size(); ++i) {
            pending_[i].micro = static_cast<int>(i);
            pending_[i].stmt_id = s.id;
            pending_[i].stmt_ordinal = s.ordinal;
            pending_[i].function = fn_->name;
        }
        auto& bucket = out_.stmt_events[fn_->name][s.id];
        bucket = pending_;
        for (auto& ev : pending_) out_.events.push_back(ev);
    }

    void collect_reads(const Expr& e) {
        switch (e.kind) {
            case ExprKind::IntLit:
                return;
            case ExprKind::VarRef: {
                if (fn_->locals.count(e.name)) return;
                const GlobalVar* g = model_.find_global(e.name);
                if (!g) throw SyntaxError(e.line, "use of undeclared identifier '" + e.name + "'");
                if (g->kind == GlobalKind::Pointer)
                    throw UnsupportedConstruct(e.line,
                                               "pointer '" + e.name + "' used as an integer value");
                if (g->kind != GlobalKind::Scalar)
                    throw UnsupportedConstruct(e.line, "aggregate '" + e.name +
                                                           "' accessed without a selector");
                push_event(AccessOp::Read, scalar_path(e.name), e);
                return;
            }
            case ExprKind::Index: {
                collect_reads(e.kids[0]);
                push_event(AccessOp::Read, array_path(e), e);
                return;
            }
            case ExprKind::Field:
                push_event(AccessOp::Read, field_path(e), e);
                return;
            case ExprKind::Unary:
                if (e.un_op == UnOp::Deref) {
                    emit_deref(e, AccessOp::Read);
                    return;
                }
                if (e.un_op == UnOp::AddrOf)
                    throw UnsupportedConstruct(
                        e.line, "address-of is only supported in pointer assignments");
                collect_reads(e.kids[0]);
                return;
            case ExprKind::Binary:
                collect_reads(e.kids[0]);
                collect_reads(e.kids[1]);
                return;
            case ExprKind::Cond:
                collect_reads(e.kids[0]);
                collect_reads(e.kids[1]);
                collect_reads(e.kids[2]);
                return;
        }
    }

    // Reads under a pointer assignment rhs: ternary guards are real reads,
    // address-of arms and pointer copies are routing only.
    void collect_pointer_rhs_reads(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Cond:
                collect_reads(e.kids[0]);
                collect_pointer_rhs_reads(e.kids[1]);
                collect_pointer_rhs_reads(e.kids[2]);
                return;
            default:
                return;  // shape already validated by the points-to solver
        }
    }

    // Emits read and/or write events for an lvalue. Index sub-expressions are
    // evaluated (read) before the storage access.
    void emit_lvalue(const Expr& lv, bool read_old, bool write_new) {
        switch (lv.kind) {
            case ExprKind::VarRef: {
                if (fn_->locals.count(lv.name)) return;  // locals produce no events
                const GlobalVar* g = model_.find_global(lv.name);
                if (!g) throw SyntaxError(lv.line, "assignment to undeclared '" + lv.name + "'");
                if (g->kind == GlobalKind::Pointer)
                    throw UnsupportedConstruct(lv.line, "compound update of pointer '" + lv.name +
                                                            "' is not supported");
                if (g->kind != GlobalKind::Scalar)
                    throw UnsupportedConstruct(lv.line, "aggregate '" + lv.name +
                                                            "' assigned without a selector");
                if (read_old) push_event(AccessOp::Read, scalar_path(lv.name), lv);
                if (write_new) push_event(AccessOp::Write, scalar_path(lv.name), lv);
                return;
            }
            case ExprKind::Index: {
                collect_reads(lv.kids[0]);
                VarPath p = array_path(lv);
                if (read_old) push_event(AccessOp::Read, p, lv);
                if (write_new) push_event(AccessOp::Write, p, lv);
                return;
            }
            case ExprKind::Field: {
                VarPath p = field_path(lv);
                if (read_old) push_event(AccessOp::Read, p, lv);
                if (write_new) push_event(AccessOp::Write, p, lv);
                return;
            }
            case ExprKind::Unary:
                if (lv.un_op == UnOp::Deref) {
                    if (read_old) emit_deref(lv, AccessOp::Read);
                    if (write_new) emit_deref(lv, AccessOp::Write);
                    return;
                }
                break;
            default:
                break;
        }
        throw SyntaxError(lv.line, "unsupported assignment target");
    }

    void emit_deref(const Expr& e, AccessOp op) {
        const std::string& ptr = e.kids[0].name;
        if (fn_->locals.count(ptr))
            throw UnsupportedConstruct(e.line, "dereference of local '" + ptr + "'");
        const GlobalVar* g = model_.find_global(ptr);
        if (!g || g->kind != GlobalKind::Pointer)
            throw UnsupportedConstruct(e.line, "dereference of non-pointer '" + ptr + "'");
        auto it = out_.points_to.find(ptr);
        int slot = slot_counter_++;
        if (it == out_.points_to.end() || it->second.empty()) {
            out_.diagnostics.push_back("unresolved dereference of '" + ptr + "' at line " +
                                       std::to_string(e.line));
            return;
        }
        int rank = 0;
        for (const auto& target : it->second) {  // std::set iterates sorted
            AccessEvent ev = base_event(op, scalar_path(target), e);
            ev.via_pointer = true;
            ev.pointer = ptr;
            ev.slot = slot;
            ev.pointee_rank = rank++;
            pending_.push_back(std::move(ev));
        }
    }

    // --- path construction ----------------------------------------------------
    static VarPath scalar_path(const std::string& name) {
        VarPath p;
        p.base = name;
        return p;
    }

    VarPath array_path(const Expr& e) {
        const GlobalVar* g = model_.find_global(e.name);
        if (!g || fn_->locals.count(e.name))
            throw UnsupportedConstruct(e.line, "indexing of non-array '" + e.name + "'");
        if (g->kind != GlobalKind::Array)
            throw UnsupportedConstruct(e.line, "'" + e.name + "' is not an array");
        VarPath p;
        p.base = e.name;
        const Expr& idx = e.kids[0];
        if (idx.kind == ExprKind::IntLit) {
            p.sel = VarPath::Sel::IndexConst;
            p.index = static_cast<int>(idx.value);
            if (p.index < 0 || p.index >= g->array_size)
                out_.diagnostics.push_back("index " + std::to_string(p.index) + " outside '" +
                                           e.name + "[" + std::to_string(g->array_size) +
                                           "]' at line " + std::to_string(e.line));
            return p;
        }
        if (idx.kind == ExprKind::VarRef && fn_->locals.count(idx.name)) {
            auto it = loop_env_.find(idx.name);
            if (it != loop_env_.end()) {
                p.sel = VarPath::Sel::IndexRange;
                p.lo = std::max(0, it->second.first);
                p.hi = std::min(g->array_size - 1, it->second.second);
                return p;
            }
        }
        p.sel = VarPath::Sel::IndexUnknown;
        return p;
    }

    VarPath field_path(const Expr& e) {
        const GlobalVar* g = model_.find_global(e.name);
        if (!g || fn_->locals.count(e.name))
            throw UnsupportedConstruct(e.line, "field access on non-struct '" + e.name + "'");
        if (g->kind != GlobalKind::Struct)
            throw UnsupportedConstruct(e.line, "'" + e.name + "' is not a struct");
        bool found = false;
        for (const auto& f : g->fields) found |= (f.name == e.field);
        if (!found)
            throw SyntaxError(e.line, "struct '" + e.name + "' has no field '" + e.field + "'");
        VarPath p;
        p.base = e.name;
        p.sel = VarPath::Sel::Field;
        p.field = e.field;
        return p;
    }

    AccessEvent base_event(AccessOp op, VarPath path, const Expr& at) const {
        AccessEvent ev;
        ev.op = op;
        ev.path = std::move(path);
        ev.line = at.line;
        ev.col = at.col;
        return ev;
    }

    void push_event(AccessOp op, VarPath path, const Expr& at) {
        pending_.push_back(base_event(op, std::move(path), at));
    }

    // Recognizes `for (i = c0; i < c1; ++i)` shapes (also <=, i = i + 1,
    // i += 1) and yields the index interval.
    static std::optional<std::pair<std::string, std::pair<int, int>>> induction_of(const Stmt& s) {
        if (s.init.size() != 1 || !s.has_cond || s.step.size() != 1) return std::nullopt;
        std::string name;
        long long lo = 0;
        const Stmt& init = s.init[0];
        if (init.kind == StmtKind::LocalDecl && init.has_rhs &&
            init.rhs.kind == ExprKind::IntLit) {
            name = init.decl_name;
            lo = init.rhs.value;
        } else if (init.kind == StmtKind::Assign && init.lhs.kind == ExprKind::VarRef &&
                   init.rhs.kind == ExprKind::IntLit) {
            name = init.lhs.name;
            lo = init.rhs.value;
        } else {
            return std::nullopt;
        }
        const Expr& c = s.cond;
        if (c.kind != ExprKind::Binary || (c.bin_op != BinOp::Lt && c.bin_op != BinOp::Le))
            return std::nullopt;
        if (c.kids[0].kind != ExprKind::VarRef || c.kids[0].name != name ||
            c.kids[1].kind != ExprKind::IntLit)
            return std::nullopt;
        long long hi = c.kids[1].value - (c.bin_op == BinOp::Lt ? 1 : 0);
        const Stmt& st = s.step[0];
        bool unit_step =
            (st.kind == StmtKind::IncDec && st.is_increment && st.lhs.kind == ExprKind::VarRef &&
             st.lhs.name == name) ||
            (st.kind == StmtKind::CompoundAssign && st.op == "+" &&
             st.lhs.kind == ExprKind::VarRef && st.lhs.name == name &&
             st.rhs.kind == ExprKind::IntLit && st.rhs.value == 1) ||
            (st.kind == StmtKind::Assign && st.lhs.kind == ExprKind::VarRef &&
             st.lhs.name == name && st.rhs.kind == ExprKind::Binary &&
             st.rhs.bin_op == BinOp::Add && st.rhs.kids[0].kind == ExprKind::VarRef &&
             st.rhs.kids[0].name == name && st.rhs.kids[1].kind == ExprKind::IntLit &&
             st.rhs.kids[1].value == 1);
        if (!unit_step || hi < lo) return std::nullopt;
        return std::make_pair(name, std::make_pair(static_cast<int>(lo), static_cast<int>(hi)));
    }

    // --- aggregation -----------------------------------------------------------
    void finalize() {
        std::map<std::string, int> fn_order;
        for (std::size_t i = 0; i < model_.functions.size(); ++i)
            fn_order[model_.functions[i].name] = static_cast<int>(i);
        std::stable_sort(out_.events.begin(), out_.events.end(),
                         [&](const AccessEvent& a, const AccessEvent& b) {
                             int fa = fn_order[a.function], fb = fn_order[b.function];
                             if (fa != fb) return fa < fb;
                             if (a.line != b.line) return a.line < b.line;
                             if (a.stmt_ordinal != b.stmt_ordinal)
                                 return a.stmt_ordinal < b.stmt_ordinal;
                             return a.micro < b.micro;
                         });
        for (std::size_t i = 0; i < out_.events.size(); ++i) {
            out_.by_function[out_.events[i].function].push_back(i);
            out_.by_global[out_.events[i].path.base].push_back(i);
        }
        for (int ei : model_.entry_indices()) {
            const auto& entry = model_.functions[static_cast<std::size_t>(ei)];
            std::set<std::string>& reach = out_.task_reach[entry.name];
            std::vector<std::string> work{entry.name};
            reach.insert(entry.name);
            while (!work.empty()) {
                std::string cur = work.back();
                work.pop_back();
                const FunctionDef* f = model_.find_function(cur);
                if (!f || f->proto_only) continue;
                for (const auto& callee : f->callees) {
                    const FunctionDef* cf = model_.find_function(callee);
                    if (!cf || cf->proto_only) continue;
                    if (reach.insert(callee).second) work.push_back(callee);
                }
            }
        }
        std::map<std::string, std::set<std::string>> contexts;  // base → entry names
        for (const auto& [entry, fns] : out_.task_reach) {
            for (const auto& fn : fns) {
                auto it = out_.by_function.find(fn);
                if (it == out_.by_function.end()) continue;
                for (auto i : it->second) contexts[out_.events[i].path.base].insert(entry);
            }
        }
        for (const auto& [base, ents] : contexts)
            if (ents.size() >= 2) out_.shared_globals.push_back(base);
    }

    const ProgramModel& model_;
    const AnalysisConfig& cfg_;
    AccessAnalysis& out_;
    const FunctionDef* fn_ = nullptr;
    const Stmt* cur_stmt_ = nullptr;
    std::vector<AccessEvent> pending_;
    std::size_t pending_count_after_ = 0;
    int slot_counter_ = 0;
    std::map<std::string, std::pair<int, int>> loop_env_;
};

}  // namespace detail

inline AccessAnalysis analyze_accesses(const ProgramModel& model, const AnalysisConfig& cfg) {
    AccessAnalysis out;
    detail::AccessWalker(model, cfg, out).run();
    return out;
}

}  // namespace irqav
