#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "irqav/access_analysis.hpp"
#include "irqav/program_model.hpp"

namespace irqav {

// Per-task micro-graph: the entry function with every defined callee inlined,
// flattened to one node per global access, interrupt-control call, or branch
// point. Consecutiveness queries, the interrupt-state dataflow, and the
// protected-window check all walk this one structure, so they agree on what
// "between two accesses" means (in particular, accesses made by callees
// interpose between accesses surrounding the call site).

struct MicroNode {
    enum class Kind { Entry, Exit, Access, IrqControl, Cond };
    Kind kind = Kind::Entry;
    AccessEvent access;    // Kind::Access
    bool enable = false;   // Kind::IrqControl
    int target = 0;        // Kind::IrqControl: -1 = all handlers
    std::string function;  // syntactic containing function
    int line = 0;
    int stmt_id = -1;
};

struct TaskGraph {
    std::string task;
    int priority = 0;
    std::vector<MicroNode> nodes;
    std::vector<std::vector<int>> succ;
    std::vector<std::vector<int>> pred;
    std::set<std::pair<int, int>> back_edges;
    int entry = 0;
    int exit = 0;
    std::vector<int> access_nodes;  // Access node ids in emission order

    bool is_back(int from, int to) const { return back_edges.count({from, to}) != 0; }
};

namespace detail {

class TaskGraphBuilder {
public:
    TaskGraphBuilder(const ProgramModel& model, const AccessAnalysis& acc,
                     const AnalysisConfig& cfg)
        : model_(model), acc_(acc), cfg_(cfg) {}

    TaskGraph build(int fn_index) {
        const FunctionDef& fn = model_.functions[static_cast<std::size_t>(fn_index)];
        g_ = TaskGraph{};
        g_.task = fn.name;
        g_.priority = fn.priority;
        int entry = add_node(MicroNode{MicroNode::Kind::Entry, {}, false, 0, fn.name, fn.line, -1});
        g_.entry = entry;
        frontier_ = {entry};
        build_callable(fn);
        int exit = add_node(MicroNode{MicroNode::Kind::Exit, {}, false, 0, fn.name, fn.end_line, -1});
        g_.exit = exit;
        join_to(exit);
        return std::move(g_);
    }

private:
    int add_node(MicroNode n) {
        g_.nodes.push_back(std::move(n));
        g_.succ.emplace_back();
        g_.pred.emplace_back();
        int id = static_cast<int>(g_.nodes.size()) - 1;
        if (g_.nodes.back().kind == MicroNode::Kind::Access) g_.access_nodes.push_back(id);
        return id;
    }

    void link(int from, int to, bool back = false) {
        g_.succ[static_cast<std::size_t>(from)].push_back(to);
        g_.pred[static_cast<std::size_t>(to)].push_back(from);
        if (back) g_.back_edges.insert({from, to});
    }

    void emit(int id) {
        for (int f : frontier_) link(f, id);
        frontier_ = {id};
    }

    void join_to(int id) {
        for (int f : frontier_) link(f, id);
        frontier_.clear();
    }

    // Inlines one callable: its return statements rejoin the caller frontier.
    void build_callable(const FunctionDef& fn) {
        if (++depth_ > 64)
            throw AnalysisError(fn.line, "call nesting too deep while inlining '" + fn.name + "'");
        return_frontiers_.emplace_back();
        build_seq(fn, fn.body);
        auto rets = std::move(return_frontiers_.back());
        return_frontiers_.pop_back();
        frontier_.insert(frontier_.end(), rets.begin(), rets.end());
        --depth_;
    }

    void build_seq(const FunctionDef& fn, const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) build_stmt(fn, s);
    }

    void emit_stmt_accesses(const FunctionDef& fn, const Stmt& s) {
        auto fit = acc_.stmt_events.find(fn.name);
        if (fit == acc_.stmt_events.end()) return;
        auto sit = fit->second.find(s.id);
        if (sit == fit->second.end()) return;
        for (const auto& ev : sit->second)
            emit(add_node(MicroNode{MicroNode::Kind::Access, ev, false, 0, fn.name, ev.line, s.id}));
    }

    int emit_cond(const FunctionDef& fn, const Stmt& s) {
        emit_stmt_accesses(fn, s);
        int c = add_node(MicroNode{MicroNode::Kind::Cond, {}, false, 0, fn.name, s.line, s.id});
        emit(c);
        return c;
    }

    void build_stmt(const FunctionDef& fn, const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block:
                build_seq(fn, s.body);
                return;
            case StmtKind::If: {
                int c = emit_cond(fn, s);
                frontier_ = {c};
                build_seq(fn, s.body);
                auto then_f = frontier_;
                std::vector<int> else_f;
                if (!s.else_body.empty()) {
                    frontier_ = {c};
                    build_seq(fn, s.else_body);
                    else_f = frontier_;
                } else {
                    else_f = {c};
                }
                frontier_ = then_f;
                frontier_.insert(frontier_.end(), else_f.begin(), else_f.end());
                return;
            }
            case StmtKind::While: {
                int head_mark = static_cast<int>(g_.nodes.size());
                int c = emit_cond(fn, s);
                int head = head_mark < c ? head_mark : c;  // first cond-read node, else Cond
                frontier_ = {c};
                build_seq(fn, s.body);
                for (int f : frontier_) link(f, head, true);
                frontier_ = {c};
                return;
            }
            case StmtKind::For: {
                build_seq(fn, s.init);
                int head_mark = static_cast<int>(g_.nodes.size());
                int c = emit_cond(fn, s);
                int head = head_mark < c ? head_mark : c;
                frontier_ = {c};
                build_seq(fn, s.body);
                build_seq(fn, s.step);
                for (int f : frontier_) link(f, head, true);
                frontier_ = {c};
                return;
            }
            case StmtKind::Return:
                emit_stmt_accesses(fn, s);
                return_frontiers_.back().insert(return_frontiers_.back().end(), frontier_.begin(),
                                                frontier_.end());
                frontier_.clear();
                return;
            case StmtKind::Call: {
                if (model_.is_intrinsic(s.callee, cfg_)) {
                    bool en = (s.callee == cfg_.enable_intrinsic);
                    int tgt = intrinsic_target(s);
                    emit(add_node(
                        MicroNode{MicroNode::Kind::IrqControl, {}, en, tgt, fn.name, s.line, s.id}));
                    return;
                }
                emit_stmt_accesses(fn, s);  // argument reads happen at the call site
                const FunctionDef* callee = model_.find_function(s.callee);
                if (callee && !callee->proto_only) build_callable(*callee);
                return;  // external calls contribute no nodes
            }
            default:
                emit_stmt_accesses(fn, s);
                return;
        }
    }

    const ProgramModel& model_;
    const AccessAnalysis& acc_;
    const AnalysisConfig& cfg_;
    TaskGraph g_;
    std::vector<int> frontier_;
    std::vector<std::vector<int>> return_frontiers_;
    int depth_ = 0;
};

// Iterative dominator sets over a TaskGraph; dom[n] includes n.
inline std::vector<std::set<int>> graph_dominators(const TaskGraph& g) {
    std::size_t n = g.nodes.size();
    std::set<int> all;
    for (std::size_t i = 0; i < n; ++i) all.insert(static_cast<int>(i));
    std::vector<std::set<int>> dom(n, all);
    dom[static_cast<std::size_t>(g.entry)] = {g.entry};
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int ni = static_cast<int>(i);
            if (ni == g.entry) continue;
            std::set<int> meet;
            bool first = true;
            for (int p : g.pred[i]) {
                if (first) {
                    meet = dom[static_cast<std::size_t>(p)];
                    first = false;
                } else {
                    std::set<int> tmp;
                    for (int x : meet)
                        if (dom[static_cast<std::size_t>(p)].count(x)) tmp.insert(x);
                    meet = std::move(tmp);
                }
            }
            if (first) meet.clear();
            meet.insert(ni);
            if (meet != dom[i]) {
                dom[i] = std::move(meet);
                changed = true;
            }
        }
    }
    return dom;
}

}  // namespace detail

inline TaskGraph build_task_graph(const ProgramModel& model, const AccessAnalysis& acc,
                                  const AnalysisConfig& cfg, int fn_index) {
    return detail::TaskGraphBuilder(model, acc, cfg).build(fn_index);
}

// Graphs for every entry: main first, then handlers by ascending priority.
inline std::vector<TaskGraph> build_task_graphs(const ProgramModel& model,
                                                const AccessAnalysis& acc,
                                                const AnalysisConfig& cfg) {
    std::vector<TaskGraph> out;
    for (int ei : model.entry_indices()) out.push_back(build_task_graph(model, acc, cfg, ei));
    return out;
}

// A node lies on every complete execution of the task iff it dominates the
// exit node; everything else is conditional.
inline std::vector<bool> mandatory_nodes(const TaskGraph& g) {
    auto dom = detail::graph_dominators(g);
    std::vector<bool> out(g.nodes.size(), false);
    const auto& exit_dom = dom[static_cast<std::size_t>(g.exit)];
    for (int d : exit_dom) out[static_cast<std::size_t>(d)] = true;
    return out;
}

}  // namespace irqav
