#pragma once

#include <map>
#include <string>
#include <vector>

#include "irqav/access_analysis.hpp"
#include "irqav/micro_graph.hpp"
#include "irqav/program_model.hpp"

namespace irqav {

// Interrupt-flow analysis: locates enable/disable control points and runs a
// forward may-analysis over each task graph computing, per program point, the
// best static knowledge of every handler's enable bit. Cross-task effects are
// deliberately not propagated; refining those is the Judge's and the
// simulator's job.

enum class IrqState { Enabled, Disabled, Unknown };

inline const char* to_string(IrqState s) {
    switch (s) {
        case IrqState::Enabled: return "Enabled";
        case IrqState::Disabled: return "Disabled";
        case IrqState::Unknown: return "Unknown";
    }
    return "Unknown";
}

inline IrqState join(IrqState a, IrqState b) { return a == b ? a : IrqState::Unknown; }

// Map handler priority → state. Absent keys never occur: every declared
// handler is tracked at every point.
using IrqStateMap = std::map<int, IrqState>;

inline IrqStateMap join(const IrqStateMap& a, const IrqStateMap& b) {
    IrqStateMap out = a;
    for (const auto& [k, v] : b) {
        auto it = out.find(k);
        if (it == out.end())
            out[k] = v;
        else
            it->second = join(it->second, v);
    }
    return out;
}

struct InterruptControlPoint {
    std::string function;
    int line = 0;
    bool enable = false;
    int target = 0;  // -1 = all handlers
};

struct TaskFlow {
    std::string task;
    std::vector<IrqStateMap> in_state;   // per micro-graph node
    std::vector<IrqStateMap> out_state;
};

namespace detail {

inline void collect_control_points(const ProgramModel& model, const AnalysisConfig& cfg,
                                   const std::vector<Stmt>& stmts, const std::string& fn,
                                   std::vector<InterruptControlPoint>& out) {
    for (const auto& s : stmts) {
        if (s.kind == StmtKind::Call && model.is_intrinsic(s.callee, cfg)) {
            out.push_back({fn, s.line, s.callee == cfg.enable_intrinsic, intrinsic_target(s)});
        }
        collect_control_points(model, cfg, s.init, fn, out);
        collect_control_points(model, cfg, s.body, fn, out);
        collect_control_points(model, cfg, s.step, fn, out);
        collect_control_points(model, cfg, s.else_body, fn, out);
    }
}

}  // namespace detail

inline std::vector<InterruptControlPoint> find_control_points(const ProgramModel& model,
                                                              const AnalysisConfig& cfg) {
    std::vector<InterruptControlPoint> out;
    for (const auto& fn : model.functions) {
        if (fn.proto_only) continue;
        detail::collect_control_points(model, cfg, fn.body, fn.name, out);
    }
    return out;
}

inline IrqStateMap initial_irq_state(const ProgramModel& model, const AnalysisConfig& cfg) {
    IrqStateMap st;
    for (int i : model.isr_indices) {
        int prio = model.functions[static_cast<std::size_t>(i)].priority;
        st[prio] = cfg.initial_irq_enabled ? IrqState::Enabled : IrqState::Disabled;
    }
    return st;
}

inline IrqStateMap apply_control(IrqStateMap st, bool enable, int target) {
    IrqState v = enable ? IrqState::Enabled : IrqState::Disabled;
    if (target == -1) {
        for (auto& [k, s] : st) s = v;
    } else {
        auto it = st.find(target);
        if (it != st.end()) it->second = v;  // undeclared targets are inert
    }
    return st;
}

// Forward worklist fixpoint over one task graph.
inline TaskFlow compute_task_flow(const ProgramModel& model, const AnalysisConfig& cfg,
                                  const TaskGraph& g) {
    TaskFlow flow;
    flow.task = g.task;
    std::size_t n = g.nodes.size();
    IrqStateMap init = initial_irq_state(model, cfg);
    flow.in_state.assign(n, IrqStateMap{});
    flow.out_state.assign(n, IrqStateMap{});
    flow.in_state[static_cast<std::size_t>(g.entry)] = init;

    auto transfer = [&](std::size_t i) {
        const MicroNode& node = g.nodes[i];
        if (node.kind == MicroNode::Kind::IrqControl)
            return apply_control(flow.in_state[i], node.enable, node.target);
        return flow.in_state[i];
    };

    std::vector<int> work;
    for (std::size_t i = 0; i < n; ++i) work.push_back(static_cast<int>(i));
    while (!work.empty()) {
        int ni = work.front();
        work.erase(work.begin());
        std::size_t i = static_cast<std::size_t>(ni);
        IrqStateMap in = ni == g.entry ? init : IrqStateMap{};
        bool first = (ni == g.entry);
        for (int p : g.pred[i]) {
            const auto& ps = flow.out_state[static_cast<std::size_t>(p)];
            if (ps.empty()) continue;  // not yet computed
            in = first ? ps : join(in, ps);
            first = false;
        }
        IrqStateMap out;
        flow.in_state[i] = in;
        out = transfer(i);
        if (out != flow.out_state[i]) {
            flow.out_state[i] = out;
            for (int s : g.succ[i])
                if (std::find(work.begin(), work.end(), s) == work.end()) work.push_back(s);
        }
    }
    return flow;
}

inline std::vector<TaskFlow> compute_irq_flow(const ProgramModel& model,
                                              const AnalysisConfig& cfg,
                                              const std::vector<TaskGraph>& graphs) {
    std::vector<TaskFlow> out;
    for (const auto& g : graphs) out.push_back(compute_task_flow(model, cfg, g));
    return out;
}

// State on entry to `line` within `task`: the join over in-states of that
// line's nodes. Lines the task never executes yield the initial state.
inline IrqStateMap interrupt_state_at(const ProgramModel& model, const AnalysisConfig& cfg,
                                      const TaskGraph& g, const TaskFlow& flow, int line) {
    IrqStateMap acc;
    bool found = false;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].line != line) continue;
        if (g.nodes[i].kind == MicroNode::Kind::Entry || g.nodes[i].kind == MicroNode::Kind::Exit)
            continue;
        acc = found ? join(acc, flow.in_state[i]) : flow.in_state[i];
        found = true;
    }
    if (!found) return initial_irq_state(model, cfg);
    return acc;
}

}  // namespace irqav
