#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "irqav/access_analysis.hpp"
#include "irqav/flow_analysis.hpp"
#include "irqav/micro_graph.hpp"
#include "irqav/patterns.hpp"

namespace irqav {

// Candidate generation. For each shared global, every consecutive access pair
// (a1, a3) within one task is crossed with every access a2 from a strictly
// higher-priority task; triples keep only the four unserializable patterns.
// The stage over-approximates on purpose: conditional endpoints are flagged
// rather than dropped, and a pair is pruned for interrupt protection only
// when no higher-priority handler can start anywhere in the window.

struct CandidateViolation {
    std::string var;  // base global
    ViolationPattern pattern = ViolationPattern::RWW;
    AccessEvent a1, a2, a3;
    std::string task_low, task_high;
    int prio_low = 0;
    int prio_high = 0;
    bool a1_conditional = false;
    bool a3_conditional = false;
    bool cross_iteration = false;
};

namespace detail {

// Definite-overlap check: used for interposition so that over-approximate
// selectors never hide a pair the runtime could still produce.
inline bool must_alias(const VarPath& a, const VarPath& b) {
    if (a.base != b.base) return false;
    if (a.sel == VarPath::Sel::Scalar && b.sel == VarPath::Sel::Scalar) return true;
    if (a.sel == VarPath::Sel::Field && b.sel == VarPath::Sel::Field) return a.field == b.field;
    if (a.sel == VarPath::Sel::IndexConst && b.sel == VarPath::Sel::IndexConst)
        return a.index == b.index;
    return false;
}

struct PairPathInfo {
    bool reachable = false;
    bool back_edge_free = false;       // some path avoids every back edge
    std::vector<int> between;          // nodes strictly between on any valid path
};

// Paths n1 → n3 that cross no interposing access (a same-storage access to
// the pair's variable). Between-nodes are those lying on at least one such
// path.
inline PairPathInfo pair_paths(const TaskGraph& g, int n1, int n3, const std::string& base,
                               const AccessEvent& a1, const AccessEvent& a3) {
    auto blocks = [&](int m) {
        if (m == n1 || m == n3) return false;
        const MicroNode& node = g.nodes[static_cast<std::size_t>(m)];
        if (node.kind != MicroNode::Kind::Access) return false;
        if (node.access.path.base != base) return false;
        return must_alias(node.access.path, a1.path) && must_alias(node.access.path, a3.path);
    };

    PairPathInfo info;
    std::set<int> fwd;  // reachable from n1 without crossing a blocker
    std::vector<int> work;
    for (int s : g.succ[static_cast<std::size_t>(n1)]) work.push_back(s);
    while (!work.empty()) {
        int m = work.back();
        work.pop_back();
        if (m == n3) {
            info.reachable = true;
            continue;
        }
        if (fwd.count(m) || blocks(m)) continue;
        fwd.insert(m);
        for (int s : g.succ[static_cast<std::size_t>(m)]) work.push_back(s);
    }
    if (!info.reachable) return info;

    std::set<int> bwd;  // co-reaching n3 without crossing a blocker
    for (int p : g.pred[static_cast<std::size_t>(n3)]) work.push_back(p);
    while (!work.empty()) {
        int m = work.back();
        work.pop_back();
        if (m == n1 || bwd.count(m) || blocks(m)) continue;
        bwd.insert(m);
        for (int p : g.pred[static_cast<std::size_t>(m)]) work.push_back(p);
    }
    for (int m : fwd)
        if (bwd.count(m)) info.between.push_back(m);

    std::set<int> fwd_nb;  // same forward search, refusing back edges
    for (int s : g.succ[static_cast<std::size_t>(n1)])
        if (!g.is_back(n1, s)) work.push_back(s);
    while (!work.empty()) {
        int m = work.back();
        work.pop_back();
        if (m == n3) {
            info.back_edge_free = true;
            continue;
        }
        if (fwd_nb.count(m) || blocks(m)) continue;
        fwd_nb.insert(m);
        for (int s : g.succ[static_cast<std::size_t>(m)])
            if (!g.is_back(m, s)) work.push_back(s);
    }
    return info;
}

// True when every strictly higher-priority handler is Disabled at the exit of
// a1, at every between-node, and at the entry of a3, i.e. no handler can
// start inside the window, so nothing can interleave (not even through a
// lower handler re-enabling a higher one, because that chain cannot begin).
inline bool window_fully_protected(const TaskGraph& g, const TaskFlow& flow, int n1, int n3,
                                   const PairPathInfo& info, const std::vector<int>& higher) {
    if (higher.empty()) return false;
    auto all_disabled = [&](const IrqStateMap& st) {
        for (int h : higher) {
            auto it = st.find(h);
            if (it == st.end() || it->second != IrqState::Disabled) return false;
        }
        return true;
    };
    if (!all_disabled(flow.out_state[static_cast<std::size_t>(n1)])) return false;
    if (!all_disabled(flow.in_state[static_cast<std::size_t>(n3)])) return false;
    for (int m : info.between)
        if (!all_disabled(flow.in_state[static_cast<std::size_t>(m)])) return false;
    return true;
}

inline std::string event_key(const AccessEvent& e) {
    return e.function + "#" + std::to_string(e.stmt_id) + "#" + std::to_string(e.micro) + "#" +
           to_string(e.op) + "#" + e.path.base;
}

}  // namespace detail

inline std::vector<CandidateViolation> highlight(const ProgramModel& model,
                                                 const AccessAnalysis& acc,
                                                 const std::vector<TaskGraph>& graphs,
                                                 const std::vector<TaskFlow>& flows,
                                                 const AnalysisConfig& cfg) {
    (void)cfg;
    std::vector<CandidateViolation> out;
    std::set<std::string> seen;

    std::vector<std::vector<bool>> mandatory;
    for (const auto& g : graphs) mandatory.push_back(mandatory_nodes(g));

    for (const auto& base : acc.shared_globals) {
        for (std::size_t li = 0; li < graphs.size(); ++li) {
            const TaskGraph& low = graphs[li];
            std::vector<int> higher;  // priorities of strictly higher tasks
            for (const auto& g : graphs)
                if (g.priority > low.priority) higher.push_back(g.priority);

            std::vector<int> low_nodes;
            for (int n : low.access_nodes)
                if (low.nodes[static_cast<std::size_t>(n)].access.path.base == base)
                    low_nodes.push_back(n);

            for (int n1 : low_nodes) {
                for (int n3 : low_nodes) {
                    // n1 == n3 is a node pairing with its own next-iteration
                    // occurrence; pair_paths demands a real cycle for it
                    const AccessEvent& a1 = low.nodes[static_cast<std::size_t>(n1)].access;
                    const AccessEvent& a3 = low.nodes[static_cast<std::size_t>(n3)].access;
                    if (!may_alias(a1.path, a3.path)) continue;
                    auto info = detail::pair_paths(low, n1, n3, base, a1, a3);
                    if (!info.reachable) continue;
                    if (detail::window_fully_protected(low, flows[li], n1, n3, info, higher))
                        continue;

                    for (std::size_t hi = 0; hi < graphs.size(); ++hi) {
                        const TaskGraph& high = graphs[hi];
                        if (high.priority <= low.priority) continue;
                        for (int n2 : high.access_nodes) {
                            const AccessEvent& a2 =
                                high.nodes[static_cast<std::size_t>(n2)].access;
                            if (a2.path.base != base) continue;
                            if (!may_alias(a2.path, a1.path) || !may_alias(a2.path, a3.path))
                                continue;
                            auto pat = pattern_of(a1.op, a2.op, a3.op);
                            if (!pat) continue;
                            CandidateViolation cv;
                            cv.var = base;
                            cv.pattern = *pat;
                            cv.a1 = a1;
                            cv.a2 = a2;
                            cv.a3 = a3;
                            cv.task_low = low.task;
                            cv.task_high = high.task;
                            cv.prio_low = low.priority;
                            cv.prio_high = high.priority;
                            cv.a1_conditional = !mandatory[li][static_cast<std::size_t>(n1)];
                            cv.a3_conditional = !mandatory[li][static_cast<std::size_t>(n3)];
                            cv.cross_iteration = !info.back_edge_free;
                            std::string key = base + "|" + to_string(*pat) + "|" +
                                              detail::event_key(a1) + "|" + cv.task_high + "|" +
                                              detail::event_key(a2) + "|" + detail::event_key(a3);
                            if (seen.insert(key).second) out.push_back(std::move(cv));
                        }
                    }
                }
            }
        }
    }

    std::sort(out.begin(), out.end(), [](const CandidateViolation& x, const CandidateViolation& y) {
        if (x.var != y.var) return x.var < y.var;
        if (x.pattern != y.pattern) return static_cast<int>(x.pattern) < static_cast<int>(y.pattern);
        auto loc = [](const AccessEvent& e) {
            return std::tuple<int, int, int>(e.line, e.stmt_ordinal, e.micro);
        };
        if (x.task_low != y.task_low) return x.task_low < y.task_low;
        if (loc(x.a1) != loc(y.a1)) return loc(x.a1) < loc(y.a1);
        if (loc(x.a3) != loc(y.a3)) return loc(x.a3) < loc(y.a3);
        if (x.prio_high != y.prio_high) return x.prio_high < y.prio_high;
        return loc(x.a2) < loc(y.a2);
    });
    return out;
}

}  // namespace irqav
