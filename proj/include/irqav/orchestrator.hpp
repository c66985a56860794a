#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irqav/access_analysis.hpp"
#include "irqav/code_extractor.hpp"
#include "irqav/config.hpp"
#include "irqav/flow_analysis.hpp"
#include "irqav/highlighter.hpp"
#include "irqav/micro_graph.hpp"
#include "irqav/program_model.hpp"

namespace irqav {

// Planning layer: decides which analyses a program needs, condenses their
// results into a summary, splits detection into independent agent tasks, and
// renders the annotated source those tasks prompt with.

struct CodeSummary {
    // base → task → (reads, writes), attributed through call-graph reach
    std::map<std::string, std::map<std::string, std::pair<int, int>>> access_counts;
    std::vector<std::string> shared_globals;
    std::vector<InterruptControlPoint> control_points;
    std::map<std::string, int> candidate_counts;                         // pattern tag → count
    std::map<std::string, std::map<std::string, int>> per_var_patterns;  // var → pattern → count
    std::vector<std::pair<std::string, std::vector<std::string>>> call_graph;
    bool compressed = false;
    int source_lines = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        nlohmann::json vars = nlohmann::json::object();
        for (const auto& [base, tasks] : access_counts) {
            nlohmann::json per_task = nlohmann::json::object();
            for (const auto& [task, rw] : tasks)
                per_task[task] = {{"reads", rw.first}, {"writes", rw.second}};
            vars[base] = per_task;
        }
        j["access_counts"] = vars;
        j["shared_globals"] = shared_globals;
        nlohmann::json cps = nlohmann::json::array();
        for (const auto& cp : control_points)
            cps.push_back({{"function", cp.function},
                           {"line", cp.line},
                           {"enable", cp.enable},
                           {"target", cp.target}});
        j["control_points"] = cps;
        j["candidate_counts"] = candidate_counts;
        j["per_var_patterns"] = per_var_patterns;
        nlohmann::json cg = nlohmann::json::object();
        for (const auto& [fn, callees] : call_graph) cg[fn] = callees;
        j["call_graph"] = cg;
        j["compressed"] = compressed;
        j["source_lines"] = source_lines;
        return j;
    }
};

enum class PartitionStrategy { PatternBased, VariableBased };

inline std::string to_string(PartitionStrategy s) {
    return s == PartitionStrategy::PatternBased ? "pattern" : "variable";
}

struct DetectionTask {
    std::string id;
    PartitionStrategy strategy = PartitionStrategy::PatternBased;
    std::vector<std::string> variables;
    std::vector<ViolationPattern> patterns;
    std::string annotated_source;
};

// Everything downstream consumers need, computed once per program.
struct AnalysisBundle {
    AnalysisConfig cfg;
    std::string source;
    ProgramModel model;
    AccessAnalysis acc;
    std::vector<TaskGraph> graphs;
    std::vector<TaskFlow> flows;
    std::vector<CandidateViolation> candidates;
    std::vector<std::string> tools;  // which analyses the planner activated
    bool used_extractor = false;
    bool used_flow = false;
    CompressedSource extracted;  // valid iff used_extractor
    CodeSummary summary;
};

namespace detail {

inline CodeSummary build_summary(const AnalysisBundle& b) {
    CodeSummary s;
    s.source_lines = static_cast<int>(SourceText(b.source).line_count());
    s.compressed = b.used_extractor;
    s.shared_globals.assign(b.acc.shared_globals.begin(), b.acc.shared_globals.end());
    std::sort(s.shared_globals.begin(), s.shared_globals.end());

    for (const auto& [task, fns] : b.acc.task_reach) {
        for (const auto& fn : fns) {
            auto fit = b.acc.by_function.find(fn);
            if (fit == b.acc.by_function.end()) continue;
            for (std::size_t idx : fit->second) {
                const AccessEvent& e = b.acc.events[idx];
                auto& rw = s.access_counts[e.path.base][task];
                if (e.op == AccessOp::Read)
                    ++rw.first;
                else
                    ++rw.second;
            }
        }
    }
    s.control_points = find_control_points(b.model, b.cfg);
    for (auto p : enumerate_patterns()) s.candidate_counts[to_string(p)] = 0;
    for (const auto& c : b.candidates) {
        ++s.candidate_counts[to_string(c.pattern)];
        ++s.per_var_patterns[c.var][to_string(c.pattern)];
    }
    for (const auto& fn : b.model.functions) {
        if (fn.proto_only) continue;
        std::vector<std::string> callees = fn.callees;
        std::sort(callees.begin(), callees.end());
        callees.erase(std::unique(callees.begin(), callees.end()), callees.end());
        s.call_graph.emplace_back(fn.name, std::move(callees));
    }
    return s;
}

}  // namespace detail

inline AnalysisBundle plan(const std::string& source, const AnalysisConfig& cfg) {
    AnalysisBundle b;
    b.cfg = cfg;
    b.source = source;
    b.model = parse_program(SourceText(source), cfg);
    b.acc = analyze_accesses(b.model, cfg);
    b.tools.push_back("access_analyzer");

    bool has_call_edges = !b.acc.call_edges.empty();
    bool has_intrinsics = !find_control_points(b.model, cfg).empty();
    b.used_flow = has_call_edges || has_intrinsics;
    if (b.used_flow) b.tools.push_back("control_flow_analyzer");

    b.graphs = build_task_graphs(b.model, b.acc, cfg);
    b.flows = compute_irq_flow(b.model, cfg, b.graphs);

    if (!b.acc.shared_globals.empty()) {
        b.tools.push_back("highlighter");
        b.candidates = highlight(b.model, b.acc, b.graphs, b.flows, cfg);
    }

    if (source.size() > static_cast<std::size_t>(cfg.context_budget)) {
        b.tools.push_back("code_extractor");
        b.used_extractor = true;
        b.extracted = extract(SourceText(source), b.model);
    }

    b.summary = detail::build_summary(b);
    return b;
}

inline std::vector<DetectionTask> partition_tasks(const AnalysisBundle& b) {
    std::vector<DetectionTask> tasks;
    if (b.candidates.empty()) return tasks;

    // per-variable and per-pattern candidate tallies
    std::map<std::string, int> var_counts;
    std::map<ViolationPattern, int> pattern_counts;
    std::map<ViolationPattern, std::set<std::string>> pattern_vars;
    for (const auto& c : b.candidates) {
        ++var_counts[c.var];
        ++pattern_counts[c.pattern];
        pattern_vars[c.pattern].insert(c.var);
    }

    int nonempty_min = 0, nonempty_max = 0;
    for (const auto& [p, n] : pattern_counts) {
        if (nonempty_min == 0 || n < nonempty_min) nonempty_min = n;
        nonempty_max = std::max(nonempty_max, n);
    }
    bool even = nonempty_min > 0 &&
                static_cast<double>(nonempty_max) <=
                    b.cfg.evenness_ratio * static_cast<double>(nonempty_min);
    bool pattern_based = static_cast<int>(b.acc.shared_globals.size()) < 3 && even;

    int seq = 0;
    auto next_id = [&] { return "T" + std::to_string(++seq); };

    if (pattern_based) {
        for (auto p : enumerate_patterns()) {
            auto it = pattern_vars.find(p);
            if (it == pattern_vars.end()) continue;
            DetectionTask t;
            t.id = next_id();
            t.strategy = PartitionStrategy::PatternBased;
            t.patterns = {p};
            t.variables.assign(it->second.begin(), it->second.end());
            tasks.push_back(std::move(t));
        }
        return tasks;
    }

    // variable-based: isolate high-frequency variables, group the rest ≤ 3,
    // ordered by descending candidate count then name for determinism
    std::vector<std::pair<std::string, int>> ordered(var_counts.begin(), var_counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b2) {
        if (a.second != b2.second) return a.second > b2.second;
        return a.first < b2.first;
    });
    auto patterns_of = [&](const std::vector<std::string>& vars) {
        std::set<ViolationPattern> ps;
        for (const auto& c : b.candidates)
            if (std::find(vars.begin(), vars.end(), c.var) != vars.end()) ps.insert(c.pattern);
        std::vector<ViolationPattern> out;
        for (auto p : enumerate_patterns())
            if (ps.count(p)) out.push_back(p);
        return out;
    };

    std::vector<std::string> pending;
    auto flush = [&] {
        if (pending.empty()) return;
        DetectionTask t;
        t.id = next_id();
        t.strategy = PartitionStrategy::VariableBased;
        t.variables = pending;
        t.patterns = patterns_of(pending);
        tasks.push_back(std::move(t));
        pending.clear();
    };
    for (const auto& [var, count] : ordered) {
        if (count >= b.cfg.high_frequency_threshold) {
            flush();
            DetectionTask t;
            t.id = next_id();
            t.strategy = PartitionStrategy::VariableBased;
            t.variables = {var};
            t.patterns = patterns_of(t.variables);
            tasks.push_back(std::move(t));
            continue;
        }
        pending.push_back(var);
        if (pending.size() == 3) flush();
    }
    flush();
    return tasks;
}

// --- source annotation -------------------------------------------------------

namespace detail {

inline char state_letter(IrqState s) {
    switch (s) {
        case IrqState::Enabled: return 'E';
        case IrqState::Disabled: return 'D';
        case IrqState::Unknown: return 'U';
    }
    return 'U';
}

// The task whose graph carries a function, preferring the lowest priority.
inline int graph_for_function(const AnalysisBundle& b, const std::string& fn) {
    for (std::size_t gi = 0; gi < b.graphs.size(); ++gi) {
        const auto& reach = b.acc.task_reach.at(b.graphs[gi].task);
        if (reach.count(fn)) return static_cast<int>(gi);
    }
    return -1;
}

}  // namespace detail

// Line-numbered listing with trailing fact comments on every line that
// touches one of the task's target variables. Numbers are original-source
// numbers even when the listing is the compressed text.
inline std::string annotate_source(const AnalysisBundle& b, const DetectionTask& task) {
    const std::string& text = b.used_extractor ? b.extracted.text : b.source;
    SourceText st(text);
    std::set<std::string> targets(task.variables.begin(), task.variables.end());
    std::set<ViolationPattern> target_patterns(task.patterns.begin(), task.patterns.end());

    // facts are keyed by original line number
    std::map<int, std::map<std::string, std::vector<const AccessEvent*>>> line_events;
    for (const auto& e : b.acc.events)
        if (targets.count(e.path.base)) line_events[e.line][e.path.base].push_back(&e);

    std::map<int, std::set<std::string>> line_roles;
    for (const auto& c : b.candidates) {
        if (!targets.count(c.var) || !target_patterns.count(c.pattern)) continue;
        line_roles[c.a1.line].insert("a1");
        line_roles[c.a2.line].insert("a2");
        line_roles[c.a3.line].insert("a3");
    }

    std::ostringstream out;
    for (std::size_t i = 1; i <= st.line_count(); ++i) {
        int orig = static_cast<int>(i);
        if (b.used_extractor) {
            auto it = b.extracted.to_original.find(static_cast<int>(i));
            orig = it == b.extracted.to_original.end() ? 0 : it->second;
        }
        out << orig << ": " << st.line(i);
        auto lit = line_events.find(orig);
        if (lit != line_events.end()) {
            out << "  //@";
            bool first_var = true;
            for (const auto& [base, evs] : lit->second) {
                out << (first_var ? " " : "; ") << base << ":";
                first_var = false;
                std::set<std::string> ops;
                for (const AccessEvent* e : evs) {
                    int gi = detail::graph_for_function(b, e->function);
                    std::string task_name = gi >= 0 ? b.graphs[static_cast<std::size_t>(gi)].task
                                                    : e->function;
                    int prio = gi >= 0 ? b.graphs[static_cast<std::size_t>(gi)].priority : 0;
                    ops.insert(std::string(to_string(e->op)) + "[" + task_name + "/p" +
                               std::to_string(prio) + "]");
                }
                for (const auto& o : ops) out << " " << o;
            }
            auto rit = line_roles.find(orig);
            if (rit != line_roles.end()) {
                out << "; roles:";
                for (const auto& r : rit->second) out << " " << r;
            }
            if (b.used_flow && !lit->second.empty()) {
                const AccessEvent* e0 = lit->second.begin()->second.front();
                int gi = detail::graph_for_function(b, e0->function);
                if (gi >= 0) {
                    auto st_map = interrupt_state_at(
                        b.model, b.cfg, b.graphs[static_cast<std::size_t>(gi)],
                        b.flows[static_cast<std::size_t>(gi)], orig);
                    if (!st_map.empty()) {
                        out << "; irq:";
                        for (const auto& [prio, state] : st_map)
                            out << " " << prio << "=" << detail::state_letter(state);
                    }
                }
            }
        }
        if (i < st.line_count() || !text.empty()) out << "\n";
    }
    std::string result = out.str();
    // preserve the exact trailing-newline shape of the input
    if (!text.empty() && text.back() != '\n' && !result.empty() && result.back() == '\n')
        result.pop_back();
    return result;
}

// Inverse of annotate_source modulo the prefix/comment grammar: drops the
// leading "<num>: " and any trailing "  //@ ..." from each line.
inline std::string strip_annotations(const std::string& annotated) {
    std::ostringstream out;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= annotated.size()) {
        std::size_t eol = annotated.find('\n', pos);
        std::string line = annotated.substr(
            pos, eol == std::string::npos ? std::string::npos : eol - pos);
        std::size_t d = 0;
        while (d < line.size() && line[d] >= '0' && line[d] <= '9') ++d;
        if (d > 0 && d + 1 < line.size() && line[d] == ':' && line[d + 1] == ' ')
            line = line.substr(d + 2);
        else if (d > 0 && d + 1 == line.size() && line[d] == ':')
            line = line.substr(d + 1);
        auto mark = line.rfind("  //@");
        if (mark != std::string::npos) line = line.substr(0, mark);
        if (!first) out << "\n";
        first = false;
        out << line;
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return out.str();
}

inline std::vector<DetectionTask> plan_tasks(AnalysisBundle& b) {
    auto tasks = partition_tasks(b);
    for (auto& t : tasks) t.annotated_source = annotate_source(b, t);
    return tasks;
}

inline nlohmann::json plan_to_json(const AnalysisBundle& b,
                                   const std::vector<DetectionTask>& tasks) {
    nlohmann::json j;
    j["tools"] = b.tools;
    j["summary"] = b.summary.to_json();
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : tasks) {
        nlohmann::json tj;
        tj["id"] = t.id;
        tj["strategy"] = to_string(t.strategy);
        tj["variables"] = t.variables;
        std::vector<std::string> pats;
        for (auto p : t.patterns) pats.push_back(to_string(p));
        tj["patterns"] = pats;
        ts.push_back(tj);
    }
    j["tasks"] = ts;
    return j;
}

}  // namespace irqav
