#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "irqav/harness.hpp"

using namespace irqav;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AnalysisError(0, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AnalysisConfig load_config(const std::string& path) {
    if (path.empty()) return AnalysisConfig{};
    return AnalysisConfig::from_file(path);
}

const char* node_kind_name(MicroNode::Kind k) {
    switch (k) {
        case MicroNode::Kind::Entry: return "entry";
        case MicroNode::Kind::Exit: return "exit";
        case MicroNode::Kind::Access: return "access";
        case MicroNode::Kind::IrqControl: return "irq";
        case MicroNode::Kind::Cond: return "cond";
    }
    return "entry";
}

const char* irq_state_name(IrqState s) {
    switch (s) {
        case IrqState::Enabled: return "E";
        case IrqState::Disabled: return "D";
        case IrqState::Unknown: return "U";
    }
    return "U";
}

void dump_accesses(const AnalysisBundle& b) {
    for (const auto& e : b.acc.events) {
        nlohmann::json j;
        j["fn"] = e.function;
        j["op"] = to_string(e.op);
        j["var"] = e.path.display();
        j["line"] = e.line;
        j["col"] = e.col;
        j["ord"] = e.micro;
        std::cout << j.dump() << "\n";
    }
}

void dump_compressed(const AnalysisBundle& b) {
    CompressedSource cs = b.used_extractor ? b.extracted : extract(SourceText(b.source), b.model);
    nlohmann::json j;
    j["text"] = cs.text;
    nlohmann::json map = nlohmann::json::object();
    for (const auto& [compressed, original] : cs.to_original)
        map[std::to_string(compressed)] = original;
    j["line_map"] = map;
    j["elided"] = cs.elided_functions;
    std::cout << j.dump(2) << "\n";
}

void dump_irq_flow(const AnalysisBundle& b) {
    nlohmann::json j;
    nlohmann::json cps = nlohmann::json::array();
    for (const auto& cp : b.summary.control_points)
        cps.push_back({{"function", cp.function},
                       {"line", cp.line},
                       {"enable", cp.enable},
                       {"target", cp.target}});
    j["control_points"] = cps;

    nlohmann::json tasks = nlohmann::json::array();
    for (std::size_t gi = 0; gi < b.graphs.size(); ++gi) {
        const auto& g = b.graphs[gi];
        const auto& flow = b.flows[gi];
        nlohmann::json tj;
        tj["task"] = g.task;
        tj["priority"] = g.priority;
        nlohmann::json nodes = nlohmann::json::array();
        for (std::size_t ni = 0; ni < g.nodes.size(); ++ni) {
            const auto& n = g.nodes[ni];
            if (n.line <= 0) continue;
            auto states = [&](const IrqStateMap& m) {
                nlohmann::json sj = nlohmann::json::object();
                for (const auto& [prio, st] : m) sj[std::to_string(prio)] = irq_state_name(st);
                return sj;
            };
            nodes.push_back({{"node", ni},
                             {"line", n.line},
                             {"kind", node_kind_name(n.kind)},
                             {"in", states(flow.in_state[ni])},
                             {"out", states(flow.out_state[ni])}});
        }
        tj["nodes"] = nodes;
        tasks.push_back(tj);
    }
    j["tasks"] = tasks;
    std::cout << j.dump(2) << "\n";
}

void dump_candidates(const AnalysisBundle& b) {
    auto ref = [](const AccessEvent& e) {
        return nlohmann::json{{"fn", e.function}, {"line", e.line}, {"op", to_string(e.op)}};
    };
    for (const auto& c : b.candidates) {
        nlohmann::json j;
        j["var"] = c.var;
        j["pattern"] = to_string(c.pattern);
        j["a1"] = ref(c.a1);
        j["a2"] = ref(c.a2);
        j["a3"] = ref(c.a3);
        std::cout << j.dump() << "\n";
    }
}

DefectReport detect_with_backend(const AnalysisBundle& bundle,
                                 const std::vector<DetectionTask>& tasks,
                                 const BackendConfig& bc, const std::string& out_dir,
                                 bool* incomplete) {
    DefectReport combined;
    if (tasks.empty()) return combined;

    std::unique_ptr<ChatBackend> backend;
    switch (bc.kind) {
        case BackendKind::Oracle:
            backend = std::make_unique<OracleBackend>(bundle, tasks, bc.sim);
            break;
        case BackendKind::Replay:
            backend = std::make_unique<ReplayBackend>(bc.transcript_dir);
            break;
        case BackendKind::Http:
            backend = HttpBackend::from_env(bc.temperature);
            break;
    }

    for (const auto& task : tasks) {
        auto res = run_conversation(bundle, task, *backend, *backend, bc);
        if (res.incomplete && incomplete) *incomplete = true;
        if (!out_dir.empty()) persist_transcript(out_dir + "/transcripts", task.id, res.transcript);
        for (const auto& v : res.final.violations) combined.violations.push_back(v);
    }
    std::sort(combined.violations.begin(), combined.violations.end(),
              [](const ReportedViolation& a, const ReportedViolation& b2) {
                  return violation_key(a) < violation_key(b2);
              });
    combined.status =
        combined.violations.empty() ? ReportStatus::NoDefect : ReportStatus::Violations;
    return combined;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"atomicity-violation detector for interrupt-driven C programs"};
    app.require_subcommand(1);

    std::string an_file, an_config, an_backend = "oracle", an_out, an_transcripts = "transcripts";
    int an_rounds = 0;
    bool an_dump_accesses = false, an_dump_compressed = false, an_dump_irq = false;
    bool an_dump_candidates = false, an_dump_plan = false;
    auto* analyze = app.add_subcommand("analyze", "run the detection pipeline on one program");
    analyze->add_option("file", an_file, "C source file")->required();
    analyze->add_option("--backend", an_backend, "chat backend: http, replay, or oracle")
        ->check(CLI::IsMember({"http", "replay", "oracle"}));
    analyze->add_option("--max-rounds", an_rounds, "conversation round limit");
    analyze->add_option("--config", an_config, "analysis config file (JSON)");
    analyze->add_option("--out", an_out, "directory for report and transcripts");
    analyze->add_option("--transcripts", an_transcripts, "replay transcript directory");
    analyze->add_flag("--dump-accesses", an_dump_accesses, "emit the access matrix as JSON lines");
    analyze->add_flag("--dump-compressed", an_dump_compressed,
                      "emit compressed source and its line map");
    analyze->add_flag("--dump-irq-flow", an_dump_irq,
                      "emit interrupt control points and per-node states");
    analyze->add_flag("--dump-candidates", an_dump_candidates,
                      "emit statically highlighted candidates as JSON lines");
    analyze->add_flag("--dump-plan", an_dump_plan, "emit the tool plan and task partition");

    std::string sim_file, sim_config;
    int sim_firings = -1, sim_loops = -1;
    long long sim_traces = -1;
    auto* simulate = app.add_subcommand("simulate", "enumerate interleavings and report"
                                                    " dynamic violations");
    simulate->add_option("file", sim_file, "C source file")->required();
    simulate->add_option("--max-firings", sim_firings, "per-handler firing budget per trace");
    simulate->add_option("--max-loop-iters", sim_loops, "loop iteration cap per activation");
    simulate->add_option("--max-traces", sim_traces, "trace enumeration budget");
    simulate->add_option("--config", sim_config, "analysis config file (JSON)");

    std::string sc_corpus, sc_backend = "oracle", sc_out, sc_config, sc_transcripts = "transcripts";
    int sc_rounds = 0;
    bool sc_oracle_truth = false, sc_no_timing = false;
    auto* score = app.add_subcommand("score", "run and score the pipeline over a corpus");
    score->add_option("--corpus", sc_corpus, "directory of .c programs")->required();
    score->add_option("--backend", sc_backend, "chat backend: http, replay, or oracle")
        ->check(CLI::IsMember({"http", "replay", "oracle"}));
    score->add_option("--out", sc_out, "output directory")->required();
    score->add_option("--config", sc_config, "analysis config file (JSON)");
    score->add_option("--max-rounds", sc_rounds, "conversation round limit");
    score->add_option("--transcripts", sc_transcripts,
                      "replay transcript root (one subdirectory per program)");
    score->add_flag("--oracle-truth", sc_oracle_truth,
                    "score against simulator-generated ground truth");
    score->add_flag("--no-timing", sc_no_timing, "zero wall times for reproducible output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) {
            AnalysisConfig cfg = load_config(an_config);
            if (an_rounds > 0) cfg.max_rounds = an_rounds;
            AnalysisBundle bundle = plan(read_file(an_file), cfg);
            auto tasks = plan_tasks(bundle);

            bool dumped = false;
            if (an_dump_accesses) dump_accesses(bundle), dumped = true;
            if (an_dump_compressed) dump_compressed(bundle), dumped = true;
            if (an_dump_irq) dump_irq_flow(bundle), dumped = true;
            if (an_dump_candidates) dump_candidates(bundle), dumped = true;
            if (an_dump_plan) std::cout << plan_to_json(bundle, tasks).dump(2) << "\n", dumped = true;
            if (dumped) return 0;

            BackendConfig bc;
            bc.kind = backend_kind_from_string(an_backend);
            bc.sim = SimOptions::from(cfg);
            bc.max_rounds = cfg.max_rounds;
            bc.temperature = cfg.temperature;
            bc.transcript_dir = an_transcripts;

            bool incomplete = false;
            auto report = detect_with_backend(bundle, tasks, bc, an_out, &incomplete);
            std::cout << report_to_json(report).dump(2) << "\n";
            if (!an_out.empty()) {
                std::filesystem::create_directories(an_out);
                std::ofstream out(std::filesystem::path(an_out) / "report.json",
                                  std::ios::binary);
                out << report_to_json(report).dump(2) << "\n";
            }
            if (incomplete)
                std::cerr << "warning: backend became unavailable; report covers completed"
                             " rounds only\n";
            return 0;
        }

        if (simulate->parsed()) {
            AnalysisConfig cfg = load_config(sim_config);
            if (sim_firings >= 0) cfg.max_firings_per_isr = sim_firings;
            if (sim_loops >= 0) cfg.max_loop_iterations = sim_loops;
            if (sim_traces >= 0) cfg.max_traces = sim_traces;

            AnalysisBundle bundle = plan(read_file(sim_file), cfg);
            auto sim = enumerate_traces(bundle.model, bundle.acc, cfg, SimOptions::from(cfg));
            auto dynamic = detect_dynamic(sim);

            DefectReport report;
            for (const auto& d : dynamic) {
                ReportedViolation v;
                v.var = d.core.var;
                v.pattern = d.core.pattern;
                v.a1 = {d.core.a1.function, d.core.a1.line, d.core.a1.op};
                v.a2 = {d.core.a2.function, d.core.a2.line, d.core.a2.op};
                v.a3 = {d.core.a3.function, d.core.a3.line, d.core.a3.op};
                v.rationale = "witnessed by bounded interleaving exploration (trace " +
                              std::to_string(d.witness_trace) + ")";
                report.violations.push_back(std::move(v));
            }
            report.status =
                report.violations.empty() ? ReportStatus::NoDefect : ReportStatus::Violations;
            std::cout << report_to_json(report).dump(2) << "\n";

            if (sim.budget_exceeded)
                std::cerr << "warning: trace budget exhausted; enumeration is incomplete\n";
            long long truncated = 0;
            for (const auto& t : sim.traces) truncated += t.truncated ? 1 : 0;
            if (truncated > 0)
                std::cerr << "warning: " << truncated
                          << " trace(s) hit the loop iteration cap\n";
            return 0;
        }

        if (score->parsed()) {
            AnalysisConfig cfg = load_config(sc_config);
            if (sc_rounds > 0) cfg.max_rounds = sc_rounds;

            BenchmarkOptions opt;
            opt.analysis = cfg;
            opt.backend.kind = backend_kind_from_string(sc_backend);
            opt.backend.sim = SimOptions::from(cfg);
            opt.backend.max_rounds = cfg.max_rounds;
            opt.backend.temperature = cfg.temperature;
            opt.backend.transcript_dir = sc_transcripts;
            opt.out_dir = sc_out;
            opt.oracle_truth = sc_oracle_truth;
            opt.no_timing = sc_no_timing;

            auto card = run_benchmark(sc_corpus, opt);
            std::cout << scorecard_table(card);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
