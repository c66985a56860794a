#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irqav/agents.hpp"

namespace irqav {

// --- ground truth ---------------------------------------------------------------

// One file per program, the same violation schema as reports, so a report
// file can be dropped in as truth and vice versa.
struct GroundTruth {
    std::vector<ReportedViolation> entries;
};

namespace detail {

// Truth files are parsed without a program model: function names are
// optional, lines only need to be positive, the op sequence must still spell
// the pattern.
inline ReportedViolation violation_from_json_lenient(const nlohmann::json& vj) {
    if (!vj.is_object() || !vj.contains("var") || !vj.contains("pattern"))
        throw BackendError("truth entry lacks var or pattern");
    ReportedViolation v;
    v.var = vj["var"].get<std::string>();
    auto pat = pattern_from_string(vj["pattern"].get<std::string>());
    if (!pat) throw BackendError("truth entry has unknown pattern");
    v.pattern = *pat;
    auto ref = [&](const char* name) {
        if (!vj.contains(name) || !vj[name].is_object())
            throw BackendError(std::string("truth entry lacks ") + name);
        const auto& rj = vj[name];
        ViolationRef r;
        if (rj.contains("function") && rj["function"].is_string())
            r.function = rj["function"].get<std::string>();
        if (!rj.contains("line") || !rj["line"].is_number_integer() || rj["line"].get<int>() < 1)
            throw BackendError(std::string(name) + " line must be a positive integer");
        r.line = rj["line"].get<int>();
        std::string op = rj.contains("op") ? rj["op"].get<std::string>() : "";
        if (op == "R")
            r.op = AccessOp::Read;
        else if (op == "W")
            r.op = AccessOp::Write;
        else
            throw BackendError(std::string(name) + " op must be R or W");
        return r;
    };
    v.a1 = ref("a1");
    v.a2 = ref("a2");
    v.a3 = ref("a3");
    std::string tag = to_string(v.pattern);
    std::string ops = std::string(to_string(v.a1.op)) + to_string(v.a2.op) + to_string(v.a3.op);
    if (ops != tag)
        throw BackendError("truth entry op sequence " + ops + " does not spell " + tag);
    if (vj.contains("rationale") && vj["rationale"].is_string())
        v.rationale = vj["rationale"].get<std::string>();
    return v;
}

}  // namespace detail

inline GroundTruth truth_from_json(const nlohmann::json& j) {
    GroundTruth t;
    const nlohmann::json* arr = nullptr;
    if (j.is_object() && j.contains("violations") && j["violations"].is_array())
        arr = &j["violations"];
    else if (j.is_array())
        arr = &j;
    else
        throw BackendError("truth file must be a report object or a violations array");
    for (const auto& vj : *arr) t.entries.push_back(detail::violation_from_json_lenient(vj));
    return t;
}

inline GroundTruth load_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BackendError("cannot open truth file " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw BackendError("truth file " + path + " is not valid JSON");
    return truth_from_json(j);
}

// --- matching -------------------------------------------------------------------

// The match key deliberately omits function names: pattern, variable, and
// the three (line, op) pairs identify a violation.
inline std::string match_key(const ReportedViolation& v) {
    auto ref = [](const ViolationRef& r) {
        return std::to_string(r.line) + to_string(r.op);
    };
    return v.var + "|" + to_string(v.pattern) + "|" + ref(v.a1) + "|" + ref(v.a2) + "|" +
           ref(v.a3);
}

struct MatchOutcome {
    std::vector<std::pair<int, int>> pairs;  // (report index, truth index)
    std::vector<int> false_positives;        // unmatched report indices
    std::vector<int> false_negatives;        // unmatched truth indices
    int tp() const { return static_cast<int>(pairs.size()); }
    int fp() const { return static_cast<int>(false_positives.size()); }
    int fn() const { return static_cast<int>(false_negatives.size()); }
};

inline MatchOutcome match(const std::vector<ReportedViolation>& report,
                          const std::vector<ReportedViolation>& truth) {
    std::map<std::string, std::vector<int>> open;
    for (int i = 0; i < static_cast<int>(truth.size()); ++i)
        open[match_key(truth[static_cast<std::size_t>(i)])].push_back(i);

    // consume smallest truth index per key: counts are multiset intersection
    // sizes, so input order never changes them
    MatchOutcome out;
    std::vector<bool> truth_used(truth.size(), false);
    for (int i = 0; i < static_cast<int>(report.size()); ++i) {
        auto it = open.find(match_key(report[static_cast<std::size_t>(i)]));
        if (it != open.end() && !it->second.empty()) {
            int t = it->second.front();
            it->second.erase(it->second.begin());
            truth_used[static_cast<std::size_t>(t)] = true;
            out.pairs.push_back({i, t});
        } else {
            out.false_positives.push_back(i);
        }
    }
    for (int i = 0; i < static_cast<int>(truth.size()); ++i)
        if (!truth_used[static_cast<std::size_t>(i)]) out.false_negatives.push_back(i);
    return out;
}

// --- scoring --------------------------------------------------------------------

struct Metrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

// Zero denominators leave a metric undefined rather than faking a 0 or 1;
// F1 needs both components defined and a nonzero sum.
inline Metrics compute_metrics(int tp, int fp, int fn) {
    Metrics m;
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / (tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / (tp + fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

struct ProgramScore {
    std::string name;
    int tp = 0, fp = 0, fn = 0;
    Metrics metrics;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
    bool metrics_undefined() const {
        return !failed && (!metrics.precision || !metrics.recall || !metrics.f1);
    }
};

struct ScoreCard {
    std::vector<ProgramScore> programs;
    int tp = 0, fp = 0, fn = 0;  // pooled over non-failed programs
    Metrics metrics;
    double seconds = 0.0;
};

inline ScoreCard aggregate_scores(std::vector<ProgramScore> programs) {
    ScoreCard card;
    for (const auto& p : programs) {
        if (!p.failed) {
            card.tp += p.tp;
            card.fp += p.fp;
            card.fn += p.fn;
        }
        card.seconds += p.seconds;
    }
    card.metrics = compute_metrics(card.tp, card.fp, card.fn);
    card.programs = std::move(programs);
    return card;
}

inline bool verify_scorecard(const ScoreCard& card, double eps = 1e-9) {
    auto check = [&](int tp, int fp, int fn, const Metrics& m) {
        if (m.precision && std::abs(*m.precision - static_cast<double>(tp) / (tp + fp)) > eps)
            return false;
        if (m.recall && std::abs(*m.recall - static_cast<double>(tp) / (tp + fn)) > eps)
            return false;
        if (m.f1) {
            if (!m.precision || !m.recall) return false;
            double want = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
            if (std::abs(*m.f1 - want) > eps) return false;
        }
        return true;
    };
    if (!check(card.tp, card.fp, card.fn, card.metrics)) return false;
    for (const auto& p : card.programs)
        if (!p.failed && !check(p.tp, p.fp, p.fn, p.metrics)) return false;
    return true;
}

// --- serialization ----------------------------------------------------------------

namespace detail {

inline nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    j["precision"] = m.precision ? nlohmann::json(*m.precision) : nlohmann::json(nullptr);
    j["recall"] = m.recall ? nlohmann::json(*m.recall) : nlohmann::json(nullptr);
    j["f1"] = m.f1 ? nlohmann::json(*m.f1) : nlohmann::json(nullptr);
    return j;
}

}  // namespace detail

inline nlohmann::json scorecard_to_json(const ScoreCard& card) {
    nlohmann::json j;
    nlohmann::json progs = nlohmann::json::array();
    for (const auto& p : card.programs) {
        nlohmann::json pj;
        pj["name"] = p.name;
        pj["tp"] = p.tp;
        pj["fp"] = p.fp;
        pj["fn"] = p.fn;
        pj["metrics"] = detail::metrics_to_json(p.metrics);
        pj["metrics_undefined"] = p.metrics_undefined();
        pj["seconds"] = p.seconds;
        pj["failed"] = p.failed;
        if (p.failed) pj["error"] = p.error;
        progs.push_back(pj);
    }
    j["programs"] = progs;
    nlohmann::json agg;
    agg["tp"] = card.tp;
    agg["fp"] = card.fp;
    agg["fn"] = card.fn;
    agg["metrics"] = detail::metrics_to_json(card.metrics);
    agg["seconds"] = card.seconds;
    j["aggregate"] = agg;
    return j;
}

inline std::string scorecard_table(const ScoreCard& card) {
    auto pct = [](const std::optional<double>& v) -> std::string {
        if (!v) return "n/a";
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(1) << (*v * 100.0) << "%";
        return ss.str();
    };
    auto secs = [](double s) {
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(3) << s;
        return ss.str();
    };

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Program", "TP", "FP", "FN", "Prec", "Rec", "F1", "Time(s)", "Notes"});
    for (const auto& p : card.programs) {
        std::string notes;
        if (p.failed)
            notes = "failed: " + p.error;
        else if (p.metrics_undefined())
            notes = "metrics undefined";
        rows.push_back({p.name, std::to_string(p.tp), std::to_string(p.fp),
                        std::to_string(p.fn), pct(p.metrics.precision), pct(p.metrics.recall),
                        pct(p.metrics.f1), secs(p.seconds), notes});
    }
    rows.push_back({"TOTAL", std::to_string(card.tp), std::to_string(card.fp),
                    std::to_string(card.fn), pct(card.metrics.precision),
                    pct(card.metrics.recall), pct(card.metrics.f1), secs(card.seconds), ""});

    std::vector<std::size_t> widths(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            out << rows[r][c];
            if (c + 1 < rows[r].size())
                out << std::string(widths[c] - rows[r][c].size() + 2, ' ');
        }
        out << "\n";
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < widths.size(); ++c)
                total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
            out << std::string(total, '-') << "\n";
        }
    }
    return out.str();
}

// --- benchmark runner --------------------------------------------------------------

struct BenchmarkOptions {
    AnalysisConfig analysis;
    BackendConfig backend;
    std::string out_dir;            // empty: nothing written
    bool oracle_truth = false;      // score against simulator-generated truth
    bool no_timing = false;         // zero wall times for byte-identical reruns
};

struct ProgramRun {
    ProgramScore score;
    DefectReport report;
    GroundTruth truth;
};

namespace detail {

inline DefectReport detect_program(const AnalysisBundle& bundle,
                                   const std::vector<DetectionTask>& tasks,
                                   const BenchmarkOptions& opt, const std::string& stem,
                                   std::vector<std::pair<std::string, std::vector<ConversationEntry>>>*
                                       transcripts) {
    DefectReport combined;
    if (tasks.empty()) return combined;

    std::unique_ptr<ChatBackend> owned;
    ChatBackend* backend = nullptr;
    switch (opt.backend.kind) {
        case BackendKind::Oracle:
            owned = std::make_unique<OracleBackend>(bundle, tasks, opt.backend.sim);
            break;
        case BackendKind::Replay:
            owned = std::make_unique<ReplayBackend>(opt.backend.transcript_dir + "/" + stem);
            break;
        case BackendKind::Http:
            owned = HttpBackend::from_env(opt.backend.temperature);
            break;
    }
    backend = owned.get();

    for (const auto& task : tasks) {
        auto res = run_conversation(bundle, task, *backend, *backend, opt.backend);
        if (transcripts) transcripts->push_back({task.id, res.transcript});
        for (const auto& v : res.final.violations) combined.violations.push_back(v);
    }
    std::sort(combined.violations.begin(), combined.violations.end(),
              [](const ReportedViolation& a, const ReportedViolation& b) {
                  return violation_key(a) < violation_key(b);
              });
    combined.status =
        combined.violations.empty() ? ReportStatus::NoDefect : ReportStatus::Violations;
    return combined;
}

inline GroundTruth simulator_truth(const AnalysisBundle& bundle, const SimOptions& sim) {
    GroundTruth t;
    auto result = enumerate_traces(bundle.model, bundle.acc, bundle.cfg, sim);
    for (const auto& d : detect_dynamic(result)) {
        ReportedViolation v;
        v.var = d.core.var;
        v.pattern = d.core.pattern;
        v.a1 = {d.core.a1.function, d.core.a1.line, d.core.a1.op};
        v.a2 = {d.core.a2.function, d.core.a2.line, d.core.a2.op};
        v.a3 = {d.core.a3.function, d.core.a3.line, d.core.a3.op};
        v.rationale = "witnessed by bounded interleaving exploration";
        t.entries.push_back(std::move(v));
    }
    std::sort(t.entries.begin(), t.entries.end(),
              [](const ReportedViolation& a, const ReportedViolation& b) {
                  return violation_key(a) < violation_key(b);
              });
    return t;
}

inline nlohmann::json truth_to_json(const GroundTruth& t) {
    DefectReport rep;
    rep.status = t.entries.empty() ? ReportStatus::NoDefect : ReportStatus::Violations;
    rep.violations = t.entries;
    return report_to_json(rep);
}

}  // namespace detail

inline ProgramRun run_program(const std::string& source_path, const BenchmarkOptions& opt) {
    namespace fs = std::filesystem;
    ProgramRun run;
    fs::path src(source_path);
    run.score.name = src.stem().string();

    auto started = std::chrono::steady_clock::now();
    try {
        std::ifstream in(src, std::ios::binary);
        if (!in) throw BackendError("cannot open " + source_path);
        std::ostringstream ss;
        ss << in.rdbuf();

        AnalysisBundle bundle = plan(ss.str(), opt.analysis);
        auto tasks = plan_tasks(bundle);

        std::vector<std::pair<std::string, std::vector<ConversationEntry>>> transcripts;
        run.report = detail::detect_program(bundle, tasks, opt, run.score.name, &transcripts);

        if (opt.oracle_truth) {
            run.truth = detail::simulator_truth(bundle, opt.backend.sim);
        } else {
            fs::path truth_path = src.parent_path() / (run.score.name + ".truth.json");
            run.truth = load_truth(truth_path.string());
        }

        auto outcome = match(run.report.violations, run.truth.entries);
        run.score.tp = outcome.tp();
        run.score.fp = outcome.fp();
        run.score.fn = outcome.fn();
        run.score.metrics = compute_metrics(run.score.tp, run.score.fp, run.score.fn);

        if (!opt.out_dir.empty()) {
            fs::path dir = fs::path(opt.out_dir) / run.score.name;
            fs::create_directories(dir);
            std::ofstream rep(dir / "report.json", std::ios::binary);
            rep << report_to_json(run.report).dump(2) << "\n";
            std::ofstream tr(dir / "truth.json", std::ios::binary);
            tr << detail::truth_to_json(run.truth).dump(2) << "\n";
            for (const auto& [task_id, entries] : transcripts)
                persist_transcript((dir / "transcripts").string(), task_id, entries);
        }
    } catch (const std::exception& e) {
        run.score.failed = true;
        run.score.error = e.what();
        run.score.tp = run.score.fp = run.score.fn = 0;
    }
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
    run.score.seconds = opt.no_timing ? 0.0 : elapsed.count();
    return run;
}

// Scores every *.c under the corpus directory in name order. Failing
// programs are recorded and skipped, never fatal for the corpus.
inline ScoreCard run_benchmark(const std::string& corpus_dir, const BenchmarkOptions& opt) {
    namespace fs = std::filesystem;
    std::vector<fs::path> sources;
    for (const auto& entry : fs::directory_iterator(corpus_dir))
        if (entry.path().extension() == ".c") sources.push_back(entry.path());
    std::sort(sources.begin(), sources.end());

    std::vector<ProgramScore> scores;
    for (const auto& src : sources) scores.push_back(run_program(src.string(), opt).score);

    ScoreCard card = aggregate_scores(std::move(scores));
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        std::ofstream js(fs::path(opt.out_dir) / "scorecard.json", std::ios::binary);
        js << scorecard_to_json(card).dump(2) << "\n";
        std::ofstream txt(fs::path(opt.out_dir) / "scorecard.txt", std::ios::binary);
        txt << scorecard_table(card);
    }
    return card;
}

}  // namespace irqav
