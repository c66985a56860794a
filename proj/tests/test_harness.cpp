#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "irqav/harness.hpp"

using namespace irqav;

namespace {

ReportedViolation make_violation(const std::string& var, ViolationPattern pat,
                                 const std::string& f1, int l1, const std::string& f2, int l2,
                                 const std::string& f3, int l3) {
    std::string tag = to_string(pat);
    auto op_of = [](char c) { return c == 'R' ? AccessOp::Read : AccessOp::Write; };
    ReportedViolation v;
    v.var = var;
    v.pattern = pat;
    v.a1 = {f1, l1, op_of(tag[0])};
    v.a2 = {f2, l2, op_of(tag[1])};
    v.a3 = {f3, l3, op_of(tag[2])};
    return v;
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void put(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kIncrement = R"(
int g = 0;
void main(void) {
    int r;
    r = g;
    g = r + 1;
}
void ISR_1(void) {
    g = 5;
}
)";

const std::string kTwoVars = R"(
int a = 0;
int b = 0;
void main(void) {
    int t;
    t = a;
    a = t + 1;
    b = 1;
    t = b;
}
void ISR_1(void) {
    a = 7;
    b = 9;
}
)";

const std::string kQuiet = R"(
int only_mine = 0;
void main(void) {
    only_mine = 1;
}
void ISR_1(void) {
    int x;
    x = 4;
    if (x > 2) {
        x = 0;
    }
}
)";

}  // namespace

TEST_CASE("exact matching pairs report and truth one to one") {
    auto v1 = make_violation("DevVal", ViolationPattern::RWW, "main", 7, "ISR_2", 19, "main", 8);
    auto v2 = make_violation("DevVal", ViolationPattern::RWW, "main", 7, "ISR_2", 20, "main", 8);
    std::vector<ReportedViolation> report = {v1, v2};
    std::vector<ReportedViolation> truth = {v2, v1};

    auto m = match(report, truth);
    REQUIRE(m.tp() == 2);
    REQUIRE(m.fp() == 0);
    REQUIRE(m.fn() == 0);
    REQUIRE(m.tp() + m.fn() == static_cast<int>(truth.size()));
    REQUIRE(m.tp() + m.fp() == static_cast<int>(report.size()));
}

TEST_CASE("empty report leaves every truth entry as a miss") {
    auto v1 = make_violation("g", ViolationPattern::RWW, "main", 4, "ISR_1", 9, "main", 5);
    auto v2 = make_violation("g", ViolationPattern::WWR, "main", 5, "ISR_1", 9, "main", 6);
    auto v3 = make_violation("h", ViolationPattern::RWR, "main", 2, "ISR_1", 9, "main", 3);
    auto m = match({}, {v1, v2, v3});
    REQUIRE(m.tp() == 0);
    REQUIRE(m.fp() == 0);
    REQUIRE(m.fn() == 3);
}

TEST_CASE("an off-by-one line turns a hit into a false positive plus a miss") {
    auto good = make_violation("g", ViolationPattern::RWW, "main", 4, "ISR_1", 9, "main", 5);
    auto off = good;
    off.a2.line = 10;
    auto m = match({off}, {good});
    REQUIRE(m.tp() == 0);
    REQUIRE(m.fp() == 1);
    REQUIRE(m.fn() == 1);
}

TEST_CASE("function names are not part of the match key but variables are") {
    auto truth = make_violation("g", ViolationPattern::RWW, "", 4, "", 9, "", 5);
    auto renamed = make_violation("g", ViolationPattern::RWW, "other", 4, "helper", 9, "other", 5);
    auto m = match({renamed}, {truth});
    REQUIRE(m.tp() == 1);

    auto wrong_var = make_violation("h", ViolationPattern::RWW, "main", 4, "ISR_1", 9, "main", 5);
    auto m2 = match({wrong_var}, {truth});
    REQUIRE(m2.tp() == 0);
    REQUIRE(m2.fp() == 1);
    REQUIRE(m2.fn() == 1);
}

TEST_CASE("matching is one to one under duplicates") {
    auto v = make_violation("g", ViolationPattern::RWW, "main", 4, "ISR_1", 9, "main", 5);
    auto m = match({v, v}, {v});
    REQUIRE(m.tp() == 1);
    REQUIRE(m.fp() == 1);
    REQUIRE(m.fn() == 0);

    auto m2 = match({v}, {v, v});
    REQUIRE(m2.tp() == 1);
    REQUIRE(m2.fp() == 0);
    REQUIRE(m2.fn() == 1);
}

TEST_CASE("shuffling never changes the counts") {
    std::vector<ReportedViolation> report, truth;
    for (int i = 0; i < 8; ++i)
        report.push_back(
            make_violation("v" + std::to_string(i % 3), ViolationPattern::RWW, "main", 4 + i,
                           "ISR_1", 20, "main", 5 + i));
    truth = report;
    truth.pop_back();
    truth.push_back(make_violation("v9", ViolationPattern::WRW, "main", 50, "ISR_1", 60, "main", 51));

    auto base = match(report, truth);
    std::mt19937 rng(7);
    for (int round = 0; round < 5; ++round) {
        std::shuffle(report.begin(), report.end(), rng);
        std::shuffle(truth.begin(), truth.end(), rng);
        auto m = match(report, truth);
        REQUIRE(m.tp() == base.tp());
        REQUIRE(m.fp() == base.fp());
        REQUIRE(m.fn() == base.fn());
    }
}

TEST_CASE("metric identities and undefined cases") {
    auto m = compute_metrics(3, 1, 2);
    REQUIRE(m.precision.has_value());
    REQUIRE(*m.precision == Catch::Approx(0.75).epsilon(1e-12));
    REQUIRE(*m.recall == Catch::Approx(0.6).epsilon(1e-12));
    REQUIRE(*m.f1 == Catch::Approx(2.0 * 0.75 * 0.6 / 1.35).epsilon(1e-12));

    auto none = compute_metrics(0, 0, 0);
    REQUIRE_FALSE(none.precision.has_value());
    REQUIRE_FALSE(none.recall.has_value());
    REQUIRE_FALSE(none.f1.has_value());

    auto no_hits = compute_metrics(0, 2, 3);
    REQUIRE(*no_hits.precision == 0.0);
    REQUIRE(*no_hits.recall == 0.0);
    REQUIRE_FALSE(no_hits.f1.has_value());
}

TEST_CASE("aggregates pool counts instead of averaging") {
    ProgramScore a;
    a.name = "a";
    a.tp = 9;
    a.fp = 1;
    a.fn = 0;
    a.metrics = compute_metrics(9, 1, 0);
    ProgramScore b;
    b.name = "b";
    b.tp = 0;
    b.fp = 0;
    b.fn = 10;
    b.metrics = compute_metrics(0, 0, 10);

    auto card = aggregate_scores({a, b});
    REQUIRE(card.tp == 9);
    REQUIRE(card.fp == 1);
    REQUIRE(card.fn == 10);
    // pooled precision 0.9, pooled recall 9/19; a per-program average would differ
    REQUIRE(*card.metrics.precision == Catch::Approx(0.9).epsilon(1e-12));
    REQUIRE(*card.metrics.recall == Catch::Approx(9.0 / 19.0).epsilon(1e-12));
    REQUIRE(verify_scorecard(card));
}

TEST_CASE("failed programs are excluded from pooled counts") {
    ProgramScore ok;
    ok.name = "ok";
    ok.tp = 2;
    ok.metrics = compute_metrics(2, 0, 0);
    ProgramScore bad;
    bad.name = "bad";
    bad.failed = true;
    bad.error = "syntax error: unexpected token";

    auto card = aggregate_scores({ok, bad});
    REQUIRE(card.tp == 2);
    REQUIRE(card.fp == 0);
    REQUIRE(card.fn == 0);
    REQUIRE(verify_scorecard(card));

    auto table = scorecard_table(card);
    REQUIRE(table.find("failed: syntax error") != std::string::npos);
}

TEST_CASE("truth files accept the report schema and reject broken entries") {
    auto dir = fresh_dir("irqav_harness_truth");
    put(dir, "ok.truth.json", R"({
  "status": "violations",
  "violations": [
    {"var": "g", "pattern": "RWW",
     "a1": {"function": "main", "line": 4, "op": "R"},
     "a2": {"function": "ISR_1", "line": 9, "op": "W"},
     "a3": {"function": "main", "line": 5, "op": "W"}}
  ]
})");
    auto t = load_truth((dir / "ok.truth.json").string());
    REQUIRE(t.entries.size() == 1);
    REQUIRE(t.entries[0].var == "g");
    REQUIRE(t.entries[0].pattern == ViolationPattern::RWW);

    put(dir, "bare.truth.json", R"([
  {"var": "g", "pattern": "WRW",
   "a1": {"line": 4, "op": "W"},
   "a2": {"line": 9, "op": "R"},
   "a3": {"line": 5, "op": "W"}}
])");
    auto bare = load_truth((dir / "bare.truth.json").string());
    REQUIRE(bare.entries.size() == 1);
    REQUIRE(bare.entries[0].a2.op == AccessOp::Read);

    put(dir, "bad.truth.json", R"({
  "violations": [
    {"var": "g", "pattern": "RWW",
     "a1": {"line": 4, "op": "W"},
     "a2": {"line": 9, "op": "W"},
     "a3": {"line": 5, "op": "W"}}
  ]
})");
    REQUIRE_THROWS_AS(load_truth((dir / "bad.truth.json").string()), BackendError);
    REQUIRE_THROWS_AS(load_truth((dir / "missing.truth.json").string()), BackendError);
}

TEST_CASE("benchmark over a mini corpus with oracle truth scores perfectly") {
    auto corpus = fresh_dir("irqav_harness_corpus");
    put(corpus, "increment.c", kIncrement);
    put(corpus, "two_vars.c", kTwoVars);
    put(corpus, "quiet.c", kQuiet);

    auto out = fresh_dir("irqav_harness_out");
    BenchmarkOptions opt;
    opt.backend.kind = BackendKind::Oracle;
    opt.backend.sim = SimOptions::from(opt.analysis);
    opt.out_dir = out.string();
    opt.oracle_truth = true;
    opt.no_timing = true;

    auto card = run_benchmark(corpus.string(), opt);
    REQUIRE(card.programs.size() == 3);
    for (const auto& p : card.programs) {
        INFO(p.name << ": " << p.error);
        REQUIRE_FALSE(p.failed);
        REQUIRE(p.fp == 0);
        REQUIRE(p.fn == 0);
    }
    REQUIRE(card.fp == 0);
    REQUIRE(card.fn == 0);
    REQUIRE(card.tp > 0);
    REQUIRE(*card.metrics.precision == 1.0);
    REQUIRE(*card.metrics.recall == 1.0);
    REQUIRE(verify_scorecard(card));

    auto quiet = std::find_if(card.programs.begin(), card.programs.end(),
                              [](const ProgramScore& p) { return p.name == "quiet"; });
    REQUIRE(quiet != card.programs.end());
    REQUIRE(quiet->tp == 0);
    REQUIRE(quiet->metrics_undefined());

    REQUIRE(std::filesystem::exists(out / "scorecard.json"));
    REQUIRE(std::filesystem::exists(out / "scorecard.txt"));
    REQUIRE(std::filesystem::exists(out / "increment" / "report.json"));
    REQUIRE(std::filesystem::exists(out / "increment" / "truth.json"));

    auto first = slurp(out / "scorecard.json");
    auto card2 = run_benchmark(corpus.string(), opt);
    auto second = slurp(out / "scorecard.json");
    REQUIRE(first == second);
    REQUIRE(scorecard_to_json(card).dump() == scorecard_to_json(card2).dump());
}

TEST_CASE("benchmark against shipped truth files and a corrupted label") {
    auto corpus = fresh_dir("irqav_harness_labeled");
    put(corpus, "increment.c", kIncrement);

    BenchmarkOptions gen;
    gen.backend.kind = BackendKind::Oracle;
    gen.backend.sim = SimOptions::from(gen.analysis);
    gen.oracle_truth = true;
    gen.no_timing = true;
    auto truth_run = run_program((corpus / "increment.c").string(), gen);
    REQUIRE_FALSE(truth_run.score.failed);
    REQUIRE(truth_run.truth.entries.size() == 1);

    DefectReport as_report;
    as_report.status = ReportStatus::Violations;
    as_report.violations = truth_run.truth.entries;
    put(corpus, "increment.truth.json", report_to_json(as_report).dump(2));

    BenchmarkOptions opt = gen;
    opt.oracle_truth = false;
    auto card = run_benchmark(corpus.string(), opt);
    REQUIRE(card.programs.size() == 1);
    REQUIRE_FALSE(card.programs[0].failed);
    REQUIRE(card.programs[0].fp == 0);
    REQUIRE(card.programs[0].fn == 0);
    REQUIRE(card.programs[0].tp == 1);

    auto corrupted = as_report;
    corrupted.violations[0].a2.line += 1;
    put(corpus, "increment.truth.json", report_to_json(corrupted).dump(2));
    auto card2 = run_benchmark(corpus.string(), opt);
    REQUIRE(card2.programs[0].tp == 0);
    REQUIRE(card2.programs[0].fp == 1);
    REQUIRE(card2.programs[0].fn == 1);
}

TEST_CASE("a broken program is recorded without sinking the corpus") {
    auto corpus = fresh_dir("irqav_harness_broken");
    put(corpus, "broken.c", "int g = ;\nvoid main(void) { g = 1; }\n");
    put(corpus, "increment.c", kIncrement);

    BenchmarkOptions opt;
    opt.backend.kind = BackendKind::Oracle;
    opt.backend.sim = SimOptions::from(opt.analysis);
    opt.oracle_truth = true;
    opt.no_timing = true;

    auto card = run_benchmark(corpus.string(), opt);
    REQUIRE(card.programs.size() == 2);
    REQUIRE(card.programs[0].name == "broken");
    REQUIRE(card.programs[0].failed);
    REQUIRE_FALSE(card.programs[0].error.empty());
    REQUIRE(card.programs[1].name == "increment");
    REQUIRE_FALSE(card.programs[1].failed);
    REQUIRE(card.programs[1].tp == 1);
    REQUIRE(card.tp == 1);
}

TEST_CASE("missing truth file is a per-program failure") {
    auto corpus = fresh_dir("irqav_harness_missing_truth");
    put(corpus, "increment.c", kIncrement);

    BenchmarkOptions opt;
    opt.backend.kind = BackendKind::Oracle;
    opt.backend.sim = SimOptions::from(opt.analysis);
    opt.oracle_truth = false;
    opt.no_timing = true;

    auto card = run_benchmark(corpus.string(), opt);
    REQUIRE(card.programs.size() == 1);
    REQUIRE(card.programs[0].failed);
    REQUIRE(card.programs[0].error.find("truth") != std::string::npos);
}

TEST_CASE("scorecard table aligns columns and marks undefined metrics") {
    ProgramScore a;
    a.name = "alpha";
    a.tp = 2;
    a.fp = 0;
    a.fn = 0;
    a.metrics = compute_metrics(2, 0, 0);
    a.seconds = 0.25;
    ProgramScore b;
    b.name = "a_much_longer_program_name";
    b.metrics = compute_metrics(0, 0, 0);

    auto card = aggregate_scores({a, b});
    auto table = scorecard_table(card);
    REQUIRE(table.find("Program") != std::string::npos);
    REQUIRE(table.find("Prec") != std::string::npos);
    REQUIRE(table.find("100.0%") != std::string::npos);
    REQUIRE(table.find("n/a") != std::string::npos);
    REQUIRE(table.find("metrics undefined") != std::string::npos);
    REQUIRE(table.find("TOTAL") != std::string::npos);

    std::istringstream lines(table);
    std::string header, divider, row;
    std::getline(lines, header);
    std::getline(lines, divider);
    std::getline(lines, row);
    REQUIRE(divider.find_first_not_of('-') == std::string::npos);
    REQUIRE(header.find("Notes") != std::string::npos);
}
