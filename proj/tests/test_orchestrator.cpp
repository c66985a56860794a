#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "irqav/orchestrator.hpp"

using namespace irqav;

namespace {

const std::string kDeviceExample = R"(
int DevVal = 5;
int latch;
void main(void) {
    disable_isr(-1);
    enable_isr(1);
    if (DevVal > 3) {
        DevVal = 1;
    } else {
        DevVal = 0;
    }
}
void ISR_1(void) {
    enable_isr(2);
    latch = DevVal;
}
void ISR_2(void) {
    int tmp = DevVal;
    DevVal = tmp + 4;
    DevVal = 2;
}
void ISR_3(void) {
    DevVal = 9;
}
)";

}  // namespace

TEST_CASE("planner activates exactly the analyses the program needs") {
    AnalysisConfig cfg;
    auto b = plan(kDeviceExample, cfg);
    REQUIRE(b.tools == std::vector<std::string>{"access_analyzer", "control_flow_analyzer",
                                                "highlighter"});
    REQUIRE_FALSE(b.used_extractor);
    REQUIRE(b.used_flow);
    REQUIRE(b.candidates.size() == 7);

    auto quiet = plan(R"(
int a;
void main(void) {
    a = 1;
}
)",
                      cfg);
    REQUIRE(quiet.tools == std::vector<std::string>{"access_analyzer"});
    REQUIRE_FALSE(quiet.used_flow);
    REQUIRE(quiet.candidates.empty());
    REQUIRE(plan_tasks(quiet).empty());
}

TEST_CASE("oversized sources trigger extraction and the summary flags it") {
    AnalysisConfig cfg;
    cfg.context_budget = 64;
    auto b = plan(kDeviceExample, cfg);
    REQUIRE(b.used_extractor);
    REQUIRE(b.summary.compressed);
    REQUIRE(std::find(b.tools.begin(), b.tools.end(), "code_extractor") != b.tools.end());
}

TEST_CASE("summary counts agree with the access matrix and candidate set") {
    AnalysisConfig cfg;
    auto b = plan(kDeviceExample, cfg);
    const auto& s = b.summary;

    int reads = 0, writes = 0;
    for (const auto& [task, rw] : s.access_counts.at("DevVal")) {
        reads += rw.first;
        writes += rw.second;
    }
    REQUIRE(reads == 3);
    REQUIRE(writes == 5);
    REQUIRE(reads == b.acc.read_count("DevVal"));
    REQUIRE(writes == b.acc.write_count("DevVal"));

    REQUIRE((s.access_counts.at("DevVal").at("main") == std::pair<int, int>{1, 2}));
    REQUIRE((s.access_counts.at("DevVal").at("ISR_1") == std::pair<int, int>{1, 0}));
    REQUIRE((s.access_counts.at("DevVal").at("ISR_2") == std::pair<int, int>{1, 2}));
    REQUIRE((s.access_counts.at("DevVal").at("ISR_3") == std::pair<int, int>{0, 1}));

    REQUIRE(s.control_points.size() == 3);
    REQUIRE(s.candidate_counts.at("RWW") == 7);
    REQUIRE(s.candidate_counts.at("RWR") == 0);
    REQUIRE(s.shared_globals == std::vector<std::string>{"DevVal"});

    int total = 0;
    for (const auto& [p, n] : s.candidate_counts) total += n;
    REQUIRE(total == static_cast<int>(b.candidates.size()));
}

TEST_CASE("single-pattern programs partition into one pattern task") {
    AnalysisConfig cfg;
    auto b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    REQUIRE(tasks.size() == 1);
    REQUIRE(tasks[0].strategy == PartitionStrategy::PatternBased);
    REQUIRE(tasks[0].patterns == std::vector<ViolationPattern>{ViolationPattern::RWW});
    REQUIRE(tasks[0].variables == std::vector<std::string>{"DevVal"});
    REQUIRE_FALSE(tasks[0].annotated_source.empty());
}

TEST_CASE("uneven pattern spread forces variable-based partitioning") {
    // three writers hammer one variable (RWW x3) while another variable has a
    // single write-read-write triple (WRW x1): spread 3:1 breaks the ratio
    AnalysisConfig cfg;
    const std::string src = R"(
int burst;
int quiet;
int s;
void main(void) {
    s = burst;
    burst = s + 1;
    quiet = 1;
    quiet = 2;
}
void ISR_1(void) {
    burst = 9;
}
void ISR_2(void) {
    burst = 8;
}
void ISR_3(void) {
    burst = 7;
}
void ISR_4(void) {
    int t;
    t = quiet;
}
)";
    auto b = plan(src, cfg);
    REQUIRE_FALSE(b.candidates.empty());
    std::map<ViolationPattern, int> counts;
    for (const auto& c : b.candidates) ++counts[c.pattern];
    int mn = 0, mx = 0;
    for (auto& [p, n] : counts) {
        mn = (mn == 0 || n < mn) ? n : mn;
        mx = std::max(mx, n);
    }
    REQUIRE(mx > 2 * mn);  // spread is uneven, so the pattern split must not be used
    auto tasks = plan_tasks(b);
    for (const auto& t : tasks) REQUIRE(t.strategy == PartitionStrategy::VariableBased);
}

TEST_CASE("variable grouping isolates high-frequency variables and caps groups at three") {
    // synthesize a bundle with known per-variable counts: 9,2,1,1,1
    AnalysisBundle b;
    b.cfg = AnalysisConfig{};
    b.acc.shared_globals = {"v1", "v2", "v3", "v4", "v5"};
    auto mk = [](const std::string& var, int n, std::vector<CandidateViolation>& out) {
        for (int i = 0; i < n; ++i) {
            CandidateViolation c;
            c.var = var;
            c.pattern = ViolationPattern::RWW;
            out.push_back(c);
        }
    };
    mk("v1", 9, b.candidates);
    mk("v2", 2, b.candidates);
    mk("v3", 1, b.candidates);
    mk("v4", 1, b.candidates);
    mk("v5", 1, b.candidates);

    auto tasks = partition_tasks(b);
    REQUIRE(tasks.size() == 3);
    REQUIRE(tasks[0].variables == std::vector<std::string>{"v1"});
    REQUIRE(tasks[1].variables == std::vector<std::string>{"v2", "v3", "v4"});
    REQUIRE(tasks[2].variables == std::vector<std::string>{"v5"});
    for (const auto& t : tasks) REQUIRE(t.strategy == PartitionStrategy::VariableBased);
}

TEST_CASE("task coverage of (variable, pattern) pairs is a partition") {
    auto check = [](const std::string& src, AnalysisConfig cfg = {}) {
        auto b = plan(src, cfg);
        auto tasks = plan_tasks(b);
        std::set<std::pair<std::string, std::string>> expected;
        for (const auto& c : b.candidates) expected.insert({c.var, to_string(c.pattern)});
        std::set<std::pair<std::string, std::string>> covered;
        for (const auto& t : tasks) {
            for (const auto& v : t.variables) {
                for (auto p : t.patterns) {
                    // only pairs that actually have candidates count toward coverage
                    bool has = false;
                    for (const auto& c : b.candidates)
                        if (c.var == v && c.pattern == p) has = true;
                    if (!has) continue;
                    auto ins = covered.insert({v, to_string(p)});
                    REQUIRE(ins.second);  // no pair may be claimed twice
                }
            }
        }
        REQUIRE(covered == expected);
    };
    check(kDeviceExample);
    check(R"(
int a;
int b;
int c;
int d;
void main(void) {
    a = a + 1;
    b = b + a;
    c = c + b;
    d = d + c;
}
void ISR_1(void) {
    a = 1;
    b = 2;
    c = 3;
    d = 4;
}
)");
}

TEST_CASE("annotated source strips back to the original bytes") {
    AnalysisConfig cfg;
    auto b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    REQUIRE(tasks.size() == 1);
    REQUIRE(strip_annotations(tasks[0].annotated_source) == kDeviceExample);
}

TEST_CASE("annotations carry line numbers, ops, tasks, and roles") {
    AnalysisConfig cfg;
    auto b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    const std::string& ann = tasks[0].annotated_source;

    // the main read of DevVal: line 7, read by main at priority 0
    REQUIRE(ann.find("7:     if (DevVal > 3) {  //@ DevVal: R[main/p0]") != std::string::npos);
    // a write inside the second handler
    REQUIRE(ann.find("R[ISR_2/p2]") != std::string::npos);
    REQUIRE(ann.find("roles: a1") != std::string::npos);
    REQUIRE(ann.find("roles:") != std::string::npos);
    // every line is prefixed with its number
    REQUIRE(ann.rfind("1: ", 0) == 0);
    // untouched lines gain only the prefix
    REQUIRE(ann.find("3: int latch;") != std::string::npos);
    REQUIRE(ann.find("int latch;  //@") == std::string::npos);
}

TEST_CASE("annotation on compressed text uses original line numbers") {
    AnalysisConfig cfg;
    cfg.context_budget = 64;  // force extraction
    const std::string src = R"(
int g;
void helper(void) {
    g = g + 1;
}
void unused(void) {
    g = 99;
}
void main(void) {
    helper();
}
void ISR_1(void) {
    g = 5;
}
)";
    auto b = plan(src, cfg);
    REQUIRE(b.used_extractor);
    REQUIRE(b.extracted.elided_functions == std::vector<std::string>{"unused"});
    auto tasks = plan_tasks(b);
    REQUIRE_FALSE(tasks.empty());
    const std::string& ann = tasks[0].annotated_source;
    // the helper's increment is original line 4 and keeps that number
    REQUIRE(ann.find("4:     g = g + 1;") != std::string::npos);
    // main's body moved up in the compressed text but keeps original number 10
    REQUIRE(ann.find("10:     helper();") != std::string::npos);
    REQUIRE(strip_annotations(ann) == b.extracted.text);
}

TEST_CASE("plan JSON is deterministic and lists tools, summary, and tasks") {
    AnalysisConfig cfg;
    auto b1 = plan(kDeviceExample, cfg);
    auto t1 = plan_tasks(b1);
    auto b2 = plan(kDeviceExample, cfg);
    auto t2 = plan_tasks(b2);
    REQUIRE(plan_to_json(b1, t1).dump(2) == plan_to_json(b2, t2).dump(2));
    auto j = plan_to_json(b1, t1);
    REQUIRE(j["tools"].size() == 3);
    REQUIRE(j["tasks"].size() == 1);
    REQUIRE(j["summary"]["candidate_counts"]["RWW"] == 7);
}
