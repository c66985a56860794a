#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "irqav/agents.hpp"

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

using Triple = std::tuple<int, int, int>;

std::multiset<Triple> line_triples(const std::vector<ReportedViolation>& vs) {
    std::multiset<Triple> out;
    for (const auto& v : vs) out.insert({v.a1.line, v.a2.line, v.a3.line});
    return out;
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

nlohmann::json ref(const std::string& fn, int line, const std::string& op) {
    return {{"function", fn}, {"line", line}, {"op", op}};
}

nlohmann::json vio(const std::string& var, const std::string& pat, nlohmann::json a1,
                   nlohmann::json a2, nlohmann::json a3) {
    return {{"var", var}, {"pattern", pat}, {"a1", a1},  {"a2", a2},
            {"a3", a3},   {"rationale", "scripted"}};
}

std::string report_text(std::vector<nlohmann::json> vs) {
    nlohmann::json j;
    j["status"] = "violations";
    j["violations"] = vs;
    return j.dump(2);
}

std::string verdicts_text(std::vector<std::pair<int, bool>> vs, const std::string& feedback) {
    nlohmann::json j;
    j["verdicts"] = nlohmann::json::array();
    for (auto [idx, ok] : vs)
        j["verdicts"].push_back({{"index", idx},
                                 {"verdict", ok ? "confirmed" : "rejected"},
                                 {"reason", ok ? "reachable" : "not reachable"}});
    j["feedback"] = feedback;
    return j.dump(2);
}

std::multiset<std::string> gated_dynamic_keys(const AnalysisBundle& b) {
    auto sim = enumerate_traces(b.model, b.acc, b.cfg, SimOptions::from(b.cfg));
    std::multiset<std::string> keys;
    for (const auto& d : detect_dynamic(sim)) {
        ReportedViolation v;
        v.var = d.core.var;
        v.pattern = d.core.pattern;
        v.a1 = {d.core.a1.function, d.core.a1.line, d.core.a1.op};
        v.a2 = {d.core.a2.function, d.core.a2.line, d.core.a2.op};
        v.a3 = {d.core.a3.function, d.core.a3.line, d.core.a3.op};
        keys.insert(violation_key(v));
    }
    return keys;
}

}  // namespace

TEST_CASE("exactly four knowledge modules in pattern order with self-consistent one-shots") {
    const auto& mods = knowledge_modules();
    REQUIRE(mods.size() == 4);
    auto order = enumerate_patterns();
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(mods[i].pattern == order[i]);
        REQUIRE_FALSE(mods[i].definition.empty());

        AnalysisConfig cfg;
        AnalysisBundle eb = plan(mods[i].example_code, cfg);
        auto rep = parse_defect_report(mods[i].example_report, eb);
        REQUIRE(rep.status == ReportStatus::Violations);
        REQUIRE(rep.violations.size() == 1);
        REQUIRE(rep.violations[0].pattern == mods[i].pattern);
    }
}

TEST_CASE("one-shot examples are not drawn from the fixture corpus") {
    namespace fs = std::filesystem;
    std::vector<std::string> corpus;
    fs::path dir(IRQAV_FIXTURE_DIR);
    if (fs::exists(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() != ".c") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            corpus.push_back(ss.str());
        }
    }
    for (const auto& m : knowledge_modules())
        for (const auto& text : corpus) REQUIRE(text != m.example_code);
}

TEST_CASE("oracle pair on the device example runs the two-round confirmation dynamic") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    REQUIRE(tasks.size() == 1);
    REQUIRE(tasks[0].id == "T1");
    REQUIRE(tasks[0].variables == std::vector<std::string>{"DevVal"});

    OracleBackend oracle(b, tasks, SimOptions::from(cfg));
    BackendConfig bc;
    auto res = run_conversation(b, tasks[0], oracle, oracle, bc);

    REQUIRE(res.rounds == 2);
    REQUIRE_FALSE(res.incomplete);
    REQUIRE(res.transcript.size() == 3);
    REQUIRE(res.transcript[0].role == AgentRole::Expert);
    REQUIRE(res.transcript[0].round == 1);
    REQUIRE(res.transcript[0].purpose == "detect");
    REQUIRE(res.transcript[1].role == AgentRole::Judge);
    REQUIRE(res.transcript[1].round == 1);
    REQUIRE(res.transcript[1].purpose == "validate");
    REQUIRE(res.transcript[2].role == AgentRole::Expert);
    REQUIRE(res.transcript[2].round == 2);
    REQUIRE(res.transcript[2].purpose == "refine");

    auto r1 = parse_defect_report(res.transcript[0].content, b);
    REQUIRE(r1.violations.size() == 5);
    for (const auto& v : r1.violations) {
        REQUIRE(v.var == "DevVal");
        REQUIRE(v.pattern == ViolationPattern::RWW);
    }
    std::multiset<Triple> expect_r1 = {{7, 19, 8}, {7, 20, 8}, {7, 23, 8}, {7, 23, 10}, {18, 23, 19}};
    REQUIRE(line_triples(r1.violations) == expect_r1);

    std::string feedback;
    auto verdicts = parse_verdicts(res.transcript[1].content, 5, &feedback);
    int rejected = 0;
    for (const auto& v : verdicts) {
        const auto& target = r1.violations[static_cast<std::size_t>(v.index)];
        if (!v.confirmed) {
            ++rejected;
            REQUIRE(target.a2.line == 23);
            REQUIRE(target.a2.function == "ISR_3");
            REQUIRE(v.reason.find("ISR_3") != std::string::npos);
        } else {
            REQUIRE((target.a2.line == 19 || target.a2.line == 20));
        }
    }
    REQUIRE(rejected == 3);
    REQUIRE_FALSE(feedback.empty());

    auto r2 = parse_defect_report(res.transcript[2].content, b);
    REQUIRE(r2.violations.size() == 2);

    REQUIRE(res.final.status == ReportStatus::Violations);
    REQUIRE(res.final.violations.size() == 2);
    std::multiset<Triple> expect_final = {{7, 19, 8}, {7, 20, 8}};
    REQUIRE(line_triples(res.final.violations) == expect_final);
    for (const auto& v : res.final.violations) REQUIRE(v.pattern == ViolationPattern::RWW);
}

TEST_CASE("oracle pair final reports equal the gated dynamic set") {
    const std::string increment = R"(
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
    const std::string two_vars = R"(
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
    for (const std::string& src : {increment, two_vars}) {
        AnalysisConfig cfg;
        AnalysisBundle b = plan(src, cfg);
        auto tasks = plan_tasks(b);
        REQUIRE_FALSE(tasks.empty());
        OracleBackend oracle(b, tasks, SimOptions::from(cfg));
        BackendConfig bc;
        std::multiset<std::string> reported;
        for (const auto& task : tasks) {
            auto res = run_conversation(b, task, oracle, oracle, bc);
            REQUIRE_FALSE(res.incomplete);
            for (const auto& v : res.final.violations) reported.insert(violation_key(v));
        }
        REQUIRE(reported == gated_dynamic_keys(b));
    }
}

TEST_CASE("canned no-defect reply terminates after a single round") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    auto dir = fresh_dir("irqav_agents_nodefect");
    put(dir, "T1.r1.expert.txt", R"({"status": "no_defect", "violations": []})");

    ReplayBackend replay(dir.string());
    BackendConfig bc;
    auto res = run_conversation(b, tasks[0], replay, replay, bc);
    REQUIRE(res.rounds == 1);
    REQUIRE(res.transcript.size() == 1);
    REQUIRE(res.final.status == ReportStatus::NoDefect);
    REQUIRE(res.final.violations.empty());
    REQUIRE_FALSE(res.incomplete);
}

TEST_CASE("abstain terminates the loop the same way") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    auto dir = fresh_dir("irqav_agents_abstain");
    put(dir, "T1.r1.expert.txt", R"({"status": "abstain", "violations": []})");

    ReplayBackend replay(dir.string());
    BackendConfig bc;
    auto res = run_conversation(b, tasks[0], replay, replay, bc);
    REQUIRE(res.rounds == 1);
    REQUIRE(res.final.status == ReportStatus::Abstain);
    REQUIRE(res.final.violations.empty());
}

TEST_CASE("adversarial replay that keeps adding violations stops at exactly three rounds") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    auto dir = fresh_dir("irqav_agents_adversarial");

    auto A = vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_2", 19, "W"), ref("main", 8, "W"));
    auto B = vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_2", 20, "W"), ref("main", 8, "W"));
    auto C = vio("DevVal", "WRW", ref("main", 8, "W"), ref("ISR_1", 15, "R"), ref("main", 10, "W"));

    put(dir, "T1.r1.expert.txt", report_text({A}));
    put(dir, "T1.r1.judge.txt", verdicts_text({{0, true}}, "keep going"));
    put(dir, "T1.r2.expert.txt", report_text({A, B}));
    put(dir, "T1.r2.judge.txt", verdicts_text({{0, true}, {1, true}}, "keep going"));
    put(dir, "T1.r3.expert.txt", report_text({A, B, C}));
    put(dir, "T1.r3.judge.txt", verdicts_text({{0, true}, {1, true}, {2, true}}, "done"));

    ReplayBackend replay(dir.string());
    BackendConfig bc;
    REQUIRE(bc.max_rounds == 3);
    auto res = run_conversation(b, tasks[0], replay, replay, bc);

    REQUIRE(res.rounds == 3);
    REQUIRE(res.transcript.size() == 6);
    int expert_calls = 0, judge_calls = 0;
    for (const auto& e : res.transcript)
        (e.role == AgentRole::Expert ? expert_calls : judge_calls) += 1;
    REQUIRE(expert_calls == 3);
    REQUIRE(judge_calls == 3);
    REQUIRE(res.final.violations.size() == 3);

    auto res2 = run_conversation(b, tasks[0], replay, replay, bc);
    REQUIRE(res2.transcript.size() == res.transcript.size());
    for (std::size_t i = 0; i < res.transcript.size(); ++i)
        REQUIRE(res2.transcript[i].content == res.transcript[i].content);
    REQUIRE(report_to_json(res2.final).dump() == report_to_json(res.final).dump());
}

TEST_CASE("rejected violations never survive into the final report") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    auto dir = fresh_dir("irqav_agents_rejection");

    auto A = vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_2", 19, "W"), ref("main", 8, "W"));
    auto B = vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_3", 23, "W"), ref("main", 8, "W"));
    put(dir, "T1.r1.expert.txt", report_text({A, B}));
    put(dir, "T1.r1.judge.txt", verdicts_text({{0, true}, {1, false}}, "drop the second"));
    put(dir, "T1.r2.expert.txt", report_text({A, B}));

    ReplayBackend replay(dir.string());
    BackendConfig bc;
    auto res = run_conversation(b, tasks[0], replay, replay, bc);
    REQUIRE(res.rounds == 2);
    REQUIRE(res.final.violations.size() == 1);
    REQUIRE(res.final.violations[0].a2.line == 19);
}

TEST_CASE("a garbled reply is retried once, then rejected") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);

    auto good = fresh_dir("irqav_agents_retry_good");
    put(good, "T1.r1.expert.txt", "sorry, here is prose instead of JSON");
    put(good, "T1.r1.expert.retry.txt", R"({"status": "no_defect", "violations": []})");
    ReplayBackend fixed(good.string());
    BackendConfig bc;
    auto res = run_conversation(b, tasks[0], fixed, fixed, bc);
    REQUIRE(res.final.status == ReportStatus::NoDefect);

    auto bad = fresh_dir("irqav_agents_retry_bad");
    put(bad, "T1.r1.expert.txt", "sorry, here is prose instead of JSON");
    ReplayBackend broken(bad.string());
    REQUIRE_THROWS_AS(run_conversation(b, tasks[0], broken, broken, bc), MalformedReply);
}

TEST_CASE("schema validation rejects impossible reports") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);

    auto www = report_text(
        {vio("DevVal", "RWW", ref("main", 8, "W"), ref("ISR_2", 19, "W"), ref("main", 10, "W"))});
    REQUIRE_THROWS_AS(parse_defect_report(www, b), MalformedReply);

    auto ghost_fn = report_text(
        {vio("DevVal", "RWW", ref("phantom", 7, "R"), ref("ISR_2", 19, "W"), ref("main", 8, "W"))});
    REQUIRE_THROWS_AS(parse_defect_report(ghost_fn, b), MalformedReply);

    auto far_line = report_text(
        {vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_2", 999, "W"), ref("main", 8, "W"))});
    REQUIRE_THROWS_AS(parse_defect_report(far_line, b), MalformedReply);

    REQUIRE_THROWS_AS(parse_defect_report(R"({"status": "maybe"})", b), MalformedReply);
    REQUIRE_THROWS_AS(parse_defect_report("[1, 2]", b), MalformedReply);

    auto fenced = "```json\n" + report_text({vio("DevVal", "RWW", ref("main", 7, "R"),
                                                 ref("ISR_2", 19, "W"), ref("main", 8, "W"))}) +
                  "\n```";
    auto rep = parse_defect_report(fenced, b);
    REQUIRE(rep.violations.size() == 1);
}

TEST_CASE("expert prompt carries its sections in order") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    const auto& km = module_for(ViolationPattern::RWW);

    auto p = build_expert_prompt(b, tasks[0], km, {});
    auto task_pos = p.find("# Detection Task");
    auto rules_pos = p.find("# Detection Rules");
    auto format_pos = p.find("# Output Format");
    auto summary_pos = p.find("# Program Summary");
    auto source_pos = p.find("# Annotated Source");
    REQUIRE(task_pos != std::string::npos);
    REQUIRE(task_pos < rules_pos);
    REQUIRE(rules_pos < format_pos);
    REQUIRE(format_pos < summary_pos);
    REQUIRE(summary_pos < source_pos);

    REQUIRE(p.find("Decompose compound operations") != std::string::npos);
    REQUIRE(p.find("test all priority level combinations") != std::string::npos);
    REQUIRE(p.find("loop bodies per iteration") != std::string::npos);
    REQUIRE(p.find("int pressure") != std::string::npos);
    REQUIRE(p.find("- ISR_2 (priority 2)") != std::string::npos);
    REQUIRE(p.find("//@") != std::string::npos);
    REQUIRE(p.find("# Conversation History") == std::string::npos);

    std::vector<ConversationEntry> history = {
        {AgentRole::Expert, 1, "detect", "prior expert text"},
        {AgentRole::Judge, 1, "validate", "prior judge text"},
    };
    auto p2 = build_expert_prompt(b, tasks[0], km, history);
    auto hist_pos = p2.find("# Conversation History");
    REQUIRE(hist_pos != std::string::npos);
    REQUIRE(hist_pos > p2.find("# Annotated Source"));
    REQUIRE(p2.find("prior expert text") != std::string::npos);
    REQUIRE(p2.find("prior judge text") != std::string::npos);
    REQUIRE(p2.find("## Round 1 Judge (validate)") != std::string::npos);
}

TEST_CASE("judge prompt restates interrupt state and the report under review") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);

    DefectReport rep;
    rep.status = ReportStatus::Violations;
    ReportedViolation v;
    v.var = "DevVal";
    v.pattern = ViolationPattern::RWW;
    v.a1 = {"main", 7, AccessOp::Read};
    v.a2 = {"ISR_2", 19, AccessOp::Write};
    v.a3 = {"main", 8, AccessOp::Write};
    rep.violations.push_back(v);

    auto p = build_judge_prompt(b, tasks[0], rep);
    REQUIRE(p.find("# Validation Task") != std::string::npos);
    REQUIRE(p.find("# Interrupt State") != std::string::npos);
    REQUIRE(p.find("# Report Under Review") != std::string::npos);
    REQUIRE(p.find("confirming or rejecting") != std::string::npos);
    REQUIRE(p.find("main line 5: disable all handlers") != std::string::npos);
    REQUIRE(p.find("ISR_1 line 14: enable handler priority 2") != std::string::npos);
    REQUIRE(p.find("\"var\": \"DevVal\"") != std::string::npos);
}

TEST_CASE("oversized prompt raises the budget error") {
    AnalysisConfig cfg;
    cfg.context_budget = 200;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    const auto& km = module_for(ViolationPattern::RWW);
    REQUIRE_THROWS_AS(build_expert_prompt(b, tasks[0], km, {}), PromptOverBudget);
}

TEST_CASE("history curation keeps recent complete rounds plus the opening purpose line") {
    std::vector<ConversationEntry> entries = {
        {AgentRole::Expert, 1, "detect", std::string(400, 'a')},
        {AgentRole::Judge, 1, "validate", std::string(400, 'b')},
        {AgentRole::Expert, 2, "refine", std::string(100, 'c')},
        {AgentRole::Judge, 2, "validate", std::string(100, 'd')},
        {AgentRole::Expert, 3, "refine", std::string(100, 'e')},
        {AgentRole::Judge, 3, "validate", std::string(100, 'f')},
    };

    auto all = curate_history(entries, 100000);
    REQUIRE(all.size() == 6);
    REQUIRE_FALSE(all[0].content.empty());

    auto trimmed = curate_history(entries, 600);
    REQUIRE(trimmed.size() == 5);
    REQUIRE(trimmed[0].round == 1);
    REQUIRE(trimmed[0].role == AgentRole::Expert);
    REQUIRE(trimmed[0].purpose == "detect");
    REQUIRE(trimmed[0].content.empty());
    REQUIRE(trimmed[1].round == 2);
    REQUIRE(trimmed[4].round == 3);
    REQUIRE(trimmed[4].content == std::string(100, 'f'));

    auto tiny = curate_history(entries, 10);
    REQUIRE(tiny.size() == 1);
    REQUIRE(tiny[0].content.empty());

    REQUIRE(curate_history({}, 100).empty());
}

TEST_CASE("persisted transcripts replay byte-identically") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    BackendConfig bc;

    OracleBackend oracle(b, tasks, SimOptions::from(cfg));
    auto res = run_conversation(b, tasks[0], oracle, oracle, bc);

    OracleBackend oracle2(b, tasks, SimOptions::from(cfg));
    auto res_again = run_conversation(b, tasks[0], oracle2, oracle2, bc);
    REQUIRE(res_again.transcript.size() == res.transcript.size());
    for (std::size_t i = 0; i < res.transcript.size(); ++i)
        REQUIRE(res_again.transcript[i].content == res.transcript[i].content);

    auto dir = fresh_dir("irqav_agents_persist");
    persist_transcript(dir.string(), tasks[0].id, res.transcript);
    REQUIRE(std::filesystem::exists(dir / "T1.r1.expert.txt"));
    REQUIRE(std::filesystem::exists(dir / "T1.r1.judge.txt"));
    REQUIRE(std::filesystem::exists(dir / "T1.r2.expert.txt"));
    REQUIRE(std::filesystem::exists(dir / "T1.conversation.json"));

    ReplayBackend replay(dir.string());
    auto replayed = run_conversation(b, tasks[0], replay, replay, bc);
    REQUIRE(replayed.transcript.size() == res.transcript.size());
    for (std::size_t i = 0; i < res.transcript.size(); ++i)
        REQUIRE(replayed.transcript[i].content == res.transcript[i].content);
    REQUIRE(report_to_json(replayed.final).dump() == report_to_json(res.final).dump());
}

TEST_CASE("backend loss mid-run returns the last validated report flagged incomplete") {
    AnalysisConfig cfg;
    AnalysisBundle b = plan(kDeviceExample, cfg);
    auto tasks = plan_tasks(b);
    auto dir = fresh_dir("irqav_agents_lost");

    auto A = vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_2", 19, "W"), ref("main", 8, "W"));
    auto B = vio("DevVal", "RWW", ref("main", 7, "R"), ref("ISR_2", 20, "W"), ref("main", 8, "W"));
    put(dir, "T1.r1.expert.txt", report_text({A}));
    put(dir, "T1.r1.judge.txt", verdicts_text({{0, true}}, "look for more"));
    put(dir, "T1.r2.expert.txt", report_text({A, B}));

    ReplayBackend replay(dir.string());
    BackendConfig bc;
    auto res = run_conversation(b, tasks[0], replay, replay, bc);
    REQUIRE(res.incomplete);
    REQUIRE(res.rounds == 2);
    REQUIRE(res.final.violations.size() == 1);
    REQUIRE(res.final.violations[0].a2.line == 19);
}
