#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "irqav/backends.hpp"
#include "irqav/orchestrator.hpp"

namespace irqav {

// --- knowledge modules ---------------------------------------------------------

struct KnowledgeModule {
    ViolationPattern pattern;
    std::string definition;
    std::string example_code;
    std::string example_report;
};

inline const std::vector<KnowledgeModule>& knowledge_modules() {
    static const std::vector<KnowledgeModule> kModules = [] {
        std::vector<KnowledgeModule> m;
        m.push_back(
            {ViolationPattern::RWR,
             "Two consecutive reads in the lower-priority task expect to observe the same "
             "state; a strictly higher-priority write lands between them, so the two reads "
             "disagree and any consistency check between them is unreliable.",
             "int speed = 0;\n"
             "\n"
             "void ISR_1() {\n"
             "    speed = speed + 5;\n"
             "}\n"
             "\n"
             "void main() {\n"
             "    int lo;\n"
             "    int hi;\n"
             "    lo = speed;\n"
             "    hi = speed;\n"
             "    if (lo != hi) {\n"
             "        lo = 0;\n"
             "    }\n"
             "}\n",
             R"({
  "status": "violations",
  "violations": [
    {
      "var": "speed",
      "pattern": "RWR",
      "a1": {"function": "main", "line": 10, "op": "R"},
      "a2": {"function": "ISR_1", "line": 4, "op": "W"},
      "a3": {"function": "main", "line": 11, "op": "R"},
      "rationale": "ISR_1 can update speed between the two reads, so lo and hi diverge."
    }
  ]
})"});
        m.push_back(
            {ViolationPattern::WWR,
             "The lower-priority task writes a value and later reads it back, assuming the "
             "store is still intact; a strictly higher-priority write in between clobbers it, "
             "so the read returns a foreign value.",
             "int txcount = 0;\n"
             "\n"
             "void ISR_1() {\n"
             "    txcount = 0;\n"
             "}\n"
             "\n"
             "void main() {\n"
             "    int seen;\n"
             "    txcount = 8;\n"
             "    seen = txcount;\n"
             "    if (seen != 8) {\n"
             "        seen = 0;\n"
             "    }\n"
             "}\n",
             R"({
  "status": "violations",
  "violations": [
    {
      "var": "txcount",
      "pattern": "WWR",
      "a1": {"function": "main", "line": 9, "op": "W"},
      "a2": {"function": "ISR_1", "line": 4, "op": "W"},
      "a3": {"function": "main", "line": 10, "op": "R"},
      "rationale": "ISR_1 can zero txcount after main stores 8, so the read-back misses the write."
    }
  ]
})"});
        m.push_back(
            {ViolationPattern::RWW,
             "The lower-priority task reads a variable and later writes a value computed from "
             "that read; a strictly higher-priority write lands in between and is silently "
             "overwritten by the stale result (lost update).",
             "int pressure = 100;\n"
             "\n"
             "void ISR_1() {\n"
             "    pressure = 40;\n"
             "}\n"
             "\n"
             "void main() {\n"
             "    int p;\n"
             "    p = pressure;\n"
             "    pressure = p + 1;\n"
             "}\n",
             R"({
  "status": "violations",
  "violations": [
    {
      "var": "pressure",
      "pattern": "RWW",
      "a1": {"function": "main", "line": 9, "op": "R"},
      "a2": {"function": "ISR_1", "line": 4, "op": "W"},
      "a3": {"function": "main", "line": 10, "op": "W"},
      "rationale": "The handler's store of 40 is overwritten by main's stale p + 1, losing the update."
    }
  ]
})"});
        m.push_back(
            {ViolationPattern::WRW,
             "The lower-priority task updates a variable in two steps that are only meaningful "
             "together; a strictly higher-priority read lands between the writes and observes "
             "the intermediate, inconsistent value (dirty read).",
             "int mode = 0;\n"
             "int shadow = 0;\n"
             "\n"
             "void ISR_1() {\n"
             "    shadow = mode;\n"
             "}\n"
             "\n"
             "void main() {\n"
             "    mode = 1;\n"
             "    mode = 2;\n"
             "}\n",
             R"({
  "status": "violations",
  "violations": [
    {
      "var": "mode",
      "pattern": "WRW",
      "a1": {"function": "main", "line": 9, "op": "W"},
      "a2": {"function": "ISR_1", "line": 5, "op": "R"},
      "a3": {"function": "main", "line": 10, "op": "W"},
      "rationale": "ISR_1 can sample mode while it still holds the transitional value 1."
    }
  ]
})"});
        return m;
    }();
    return kModules;
}

inline const KnowledgeModule& module_for(ViolationPattern p) {
    for (const auto& m : knowledge_modules())
        if (m.pattern == p) return m;
    throw BackendError("no knowledge module for pattern");
}

// --- report types ----------------------------------------------------------------

enum class ReportStatus { Violations, NoDefect, Abstain };

inline const char* to_string(ReportStatus s) {
    switch (s) {
        case ReportStatus::Violations: return "violations";
        case ReportStatus::NoDefect: return "no_defect";
        case ReportStatus::Abstain: return "abstain";
    }
    return "no_defect";
}

struct ViolationRef {
    std::string function;
    int line = 0;
    AccessOp op = AccessOp::Read;
};

struct ReportedViolation {
    std::string var;
    ViolationPattern pattern = ViolationPattern::RWW;
    ViolationRef a1, a2, a3;
    std::string rationale;
};

struct DefectReport {
    ReportStatus status = ReportStatus::NoDefect;
    std::vector<ReportedViolation> violations;
};

inline nlohmann::json ref_to_json(const ViolationRef& r) {
    return {{"function", r.function}, {"line", r.line}, {"op", to_string(r.op)}};
}

inline nlohmann::json violation_to_json(const ReportedViolation& v) {
    nlohmann::json j;
    j["var"] = v.var;
    j["pattern"] = to_string(v.pattern);
    j["a1"] = ref_to_json(v.a1);
    j["a2"] = ref_to_json(v.a2);
    j["a3"] = ref_to_json(v.a3);
    j["rationale"] = v.rationale;
    return j;
}

inline nlohmann::json report_to_json(const DefectReport& r) {
    nlohmann::json j;
    j["status"] = to_string(r.status);
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : r.violations) vs.push_back(violation_to_json(v));
    j["violations"] = vs;
    return j;
}

// Identity used for "anything new this round?" comparisons and final dedup.
inline std::string violation_key(const ReportedViolation& v) {
    auto ref = [](const ViolationRef& r) {
        return r.function + ":" + std::to_string(r.line) + ":" + to_string(r.op);
    };
    return v.var + "|" + to_string(v.pattern) + "|" + ref(v.a1) + "|" + ref(v.a2) + "|" +
           ref(v.a3);
}

// --- conversation history --------------------------------------------------------

struct ConversationEntry {
    AgentRole role = AgentRole::Expert;
    int round = 1;
    std::string purpose;
    std::string content;
};

namespace detail {

inline std::string render_entry(const ConversationEntry& e) {
    std::string out = "## Round " + std::to_string(e.round) + " " +
                      (e.role == AgentRole::Expert ? "Expert" : "Judge") + " (" + e.purpose +
                      ")\n";
    if (!e.content.empty()) out += e.content + "\n";
    return out;
}

}  // namespace detail

// Keeps the most recent complete rounds that fit the budget. The round-1
// Expert entry survives as a purpose-only stub when its content is dropped,
// so later rounds keep their anchor.
inline std::vector<ConversationEntry> curate_history(const std::vector<ConversationEntry>& entries,
                                                     std::size_t budget) {
    if (entries.empty()) return {};
    int max_round = 0;
    for (const auto& e : entries) max_round = std::max(max_round, e.round);

    std::size_t total = 0;
    int first_kept = max_round + 1;
    for (int r = max_round; r >= 1; --r) {
        std::size_t round_size = 0;
        for (const auto& e : entries)
            if (e.round == r) round_size += detail::render_entry(e).size();
        if (total + round_size > budget) break;
        total += round_size;
        first_kept = r;
    }

    std::vector<ConversationEntry> out;
    if (first_kept > 1) {
        for (const auto& e : entries) {
            if (e.round == 1 && e.role == AgentRole::Expert) {
                ConversationEntry stub = e;
                stub.content.clear();
                out.push_back(stub);
                break;
            }
        }
    }
    for (const auto& e : entries)
        if (e.round >= first_kept) out.push_back(e);
    return out;
}

// --- prompts ---------------------------------------------------------------------

namespace detail {

inline const char* kReportSchema =
    "{\n"
    "  \"status\": \"violations\" | \"no_defect\" | \"abstain\",\n"
    "  \"violations\": [\n"
    "    {\n"
    "      \"var\": \"<global variable>\",\n"
    "      \"pattern\": \"RWR\" | \"WWR\" | \"RWW\" | \"WRW\",\n"
    "      \"a1\": {\"function\": \"<name>\", \"line\": <int>, \"op\": \"R\" | \"W\"},\n"
    "      \"a2\": {\"function\": \"<name>\", \"line\": <int>, \"op\": \"R\" | \"W\"},\n"
    "      \"a3\": {\"function\": \"<name>\", \"line\": <int>, \"op\": \"R\" | \"W\"},\n"
    "      \"rationale\": \"<one sentence>\"\n"
    "    }\n"
    "  ]\n"
    "}";

inline const char* kVerdictSchema =
    "{\n"
    "  \"verdicts\": [\n"
    "    {\"index\": <int>, \"verdict\": \"confirmed\" | \"rejected\", \"reason\": \"<one "
    "sentence>\"}\n"
    "  ],\n"
    "  \"feedback\": \"<guidance for the next detection round>\"\n"
    "}";

inline std::string task_priority_table(const AnalysisBundle& b) {
    std::string out;
    for (int idx : b.model.entry_indices()) {
        const auto& fn = b.model.functions[static_cast<std::size_t>(idx)];
        out += "- " + fn.name + " (priority " + std::to_string(fn.priority) + ")\n";
    }
    return out;
}

inline std::string interrupt_state_section(const AnalysisBundle& b) {
    std::string out;
    out += std::string("Initial interrupt state: ") +
           (b.cfg.initial_irq_enabled ? "enabled" : "disabled") + " for all handlers.\n";
    if (b.summary.control_points.empty()) {
        out += "The program never toggles interrupt enable state.\n";
        return out;
    }
    out += "Interrupt control points:\n";
    for (const auto& cp : b.summary.control_points) {
        out += "- " + cp.function + " line " + std::to_string(cp.line) + ": " +
               (cp.enable ? "enable" : "disable") +
               (cp.target < 0 ? " all handlers" : " handler priority " + std::to_string(cp.target)) +
               "\n";
    }
    return out;
}

}  // namespace detail

inline std::string build_expert_prompt(const AnalysisBundle& b, const DetectionTask& task,
                                       const KnowledgeModule& km,
                                       const std::vector<ConversationEntry>& history) {
    std::string p;
    p += "# Detection Task\n";
    p += "You are analyzing an interrupt-driven C program for atomicity violations. A "
         "violation is a triple a1, a2, a3 on one shared global: a1 and a3 are consecutive "
         "accesses in a lower-priority task, and a2 is an access from a strictly "
         "higher-priority interrupt handler that can execute between them.\n\n";
    p += "Tasks and priorities:\n" + detail::task_priority_table(b) + "\n";
    p += "Target variables: ";
    for (std::size_t i = 0; i < task.variables.size(); ++i)
        p += (i ? ", " : "") + task.variables[i];
    p += "\nTarget patterns:\n";
    for (auto pat : task.patterns)
        p += std::string("- ") + to_string(pat) + ": " + module_for(pat).definition + "\n";
    p += "\n";

    p += "# Detection Rules\n";
    p += "1. Decompose compound operations (x += y, x++, array and field updates) into their "
         "read and write micro-steps before pairing accesses.\n";
    p += "2. Analyze loop bodies per iteration: reads and writes of the same variable in "
         "consecutive iterations form consecutive pairs, so the last access of one iteration "
         "pairs with the first access of the next.\n";
    p += "3. Pair every two consecutive accesses a1, a3 of a target variable inside one "
         "lower-priority task, including pairs that cross statements and helper calls.\n";
    p += "4. For each pair, test all priority level combinations: consider every handler "
         "whose priority is strictly higher than the task that executes a1 and a3, and each "
         "of its accesses as a candidate a2.\n";
    p += "5. Keep only triples whose op sequence matches a target pattern; at least one of "
         "the three accesses must be a read, and adjacent read-read pairs are serializable.\n";
    p += "6. Respect the irq annotations: a handler that is disabled across the whole window "
         "from a1 to a3 cannot interpose; treat unknown states as possible.\n\n";

    p += "# Output Format\n";
    p += "Reply with exactly one JSON object and nothing else:\n";
    p += std::string(detail::kReportSchema) + "\n";
    p += "Line numbers refer to the numbered source listing below. Use \"no_defect\" when "
         "the targets are safe and \"abstain\" when you cannot decide.\n\n";
    p += "Example program:\n```c\n" + km.example_code + "```\n";
    p += "Expected reply:\n" + km.example_report + "\n\n";

    p += "# Program Summary\n";
    p += b.summary.to_json().dump(2) + "\n\n";

    p += "# Annotated Source\n";
    p += task.annotated_source;
    if (!task.annotated_source.empty() && task.annotated_source.back() != '\n') p += "\n";

    if (!history.empty()) {
        p += "\n# Conversation History\n";
        for (const auto& e : history) p += detail::render_entry(e);
    }

    if (p.size() > static_cast<std::size_t>(b.cfg.context_budget))
        throw PromptOverBudget(p.size(), static_cast<std::size_t>(b.cfg.context_budget));
    return p;
}

inline std::string build_judge_prompt(const AnalysisBundle& b, const DetectionTask& task,
                                      const DefectReport& report) {
    std::string p;
    p += "# Validation Task\n";
    p += "You are validating reported atomicity violations in an interrupt-driven C program. "
         "For each report decide whether some reachable execution really runs a1, then the "
         "strictly higher-priority a2, then a3, under the program's interrupt enable state "
         "and priorities. You are restricted to confirming or rejecting the listed reports; "
         "do not add new ones.\n\n";
    p += "Tasks and priorities:\n" + detail::task_priority_table(b) + "\n";

    p += "# Interrupt State\n";
    p += detail::interrupt_state_section(b) + "\n";

    p += "# Annotated Source\n";
    p += task.annotated_source;
    if (!task.annotated_source.empty() && task.annotated_source.back() != '\n') p += "\n";
    p += "\n";

    p += "# Report Under Review\n";
    p += report_to_json(report).dump(2) + "\n\n";

    p += "# Validation Rules\n";
    p += "1. a2's handler must be able to fire inside the window: it must be enabled at some "
         "point after a1 executes and before a3 executes on a reachable path.\n";
    p += "2. The handler's priority must be strictly higher than the priority of the task "
         "executing a1 and a3.\n";
    p += "3. Both a1 and a3 must be reachable on one execution of the lower-priority task "
         "with no other access to the same variable between them.\n";
    p += "4. Reject anything that cannot be triggered; give a one-sentence reason per "
         "verdict and overall feedback for the next detection round.\n\n";

    p += "# Output Format\n";
    p += "Reply with exactly one JSON object and nothing else:\n";
    p += std::string(detail::kVerdictSchema) + "\n";
    p += "Example reply:\n";
    p += "{\n"
         "  \"verdicts\": [\n"
         "    {\"index\": 0, \"verdict\": \"rejected\", \"reason\": \"the handler is disabled "
         "throughout the window\"}\n"
         "  ],\n"
         "  \"feedback\": \"re-check which handlers are enabled between the paired accesses\"\n"
         "}\n";

    if (p.size() > static_cast<std::size_t>(b.cfg.context_budget))
        throw PromptOverBudget(p.size(), static_cast<std::size_t>(b.cfg.context_budget));
    return p;
}

// --- reply parsing -----------------------------------------------------------------

namespace detail {

inline std::string strip_fences(const std::string& text) {
    std::size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return text;
    std::size_t end = text.find_last_not_of(" \t\r\n");
    std::string t = text.substr(begin, end - begin + 1);
    if (t.rfind("```", 0) == 0) {
        auto nl = t.find('\n');
        if (nl != std::string::npos) t = t.substr(nl + 1);
        auto close = t.rfind("```");
        if (close != std::string::npos) t = t.substr(0, close);
    }
    return t;
}

inline nlohmann::json parse_json_object(const std::string& text) {
    auto j = nlohmann::json::parse(strip_fences(text), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw MalformedReply("reply is not a JSON object");
    return j;
}

inline ViolationRef parse_ref(const nlohmann::json& j, const char* which,
                              const AnalysisBundle& b) {
    if (!j.is_object() || !j.contains("function") || !j.contains("line") || !j.contains("op"))
        throw MalformedReply(std::string(which) + " must carry function, line, and op");
    ViolationRef r;
    if (!j["function"].is_string() || !j["line"].is_number_integer() || !j["op"].is_string())
        throw MalformedReply(std::string(which) + " has wrongly typed fields");
    r.function = j["function"].get<std::string>();
    r.line = j["line"].get<int>();
    std::string op = j["op"].get<std::string>();
    if (op == "R")
        r.op = AccessOp::Read;
    else if (op == "W")
        r.op = AccessOp::Write;
    else
        throw MalformedReply(std::string(which) + " op must be R or W");
    if (!b.model.find_function(r.function))
        throw MalformedReply(std::string(which) + " names unknown function '" + r.function + "'");
    if (r.line < 1 || r.line > b.summary.source_lines)
        throw MalformedReply(std::string(which) + " line " + std::to_string(r.line) +
                             " is outside the source");
    return r;
}

}  // namespace detail

// Strict schema check: status enum, per-violation refs validated against the
// model, op sequence must spell the claimed pattern. Line numbers are in
// original coordinates already: annotated listings number lines that way even
// when the extractor compressed the text.
inline DefectReport parse_defect_report(const std::string& text, const AnalysisBundle& b) {
    auto j = detail::parse_json_object(text);
    if (!j.contains("status") || !j["status"].is_string())
        throw MalformedReply("report lacks a status string");
    std::string status = j["status"].get<std::string>();
    DefectReport r;
    if (status == "no_defect") {
        r.status = ReportStatus::NoDefect;
        return r;
    }
    if (status == "abstain") {
        r.status = ReportStatus::Abstain;
        return r;
    }
    if (status != "violations")
        throw MalformedReply("status '" + status + "' is not violations/no_defect/abstain");
    if (!j.contains("violations") || !j["violations"].is_array())
        throw MalformedReply("status violations requires a violations array");
    for (const auto& vj : j["violations"]) {
        ReportedViolation v;
        if (!vj.is_object() || !vj.contains("var") || !vj.contains("pattern"))
            throw MalformedReply("violation lacks var or pattern");
        if (!vj["var"].is_string() || !vj["pattern"].is_string())
            throw MalformedReply("violation var/pattern must be strings");
        v.var = vj["var"].get<std::string>();
        auto pat = pattern_from_string(vj["pattern"].get<std::string>());
        if (!pat)
            throw MalformedReply("unknown pattern '" + vj["pattern"].get<std::string>() + "'");
        v.pattern = *pat;
        if (!vj.contains("a1") || !vj.contains("a2") || !vj.contains("a3"))
            throw MalformedReply("violation lacks a1/a2/a3");
        v.a1 = detail::parse_ref(vj["a1"], "a1", b);
        v.a2 = detail::parse_ref(vj["a2"], "a2", b);
        v.a3 = detail::parse_ref(vj["a3"], "a3", b);
        std::string tag = to_string(v.pattern);
        std::string ops = std::string(to_string(v.a1.op)) + to_string(v.a2.op) + to_string(v.a3.op);
        if (ops != tag)
            throw MalformedReply("op sequence " + ops + " does not spell pattern " + tag);
        if (vj.contains("rationale") && vj["rationale"].is_string())
            v.rationale = vj["rationale"].get<std::string>();
        r.violations.push_back(std::move(v));
    }
    r.status = r.violations.empty() ? ReportStatus::NoDefect : ReportStatus::Violations;
    return r;
}

struct Verdict {
    int index = 0;
    bool confirmed = false;
    std::string reason;
};

struct JudgeOutcome {
    std::vector<Verdict> verdicts;
    std::string feedback;
    std::string raw;
};

inline std::vector<Verdict> parse_verdicts(const std::string& text, std::size_t expected,
                                           std::string* feedback_out = nullptr) {
    auto j = detail::parse_json_object(text);
    if (!j.contains("verdicts") || !j["verdicts"].is_array())
        throw MalformedReply("judge reply lacks a verdicts array");
    std::vector<Verdict> out(expected);
    std::vector<bool> seen(expected, false);
    for (const auto& vj : j["verdicts"]) {
        if (!vj.is_object() || !vj.contains("index") || !vj.contains("verdict"))
            throw MalformedReply("verdict lacks index or verdict");
        if (!vj["index"].is_number_integer() || !vj["verdict"].is_string())
            throw MalformedReply("verdict fields wrongly typed");
        int idx = vj["index"].get<int>();
        if (idx < 0 || static_cast<std::size_t>(idx) >= expected || seen[static_cast<std::size_t>(idx)])
            throw MalformedReply("verdict index " + std::to_string(idx) + " invalid or repeated");
        seen[static_cast<std::size_t>(idx)] = true;
        Verdict v;
        v.index = idx;
        std::string verdict = vj["verdict"].get<std::string>();
        if (verdict == "confirmed")
            v.confirmed = true;
        else if (verdict == "rejected")
            v.confirmed = false;
        else
            throw MalformedReply("verdict '" + verdict + "' is not confirmed/rejected");
        if (vj.contains("reason") && vj["reason"].is_string())
            v.reason = vj["reason"].get<std::string>();
        out[static_cast<std::size_t>(idx)] = v;
    }
    for (std::size_t i = 0; i < expected; ++i)
        if (!seen[i]) throw MalformedReply("verdict for index " + std::to_string(i) + " missing");
    if (feedback_out && j.contains("feedback") && j["feedback"].is_string())
        *feedback_out = j["feedback"].get<std::string>();
    return out;
}

// --- agent calls ---------------------------------------------------------------

struct ExpertOutcome {
    DefectReport report;
    std::string raw;
};

namespace detail {

// One reformat retry: the offending reply plus the parse error go back to the
// backend; a second bad reply is final.
template <typename Parse>
auto call_with_retry(ChatBackend& backend, CallKey key, std::vector<ChatMessage> messages,
                     std::string* raw_out, Parse parse) {
    std::string raw = backend.complete(key, messages);
    try {
        auto parsed = parse(raw);
        if (raw_out) *raw_out = raw;
        return parsed;
    } catch (const MalformedReply& first) {
        messages.push_back({"assistant", raw});
        messages.push_back({"user",
                            std::string("Your reply could not be accepted: ") + first.what() +
                                ". Reply again with exactly one JSON object matching the "
                                "Output Format schema and nothing else."});
        key.attempt += 1;
        std::string raw2 = backend.complete(key, messages);
        auto parsed = parse(raw2);  // a second failure propagates MalformedReply
        if (raw_out) *raw_out = raw2;
        return parsed;
    }
}

}  // namespace detail

inline ExpertOutcome expert_detect(const AnalysisBundle& b, const DetectionTask& task,
                                   const KnowledgeModule& km, ChatBackend& backend,
                                   const std::vector<ConversationEntry>& history, int round) {
    std::string prompt = build_expert_prompt(b, task, km, history);
    CallKey key{task.id, round, AgentRole::Expert, 1};
    ExpertOutcome out;
    out.report = detail::call_with_retry(
        backend, key, {{"user", prompt}}, &out.raw,
        [&](const std::string& raw) { return parse_defect_report(raw, b); });
    return out;
}

inline JudgeOutcome judge_validate(const AnalysisBundle& b, const DetectionTask& task,
                                   const DefectReport& report, ChatBackend& backend, int round) {
    std::string prompt = build_judge_prompt(b, task, report);
    CallKey key{task.id, round, AgentRole::Judge, 1};
    JudgeOutcome out;
    out.verdicts = detail::call_with_retry(
        backend, key, {{"user", prompt}}, &out.raw, [&](const std::string& raw) {
            std::string fb;
            auto vs = parse_verdicts(raw, report.violations.size(), &fb);
            out.feedback = fb;
            return vs;
        });
    return out;
}

// --- conversation manager --------------------------------------------------------

struct ConversationResult {
    DefectReport final;
    std::vector<ConversationEntry> transcript;
    int rounds = 0;
    bool incomplete = false;
};

// Expert detects or refines, Judge validates, feedback loops back. Stops on
// NoDefect/Abstain, on a round that adds nothing new (from round 2 on, before
// judging), or after N rounds; the surviving report is whatever the last Judge
// pass confirmed.
inline ConversationResult run_conversation(const AnalysisBundle& b, const DetectionTask& task,
                                           ChatBackend& expert_backend, ChatBackend& judge_backend,
                                           const BackendConfig& cfg) {
    if (cfg.max_rounds < 1) throw BackendError("max_rounds must be at least 1");
    if (task.patterns.empty()) throw BackendError("task '" + task.id + "' targets no pattern");
    const KnowledgeModule& km = module_for(task.patterns.front());

    ConversationResult result;
    std::vector<ReportedViolation> last_confirmed;
    bool judged_once = false;
    std::set<std::string> seen;

    auto finalize = [&](ReportStatus expert_status) {
        if (judged_once) {
            result.final.violations = last_confirmed;
            result.final.status =
                last_confirmed.empty() ? ReportStatus::NoDefect : ReportStatus::Violations;
        } else {
            result.final.status = expert_status;
        }
    };

    for (int round = 1; round <= cfg.max_rounds; ++round) {
        ExpertOutcome expert;
        try {
            std::string base = build_expert_prompt(b, task, km, {});
            std::size_t budget = static_cast<std::size_t>(b.cfg.context_budget);
            std::size_t room = base.size() < budget ? budget - base.size() : 0;
            auto history = curate_history(result.transcript, room);
            CallKey key{task.id, round, AgentRole::Expert, 1};
            std::string prompt = build_expert_prompt(b, task, km, history);
            expert.report = detail::call_with_retry(
                expert_backend, key, {{"user", prompt}}, &expert.raw,
                [&](const std::string& raw) { return parse_defect_report(raw, b); });
        } catch (const BackendUnavailable&) {
            finalize(ReportStatus::NoDefect);
            result.incomplete = true;
            return result;
        }
        result.rounds = round;
        result.transcript.push_back(
            {AgentRole::Expert, round, round == 1 ? "detect" : "refine", expert.raw});

        if (expert.report.status != ReportStatus::Violations) {
            finalize(expert.report.status);
            return result;
        }

        bool any_new = false;
        for (const auto& v : expert.report.violations)
            if (!seen.count(violation_key(v))) any_new = true;
        if (round >= 2 && !any_new) {
            finalize(ReportStatus::Violations);
            return result;
        }
        for (const auto& v : expert.report.violations) seen.insert(violation_key(v));

        JudgeOutcome judge;
        try {
            judge = judge_validate(b, task, expert.report, judge_backend, round);
        } catch (const BackendUnavailable&) {
            finalize(ReportStatus::Violations);
            result.incomplete = true;
            return result;
        }
        result.transcript.push_back({AgentRole::Judge, round, "validate", judge.raw});

        judged_once = true;
        last_confirmed.clear();
        for (const auto& v : judge.verdicts)
            if (v.confirmed)
                last_confirmed.push_back(expert.report.violations[static_cast<std::size_t>(v.index)]);
    }

    finalize(ReportStatus::Violations);
    return result;
}

// Writes one file per entry in the replay backend's naming scheme plus a
// combined JSON transcript, so a recorded run can be replayed verbatim.
inline void persist_transcript(const std::string& dir, const std::string& task_id,
                               const std::vector<ConversationEntry>& transcript) {
    std::filesystem::create_directories(dir);
    nlohmann::json all = nlohmann::json::array();
    for (const auto& e : transcript) {
        std::string name =
            task_id + ".r" + std::to_string(e.round) + "." + to_string(e.role) + ".txt";
        std::ofstream out(dir + "/" + name, std::ios::binary);
        out << e.content;
        all.push_back({{"role", to_string(e.role)},
                       {"round", e.round},
                       {"purpose", e.purpose},
                       {"content", e.content}});
    }
    std::ofstream out(dir + "/" + task_id + ".conversation.json", std::ios::binary);
    out << all.dump(2) << "\n";
}

}  // namespace irqav
