#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "irqav/errors.hpp"
#include "irqav/orchestrator.hpp"
#include "irqav/simulator.hpp"

namespace irqav {

enum class BackendKind { Http, Replay, Oracle };

inline BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "http") return BackendKind::Http;
    if (s == "replay") return BackendKind::Replay;
    if (s == "oracle") return BackendKind::Oracle;
    throw BackendError("unknown backend '" + s + "' (expected http, replay, or oracle)");
}

struct BackendConfig {
    BackendKind kind = BackendKind::Oracle;
    std::string endpoint;        // Http
    std::string model;           // Http
    std::string key;             // Http
    std::string transcript_dir;  // Replay
    SimOptions sim;              // Oracle
    double temperature = 0.0;
    int max_rounds = 3;
};

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

enum class AgentRole { Expert, Judge };

inline std::string to_string(AgentRole r) { return r == AgentRole::Expert ? "expert" : "judge"; }

// Identifies one backend call for replay keying and transcript naming.
struct CallKey {
    std::string task_id;
    int round = 1;
    AgentRole role = AgentRole::Expert;
    int attempt = 1;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const CallKey& key, const std::vector<ChatMessage>& messages) = 0;
};

// --- live HTTP -----------------------------------------------------------------

// Chat-completion-style endpoint. Configuration comes exclusively from the
// environment: AV_LLM_ENDPOINT (full URL), AV_LLM_KEY (optional bearer token),
// AV_LLM_MODEL.
class HttpBackend : public ChatBackend {
public:
    HttpBackend(std::string endpoint, std::string model, std::string key, double temperature)
        : model_(std::move(model)), key_(std::move(key)), temperature_(temperature) {
        auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw BackendUnavailable("endpoint '" + endpoint + "' has no scheme");
        auto path_start = endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            base_ = endpoint;
            path_ = "/v1/chat/completions";
        } else {
            base_ = endpoint.substr(0, path_start);
            path_ = endpoint.substr(path_start);
        }
    }

    static std::unique_ptr<HttpBackend> from_env(double temperature) {
        const char* endpoint = std::getenv("AV_LLM_ENDPOINT");
        const char* model = std::getenv("AV_LLM_MODEL");
        const char* key = std::getenv("AV_LLM_KEY");
        if (!endpoint || !*endpoint) throw BackendUnavailable("AV_LLM_ENDPOINT is not set");
        if (!model || !*model) throw BackendUnavailable("AV_LLM_MODEL is not set");
        return std::make_unique<HttpBackend>(endpoint, model, key ? key : "", temperature);
    }

    std::string complete(const CallKey&, const std::vector<ChatMessage>& messages) override {
        nlohmann::json body;
        body["model"] = model_;
        body["temperature"] = temperature_;
        nlohmann::json msgs = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        body["messages"] = msgs;

        httplib::Client cli(base_);
        cli.set_connection_timeout(30, 0);
        cli.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
        auto res = cli.Post(path_, headers, body.dump(), "application/json");
        if (!res)
            throw BackendUnavailable("no response from " + base_ + " (" +
                                     httplib::to_string(res.error()) + ")");
        if (res->status != 200)
            throw BackendUnavailable("HTTP " + std::to_string(res->status) + " from " + base_);
        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
            throw BackendUnavailable("malformed completion envelope from " + base_);
        const auto& msg = reply["choices"][0];
        if (msg.contains("message") && msg["message"].contains("content"))
            return msg["message"]["content"].get<std::string>();
        if (msg.contains("text")) return msg["text"].get<std::string>();
        throw BackendUnavailable("completion reply carries no content");
    }

private:
    std::string base_;
    std::string path_;
    std::string model_;
    std::string key_;
    double temperature_;
};

// --- scripted replay -------------------------------------------------------------

// Replays canned replies from a directory of files named
// <task>.r<round>.<role>.txt; a reformat retry looks for an extra
// .retry suffix and falls back to the original file when absent.
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(std::string dir) : dir_(std::move(dir)) {}

    std::string complete(const CallKey& key, const std::vector<ChatMessage>&) override {
        std::string name = key.task_id + ".r" + std::to_string(key.round) + "." +
                           to_string(key.role);
        if (key.attempt > 1) {
            std::ifstream retry(dir_ + "/" + name + ".retry.txt");
            if (retry) return slurp(retry);
        }
        std::ifstream in(dir_ + "/" + name + ".txt");
        if (!in)
            throw BackendUnavailable("replay transcript missing: " + dir_ + "/" + name + ".txt");
        return slurp(in);
    }

private:
    static std::string slurp(std::ifstream& in) {
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    std::string dir_;
};

// --- simulator oracle ------------------------------------------------------------

// Deterministic stand-in for a live model. The Expert side reports what the
// interleaving explorer finds: round 1 ignores interrupt-state gating (so
// statically plausible but masked triples surface), later rounds respect it.
// The Judge side confirms exactly the gated simulator's findings.
class OracleBackend : public ChatBackend {
public:
    OracleBackend(const AnalysisBundle& bundle, const std::vector<DetectionTask>& tasks,
                  SimOptions sim)
        : bundle_(bundle), tasks_(tasks), sim_(sim) {}

    std::string complete(const CallKey& key, const std::vector<ChatMessage>&) override {
        const DetectionTask* task = nullptr;
        for (const auto& t : tasks_)
            if (t.id == key.task_id) task = &t;
        if (!task) throw BackendError("oracle: unknown task '" + key.task_id + "'");
        if (key.role == AgentRole::Expert) return expert_reply(*task, key.round);
        return judge_reply(*task);
    }

private:
    std::vector<DynamicViolation> findings(const DetectionTask& task, bool gated) const {
        SimOptions opt = sim_;
        opt.gate_interrupts = gated;
        auto sim = enumerate_traces(bundle_.model, bundle_.acc, bundle_.cfg, opt);
        auto all = detect_dynamic(sim);
        std::vector<DynamicViolation> kept;
        for (auto& d : all) {
            bool var_ok = std::find(task.variables.begin(), task.variables.end(), d.core.var) !=
                          task.variables.end();
            bool pat_ok = std::find(task.patterns.begin(), task.patterns.end(),
                                    d.core.pattern) != task.patterns.end();
            if (var_ok && pat_ok) kept.push_back(std::move(d));
        }
        return kept;
    }

    static nlohmann::json ref_json(const AccessEvent& e) {
        return {{"function", e.function}, {"line", e.line}, {"op", to_string(e.op)}};
    }

    std::string expert_reply(const DetectionTask& task, int round) {
        auto found = findings(task, round > 1);
        nlohmann::json j;
        if (found.empty()) {
            j["status"] = "no_defect";
            j["violations"] = nlohmann::json::array();
        } else {
            j["status"] = "violations";
            nlohmann::json vs = nlohmann::json::array();
            for (const auto& d : found) {
                nlohmann::json v;
                v["var"] = d.core.var;
                v["pattern"] = to_string(d.core.pattern);
                v["a1"] = ref_json(d.core.a1);
                v["a2"] = ref_json(d.core.a2);
                v["a3"] = ref_json(d.core.a3);
                v["rationale"] = "interleaving witness: task " + d.core.task_high +
                                 " preempts between the paired accesses";
                vs.push_back(v);
            }
            j["violations"] = vs;
        }
        last_expert_[task.id] = j;
        return j.dump(2);
    }

    std::string judge_reply(const DetectionTask& task) {
        auto it = last_expert_.find(task.id);
        if (it == last_expert_.end() || !it->second.contains("violations"))
            throw BackendError("oracle judge: no expert report to validate for " + task.id);
        auto gated = findings(task, true);
        auto key_of = [](const nlohmann::json& v) {
            std::ostringstream k;
            k << v["var"].get<std::string>() << "|" << v["pattern"].get<std::string>();
            for (const char* r : {"a1", "a2", "a3"})
                k << "|" << v[r]["line"].get<int>() << v[r]["op"].get<std::string>();
            return k.str();
        };
        std::map<std::string, int> reachable;
        for (const auto& d : gated) {
            nlohmann::json v;
            v["var"] = d.core.var;
            v["pattern"] = to_string(d.core.pattern);
            v["a1"] = ref_json(d.core.a1);
            v["a2"] = ref_json(d.core.a2);
            v["a3"] = ref_json(d.core.a3);
            ++reachable[key_of(v)];
        }
        nlohmann::json out;
        nlohmann::json verdicts = nlohmann::json::array();
        int rejected = 0;
        const auto& vs = it->second["violations"];
        for (std::size_t i = 0; i < vs.size(); ++i) {
            nlohmann::json v;
            v["index"] = static_cast<int>(i);
            auto k = key_of(vs[i]);
            auto rit = reachable.find(k);
            if (rit != reachable.end() && rit->second > 0) {
                --rit->second;
                v["verdict"] = "confirmed";
                v["reason"] = "a witness interleaving reaches all three accesses in order";
            } else {
                ++rejected;
                v["verdict"] = "rejected";
                std::string fn = vs[i]["a2"]["function"].get<std::string>();
                v["reason"] = "no reachable interleaving delivers the interposed access: " + fn +
                              " cannot fire inside the window under the concrete interrupt state";
            }
            verdicts.push_back(v);
        }
        out["verdicts"] = verdicts;
        out["feedback"] = rejected == 0
                              ? "all reported violations are dynamically realizable"
                              : std::to_string(rejected) +
                                    " report(s) rely on handlers that are disabled throughout "
                                    "the access window; re-examine the enable/disable flow";
        return out.dump(2);
    }

    const AnalysisBundle& bundle_;
    const std::vector<DetectionTask>& tasks_;
    SimOptions sim_;
    std::map<std::string, nlohmann::json> last_expert_;
};

}  // namespace irqav
