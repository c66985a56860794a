#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "irqav/errors.hpp"

namespace irqav {

// One knob bag for the whole pipeline. Anything a fixture or a test wants to
// vary lives here with the documented default.
struct AnalysisConfig {
    // Frontend.
    std::string isr_regex = "^(ISR|isr)_([0-9]+)$";  // capture group 2 = priority
    std::map<std::string, int> isr_priorities;       // explicit overrides by name
    std::string enable_intrinsic = "enable_isr";
    std::string disable_intrinsic = "disable_isr";

    // Interrupt-state analysis and simulation start from this state.
    bool initial_irq_enabled = true;

    // Extraction / prompting.
    std::size_t context_budget = 24000;  // chars

    // Simulation bounds.
    int max_firings_per_isr = 1;
    int max_loop_iterations = 4;
    long long max_traces = 100000;

    // Task partitioning.
    int high_frequency_threshold = 8;
    double evenness_ratio = 2.0;

    // Conversation.
    int max_rounds = 3;
    double temperature = 0.0;

    static AnalysisConfig from_json(const nlohmann::json& j) {
        AnalysisConfig c;
        auto get = [&](const char* key, auto& slot) {
            if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
        };
        get("isr_regex", c.isr_regex);
        get("enable_intrinsic", c.enable_intrinsic);
        get("disable_intrinsic", c.disable_intrinsic);
        get("initial_irq_enabled", c.initial_irq_enabled);
        get("context_budget", c.context_budget);
        get("max_firings_per_isr", c.max_firings_per_isr);
        get("max_loop_iterations", c.max_loop_iterations);
        get("max_traces", c.max_traces);
        get("high_frequency_threshold", c.high_frequency_threshold);
        get("evenness_ratio", c.evenness_ratio);
        get("max_rounds", c.max_rounds);
        get("temperature", c.temperature);
        if (j.contains("isr_priorities")) {
            for (auto& [name, prio] : j.at("isr_priorities").items())
                c.isr_priorities[name] = prio.get<int>();
        }
        return c;
    }

    static AnalysisConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw AnalysisError(0, "cannot open config " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw AnalysisError(0, "bad config " + path + ": " + e.what());
        }
        return from_json(j);
    }
};

}  // namespace irqav
