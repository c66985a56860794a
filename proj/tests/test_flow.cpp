#include <catch2/catch_amalgamated.hpp>

#include "irqav/flow_analysis.hpp"

using namespace irqav;

namespace {
struct Flowed {
    ProgramModel model;
    AccessAnalysis acc;
    std::vector<TaskGraph> graphs;
    std::vector<TaskFlow> flows;
    AnalysisConfig cfg;
};

Flowed flow_of(const std::string& src, AnalysisConfig cfg = {}) {
    Flowed f;
    f.cfg = cfg;
    f.model = parse_program(SourceText(src), cfg);
    f.acc = analyze_accesses(f.model, cfg);
    f.graphs = build_task_graphs(f.model, f.acc, cfg);
    f.flows = compute_irq_flow(f.model, cfg, f.graphs);
    return f;
}

const TaskGraph& graph_of(const Flowed& f, const std::string& task) {
    for (const auto& g : f.graphs)
        if (g.task == task) return g;
    throw std::runtime_error("no graph for " + task);
}
const TaskFlow& flow_for(const Flowed& f, const std::string& task) {
    for (const auto& fl : f.flows)
        if (fl.task == task) return fl;
    throw std::runtime_error("no flow for " + task);
}
}  // namespace

TEST_CASE("control points are collected per call site in source order") {
    auto f = flow_of(R"(
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
)");
    auto pts = find_control_points(f.model, f.cfg);
    REQUIRE(pts.size() == 3);
    REQUIRE(pts[0].function == "main");
    REQUIRE(pts[0].line == 5);
    REQUIRE_FALSE(pts[0].enable);
    REQUIRE(pts[0].target == -1);
    REQUIRE(pts[1].enable);
    REQUIRE(pts[1].target == 1);
    REQUIRE(pts[2].function == "ISR_1");
    REQUIRE(pts[2].target == 2);

    auto at_branch = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 7);
    REQUIRE(at_branch.at(1) == IrqState::Enabled);
    REQUIRE(at_branch.at(2) == IrqState::Disabled);
    REQUIRE(at_branch.at(3) == IrqState::Disabled);
}

TEST_CASE("diverging branches join to Unknown") {
    auto f = flow_of(R"(
int mode;
int out;
void main(void) {
    if (mode > 0) {
        enable_isr(2);
    } else {
        disable_isr(2);
    }
    out = 1;
}
void ISR_2(void) {
    out = 2;
}
)");
    auto after = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 10);
    REQUIRE(after.at(2) == IrqState::Unknown);
}

TEST_CASE("programs without control points keep the initial state everywhere") {
    auto f = flow_of(R"(
int x;
void main(void) {
    x = 1;
}
void ISR_1(void) {
    x = 2;
}
)");
    REQUIRE(find_control_points(f.model, f.cfg).empty());
    auto st = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 4);
    REQUIRE(st.at(1) == IrqState::Enabled);
}

TEST_CASE("the initial state is configurable") {
    AnalysisConfig cfg;
    cfg.initial_irq_enabled = false;
    auto f = flow_of(R"(
int x;
void main(void) {
    x = 1;
}
void ISR_1(void) {
    x = 2;
}
)",
                     cfg);
    auto st = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 4);
    REQUIRE(st.at(1) == IrqState::Disabled);
}

TEST_CASE("unconditional callee effects flow back into the caller") {
    auto f = flow_of(R"(
int x;
void shield(void) {
    disable_isr(1);
}
void main(void) {
    shield();
    x = 1;
    enable_isr(1);
}
void ISR_1(void) {
    x = 2;
}
)");
    auto st = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 8);
    REQUIRE(st.at(1) == IrqState::Disabled);
}

TEST_CASE("conditional callee effects join to Unknown after the call") {
    auto f = flow_of(R"(
int x;
int mode;
void maybe_shield(void) {
    if (mode > 0) {
        disable_isr(1);
    }
}
void main(void) {
    maybe_shield();
    x = 1;
}
void ISR_1(void) {
    x = 2;
}
)");
    auto st = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 11);
    REQUIRE(st.at(1) == IrqState::Unknown);
}

TEST_CASE("a disable inside a loop makes the loop exit state Unknown") {
    auto f = flow_of(R"(
int n;
int x;
void main(void) {
    while (n < 3) {
        disable_isr(1);
        n = n + 1;
    }
    x = 1;
}
void ISR_1(void) {
    x = 2;
}
)");
    auto st = interrupt_state_at(f.model, f.cfg, graph_of(f, "main"), flow_for(f, "main"), 9);
    REQUIRE(st.at(1) == IrqState::Unknown);
}

TEST_CASE("handler task flows start from the configured initial state") {
    auto f = flow_of(R"(
int x;
void main(void) {
    x = 1;
}
void ISR_1(void) {
    disable_isr(2);
    x = 2;
}
void ISR_2(void) {
    x = 3;
}
)");
    auto st = interrupt_state_at(f.model, f.cfg, graph_of(f, "ISR_1"), flow_for(f, "ISR_1"), 8);
    REQUIRE(st.at(2) == IrqState::Disabled);
    REQUIRE(st.at(1) == IrqState::Enabled);
}
