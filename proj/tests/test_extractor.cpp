#include <catch2/catch_amalgamated.hpp>

#include "irqav/access_analysis.hpp"
#include "irqav/code_extractor.hpp"

using namespace irqav;

namespace {
const std::string kDeadCode = R"(int counter;
int spare;
void log_event(int code);

void helper(void) {
    counter += 1;
}

void dead_one(void) {
    spare = 1;
    spare = 2;
}

void dead_two(void) {
    spare = 3;
    dead_one();
}

void main(void) {
    helper();
    log_event(counter);
}

void ISR_1(void) {
    counter = 0;
}
)";
}  // namespace

TEST_CASE("reachability keeps entries and their callees, drops the rest") {
    AnalysisConfig cfg;
    auto model = parse_program(SourceText(kDeadCode), cfg);
    auto reach = reachable_functions(model);
    REQUIRE(reach == std::set<std::string>{"main", "ISR_1", "helper"});
}

TEST_CASE("entries alone reach exactly the entry set") {
    AnalysisConfig cfg;
    auto model = parse_program(SourceText(R"(
int x;
void main(void) { x = 1; }
void ISR_2(void) { x = 2; }
)"),
                               cfg);
    REQUIRE(reachable_functions(model) == std::set<std::string>{"main", "ISR_2"});
}

TEST_CASE("extraction removes dead bodies and leaves an elision marker") {
    AnalysisConfig cfg;
    SourceText src(kDeadCode);
    auto model = parse_program(src, cfg);
    auto comp = extract(src, model);
    REQUIRE(comp.text.find("dead_one();") == std::string::npos);
    REQUIRE(comp.text.find("spare = 1") == std::string::npos);
    REQUIRE(comp.text.find("/* elided: dead_one */") != std::string::npos);
    REQUIRE(comp.text.find("/* elided: dead_two */") != std::string::npos);
    REQUIRE(comp.text.find("int spare;") != std::string::npos);  // globals always retained
    REQUIRE(comp.text.find("void log_event(int code);") != std::string::npos);
}

TEST_CASE("fully reachable programs compress to identical text with identity map") {
    AnalysisConfig cfg;
    std::string all_used = R"(int x;
void helper(void) { x += 1; }
void main(void) { helper(); }
void ISR_1(void) { x = 0; }
)";
    SourceText src(all_used);
    auto model = parse_program(src, cfg);
    auto comp = extract(src, model);
    REQUIRE(comp.text == all_used);
    for (const auto& [c, o] : comp.to_original) REQUIRE(c == o);
}

TEST_CASE("line map round-trips and skips removed lines") {
    AnalysisConfig cfg;
    SourceText src(kDeadCode);
    auto model = parse_program(src, cfg);
    auto comp = extract(src, model);
    for (const auto& [c, o] : comp.to_original) REQUIRE(comp.to_compressed.at(o) == c);
    for (const auto& [o, c] : comp.to_compressed) REQUIRE(comp.to_original.at(c) == o);
    const auto* dead = model.find_function("dead_one");
    for (int l = dead->line; l <= dead->end_line; ++l)
        REQUIRE(comp.to_compressed.count(l) == 0);
}

TEST_CASE("re-parsing compressed text preserves the access matrix through the map") {
    AnalysisConfig cfg;
    SourceText src(kDeadCode);
    auto model = parse_program(src, cfg);
    auto orig_acc = analyze_accesses(model, cfg);
    auto comp = extract(src, model);

    auto cmodel = parse_program(SourceText(comp.text), cfg);
    auto cacc = analyze_accesses(cmodel, cfg);

    auto tuple_set = [&](const AccessAnalysis& acc, const std::set<std::string>& fns,
                         auto line_of) {
        std::multiset<std::string> out;
        for (const auto& ev : acc.events) {
            if (!fns.count(ev.function)) continue;
            out.insert(ev.function + "|" + to_string(ev.op) + "|" + ev.path.display() + "|" +
                       std::to_string(line_of(ev.line)) + "|" + std::to_string(ev.micro));
        }
        return out;
    };
    auto original_view = tuple_set(orig_acc, comp.retained_functions, [](int l) { return l; });
    auto mapped_view = tuple_set(cacc, comp.retained_functions,
                                 [&](int l) { return comp.to_original.at(l); });
    REQUIRE(original_view == mapped_view);
}

TEST_CASE("extraction is idempotent") {
    AnalysisConfig cfg;
    SourceText src(kDeadCode);
    auto model = parse_program(src, cfg);
    auto once = extract(src, model);
    SourceText again(once.text);
    auto model2 = parse_program(again, cfg);
    auto twice = extract(again, model2);
    REQUIRE(twice.text == once.text);
}
