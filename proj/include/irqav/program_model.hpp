#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "irqav/cfg.hpp"
#include "irqav/config.hpp"
#include "irqav/errors.hpp"
#include "irqav/parser.hpp"
#include "irqav/source_text.hpp"

namespace irqav {

// Semantic model of one translation unit: validated globals, functions with
// control-flow graphs, the interrupt table (main runs at priority 0, handlers
// at pairwise-distinct positive priorities), and the call graph.

struct GlobalVar {
    std::string name;
    GlobalKind kind = GlobalKind::Scalar;
    std::string type;
    std::string struct_tag;
    std::vector<StructField> fields;  // Struct kind
    int array_size = 0;               // Array kind
    bool has_init = false;
    long long init_value = 0;
    std::optional<Expr> init_expr;    // Pointer kind
    int line = 0;
};

struct FunctionDef {
    std::string name;
    std::string return_type;
    std::vector<RawParam> params;
    std::vector<Stmt> body;
    Cfg cfg;
    bool proto_only = false;
    bool is_isr = false;
    int priority = 0;  // 0 = task level; handlers are >= 1
    int line = 0;
    int end_line = 0;
    std::set<std::string> locals;           // params plus declared locals
    std::vector<std::string> callees;       // deduplicated, in first-call order
};

struct ProgramModel {
    std::vector<GlobalVar> globals;
    std::vector<FunctionDef> functions;
    std::map<std::string, int> global_index;
    std::map<std::string, int> function_index;
    std::vector<int> isr_indices;  // sorted ascending by priority
    int main_index = -1;

    const GlobalVar* find_global(const std::string& name) const {
        auto it = global_index.find(name);
        return it == global_index.end() ? nullptr : &globals[static_cast<std::size_t>(it->second)];
    }
    const FunctionDef* find_function(const std::string& name) const {
        auto it = function_index.find(name);
        return it == function_index.end() ? nullptr
                                          : &functions[static_cast<std::size_t>(it->second)];
    }
    bool is_intrinsic(const std::string& name, const AnalysisConfig& cfg) const {
        return name == cfg.enable_intrinsic || name == cfg.disable_intrinsic;
    }

    // Entry functions: main followed by handlers in ascending priority order.
    std::vector<int> entry_indices() const {
        std::vector<int> out;
        out.push_back(main_index);
        out.insert(out.end(), isr_indices.begin(), isr_indices.end());
        return out;
    }
};

namespace detail {

inline void collect_locals(const std::vector<Stmt>& stmts, std::set<std::string>& out) {
    for (const auto& s : stmts) {
        if (s.kind == StmtKind::LocalDecl) out.insert(s.decl_name);
        collect_locals(s.init, out);
        collect_locals(s.body, out);
        collect_locals(s.step, out);
        collect_locals(s.else_body, out);
    }
}

inline void collect_callees(const std::vector<Stmt>& stmts, std::vector<std::string>& out) {
    for (const auto& s : stmts) {
        if (s.kind == StmtKind::Call &&
            std::find(out.begin(), out.end(), s.callee) == out.end())
            out.push_back(s.callee);
        collect_callees(s.init, out);
        collect_callees(s.body, out);
        collect_callees(s.step, out);
        collect_callees(s.else_body, out);
    }
}

inline void check_recursion(const ProgramModel& model) {
    enum class Mark { White, Grey, Black };
    std::map<std::string, Mark> marks;
    std::vector<std::pair<std::string, std::size_t>> stack;
    for (const auto& fn : model.functions) {
        if (fn.proto_only || marks[fn.name] == Mark::Black) continue;
        stack.clear();
        stack.emplace_back(fn.name, 0);
        marks[fn.name] = Mark::Grey;
        while (!stack.empty()) {
            auto& [name, idx] = stack.back();
            const FunctionDef* f = model.find_function(name);
            if (!f || f->proto_only || idx >= f->callees.size()) {
                marks[name] = Mark::Black;
                stack.pop_back();
                continue;
            }
            std::string callee = f->callees[idx++];
            const FunctionDef* cf = model.find_function(callee);
            if (!cf || cf->proto_only) continue;
            if (marks[callee] == Mark::Grey)
                throw UnsupportedConstruct(cf->line, "recursive call cycle involving '" + callee +
                                                         "' is not supported");
            if (marks[callee] == Mark::White) {
                marks[callee] = Mark::Grey;
                stack.emplace_back(callee, 0);
            }
        }
    }
}

inline void check_calls_declared(const ProgramModel& model, const AnalysisConfig& cfg) {
    for (const auto& fn : model.functions) {
        for (const auto& callee : fn.callees) {
            if (model.is_intrinsic(callee, cfg)) continue;
            if (!model.find_function(callee))
                throw SyntaxError(fn.line, "call to undeclared function '" + callee + "' in '" +
                                               fn.name + "'");
        }
    }
}

}  // namespace detail

inline ProgramModel build_model(const ParsedUnit& unit, const AnalysisConfig& cfg) {
    ProgramModel model;

    std::map<std::string, std::vector<StructField>> struct_defs;
    for (const auto& sd : unit.structs) {
        if (struct_defs.count(sd.tag))
            throw SyntaxError(sd.line, "duplicate struct definition '" + sd.tag + "'");
        struct_defs[sd.tag] = sd.fields;
    }

    for (const auto& rg : unit.globals) {
        if (model.global_index.count(rg.name))
            throw SyntaxError(rg.line, "duplicate global '" + rg.name + "'");
        GlobalVar g;
        g.name = rg.name;
        g.kind = rg.kind;
        g.type = rg.type;
        g.struct_tag = rg.struct_tag;
        g.array_size = rg.array_size;
        g.has_init = rg.has_init;
        g.init_value = rg.init_value;
        g.init_expr = rg.init_expr;
        g.line = rg.line;
        if (g.kind == GlobalKind::Struct) {
            auto it = struct_defs.find(g.struct_tag);
            if (it == struct_defs.end())
                throw SyntaxError(g.line, "unknown struct tag '" + g.struct_tag + "'");
            g.fields = it->second;
        }
        model.global_index[g.name] = static_cast<int>(model.globals.size());
        model.globals.push_back(std::move(g));
    }

    std::regex isr_re(cfg.isr_regex);
    std::map<int, std::string> priorities_seen;
    for (const auto& rf : unit.functions) {
        auto it = model.function_index.find(rf.name);
        if (it != model.function_index.end()) {
            FunctionDef& existing = model.functions[static_cast<std::size_t>(it->second)];
            if (!existing.proto_only || rf.proto_only)
                throw SyntaxError(rf.line, "duplicate definition of '" + rf.name + "'");
            // Definition following its prototype replaces the placeholder.
        }
        FunctionDef fn;
        fn.name = rf.name;
        fn.return_type = rf.return_type;
        fn.params = rf.params;
        fn.body = rf.body;
        fn.proto_only = rf.proto_only;
        fn.line = rf.line;
        fn.end_line = rf.end_line;
        for (const auto& p : fn.params)
            if (!p.name.empty()) fn.locals.insert(p.name);
        detail::collect_locals(fn.body, fn.locals);
        detail::collect_callees(fn.body, fn.callees);
        if (!fn.proto_only) fn.cfg = build_cfg(fn.body);

        std::smatch m;
        auto prio_override = cfg.isr_priorities.find(fn.name);
        if (prio_override != cfg.isr_priorities.end()) {
            fn.is_isr = true;
            fn.priority = prio_override->second;
        } else if (std::regex_match(fn.name, m, isr_re)) {
            fn.is_isr = true;
            fn.priority = std::stoi(m[2].str());
        }
        if (fn.is_isr) {
            if (fn.proto_only)
                throw SyntaxError(fn.line, "interrupt handler '" + fn.name + "' must be defined");
            if (fn.priority < 1)
                throw SyntaxError(fn.line, "interrupt handler '" + fn.name +
                                               "' must have priority >= 1");
            auto [pit, inserted] = priorities_seen.emplace(fn.priority, fn.name);
            if (!inserted)
                throw SyntaxError(fn.line, "handlers '" + pit->second + "' and '" + fn.name +
                                               "' share priority " + std::to_string(fn.priority));
            if (!fn.params.empty())
                throw SyntaxError(fn.line, "interrupt handler '" + fn.name +
                                               "' must take no parameters");
        }

        if (it != model.function_index.end()) {
            model.functions[static_cast<std::size_t>(it->second)] = std::move(fn);
        } else {
            model.function_index[fn.name] = static_cast<int>(model.functions.size());
            model.functions.push_back(std::move(fn));
        }
    }

    for (std::size_t i = 0; i < model.functions.size(); ++i) {
        const auto& fn = model.functions[i];
        if (fn.is_isr) model.isr_indices.push_back(static_cast<int>(i));
        if (fn.name == "main" && !fn.proto_only) model.main_index = static_cast<int>(i);
    }
    std::sort(model.isr_indices.begin(), model.isr_indices.end(), [&](int a, int b) {
        return model.functions[static_cast<std::size_t>(a)].priority <
               model.functions[static_cast<std::size_t>(b)].priority;
    });
    if (model.main_index < 0) throw MissingMain();

    detail::check_calls_declared(model, cfg);
    detail::check_recursion(model);
    return model;
}

// Extracts the literal argument of an enable/disable intrinsic call. The
// subset requires a plain integer (possibly negated); -1 addresses all
// handlers.
inline int intrinsic_target(const Stmt& call) {
    if (call.args.size() == 1) {
        const Expr& a = call.args[0];
        if (a.kind == ExprKind::IntLit) return static_cast<int>(a.value);
        if (a.kind == ExprKind::Unary && a.un_op == UnOp::Neg &&
            a.kids[0].kind == ExprKind::IntLit)
            return -static_cast<int>(a.kids[0].value);
    }
    throw UnsupportedConstruct(call.line,
                               "'" + call.callee + "' requires one integer literal argument");
}

inline ProgramModel parse_program(const SourceText& src, const AnalysisConfig& cfg) {
    Lexer lex(src);
    return build_model(parse_tokens(lex.tokens()), cfg);
}

inline ProgramModel parse_program_file(const std::string& path, const AnalysisConfig& cfg) {
    return parse_program(SourceText::from_file(path), cfg);
}

}  // namespace irqav
