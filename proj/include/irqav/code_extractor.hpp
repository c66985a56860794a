#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "irqav/program_model.hpp"
#include "irqav/source_text.hpp"

namespace irqav {

// Reachability-based program compression. Function bodies that no entry
// function (main or a handler) can reach are dropped, every remaining line is
// kept verbatim, and a bidirectional line map ties compressed lines back to
// the original so downstream reports stay in original coordinates.

struct CompressedSource {
    std::string text;
    std::map<int, int> to_original;    // compressed line → original line
    std::map<int, int> to_compressed;  // original line → compressed line
    std::set<std::string> retained_functions;
    std::vector<std::string> elided_functions;
};

inline std::set<std::string> reachable_functions(const ProgramModel& model) {
    std::set<std::string> reach;
    std::vector<std::string> work;
    for (int ei : model.entry_indices()) {
        const auto& name = model.functions[static_cast<std::size_t>(ei)].name;
        if (reach.insert(name).second) work.push_back(name);
    }
    while (!work.empty()) {
        std::string cur = work.front();
        work.erase(work.begin());
        const FunctionDef* fn = model.find_function(cur);
        if (!fn || fn->proto_only) continue;
        for (const auto& callee : fn->callees) {
            const FunctionDef* cf = model.find_function(callee);
            if (!cf || cf->proto_only) continue;  // external declarations stay as text
            if (reach.insert(callee).second) work.push_back(callee);
        }
    }
    return reach;
}

inline CompressedSource extract(const SourceText& src, const ProgramModel& model,
                                const std::set<std::string>& reach) {
    CompressedSource out;
    out.retained_functions = reach;

    struct Extent {
        int first;
        int last;
        std::string name;
    };
    std::vector<Extent> removed;
    for (const auto& fn : model.functions) {
        if (fn.proto_only) continue;
        if (reach.count(fn.name)) continue;
        removed.push_back({fn.line, fn.end_line, fn.name});
        out.elided_functions.push_back(fn.name);
    }

    const auto& lines = src.lines();
    int compressed_line = 0;
    for (int orig = 1; orig <= static_cast<int>(lines.size()); ++orig) {
        const Extent* hit = nullptr;
        for (const auto& e : removed)
            if (orig == e.first) hit = &e;
        if (hit) {
            out.text += "/* elided: " + hit->name + " */\n";
            ++compressed_line;
            orig = hit->last;  // loop increment moves past the extent
            continue;
        }
        bool inside = false;
        for (const auto& e : removed) inside |= (orig > e.first && orig <= e.last);
        if (inside) continue;
        out.text += lines[static_cast<std::size_t>(orig - 1)];
        out.text += "\n";
        ++compressed_line;
        out.to_original[compressed_line] = orig;
        out.to_compressed[orig] = compressed_line;
    }
    if (!src.text().empty() && src.text().back() != '\n' && !out.text.empty() &&
        out.text.back() == '\n')
        out.text.pop_back();
    return out;
}

inline CompressedSource extract(const SourceText& src, const ProgramModel& model) {
    return extract(src, model, reachable_functions(model));
}

}  // namespace irqav
