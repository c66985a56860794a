#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "irqav/ast.hpp"

namespace irqav {

// Control-flow graph over statement ids. Nodes are basic blocks; a block
// lists the leaf statements (assignments, calls, declarations, returns) and
// branch conditions (if/while/for headers) it executes, in order.
struct CfgEdge {
    int from = 0;
    int to = 0;
    bool back_edge = false;
};

struct CfgBlock {
    int id = 0;
    std::vector<int> stmt_ids;  // leaf statements and cond-carrying headers
};

struct Cfg {
    std::vector<CfgBlock> blocks;
    std::vector<CfgEdge> edges;
    int entry = 0;
    std::vector<int> exit_blocks;  // fall-out block plus every return block

    std::vector<int> successors(int b) const {
        std::vector<int> out;
        for (const auto& e : edges)
            if (e.from == b) out.push_back(e.to);
        return out;
    }
    std::vector<int> predecessors(int b) const {
        std::vector<int> out;
        for (const auto& e : edges)
            if (e.to == b) out.push_back(e.from);
        return out;
    }
};

namespace detail {

class CfgBuilder {
public:
    Cfg build(const std::vector<Stmt>& body) {
        cfg_ = Cfg{};
        int entry = new_block();
        cfg_.entry = entry;
        int last = emit_seq(body, entry);
        if (last >= 0) cfg_.exit_blocks.push_back(last);
        for (int rb : return_blocks_)
            if (std::find(cfg_.exit_blocks.begin(), cfg_.exit_blocks.end(), rb) ==
                cfg_.exit_blocks.end())
                cfg_.exit_blocks.push_back(rb);
        if (cfg_.exit_blocks.empty()) cfg_.exit_blocks.push_back(entry);
        mark_back_edges();
        return cfg_;
    }

private:
    int new_block() {
        int id = static_cast<int>(cfg_.blocks.size());
        cfg_.blocks.push_back(CfgBlock{id, {}});
        return id;
    }

    void add_edge(int from, int to) { cfg_.edges.push_back({from, to, false}); }

    // Emits a statement sequence starting in block `cur`; returns the block
    // control falls out of, or -1 if the sequence always returns.
    int emit_seq(const std::vector<Stmt>& stmts, int cur) {
        for (const auto& s : stmts) {
            if (cur < 0) break;  // code after return; subset keeps this simple
            cur = emit_stmt(s, cur);
        }
        return cur;
    }

    int emit_stmt(const Stmt& s, int cur) {
        switch (s.kind) {
            case StmtKind::Block:
                return emit_seq(s.body, cur);
            case StmtKind::If: {
                cfg_.blocks[static_cast<std::size_t>(cur)].stmt_ids.push_back(s.id);
                int then_b = new_block();
                add_edge(cur, then_b);
                int then_end = emit_seq(s.body, then_b);
                int else_b = -1, else_end = -1;
                if (!s.else_body.empty()) {
                    else_b = new_block();
                    add_edge(cur, else_b);
                    else_end = emit_seq(s.else_body, else_b);
                }
                int join = new_block();
                if (else_b < 0) add_edge(cur, join);  // fallthrough edge
                if (then_end >= 0) add_edge(then_end, join);
                if (else_end >= 0) add_edge(else_end, join);
                return join;
            }
            case StmtKind::While: {
                int header = new_block();
                add_edge(cur, header);
                cfg_.blocks[static_cast<std::size_t>(header)].stmt_ids.push_back(s.id);
                int body_b = new_block();
                add_edge(header, body_b);
                int body_end = emit_seq(s.body, body_b);
                if (body_end >= 0) add_edge(body_end, header);
                int after = new_block();
                add_edge(header, after);
                return after;
            }
            case StmtKind::For: {
                int pre = cur;
                for (const auto& is : s.init) pre = emit_stmt(is, pre);
                int header = new_block();
                add_edge(pre, header);
                cfg_.blocks[static_cast<std::size_t>(header)].stmt_ids.push_back(s.id);
                int body_b = new_block();
                add_edge(header, body_b);
                int body_end = emit_seq(s.body, body_b);
                if (body_end >= 0) {
                    for (const auto& ss : s.step) body_end = emit_stmt(ss, body_end);
                    add_edge(body_end, header);
                }
                int after = new_block();
                add_edge(header, after);
                return after;
            }
            case StmtKind::Return:
                cfg_.blocks[static_cast<std::size_t>(cur)].stmt_ids.push_back(s.id);
                return_blocks_.push_back(cur);
                return -1;
            default:
                cfg_.blocks[static_cast<std::size_t>(cur)].stmt_ids.push_back(s.id);
                return cur;
        }
    }

    // A back edge targets a block that dominates its source (loop headers).
    void mark_back_edges() {
        auto dom = dominators(cfg_);
        for (auto& e : cfg_.edges) {
            if (dom[static_cast<std::size_t>(e.from)].count(e.to)) e.back_edge = true;
        }
    }

public:
    // Classic iterative dominator computation; dom[b] = set of blocks
    // dominating b (including b itself).
    static std::vector<std::set<int>> dominators(const Cfg& cfg) {
        std::size_t n = cfg.blocks.size();
        std::set<int> all;
        for (std::size_t b = 0; b < n; ++b) all.insert(static_cast<int>(b));
        std::vector<std::set<int>> dom(n, all);
        dom[static_cast<std::size_t>(cfg.entry)] = {cfg.entry};
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t b = 0; b < n; ++b) {
                int bi = static_cast<int>(b);
                if (bi == cfg.entry) continue;
                std::set<int> meet;
                bool first = true;
                for (int p : cfg.predecessors(bi)) {
                    if (first) {
                        meet = dom[static_cast<std::size_t>(p)];
                        first = false;
                    } else {
                        std::set<int> tmp;
                        std::set_intersection(meet.begin(), meet.end(),
                                              dom[static_cast<std::size_t>(p)].begin(),
                                              dom[static_cast<std::size_t>(p)].end(),
                                              std::inserter(tmp, tmp.begin()));
                        meet = std::move(tmp);
                    }
                }
                if (first) meet.clear();  // unreachable block
                meet.insert(bi);
                if (meet != dom[b]) {
                    dom[b] = std::move(meet);
                    changed = true;
                }
            }
        }
        return dom;
    }

private:
    Cfg cfg_;
    std::vector<int> return_blocks_;
};

}  // namespace detail

inline Cfg build_cfg(const std::vector<Stmt>& body) { return detail::CfgBuilder().build(body); }

inline std::vector<std::set<int>> cfg_dominators(const Cfg& cfg) {
    return detail::CfgBuilder::dominators(cfg);
}

}  // namespace irqav
