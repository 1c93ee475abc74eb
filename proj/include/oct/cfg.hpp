#pragma once

// Per-function control-flow graphs with dominator / post-dominator support.
//
// Blocks hold command labels in execution order. `if` commands terminate
// their block (the branch evaluation belongs to the preceding block), arms
// get their own subgraphs, and a join block follows. Atomic regions are
// transparent: their label and body lie in the surrounding flow. A synthetic
// empty exit block post-dominates everything, which keeps post-dominators
// total in the presence of the single trailing `ret`.

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oct/ast.hpp"

namespace oct {

struct BasicBlock {
    int id = -1;
    std::string fn;
    std::vector<Label> labels;
    std::vector<int> succs;
    std::vector<int> preds;
};

struct Cfg {
    std::string fn;
    std::vector<BasicBlock> blocks;
    int entry = 0;
    int exit = 0;
    std::map<Label, int> block_of;

    // dom_sets[b] = every block dominating b (including b itself).
    std::vector<std::set<int>> dom_sets;
    std::vector<std::set<int>> postdom_sets;
    std::vector<int> idom;      // -1 for entry
    std::vector<int> ipostdom;  // -1 for exit

    bool dominates(int a, int b) const { return dom_sets[b].count(a) > 0; }
    bool postdominates(int a, int b) const { return postdom_sets[b].count(a) > 0; }
};

namespace detail {

class CfgBuilder {
  public:
    explicit CfgBuilder(const FuncDecl& f) : fn_(f.name) {}

    Cfg build(const FuncDecl& f) {
        cfg_.fn = fn_;
        int first = new_block();
        cfg_.entry = first;
        int last = walk_block(f.body, first);
        cfg_.exit = new_block();
        add_edge(last, cfg_.exit);
        for (const auto& b : cfg_.blocks)
            for (Label l : b.labels) cfg_.block_of[l] = b.id;
        compute_dominators();
        return std::move(cfg_);
    }

  private:
    int new_block() {
        BasicBlock b;
        b.id = (int)cfg_.blocks.size();
        b.fn = fn_;
        cfg_.blocks.push_back(std::move(b));
        return cfg_.blocks.back().id;
    }
    void add_edge(int from, int to) {
        cfg_.blocks[from].succs.push_back(to);
        cfg_.blocks[to].preds.push_back(from);
    }

    // Returns the block that control flow leaves the statement list from.
    int walk_block(const Block& b, int cur) {
        for (const auto& cmd : b.stmts) cur = walk_command(cmd, cur);
        return cur;
    }

    int walk_command(const Command& cmd, int cur) {
        if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
            cfg_.blocks[cur].labels.push_back(cmd.label);
            int then_entry = new_block();
            add_edge(cur, then_entry);
            int then_exit = walk_block(iff->then_b, then_entry);
            int else_entry = new_block();
            add_edge(cur, else_entry);
            int else_exit = walk_block(iff->else_b, else_entry);
            int join = new_block();
            add_edge(then_exit, join);
            add_edge(else_exit, join);
            return join;
        }
        if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
            cfg_.blocks[cur].labels.push_back(cmd.label);
            return walk_block(at->body, cur);
        }
        cfg_.blocks[cur].labels.push_back(cmd.label);
        return cur;
    }

    void compute_dominators() {
        size_t n = cfg_.blocks.size();
        auto run = [&](int root, auto preds_of) {
            std::vector<std::set<int>> dom(n);
            std::set<int> all;
            for (size_t i = 0; i < n; ++i) all.insert((int)i);
            for (size_t i = 0; i < n; ++i) dom[i] = all;
            dom[root] = {root};
            bool changed = true;
            while (changed) {
                changed = false;
                for (size_t i = 0; i < n; ++i) {
                    if ((int)i == root) continue;
                    std::set<int> meet = all;
                    const auto& ps = preds_of((int)i);
                    if (ps.empty()) meet.clear();
                    bool first = true;
                    for (int p : ps) {
                        if (first) {
                            meet = dom[p];
                            first = false;
                        } else {
                            std::set<int> inter;
                            for (int x : meet)
                                if (dom[p].count(x)) inter.insert(x);
                            meet = std::move(inter);
                        }
                    }
                    meet.insert((int)i);
                    if (meet != dom[i]) {
                        dom[i] = std::move(meet);
                        changed = true;
                    }
                }
            }
            return dom;
        };
        cfg_.dom_sets = run(cfg_.entry, [&](int i) -> const std::vector<int>& {
            return cfg_.blocks[i].preds;
        });
        cfg_.postdom_sets = run(cfg_.exit, [&](int i) -> const std::vector<int>& {
            return cfg_.blocks[i].succs;
        });
        auto immediate = [&](const std::vector<std::set<int>>& dom, int root) {
            std::vector<int> idom(n, -1);
            for (size_t i = 0; i < n; ++i) {
                if ((int)i == root) continue;
                // idom = the strict dominator dominated by all other strict dominators
                for (int d : dom[i]) {
                    if (d == (int)i) continue;
                    bool lowest = true;
                    for (int d2 : dom[i]) {
                        if (d2 == (int)i || d2 == d) continue;
                        if (!dom[d].count(d2)) {
                            lowest = false;
                            break;
                        }
                    }
                    if (lowest) {
                        idom[i] = d;
                        break;
                    }
                }
            }
            return idom;
        };
        cfg_.idom = immediate(cfg_.dom_sets, cfg_.entry);
        cfg_.ipostdom = immediate(cfg_.postdom_sets, cfg_.exit);
    }

    std::string fn_;
    Cfg cfg_;
};

}  // namespace detail

inline Cfg build_cfg(const FuncDecl& f) {
    detail::CfgBuilder b(f);
    return b.build(f);
}

// Lowest block dominating every block in `ids` (ids must be non-empty and
// belong to this cfg).
inline int closest_common_dom(const Cfg& cfg, const std::vector<int>& ids) {
    if (ids.empty()) throw std::logic_error("closest_common_dom: empty block set");
    std::set<int> common = cfg.dom_sets[ids[0]];
    for (size_t i = 1; i < ids.size(); ++i) {
        std::set<int> inter;
        for (int x : common)
            if (cfg.dom_sets[ids[i]].count(x)) inter.insert(x);
        common = std::move(inter);
    }
    for (int d : common) {
        bool lowest = true;
        for (int d2 : common)
            if (d2 != d && !cfg.dominates(d2, d)) {
                lowest = false;
                break;
            }
        if (lowest) return d;
    }
    throw std::logic_error("closest_common_dom: no common dominator");
}

inline int closest_common_postdom(const Cfg& cfg, const std::vector<int>& ids) {
    if (ids.empty()) throw std::logic_error("closest_common_postdom: empty block set");
    std::set<int> common = cfg.postdom_sets[ids[0]];
    for (size_t i = 1; i < ids.size(); ++i) {
        std::set<int> inter;
        for (int x : common)
            if (cfg.postdom_sets[ids[i]].count(x)) inter.insert(x);
        common = std::move(inter);
    }
    for (int d : common) {
        bool lowest = true;
        for (int d2 : common)
            if (d2 != d && !cfg.postdominates(d2, d)) {
                lowest = false;
                break;
            }
        if (lowest) return d;
    }
    throw std::logic_error("closest_common_postdom: no common post-dominator");
}

inline std::string to_dot(const Cfg& cfg) {
    std::ostringstream os;
    os << "digraph \"" << cfg.fn << "\" {\n";
    for (const auto& b : cfg.blocks) {
        os << "  b" << b.id << " [shape=box,label=\"B" << b.id;
        if (b.id == cfg.entry) os << " (entry)";
        if (b.id == cfg.exit) os << " (exit)";
        os << "\\n";
        for (Label l : b.labels) os << "#" << l << " ";
        os << "\"];\n";
    }
    for (const auto& b : cfg.blocks)
        for (int s : b.succs) os << "  b" << b.id << " -> b" << s << ";\n";
    os << "}\n";
    return os.str();
}

}  // namespace oct
