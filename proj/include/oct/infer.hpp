#pragma once

// Atomic region inference.
//
// For each policy: collect its obligations as full chains from main, find
// the deepest call-tree context whose subtree covers them all, lift every
// item to the basic block of the chain element inside that function, take
// the closest common dominator / post-dominator of the lifted blocks, and
// truncate to the latest start and earliest end that still cover all items.
// The region is spliced around the resulting statement range; nested and
// partially overlapping inserted regions stay as inserted (the runtime
// flattens nesting).

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oct/ast.hpp"
#include "oct/cfg.hpp"
#include "oct/checker.hpp"
#include "oct/policy.hpp"
#include "oct/taint.hpp"

namespace oct {

struct CandidateCtx {
    std::string fn;
    std::vector<Site> path;  // callsites main → fn
};

// Deepest function (call-tree context) whose subtree executes every item.
// Preference order on ties is discovery order in a DFS over callsites.
inline std::optional<CandidateCtx> find_candidate(const Program& p,
                                                  const std::set<Provenance>& items) {
    if (items.empty()) return std::nullopt;
    auto covers = [&](const std::vector<Site>& path) {
        for (const auto& c : items) {
            if (c.size() <= path.size()) return false;
            if (!std::equal(path.begin(), path.end(), c.begin())) return false;
        }
        return true;
    };
    std::vector<Site> path;
    auto dfs = [&](auto&& self, const std::string& fn) -> std::optional<CandidateCtx> {
        if (!covers(path)) return std::nullopt;
        const FuncDecl* f = p.find(fn);
        if (f) {
            std::optional<CandidateCtx> deeper;
            visit_commands(f->body, [&](const Command& cmd) {
                if (deeper) return;
                if (auto* let = std::get_if<CmdLet>(&cmd.node))
                    if (auto* call = std::get_if<LetCall>(&let->rhs)) {
                        path.push_back({fn, cmd.label});
                        deeper = self(self, call->callee);
                        path.pop_back();
                    }
            });
            if (deeper) return deeper;
        }
        return CandidateCtx{fn, path};
    };
    return dfs(dfs, "main");
}

// blocks[item] ← basic block of the chain element inside the goal function.
inline std::map<Provenance, int> lift_blocks(const Cfg& goal_cfg,
                                             const std::set<Provenance>& items,
                                             const CandidateCtx& ctx) {
    std::map<Provenance, int> blocks;
    for (const auto& c : items) {
        const Site& s = c.at(ctx.path.size());
        if (s.fn != ctx.fn) throw std::logic_error("lift: chain element not in goal function");
        blocks[c] = goal_cfg.block_of.at(s.label);
    }
    return blocks;
}

// Latest dominating / earliest post-dominating labels covering the items.
// If the start block holds no item, the region begins at the block's last
// label (the branch leading to the items); dually for the end block.
inline std::pair<Label, Label> truncate_region(const Cfg& cfg, int start_dom, int end_dom,
                                               const std::set<Label>& lifted) {
    const auto& sb = cfg.blocks[start_dom].labels;
    const auto& eb = cfg.blocks[end_dom].labels;
    Label start = -1, end = -1;
    for (Label l : sb)
        if (lifted.count(l) && (start == -1 || l < start)) start = l;
    if (start == -1 && !sb.empty()) start = sb.back();
    for (Label l : eb)
        if (lifted.count(l) && l > end) end = l;
    if (end == -1 && !eb.empty()) end = eb.front();
    // A dominator block may carry no labels at all (an empty join). The
    // covering statement of the outermost item then bounds the region.
    if (start == -1)
        for (Label l : lifted)
            if (start == -1 || l < start) start = l;
    if (end == -1)
        for (Label l : lifted)
            if (l > end) end = l;
    if (start == -1 || end == -1) throw std::logic_error("truncate: no items to cover");
    return {start, end};
}

namespace detail {

// Path of (block, statement index) containers leading to the statement that
// carries `label`; used to locate splice points in the AST.
inline bool stmt_path(Block& b, Label label, std::vector<std::pair<Block*, size_t>>& out) {
    for (size_t i = 0; i < b.stmts.size(); ++i) {
        Command& cmd = b.stmts[i];
        bool here = cmd.label == label;
        out.emplace_back(&b, i);
        if (here) return true;
        if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
            if (stmt_path(iff->then_b, label, out)) return true;
            if (stmt_path(iff->else_b, label, out)) return true;
        } else if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
            if (stmt_path(at->body, label, out)) return true;
        }
        out.pop_back();
    }
    return false;
}

inline void collect_writes(const Program& p, const Block& b, size_t from, size_t to,
                           const std::map<std::string, std::string>& alias,
                           std::set<std::string>& omega);

inline void collect_writes_cmd(const Program& p, const Command& cmd,
                               const std::map<std::string, std::string>& alias,
                               std::set<std::string>& omega) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, InstrAssign>) {
                omega.insert(n.var);
            } else if constexpr (std::is_same_v<T, InstrArrAssign>) {
                omega.insert(n.arr);
            } else if constexpr (std::is_same_v<T, InstrDerefAssign>) {
                auto it = alias.find(n.refvar);
                if (it != alias.end() && it->second == "@arg") omega.insert("*" + n.refvar);
                else if (it != alias.end()) omega.insert(it->second);
                else omega.insert("*" + n.refvar);
            } else if constexpr (std::is_same_v<T, CmdLet>) {
                omega.insert(n.var);
                if (auto* call = std::get_if<LetCall>(&n.rhs)) {
                    if (call->arg && call->arg->kind == CallArg::Kind::Lit &&
                        call->arg->lit.is_ref())
                        omega.insert(call->arg->lit.name);
                }
            } else if constexpr (std::is_same_v<T, CmdIf>) {
                collect_writes(p, n.then_b, 0, n.then_b.stmts.size(), alias, omega);
                collect_writes(p, n.else_b, 0, n.else_b.stmts.size(), alias, omega);
            } else if constexpr (std::is_same_v<T, CmdAtomic>) {
                collect_writes(p, n.body, 0, n.body.stmts.size(), alias, omega);
            }
        },
        cmd.node);
}

inline void collect_writes(const Program& p, const Block& b, size_t from, size_t to,
                           const std::map<std::string, std::string>& alias,
                           std::set<std::string>& omega) {
    for (size_t i = from; i < to && i < b.stmts.size(); ++i)
        collect_writes_cmd(p, b.stmts[i], alias, omega);
}

// refvar → target alias map for one function ("@arg" for the ref param).
inline std::map<std::string, std::string> alias_map(const FuncDecl& f) {
    std::map<std::string, std::string> alias;
    if (f.param && f.param->by_ref) alias[f.param->name] = "@arg";
    visit_commands(f.body, [&](const Command& cmd) {
        if (auto* let = std::get_if<CmdLet>(&cmd.node))
            if (auto* plain = std::get_if<LetPlain>(&let->rhs))
                if (auto* lit = std::get_if<ExprLit>(&plain->rhs.node))
                    if (lit->value.is_ref()) alias[let->var] = lit->value.name;
    });
    return alias;
}

}  // namespace detail

struct RegionInfo {
    int aid = 0;
    std::string policy;
    std::string fn;
    Label start = -1;
    Label end = -1;
    std::vector<std::string> omega;
};

struct InferResult {
    Program transformed;
    PolicyMap pm;
    std::vector<RegionInfo> regions;
    std::vector<std::string> warnings;
};

inline std::set<std::string> compute_checkpoint_set(const Program& p, const FuncDecl& f,
                                                    const Block& span_block, size_t from,
                                                    size_t to) {
    std::set<std::string> omega;
    detail::collect_writes(p, span_block, from, to, detail::alias_map(f), omega);
    return omega;
}

inline InferResult infer_atomic(const Program& p, const TaintAnalysis& ta,
                                const PolicyDecls& pd) {
    InferResult out;
    out.transformed = clone(p);
    Program& prog = out.transformed;

    int next_aid = 0;
    visit_commands(prog, [&](const FuncDecl&, const Command& cmd) {
        if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) next_aid = std::max(next_aid, at->aid);
    });
    next_aid++;

    auto items_by_policy = detail::policy_items(prog, pd);
    for (const auto& [pid, items] : items_by_policy) {
        if (items.empty()) {
            out.warnings.push_back("policy " + pid + " has no obligations; skipped");
            continue;
        }
        auto ctx = find_candidate(prog, items);
        if (!ctx) {
            out.warnings.push_back("no candidate function covers " + pid + "; skipped");
            continue;
        }
        FuncDecl& goal = *prog.find(ctx->fn);
        Cfg cfg = build_cfg(goal);
        auto blocks = lift_blocks(cfg, items, *ctx);
        std::vector<int> ids;
        std::set<Label> lifted;
        for (const auto& [chain, blk] : blocks) {
            ids.push_back(blk);
            lifted.insert(chain.at(ctx->path.size()).label);
        }
        int start_dom = closest_common_dom(cfg, ids);
        int end_dom = closest_common_postdom(cfg, ids);
        auto [start_label, end_label] = truncate_region(cfg, start_dom, end_dom, lifted);

        // Locate the splice range: the deepest block containing both boundary
        // statements, and the statement indices to wrap.
        std::vector<std::pair<Block*, size_t>> sp, ep;
        if (!detail::stmt_path(goal.body, start_label, sp) ||
            !detail::stmt_path(goal.body, end_label, ep))
            throw std::logic_error("infer: boundary label not found");
        size_t depth = 0;
        while (depth < sp.size() && depth < ep.size() && sp[depth].first == ep[depth].first)
            depth++;
        if (depth == 0) throw std::logic_error("infer: boundaries in unrelated blocks");
        Block* host = sp[depth - 1].first;
        size_t i = std::min(sp[depth - 1].second, ep[depth - 1].second);
        size_t j = std::max(sp[depth - 1].second, ep[depth - 1].second);

        int aid = next_aid++;
        auto omega_set = compute_checkpoint_set(prog, goal, *host, i, j + 1);
        CmdAtomic region;
        region.aid = aid;
        region.omega.assign(omega_set.begin(), omega_set.end());
        region.body.stmts.insert(region.body.stmts.end(),
                                 std::make_move_iterator(host->stmts.begin() + (long)i),
                                 std::make_move_iterator(host->stmts.begin() + (long)j + 1));
        host->stmts.erase(host->stmts.begin() + (long)i, host->stmts.begin() + (long)j + 1);
        Command wrapped;
        wrapped.node = std::move(region);
        host->stmts.insert(host->stmts.begin() + (long)i, std::move(wrapped));
        label_program(prog);

        out.pm[aid].push_back(pid);
        RegionInfo info;
        info.aid = aid;
        info.policy = pid;
        info.fn = ctx->fn;
        info.start = start_label;
        info.end = end_label;
        info.omega.assign(omega_set.begin(), omega_set.end());
        out.regions.push_back(std::move(info));
    }
    return out;
}

// Remove every atomic wrapper (the JIT-only view of a program). Labels of
// the remaining commands are unchanged.
inline Program strip_atomics(const Program& p) {
    Program out = clone(p);
    auto strip_block = [](auto&& self, Block& b) -> void {
        std::vector<Command> flat;
        for (auto& cmd : b.stmts) {
            if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
                self(self, at->body);
                for (auto& inner : at->body.stmts) flat.push_back(std::move(inner));
            } else {
                if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
                    self(self, iff->then_b);
                    self(self, iff->else_b);
                }
                flat.push_back(std::move(cmd));
            }
        }
        b.stmts = std::move(flat);
    };
    for (auto& f : out.funcs) strip_block(strip_block, f.body);
    label_program(out);
    return out;
}

}  // namespace oct
