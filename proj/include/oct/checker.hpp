#pragma once

// Independent verification of analysis results.
//
//   check_summaries — re-walks every function under every calling context
//   recorded in FS, threading may-alias and input-dependence environments,
//   and verifies each rule premise against the supplied FS/PD: tainted
//   arguments must appear in the callee's caller summary, escaping taint
//   must be covered by ret/&arg summary entries, every fresh/consistent
//   binding's reconstructed call chains must be declared in its policy, and
//   every expression must pass the use check.
//
//   check_regions — walks all execution paths from main (call chains are
//   finite; no recursion), tracking the stack of open atomic regions. Every
//   policy-relevant instruction must execute inside the region its policy
//   map entry names, and when a region closes every obligation that was
//   reachable on the walked path must have been discharged. Branch arms are
//   checked independently and their pending-obligation sets intersected at
//   the join: an obligation is only owed on paths that can reach it.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oct/ast.hpp"
#include "oct/policy.hpp"
#include "oct/taint.hpp"

namespace oct {

struct CheckDiag {
    std::string rule;
    Site site;
    std::string message;
};

struct CheckResult {
    bool ok = true;
    std::vector<CheckDiag> diags;

    void fail(std::string rule, Site site, std::string msg) {
        ok = false;
        diags.push_back({std::move(rule), std::move(site), std::move(msg)});
    }
};

namespace detail {

inline DepEntry summary_shape(const DepEntry& d) {
    if (d.from.kind == FromTp::Kind::ArgBy) return d;
    return {d.input, d.from.summary_form()};
}

inline DepSet summary_shape(const DepSet& s) {
    DepSet out;
    for (const auto& d : s) out.insert(summary_shape(d));
    return out;
}

inline bool subset(const DepSet& a, const DepSet& b) {
    for (const auto& d : a)
        if (!b.count(d)) return false;
    return true;
}

class SummaryChecker {
  public:
    SummaryChecker(const Program& p, const FuncSummaries& fs, const PolicyDecls& pd)
        : prog_(p), fs_(fs), pd_(pd) {}

    CheckResult run() {
        for (const auto& f : prog_.funcs) {
            check_function(f, std::nullopt);
            auto it = fs_.by_fn.find(f.name);
            if (it == fs_.by_fn.end()) {
                res_.fail("Summary", {f.name, -1}, "no summary for function");
                continue;
            }
            for (const auto& [key, _] : it->second.callers) check_function(f, key);
        }
        return std::move(res_);
    }

  private:
    struct Env {
        std::map<std::string, DepSet> vars;
        std::map<std::string, std::string> alias;
        std::vector<DepSet> control;
    };

    const FuncSummary* summary(const std::string& fn) const {
        auto it = fs_.by_fn.find(fn);
        return it == fs_.by_fn.end() ? nullptr : &it->second;
    }

    DepSet ctl(const Env& env) const {
        DepSet out;
        for (const auto& g : env.control) out.insert(g.begin(), g.end());
        return out;
    }
    DepSet with_ctl(DepSet base, const Env& env) const {
        DepSet c = ctl(env);
        base.insert(c.begin(), c.end());
        return base;
    }

    void check_function(const FuncDecl& f, std::optional<Site> key) {
        Env env;
        if (f.param) {
            if (key) {
                const FuncSummary* sum = summary(f.name);
                DepSet seed;
                if (sum) {
                    auto it = sum->callers.find(*key);
                    if (it != sum->callers.end())
                        for (const auto& e : it->second)
                            if (e.sink == Sink::Arg)
                                seed.insert(DepEntry{e.dep.input, FromTp::arg_by(e.dep.from)});
                }
                env.vars[f.param->name] = std::move(seed);
            }
            if (f.param->by_ref) env.alias[f.param->name] = "@arg";
        }
        // Call paths feeding chain reconstruction at annotation sites.
        paths_.clear();
        if (key) {
            for (auto& pre : call_paths(prog_, key->fn)) {
                pre.push_back(*key);
                paths_.push_back(std::move(pre));
            }
        } else {
            paths_ = call_paths(prog_, f.name);
        }
        fn_ = f.name;
        ctx_ = key;
        block(f.body, env);
    }

    void use_check(const Expr& e, Site site, const char* rule) {
        if (!check_use(pd_, e, site))
            res_.fail(rule, site, "use of a fresh variable not recorded in its policy");
    }

    void block(const Block& b, Env& env) {
        for (const auto& cmd : b.stmts) command(cmd, env);
    }

    void command(const Command& cmd, Env& env) {
        Site site{fn_, cmd.label};
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, InstrSkip>) {
                } else if constexpr (std::is_same_v<T, InstrAssign>) {
                    use_check(n.rhs, site, "Assign");
                    env.vars[n.var] = with_ctl(deps_of(n.rhs, env.vars), env);
                } else if constexpr (std::is_same_v<T, InstrArrAssign>) {
                    use_check(n.index, site, "Assign");
                    use_check(n.rhs, site, "Assign");
                    DepSet d = with_ctl(deps_of(n.rhs, env.vars), env);
                    DepSet di = deps_of(n.index, env.vars);
                    d.insert(di.begin(), di.end());
                    env.vars[n.arr].insert(d.begin(), d.end());
                } else if constexpr (std::is_same_v<T, InstrDerefAssign>) {
                    use_check(n.rhs, site, "Assign-Ref");
                    DepSet d = with_ctl(deps_of(n.rhs, env.vars), env);
                    auto t = env.alias.find(n.refvar);
                    if (t != env.alias.end() && t->second == "@arg") {
                        // writes through the ref parameter must be summarized
                        const FuncSummary* sum = summary(fn_);
                        DepSet allowed;
                        if (sum) {
                            allowed = sum->sink_deps(Sink::RefArg, ctx_);
                        }
                        if (!subset(summary_shape(d), allowed))
                            res_.fail("Assign-Ref", site,
                                      "taint written through &arg is missing from the summary");
                    } else if (t != env.alias.end()) {
                        env.vars[t->second] = d;
                    }
                } else if constexpr (std::is_same_v<T, CmdLet>) {
                    let(cmd, n, env);
                } else if constexpr (std::is_same_v<T, CmdIf>) {
                    use_check(n.cond, site, "If");
                    DepSet guard = with_ctl(deps_of(n.cond, env.vars), env);
                    Env te = env, ee = env;
                    te.control.push_back(guard);
                    ee.control.push_back(guard);
                    block(n.then_b, te);
                    block(n.else_b, ee);
                    env.vars = te.vars;
                    for (const auto& [k, v] : ee.vars) env.vars[k].insert(v.begin(), v.end());
                } else if constexpr (std::is_same_v<T, CmdAtomic>) {
                    block(n.body, env);
                } else {  // CmdRet
                    use_check(n.value, site, "Ret");
                    DepSet d = with_ctl(deps_of(n.value, env.vars), env);
                    const FuncSummary* sum = summary(fn_);
                    DepSet allowed;
                    if (sum) allowed = sum->sink_deps(Sink::Ret, ctx_);
                    if (!subset(summary_shape(d), allowed))
                        res_.fail("Ret", site, "returned taint is missing from the summary");
                }
            },
            cmd.node);
    }

    void let(const Command& cmd, const CmdLet& n, Env& env) {
        Site site{fn_, cmd.label};
        std::visit(
            [&](const auto& r) {
                using R = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<R, LetPlain>) {
                    use_check(r.rhs, site, "Let");
                    if (auto* lit = std::get_if<ExprLit>(&r.rhs.node))
                        if (lit->value.is_ref()) env.alias[n.var] = lit->value.name;
                    env.vars[n.var] = with_ctl(deps_of(r.rhs, env.vars), env);
                } else if constexpr (std::is_same_v<R, LetInput>) {
                    env.vars[n.var] =
                        with_ctl({DepEntry{site, FromTp::local(cmd.label)}}, env);
                } else if constexpr (std::is_same_v<R, LetArray>) {
                    DepSet d;
                    for (const auto& e : r.elems) {
                        use_check(e, site, "Let");
                        DepSet de = deps_of(e, env.vars);
                        d.insert(de.begin(), de.end());
                    }
                    env.vars[n.var] = with_ctl(std::move(d), env);
                } else if constexpr (std::is_same_v<R, LetCall>) {
                    call(cmd, n, r, env);
                } else if constexpr (std::is_same_v<R, LetFresh>) {
                    use_check(r.rhs, site, "Let-fresh");
                    DepSet d = with_ctl(deps_of(r.rhs, env.vars), env);
                    check_annotation(site, fresh_policy_id(site), d, "Let-fresh");
                    env.vars[n.var] = d;
                } else {  // LetConsistent
                    use_check(r.rhs, site, "Let-consistent");
                    DepSet d = with_ctl(deps_of(r.rhs, env.vars), env);
                    check_annotation(site, consistent_policy_id(r.set_id), d, "Let-consistent");
                    env.vars[n.var] = d;
                }
            },
            n.rhs);
    }

    // callChain(FS, ins) ⊆ PD(pID).inputs, for every calling context path.
    void check_annotation(Site site, const std::string& pid, const DepSet& ins, const char* rule) {
        auto it = pd_.by_id.find(pid);
        if (it == pd_.by_id.end()) {
            res_.fail(rule, site, "no policy declared for " + pid);
            return;
        }
        const auto& declared = it->second.inputs();
        ChainWalker walker(prog_, fs_);
        for (const auto& path : paths_) {
            for (const auto& d : ins) {
                std::set<Provenance> chains;
                try {
                    chains = walker.resolve(path, fn_, d);
                } catch (const std::logic_error& e) {
                    res_.fail(rule, site, std::string("chain reconstruction failed: ") + e.what());
                    continue;
                }
                for (const auto& c : chains) {
                    if (!declared.count(c))
                        res_.fail(rule, site,
                                  "input provenance " + to_string(c) + " missing from " + pid);
                }
            }
        }
    }

    void call(const Command& cmd, const CmdLet& n, const LetCall& r, Env& env) {
        Site site{fn_, cmd.label};
        const char* rule = "Call-nr";
        DepSet ins;
        std::optional<std::string> pbr_target;
        if (r.arg) {
            if (r.arg->kind == CallArg::Kind::Var) {
                use_check(evar(r.arg->var), site, rule);
                ins = deps_of(evar(r.arg->var), env.vars);
            } else if (r.arg->lit.is_ref()) {
                rule = "Call-r";
                pbr_target = r.arg->lit.name;
                auto it = env.vars.find(r.arg->lit.name);
                if (it != env.vars.end()) ins = it->second;
            }
        }
        ins = with_ctl(std::move(ins), env);

        const FuncSummary* callee = summary(r.callee);
        if (!callee) {
            res_.fail(rule, site, "no summary for callee " + r.callee);
            return;
        }
        if (!ins.empty()) {
            DepSet allowed;
            auto ck = callee->callers.find(site);
            if (ck != callee->callers.end())
                for (const auto& e : ck->second)
                    if (e.sink == Sink::Arg) allowed.insert(e.dep);
            if (!subset(ins, allowed))
                res_.fail(rule, site,
                          "tainted argument not covered by a caller summary of " + r.callee);
        }

        DepSet x_deps;
        for (const auto& d : callee->sink_deps(Sink::Ret, std::nullopt))
            x_deps.insert(DepEntry{d.input, FromTp::ret_by(r.callee, cmd.label)});
        auto ck = callee->callers.find(site);
        if (ck != callee->callers.end())
            for (const auto& e : ck->second)
                if (e.sink == Sink::Ret && e.dep.from.kind == FromTp::Kind::ArgBy)
                    x_deps.insert(DepEntry{e.dep.input, *e.dep.from.inner});
        env.vars[n.var] = with_ctl(std::move(x_deps), env);

        if (pbr_target) {
            DepSet y_deps;
            for (const auto& d : callee->sink_deps(Sink::RefArg, std::nullopt))
                y_deps.insert(DepEntry{d.input, FromTp::pbr(r.callee, cmd.label)});
            if (ck != callee->callers.end())
                for (const auto& e : ck->second)
                    if (e.sink == Sink::RefArg && e.dep.from.kind == FromTp::Kind::ArgBy)
                        y_deps.insert(DepEntry{e.dep.input, *e.dep.from.inner});
            if (!y_deps.empty())
                env.vars[*pbr_target].insert(y_deps.begin(), y_deps.end());
        }
    }

    const Program& prog_;
    const FuncSummaries& fs_;
    const PolicyDecls& pd_;
    CheckResult res_;
    std::string fn_;
    std::optional<Site> ctx_;
    std::vector<std::vector<Site>> paths_;
};

// ---------------------------------------------------------------------------
// Atomic region checking

// Policy obligations, uniformly represented as full chains from main:
// input items are their provenances; fresh decl and use items are every
// main→f call path extended with the site.
inline std::map<std::string, std::set<Provenance>> policy_items(const Program& p,
                                                                const PolicyDecls& pd) {
    std::map<std::string, std::set<Provenance>> items;
    for (const auto& [pid, pol] : pd.by_id) {
        auto& set = items[pid];
        for (const auto& c : pol.inputs()) set.insert(c);
        if (pol.is_fresh()) {
            const auto& fp = std::get<FreshPolicy>(pol.v);
            for (const auto& path : call_paths(p, fp.decl.fn)) {
                Provenance d = path;
                d.push_back(fp.decl);
                set.insert(d);
                for (const auto& u : fp.uses) {
                    Provenance uu = path;
                    uu.push_back(u);
                    set.insert(uu);
                }
            }
        }
    }
    return items;
}

class RegionChecker {
  public:
    RegionChecker(const Program& p, const PolicyDecls& pd, const PolicyMap& pm)
        : prog_(p), pd_(pd), pm_(pm), items_(policy_items(p, pd)) {
        for (const auto& [aid, pids] : pm)
            for (const auto& pid : pids) region_of_[pid] = aid;
    }

    CheckResult run() {
        for (const auto& [aid, pids] : pm_)
            for (const auto& pid : pids)
                if (!pd_.by_id.count(pid))
                    res_.fail("PolicyMap", {"", -1}, "unknown policy " + pid);
        // Non-vacuous policies must be enforced by some region.
        for (const auto& [pid, pol] : pd_.by_id) {
            if (!items_.at(pid).empty() && !region_of_.count(pid))
                res_.fail("PolicyMap", {"", -1},
                          "policy " + pid + " with obligations is not mapped to any region");
        }
        std::vector<OpenRegion> stack;
        Provenance path;
        walk_fn("main", path, stack);
        return std::move(res_);
    }

  private:
    struct OpenRegion {
        int aid = 0;
        Site at;
        std::map<std::string, std::set<Provenance>> pending;
    };

    void walk_fn(const std::string& fn, Provenance& path, std::vector<OpenRegion>& stack) {
        const FuncDecl* f = prog_.find(fn);
        if (!f) return;
        walk_block(f->body, fn, path, stack);
    }

    void walk_block(const Block& b, const std::string& fn, Provenance& path,
                    std::vector<OpenRegion>& stack) {
        for (const auto& cmd : b.stmts) walk_cmd(cmd, fn, path, stack);
    }

    void match_site(Site site, const Provenance& path, std::vector<OpenRegion>& stack) {
        Provenance full = path;
        full.push_back(site);
        for (auto& [pid, chains] : items_) {
            if (!chains.count(full)) continue;
            auto rid = region_of_.find(pid);
            if (rid == region_of_.end()) continue;  // already reported above
            bool open = false;
            for (auto& frame : stack) {
                if (frame.aid == rid->second) {
                    open = true;
                    frame.pending[pid].erase(full);
                }
            }
            if (!open)
                res_.fail("Instr-S", site,
                          "instruction " + to_string(full) + " of " + pid +
                              " executes outside region " + std::to_string(rid->second));
        }
    }

    void walk_cmd(const Command& cmd, const std::string& fn, Provenance& path,
                  std::vector<OpenRegion>& stack) {
        Site site{fn, cmd.label};
        if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
            OpenRegion frame;
            frame.aid = at->aid;
            frame.at = site;
            auto pm_it = pm_.find(at->aid);
            if (pm_it != pm_.end()) {
                for (const auto& pid : pm_it->second) {
                    std::set<Provenance> reachable;
                    for (const auto& c : items_.at(pid)) {
                        if (c.size() > path.size() &&
                            std::equal(path.begin(), path.end(), c.begin()))
                            reachable.insert(c);
                    }
                    frame.pending[pid] = std::move(reachable);
                }
            }
            stack.push_back(std::move(frame));
            walk_block(at->body, fn, path, stack);
            OpenRegion done = std::move(stack.back());
            stack.pop_back();
            for (const auto& [pid, chains] : done.pending) {
                for (const auto& c : chains)
                    res_.fail("Atomic", done.at,
                              "region " + std::to_string(done.aid) + " ends with obligation " +
                                  to_string(c) + " of " + pid + " unfulfilled");
            }
            return;
        }
        match_site(site, path, stack);
        if (auto* let = std::get_if<CmdLet>(&cmd.node)) {
            if (auto* call = std::get_if<LetCall>(&let->rhs)) {
                path.push_back(site);
                walk_fn(call->callee, path, stack);
                path.pop_back();
            }
            return;
        }
        if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
            // Walk both arms on copies; an obligation survives only if it is
            // still pending on every path through the branch.
            std::vector<OpenRegion> then_stack = stack;
            std::vector<OpenRegion> else_stack = stack;
            walk_block(iff->then_b, fn, path, then_stack);
            walk_block(iff->else_b, fn, path, else_stack);
            for (size_t i = 0; i < stack.size(); ++i) {
                for (auto& [pid, chains] : stack[i].pending) {
                    std::set<Provenance> merged;
                    for (const auto& c : chains) {
                        bool in_then = then_stack[i].pending[pid].count(c) > 0;
                        bool in_else = else_stack[i].pending[pid].count(c) > 0;
                        if (in_then && in_else) merged.insert(c);
                    }
                    chains = std::move(merged);
                }
            }
        }
    }

    const Program& prog_;
    const PolicyDecls& pd_;
    const PolicyMap& pm_;
    std::map<std::string, std::set<Provenance>> items_;
    std::map<std::string, int> region_of_;
    CheckResult res_;
};

}  // namespace detail

inline CheckResult check_summaries(const Program& p, const FuncSummaries& fs,
                                   const PolicyDecls& pd) {
    detail::SummaryChecker c(p, fs, pd);
    return c.run();
}

inline CheckResult check_regions(const Program& transformed, const PolicyDecls& pd,
                                 const PolicyMap& pm) {
    detail::RegionChecker c(transformed, pd, pm);
    return c.run();
}

// Checker-only mode: recover a policy map from a transformed program with
// embedded region ids by assigning each non-vacuous policy to the innermost
// region that verifiably encloses all of its obligations.
inline PolicyMap derive_policy_map(const Program& transformed, const PolicyDecls& pd,
                                   CheckResult& out) {
    struct RegionNode {
        int aid;
        int depth;
    };
    std::vector<RegionNode> regions;
    for (const auto& f : transformed.funcs) {
        auto scan = [&](auto&& self, const Block& b, int depth) -> void {
            for (const auto& cmd : b.stmts) {
                if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
                    regions.push_back({at->aid, depth});
                    self(self, at->body, depth + 1);
                } else if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
                    self(self, iff->then_b, depth);
                    self(self, iff->else_b, depth);
                }
            }
        };
        scan(scan, f.body, 0);
    }
    // Prefer deeper (inner) regions; ties go to the lower region id.
    std::stable_sort(regions.begin(), regions.end(), [](const RegionNode& a, const RegionNode& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.aid < b.aid;
    });
    auto items = detail::policy_items(transformed, pd);
    PolicyMap pm;
    for (const auto& [pid, chains] : items) {
        if (chains.empty()) continue;
        PolicyDecls single;
        single.by_id[pid] = pd.by_id.at(pid);
        bool assigned = false;
        for (const auto& r : regions) {
            PolicyMap trial;
            trial[r.aid] = {pid};
            CheckResult res = check_regions(transformed, single, trial);
            if (res.ok) {
                pm[r.aid].push_back(pid);
                assigned = true;
                break;
            }
        }
        if (!assigned)
            out.fail("PolicyMap", {"", -1}, "no region encloses all obligations of " + pid);
    }
    return pm;
}

}  // namespace oct
