#pragma once

// Interprocedural, context-sensitive input-taint analysis.
//
// For every function we compute a summary: local entries describe taint that
// originates inside the function (or its callees) and escapes through `ret`
// or a by-reference parameter; caller entries, keyed by callsite, describe
// taint that was passed in from exactly that callsite and flows back out.
// Within a summary, taint that originated or arrived at label ℓ of the
// owning function is recorded `local(ℓ)`; `argBy(inner)` marks taint that
// entered through the formal argument, with `inner` the caller-side origin.
// The per-definition input-dependence map keeps the precise `retBy`/`pbr`
// links so chaining lookups through the summaries recovers full call chains.
//
// Control dependence is tracked conservatively: every definition in either
// arm of a branch whose condition is tainted inherits the condition's taint.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oct/ast.hpp"

namespace oct {

struct FromTp {
    enum class Kind { Local, RetBy, Pbr, ArgBy };
    Kind kind = Kind::Local;
    Label label = -1;                // Local / RetBy / Pbr
    std::string callee;              // RetBy / Pbr
    std::shared_ptr<FromTp> inner;   // ArgBy

    static FromTp local(Label l) { return {Kind::Local, l, {}, nullptr}; }
    static FromTp ret_by(std::string g, Label l) { return {Kind::RetBy, l, std::move(g), nullptr}; }
    static FromTp pbr(std::string g, Label l) { return {Kind::Pbr, l, std::move(g), nullptr}; }
    static FromTp arg_by(FromTp in) {
        return {Kind::ArgBy, -1, {}, std::make_shared<FromTp>(std::move(in))};
    }

    // Summary form: interprocedural arrivals compress to local(callsite).
    FromTp summary_form() const {
        if (kind == Kind::RetBy || kind == Kind::Pbr) return local(label);
        return *this;
    }
};

inline int cmp(const FromTp& a, const FromTp& b) {
    if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
    switch (a.kind) {
        case FromTp::Kind::Local:
            return a.label == b.label ? 0 : (a.label < b.label ? -1 : 1);
        case FromTp::Kind::RetBy:
        case FromTp::Kind::Pbr:
            if (a.label != b.label) return a.label < b.label ? -1 : 1;
            return a.callee.compare(b.callee);
        case FromTp::Kind::ArgBy:
            return cmp(*a.inner, *b.inner);
    }
    return 0;
}
inline bool operator<(const FromTp& a, const FromTp& b) { return cmp(a, b) < 0; }
inline bool operator==(const FromTp& a, const FromTp& b) { return cmp(a, b) == 0; }

inline std::string to_string(const FromTp& f) {
    switch (f.kind) {
        case FromTp::Kind::Local: return "local(" + std::to_string(f.label) + ")";
        case FromTp::Kind::RetBy:
            return "retBy(" + f.callee + "," + std::to_string(f.label) + ")";
        case FromTp::Kind::Pbr: return "pbr(" + f.callee + "," + std::to_string(f.label) + ")";
        case FromTp::Kind::ArgBy: return "argBy(" + to_string(*f.inner) + ")";
    }
    return "?";
}

struct DepEntry {
    Site input;   // the input instruction this taint descends from
    FromTp from;  // how it reached the current scope

    bool operator<(const DepEntry& o) const {
        if (input != o.input) return input < o.input;
        return from < o.from;
    }
    bool operator==(const DepEntry& o) const { return input == o.input && from == o.from; }
};

using DepSet = std::set<DepEntry>;

enum class Sink { Ret, RefArg, Arg };

inline std::string to_string(Sink s) {
    switch (s) {
        case Sink::Ret: return "ret";
        case Sink::RefArg: return "&arg";
        case Sink::Arg: return "arg";
    }
    return "?";
}

struct SummaryEntry {
    Sink sink = Sink::Ret;
    DepEntry dep;
    bool operator<(const SummaryEntry& o) const {
        if (sink != o.sink) return sink < o.sink;
        return dep < o.dep;
    }
    bool operator==(const SummaryEntry& o) const { return sink == o.sink && dep == o.dep; }
};

struct FuncSummary {
    std::set<SummaryEntry> locals;
    std::map<Site, std::set<SummaryEntry>> callers;

    DepSet sink_deps(Sink s, std::optional<Site> caller_key) const {
        DepSet out;
        for (const auto& e : locals)
            if (e.sink == s) out.insert(e.dep);
        if (caller_key) {
            auto it = callers.find(*caller_key);
            if (it != callers.end())
                for (const auto& e : it->second)
                    if (e.sink == s) out.insert(e.dep);
        }
        return out;
    }
};

struct FuncSummaries {
    std::map<std::string, FuncSummary> by_fn;
};

// Union of the dependence sets of everything `e` reads under `env`.
inline DepSet deps_of(const Expr& e, const std::map<std::string, DepSet>& env) {
    DepSet out;
    for (const auto& v : free_vars(e)) {
        auto it = env.find(v);
        if (it != env.end()) out.insert(it->second.begin(), it->second.end());
    }
    return out;
}

struct TaintAnalysis {
    FuncSummaries fs;
    // InputDepMap: definition site → everything it depends on (all contexts).
    std::map<Site, DepSet> def_deps;
    // fresh/consistent declaration site → dependence set of its bound expression.
    std::map<Site, DepSet> decl_deps;
};

namespace detail {

inline std::vector<std::string> topo_callees_first(const Program& p) {
    std::map<std::string, std::vector<std::string>> callees;
    for (const auto& f : p.funcs) {
        auto& out = callees[f.name];
        visit_commands(f.body, [&](const Command& c) {
            if (auto* let = std::get_if<CmdLet>(&c.node))
                if (auto* call = std::get_if<LetCall>(&let->rhs)) out.push_back(call->callee);
        });
    }
    std::vector<std::string> order;
    std::set<std::string> done;
    auto dfs = [&](auto&& self, const std::string& fn) -> void {
        if (done.count(fn)) return;
        done.insert(fn);
        for (const auto& g : callees[fn]) self(self, g);
        order.push_back(fn);
    };
    for (const auto& f : p.funcs) dfs(dfs, f.name);
    return order;
}

class SummaryBuilder {
  public:
    explicit SummaryBuilder(const Program& p) : prog_(p) {}

    TaintAnalysis run() {
        for (const auto& name : topo_callees_first(prog_)) {
            result_.fs.by_fn[name];  // ensure an entry exists for every function
            walk_function(name, std::nullopt, {});
        }
        return std::move(result_);
    }

  private:
    struct Env {
        std::map<std::string, DepSet> vars;
        std::map<std::string, std::string> alias;  // refvar → target; "@arg" = ref param
        std::vector<DepSet> control;
    };

    DepSet control_union(const Env& env) const {
        DepSet out;
        for (const auto& g : env.control) out.insert(g.begin(), g.end());
        return out;
    }

    DepSet with_control(DepSet base, const Env& env) const {
        DepSet ctl = control_union(env);
        base.insert(ctl.begin(), ctl.end());
        return base;
    }

    void record_def(const std::string& fn, Label l, const DepSet& deps) {
        auto& slot = result_.def_deps[{fn, l}];
        slot.insert(deps.begin(), deps.end());
    }

    void walk_function(const std::string& fn, std::optional<Site> caller_key, DepSet arg_seed) {
        const FuncDecl& f = prog_.fn(fn);
        Env env;
        if (f.param) {
            env.vars[f.param->name] = std::move(arg_seed);
            if (f.param->by_ref) env.alias[f.param->name] = "@arg";
        }
        Walk w{*this, fn, caller_key};
        w.block(f.body, env);
    }

    struct Walk {
        SummaryBuilder& b;
        std::string fn;
        std::optional<Site> caller_key;

        void block(const Block& blk, Env& env) {
            for (const auto& cmd : blk.stmts) command(cmd, env);
        }

        void add_summary(Sink sink, const DepSet& deps) {
            auto& sum = b.result_.fs.by_fn[fn];
            for (const auto& d : deps) {
                SummaryEntry e{sink, {d.input, d.from.kind == FromTp::Kind::ArgBy
                                                   ? d.from
                                                   : d.from.summary_form()}};
                if (d.from.kind == FromTp::Kind::ArgBy) {
                    if (!caller_key)
                        throw std::logic_error("arg-sourced taint outside a calling context");
                    sum.callers[*caller_key].insert(e);
                } else {
                    sum.locals.insert(e);
                }
            }
        }

        void command(const Command& cmd, Env& env) {
            Site site{fn, cmd.label};
            std::visit(
                [&](const auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, InstrSkip>) {
                    } else if constexpr (std::is_same_v<T, InstrAssign>) {
                        DepSet d = b.with_control(deps_of(n.rhs, env.vars), env);
                        env.vars[n.var] = d;
                        b.record_def(fn, cmd.label, d);
                    } else if constexpr (std::is_same_v<T, InstrArrAssign>) {
                        DepSet d = b.with_control(deps_of(n.rhs, env.vars), env);
                        DepSet di = deps_of(n.index, env.vars);
                        d.insert(di.begin(), di.end());
                        env.vars[n.arr].insert(d.begin(), d.end());
                        b.record_def(fn, cmd.label, env.vars[n.arr]);
                    } else if constexpr (std::is_same_v<T, InstrDerefAssign>) {
                        DepSet d = b.with_control(deps_of(n.rhs, env.vars), env);
                        auto target = env.alias.find(n.refvar);
                        if (target != env.alias.end() && target->second == "@arg") {
                            add_summary(Sink::RefArg, d);
                        } else if (target != env.alias.end()) {
                            env.vars[target->second] = d;
                        }
                        b.record_def(fn, cmd.label, d);
                    } else if constexpr (std::is_same_v<T, CmdLet>) {
                        let(cmd, n, env);
                    } else if constexpr (std::is_same_v<T, CmdIf>) {
                        DepSet guard = b.with_control(deps_of(n.cond, env.vars), env);
                        Env then_env = env;
                        Env else_env = env;
                        then_env.control.push_back(guard);
                        else_env.control.push_back(guard);
                        block(n.then_b, then_env);
                        block(n.else_b, else_env);
                        // join: union both arms (may-information)
                        env.vars = then_env.vars;
                        for (const auto& [k, v] : else_env.vars)
                            env.vars[k].insert(v.begin(), v.end());
                    } else if constexpr (std::is_same_v<T, CmdAtomic>) {
                        block(n.body, env);
                    } else {  // CmdRet
                        DepSet d = b.with_control(deps_of(n.value, env.vars), env);
                        add_summary(Sink::Ret, d);
                    }
                },
                cmd.node);
        }

        void let(const Command& cmd, const CmdLet& n, Env& env) {
            Site site{fn, cmd.label};
            std::visit(
                [&](const auto& r) {
                    using R = std::decay_t<decltype(r)>;
                    if constexpr (std::is_same_v<R, LetPlain>) {
                        DepSet d = b.with_control(deps_of(r.rhs, env.vars), env);
                        // Reference bindings also record the alias.
                        if (auto* lit = std::get_if<ExprLit>(&r.rhs.node)) {
                            if (lit->value.kind == Value::Kind::RefVar)
                                env.alias[n.var] = lit->value.name;
                            else if (lit->value.kind == Value::Kind::RefCell)
                                env.alias[n.var] = lit->value.name;
                        }
                        env.vars[n.var] = d;
                        b.record_def(fn, cmd.label, d);
                    } else if constexpr (std::is_same_v<R, LetInput>) {
                        DepSet d = b.with_control({DepEntry{site, FromTp::local(cmd.label)}}, env);
                        env.vars[n.var] = d;
                        b.record_def(fn, cmd.label, d);
                    } else if constexpr (std::is_same_v<R, LetArray>) {
                        DepSet d;
                        for (const auto& e : r.elems) {
                            DepSet de = deps_of(e, env.vars);
                            d.insert(de.begin(), de.end());
                        }
                        d = b.with_control(std::move(d), env);
                        env.vars[n.var] = d;
                        b.record_def(fn, cmd.label, d);
                    } else if constexpr (std::is_same_v<R, LetCall>) {
                        call(cmd, n, r, env);
                    } else if constexpr (std::is_same_v<R, LetFresh>) {
                        DepSet d = b.with_control(deps_of(r.rhs, env.vars), env);
                        env.vars[n.var] = d;
                        b.record_def(fn, cmd.label, d);
                        b.result_.decl_deps[site] = d;
                    } else {  // LetConsistent
                        DepSet d = b.with_control(deps_of(r.rhs, env.vars), env);
                        env.vars[n.var] = d;
                        b.record_def(fn, cmd.label, d);
                        b.result_.decl_deps[site] = d;
                    }
                },
                n.rhs);
        }

        void call(const Command& cmd, const CmdLet& n, const LetCall& r, Env& env) {
            Site site{fn, cmd.label};
            DepSet arg_deps;
            std::optional<std::string> pbr_target;
            if (r.arg) {
                if (r.arg->kind == CallArg::Kind::Var) {
                    arg_deps = deps_of(evar(r.arg->var), env.vars);
                } else if (r.arg->lit.is_ref()) {
                    pbr_target = r.arg->lit.name;
                    auto it = env.vars.find(r.arg->lit.name);
                    if (it != env.vars.end()) arg_deps = it->second;
                }
            }
            arg_deps = b.with_control(std::move(arg_deps), env);

            if (!arg_deps.empty()) {
                auto& callee_sum = b.result_.fs.by_fn[r.callee];
                for (const auto& d : arg_deps)
                    callee_sum.callers[site].insert(SummaryEntry{Sink::Arg, d});
                DepSet seed;
                for (const auto& d : arg_deps)
                    seed.insert(DepEntry{d.input, FromTp::arg_by(d.from)});
                b.walk_function(r.callee, site, seed);
            }

            // Taint generated in the callee's subtree arrives here (retBy);
            // taint we passed in that flowed back keeps its original local
            // origin, so summaries describe first arrival in this function.
            const FuncSummary& callee = b.result_.fs.by_fn[r.callee];
            DepSet x_deps;
            for (const auto& d : callee.sink_deps(Sink::Ret, std::nullopt))
                x_deps.insert(DepEntry{d.input, FromTp::ret_by(r.callee, cmd.label)});
            auto ck = callee.callers.find(site);
            if (ck != callee.callers.end()) {
                for (const auto& e : ck->second)
                    if (e.sink == Sink::Ret && e.dep.from.kind == FromTp::Kind::ArgBy)
                        x_deps.insert(DepEntry{e.dep.input, *e.dep.from.inner});
            }
            x_deps = b.with_control(std::move(x_deps), env);
            env.vars[n.var] = x_deps;
            b.record_def(fn, cmd.label, x_deps);

            if (pbr_target) {
                DepSet y_deps;
                for (const auto& d : callee.sink_deps(Sink::RefArg, std::nullopt))
                    y_deps.insert(DepEntry{d.input, FromTp::pbr(r.callee, cmd.label)});
                if (ck != callee.callers.end()) {
                    for (const auto& e : ck->second)
                        if (e.sink == Sink::RefArg && e.dep.from.kind == FromTp::Kind::ArgBy)
                            y_deps.insert(DepEntry{e.dep.input, *e.dep.from.inner});
                }
                if (!y_deps.empty()) {
                    y_deps = b.with_control(std::move(y_deps), env);
                    // May-write through the reference: keep the old deps too.
                    env.vars[*pbr_target].insert(y_deps.begin(), y_deps.end());
                    b.record_def(fn, cmd.label, env.vars[*pbr_target]);
                }
            }
        }
    };

    const Program& prog_;
    TaintAnalysis result_;
};

}  // namespace detail

// All call paths from main to `target` as lists of callsites. The empty path
// stands for main itself.
inline std::vector<std::vector<Site>> call_paths(const Program& p, const std::string& target) {
    std::vector<std::vector<Site>> out;
    std::vector<Site> cur;
    auto dfs = [&](auto&& self, const std::string& fn) -> void {
        if (fn == target) out.push_back(cur);
        const FuncDecl* f = p.find(fn);
        if (!f) return;
        visit_commands(f->body, [&](const Command& c) {
            if (auto* let = std::get_if<CmdLet>(&c.node))
                if (auto* call = std::get_if<LetCall>(&let->rhs)) {
                    cur.push_back({fn, c.label});
                    self(self, call->callee);
                    cur.pop_back();
                }
        });
    };
    if (p.find("main")) dfs(dfs, "main");
    return out;
}

// Is this site a let-input instruction?
inline bool is_input_site(const Program& p, const Site& s) {
    const FuncDecl* f = p.find(s.fn);
    if (!f) return false;
    const Command* c = find_command(*f, s.label);
    if (!c) return false;
    auto* let = std::get_if<CmdLet>(&c->node);
    return let && std::holds_alternative<LetInput>(let->rhs);
}

inline const LetCall* call_at(const Program& p, const Site& s) {
    const FuncDecl* f = p.find(s.fn);
    if (!f) return nullptr;
    const Command* c = find_command(*f, s.label);
    if (!c) return nullptr;
    auto* let = std::get_if<CmdLet>(&c->node);
    return let ? std::get_if<LetCall>(&let->rhs) : nullptr;
}

namespace detail {

class ChainWalker {
  public:
    ChainWalker(const Program& p, const FuncSummaries& fs) : prog_(p), fs_(fs) {}

    // All provenances for `entry` observed in `fn` reached via `stack`
    // (callsites from main down to fn).
    std::set<Provenance> resolve(std::vector<Site> stack, const std::string& fn,
                                 const DepEntry& entry, int depth = 0) const {
        if (depth > 64) throw std::logic_error("call chain too deep (broken chain?)");
        std::set<Provenance> out;
        const FromTp& from = entry.from;
        if (from.kind == FromTp::Kind::ArgBy) {
            if (stack.empty())
                throw std::logic_error("argBy taint with no caller on the chain");
            Site caller_site = stack.back();
            stack.pop_back();
            return resolve(std::move(stack), caller_site.fn, {entry.input, *from.inner},
                           depth + 1);
        }
        Site here{fn, from.label};
        if (is_input_site(prog_, here)) {
            if (here != entry.input)
                throw std::logic_error("local taint does not match its input site");
            stack.push_back(here);
            out.insert(stack);
            return out;
        }
        const LetCall* call = call_at(prog_, here);
        if (!call) throw std::logic_error("taint origin " + to_string(here) + " is not a callsite");
        auto it = fs_.by_fn.find(call->callee);
        if (it == fs_.by_fn.end()) throw std::logic_error("no summary for " + call->callee);
        const FuncSummary& sum = it->second;
        // Locally generated taint in the callee: the chain passes through here.
        for (const auto& e : sum.locals) {
            if (e.dep.input != entry.input || e.sink == Sink::Arg) continue;
            std::vector<Site> deeper = stack;
            deeper.push_back(here);
            auto sub = resolve(std::move(deeper), call->callee, e.dep, depth + 1);
            out.insert(sub.begin(), sub.end());
        }
        // Taint we passed in that flowed back: resolve on the caller side.
        auto ck = sum.callers.find(here);
        if (ck != sum.callers.end()) {
            for (const auto& e : ck->second) {
                if (e.dep.input != entry.input || e.sink == Sink::Arg) continue;
                if (e.dep.from.kind != FromTp::Kind::ArgBy) continue;
                auto sub = resolve(stack, fn, {entry.input, *e.dep.from.inner}, depth + 1);
                out.insert(sub.begin(), sub.end());
            }
        }
        if (out.empty())
            throw std::logic_error("broken chain: no route for input " + to_string(entry.input) +
                                   " at " + to_string(here));
        return out;
    }

  private:
    const Program& prog_;
    const FuncSummaries& fs_;
};

}  // namespace detail

inline TaintAnalysis build_summary(const Program& p) {
    detail::SummaryBuilder b(p);
    return b.run();
}

// Full call chains (from main) for a dependence entry observed in `fn`.
// Every main→fn call path contributes its own provenance.
inline std::set<Provenance> call_chain(const Program& p, const FuncSummaries& fs,
                                       const std::string& fn, const DepEntry& entry) {
    detail::ChainWalker w(p, fs);
    std::set<Provenance> out;
    for (auto& path : call_paths(p, fn)) {
        auto sub = w.resolve(path, fn, entry);
        out.insert(sub.begin(), sub.end());
    }
    return out;
}

// Chains for an entry under one specific call path (used by the checkers,
// which walk one context at a time).
inline std::set<Provenance> call_chain_under(const Program& p, const FuncSummaries& fs,
                                             const std::vector<Site>& path, const std::string& fn,
                                             const DepEntry& entry) {
    detail::ChainWalker w(p, fs);
    return w.resolve(path, fn, entry);
}

}  // namespace oct
