#pragma once

// Policies: the static record binding each annotation to its declaration
// site(s), the provenances of every input it depends on, and (for freshness)
// every use site of the bound variable.

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "oct/ast.hpp"
#include "oct/taint.hpp"

namespace oct {

struct FreshPolicy {
    Site decl;
    std::string var;
    std::set<Provenance> inputs;
    std::vector<Site> uses;  // sorted
};

struct ConsistentPolicy {
    long long set_id = 0;
    std::vector<Site> decls;  // sorted
    std::set<Provenance> inputs;
};

struct Policy {
    std::variant<FreshPolicy, ConsistentPolicy> v;

    bool is_fresh() const { return std::holds_alternative<FreshPolicy>(v); }
    const std::set<Provenance>& inputs() const {
        return is_fresh() ? std::get<FreshPolicy>(v).inputs : std::get<ConsistentPolicy>(v).inputs;
    }
};

// pID → policy. IDs are `fresh@f:ℓ` and `consistent@n`, so reruns are stable.
struct PolicyDecls {
    std::map<std::string, Policy> by_id;
};

// aID → policies the region enforces.
using PolicyMap = std::map<int, std::vector<std::string>>;

inline std::string fresh_policy_id(const Site& decl) {
    return "fresh@" + decl.fn + ":" + std::to_string(decl.label);
}
inline std::string consistent_policy_id(long long n) { return "consistent@" + std::to_string(n); }

struct PolicyBuildResult {
    PolicyDecls pd;
    std::vector<std::string> warnings;
};

inline PolicyBuildResult build_policies(const Program& p, const TaintAnalysis& ta) {
    PolicyBuildResult out;
    for (const auto& f : p.funcs) {
        visit_commands(f.body, [&](const Command& cmd) {
            auto* let = std::get_if<CmdLet>(&cmd.node);
            if (!let) return;
            Site site{f.name, cmd.label};
            if (std::holds_alternative<LetFresh>(let->rhs)) {
                FreshPolicy pol;
                pol.decl = site;
                pol.var = let->var;
                auto it = ta.decl_deps.find(site);
                if (it != ta.decl_deps.end())
                    for (const auto& d : it->second) {
                        auto chains = call_chain(p, ta.fs, f.name, d);
                        pol.inputs.insert(chains.begin(), chains.end());
                    }
                // Uses: any command in this function reading the variable.
                // Names are unique per function (no shadowing), so a plain
                // scan is exact.
                std::set<Site> uses;
                visit_commands(f.body, [&](const Command& u) {
                    if (u.label == cmd.label) return;
                    for (const auto& v : read_vars(u))
                        if (v == pol.var) uses.insert({f.name, u.label});
                });
                pol.uses.assign(uses.begin(), uses.end());
                if (pol.inputs.empty())
                    out.warnings.push_back("policy " + fresh_policy_id(site) +
                                           " depends on no input (vacuous)");
                out.pd.by_id[fresh_policy_id(site)] = Policy{std::move(pol)};
            } else if (auto* cons = std::get_if<LetConsistent>(&let->rhs)) {
                std::string id = consistent_policy_id(cons->set_id);
                auto [it, inserted] = out.pd.by_id.try_emplace(id);
                if (inserted) it->second.v = ConsistentPolicy{cons->set_id, {}, {}};
                auto& pol = std::get<ConsistentPolicy>(it->second.v);
                pol.decls.push_back(site);
                auto dd = ta.decl_deps.find(site);
                if (dd != ta.decl_deps.end())
                    for (const auto& d : dd->second) {
                        auto chains = call_chain(p, ta.fs, f.name, d);
                        pol.inputs.insert(chains.begin(), chains.end());
                    }
            }
        });
    }
    for (auto& [id, pol] : out.pd.by_id) {
        if (auto* cons = std::get_if<ConsistentPolicy>(&pol.v)) {
            std::sort(cons->decls.begin(), cons->decls.end());
            if (cons->inputs.empty())
                out.warnings.push_back("policy " + id + " depends on no input (vacuous)");
        }
    }
    return out;
}

// checkUse(PD, e): every fresh-bound variable free in `e` must have `site`
// recorded among its policy's uses.
inline bool check_use(const PolicyDecls& pd, const Expr& e, const Site& site) {
    auto fv = free_vars(e);
    for (const auto& [id, pol] : pd.by_id) {
        if (!pol.is_fresh()) continue;
        const auto& fp = std::get<FreshPolicy>(pol.v);
        if (fp.decl.fn != site.fn) continue;
        bool reads = false;
        for (const auto& v : fv)
            if (v == fp.var) reads = true;
        if (!reads) continue;
        if (!std::binary_search(fp.uses.begin(), fp.uses.end(), site)) return false;
    }
    return true;
}

inline bool policy_vacuous(const Policy& pol) {
    if (pol.is_fresh()) {
        const auto& fp = std::get<FreshPolicy>(pol.v);
        return fp.inputs.empty() && fp.uses.empty();
    }
    return pol.inputs().empty();
}

}  // namespace oct
