#pragma once

// JSON report shapes shared by the CLI and the golden tests. Key order is
// fixed (ordered_json) so reports diff cleanly.

#include <string>

#include <json.hpp>

#include "oct/checker.hpp"
#include "oct/infer.hpp"
#include "oct/policy.hpp"
#include "oct/taint.hpp"
#include "oct/validate.hpp"
#include "oct/verify.hpp"

namespace oct {

using ojson = nlohmann::ordered_json;

inline ojson to_json(const Site& s) { return to_string(s); }

inline ojson to_json(const Provenance& p) { return to_string(p); }

inline ojson to_json(const SummaryEntry& e) {
    ojson j;
    j["sink"] = to_string(e.sink);
    j["input"] = to_string(e.dep.input);
    j["from"] = to_string(e.dep.from);
    return j;
}

inline ojson to_json(const FuncSummaries& fs) {
    ojson j = ojson::object();
    for (const auto& [fn, sum] : fs.by_fn) {
        ojson f;
        f["local"] = ojson::array();
        for (const auto& e : sum.locals) f["local"].push_back(to_json(e));
        f["callers"] = ojson::object();
        for (const auto& [key, entries] : sum.callers) {
            ojson arr = ojson::array();
            for (const auto& e : entries) arr.push_back(to_json(e));
            f["callers"][to_string(key)] = std::move(arr);
        }
        j[fn] = std::move(f);
    }
    return j;
}

inline ojson to_json(const Policy& pol) {
    ojson j;
    if (pol.is_fresh()) {
        const auto& fp = std::get<FreshPolicy>(pol.v);
        j["kind"] = "fresh";
        j["decl"] = to_string(fp.decl);
        j["var"] = fp.var;
        j["inputs"] = ojson::array();
        for (const auto& c : fp.inputs) j["inputs"].push_back(to_string(c));
        j["uses"] = ojson::array();
        for (const auto& u : fp.uses) j["uses"].push_back(to_string(u));
    } else {
        const auto& cp = std::get<ConsistentPolicy>(pol.v);
        j["kind"] = "consistent";
        j["set"] = cp.set_id;
        j["decls"] = ojson::array();
        for (const auto& d : cp.decls) j["decls"].push_back(to_string(d));
        j["inputs"] = ojson::array();
        for (const auto& c : cp.inputs) j["inputs"].push_back(to_string(c));
    }
    return j;
}

inline ojson to_json(const PolicyDecls& pd) {
    ojson j = ojson::object();
    for (const auto& [pid, pol] : pd.by_id) j[pid] = to_json(pol);
    return j;
}

inline ojson to_json(const PolicyMap& pm) {
    ojson j = ojson::object();
    for (const auto& [aid, pids] : pm) {
        ojson arr = ojson::array();
        for (const auto& p : pids) arr.push_back(p);
        j[std::to_string(aid)] = std::move(arr);
    }
    return j;
}

inline ojson to_json(const std::vector<Diagnostic>& diags) {
    ojson arr = ojson::array();
    for (const auto& d : diags) {
        ojson j;
        j["site"] = to_string(d.site);
        j["message"] = d.message;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline ojson to_json(const CheckResult& r) {
    ojson j;
    j["ok"] = r.ok;
    j["diagnostics"] = ojson::array();
    for (const auto& d : r.diags) {
        ojson e;
        e["rule"] = d.rule;
        e["site"] = to_string(d.site);
        e["message"] = d.message;
        j["diagnostics"].push_back(std::move(e));
    }
    return j;
}

inline ojson to_json(const std::vector<RegionInfo>& regions) {
    ojson arr = ojson::array();
    for (const auto& r : regions) {
        ojson j;
        j["aid"] = r.aid;
        j["policy"] = r.policy;
        j["function"] = r.fn;
        j["start_label"] = r.start;
        j["end_label"] = r.end;
        j["omega"] = ojson::array();
        for (const auto& w : r.omega) j["omega"].push_back(w);
        arr.push_back(std::move(j));
    }
    return arr;
}

inline ojson analyze_report(const std::string& file, const Program& p,
                            const std::vector<Diagnostic>& diags, const TaintAnalysis& ta,
                            const PolicyDecls& pd, const std::vector<std::string>& warnings) {
    ojson j;
    j["file"] = file;
    j["inputs"] = ojson::array();
    for (const auto& s : p.inputs) j["inputs"].push_back(s);
    j["functions"] = ojson::array();
    for (const auto& f : p.funcs) j["functions"].push_back(f.name);
    j["diagnostics"] = to_json(diags);
    j["summaries"] = to_json(ta.fs);
    j["policies"] = to_json(pd);
    j["warnings"] = ojson::array();
    for (const auto& w : warnings) j["warnings"].push_back(w);
    return j;
}

}  // namespace oct
