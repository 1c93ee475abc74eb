#pragma once

// Dynamic validation: committed-trace construction, the trace-level
// freshness/consistency checkers, pathological failure-point generation,
// the nonvolatile bit-vector violation detector, and exhaustive
// single-failure enumeration.
//
// A committed trace removes work undone by region rollbacks: on an
// atomic-mode reboot everything after the outermost open begin_atom is
// discarded, but the reboot marker itself is kept (off-time passed even
// though the partial work was rolled back). A policy instance is violated
// when a reboot marker falls strictly inside its committed span: first
// dependent input to last use for freshness, first to last dependent input
// for consistency.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oct/exec.hpp"
#include "oct/policy.hpp"
#include "oct/schedule.hpp"

namespace oct {

inline std::vector<Observation> committed_trace(const std::vector<Observation>& raw) {
    std::vector<Observation> out;
    std::vector<size_t> open;  // indices of open begin_atom markers in `out`
    for (const auto& o : raw) {
        switch (o.kind) {
            case Observation::Kind::BeginAtom:
                open.push_back(out.size());
                out.push_back(o);
                break;
            case Observation::Kind::EndAtom:
                if (!open.empty()) open.pop_back();
                out.push_back(o);
                break;
            case Observation::Kind::Reboot:
                if (o.rolled_back && !open.empty()) {
                    out.resize(open.front() + 1);
                    open.resize(1);
                }
                out.push_back(o);
                break;
            default:
                out.push_back(o);
        }
    }
    return out;
}

// Committed instruction sequence (sites of executed commands).
inline std::vector<Site> committed_instructions(const std::vector<Observation>& raw) {
    std::vector<Site> out;
    for (const auto& o : committed_trace(raw))
        if (o.kind == Observation::Kind::Instr) out.push_back(o.site);
    return out;
}

struct PolicyVerdict {
    bool violated = false;
    int instances = 0;
    std::vector<std::string> witnesses;
};

namespace detail {

inline bool reboot_inside(const std::vector<Observation>& committed, size_t lo, size_t hi) {
    for (size_t i = lo + 1; i < hi; ++i)
        if (committed[i].kind == Observation::Kind::Reboot) return true;
    return false;
}

inline std::optional<size_t> input_index(const std::vector<Observation>& committed, uint64_t tau) {
    for (size_t i = 0; i < committed.size(); ++i)
        if (committed[i].kind == Observation::Kind::Input && committed[i].tau == tau) return i;
    return std::nullopt;
}

}  // namespace detail

// Freshness (trace form): for every committed declaration instance, the span
// from its earliest dependent input to its last use must not cross a reboot.
inline PolicyVerdict check_freshness_trace(const std::vector<Observation>& raw,
                                           const FreshPolicy& pol) {
    auto committed = committed_trace(raw);
    PolicyVerdict v;
    for (size_t i = 0; i < committed.size(); ++i) {
        const auto& o = committed[i];
        if (o.kind != Observation::Kind::Fresh || o.site != pol.decl) continue;
        v.instances++;
        if (o.taint.empty()) continue;
        std::optional<size_t> lo;
        for (uint64_t t : o.taint) {
            auto idx = detail::input_index(committed, t);
            if (idx && (!lo || *idx < *lo)) lo = idx;
        }
        if (!lo) continue;  // inputs predate the trace (cannot happen in practice)
        size_t hi = i;
        for (size_t j = i + 1; j < committed.size(); ++j)
            if (committed[j].kind == Observation::Kind::Use && committed[j].decl_tau == o.tau)
                hi = j;
        if (detail::reboot_inside(committed, *lo, hi)) {
            v.violated = true;
            v.witnesses.push_back("fresh instance at tau " + std::to_string(o.tau) +
                                  " spans a reboot");
        }
    }
    return v;
}

// Consistency (trace form): the span covering every input timestamp feeding
// the set's declarations must not cross a reboot.
inline PolicyVerdict check_consistency_trace(const std::vector<Observation>& raw,
                                             const ConsistentPolicy& pol) {
    auto committed = committed_trace(raw);
    PolicyVerdict v;
    std::set<uint64_t> taus;
    for (const auto& o : committed) {
        if (o.kind != Observation::Kind::Cnst || o.set_id != pol.set_id) continue;
        v.instances++;
        taus.insert(o.taint.begin(), o.taint.end());
    }
    if (taus.size() < 2) return v;
    std::optional<size_t> lo, hi;
    for (uint64_t t : taus) {
        auto idx = detail::input_index(committed, t);
        if (!idx) continue;
        if (!lo || *idx < *lo) lo = idx;
        if (!hi || *idx > *hi) hi = idx;
    }
    if (lo && hi && detail::reboot_inside(committed, *lo, *hi)) {
        v.violated = true;
        v.witnesses.push_back("consistent set " + std::to_string(pol.set_id) +
                              " inputs span a reboot");
    }
    return v;
}

struct RunVerdicts {
    std::map<std::string, PolicyVerdict> by_policy;

    bool any() const {
        for (const auto& [_, v] : by_policy)
            if (v.violated) return true;
        return false;
    }
};

inline RunVerdicts check_trace(const std::vector<Observation>& raw, const PolicyDecls& pd) {
    RunVerdicts out;
    for (const auto& [pid, pol] : pd.by_id) {
        if (pol.is_fresh())
            out.by_policy[pid] = check_freshness_trace(raw, std::get<FreshPolicy>(pol.v));
        else
            out.by_policy[pid] = check_consistency_trace(raw, std::get<ConsistentPolicy>(pol.v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pathological failure points (dry continuous run resolves dynamic
// occurrence indices: the same label may execute under several contexts).

inline std::vector<PlannedFailure> pathological_points(const Program& p, const PolicyDecls& pd,
                                                       InputOracle oracle, uint64_t off_time = 100,
                                                       uint64_t fuel = 200000) {
    Machine dry = run_continuous(p, std::move(oracle), fuel);
    const auto& trace = dry.trace;

    auto occurrence_at = [&](size_t idx) {
        // dynamic occurrence index of the instruction observation at idx
        int occ = 0;
        for (size_t i = 0; i <= idx; ++i)
            if (trace[i].kind == Observation::Kind::Instr && trace[i].site == trace[idx].site)
                occ++;
        return occ;
    };
    auto instr_before = [&](size_t idx, Site site) -> std::optional<size_t> {
        for (size_t i = idx + 1; i-- > 0;)
            if (trace[i].kind == Observation::Kind::Instr && trace[i].site == site) return i;
        return std::nullopt;
    };

    std::vector<PlannedFailure> points;
    auto add_point = [&](Site site, int occ) {
        for (const auto& f : points)
            if (f.site == site && f.occurrence == occ) return;
        points.push_back(PlannedFailure{site, occ, off_time});
    };

    for (const auto& [pid, pol] : pd.by_id) {
        if (pol.is_fresh()) {
            const auto& fp = std::get<FreshPolicy>(pol.v);
            for (size_t i = 0; i < trace.size(); ++i) {
                if (trace[i].kind != Observation::Kind::Fresh || trace[i].site != fp.decl)
                    continue;
                for (size_t j = i + 1; j < trace.size(); ++j) {
                    if (trace[j].kind != Observation::Kind::Use ||
                        trace[j].decl_tau != trace[i].tau)
                        continue;
                    auto instr = instr_before(j, trace[j].site);
                    if (instr) add_point(trace[j].site, occurrence_at(*instr));
                }
            }
        } else {
            const auto& cp = std::get<ConsistentPolicy>(pol.v);
            std::vector<size_t> input_idxs;
            for (size_t i = 0; i < trace.size(); ++i) {
                if (trace[i].kind != Observation::Kind::Input) continue;
                auto chain_it = dry.input_chains.find(trace[i].tau);
                if (chain_it == dry.input_chains.end()) continue;
                if (cp.inputs.count(chain_it->second)) input_idxs.push_back(i);
            }
            for (size_t k = 1; k < input_idxs.size(); ++k) {
                size_t j = input_idxs[k];
                auto instr = instr_before(j, trace[j].site);
                if (instr) add_point(trace[j].site, occurrence_at(*instr));
            }
        }
    }
    return points;
}

// ---------------------------------------------------------------------------
// Bit-vector detector. One bit per input provenance, held alongside the
// nonvolatile memory; set when its input executes, cleared wholesale on
// power failure. Bits of dependent inputs are checked at every use of a
// fresh variable; bits of statically earlier inputs of a consistent set are
// checked at each of the set's input operations.

class BitVectorDetector {
  public:
    BitVectorDetector(const PolicyDecls& pd,
                      std::map<std::string, std::vector<Provenance>> consistent_order)
        : pd_(pd), order_(std::move(consistent_order)) {
        for (const auto& [pid, pol] : pd.by_id)
            if (pol.is_fresh()) fresh_by_decl_[std::get<FreshPolicy>(pol.v).decl] = pid;
    }

    void process(const Machine& m, const Observation& o) {
        switch (o.kind) {
            case Observation::Kind::Reboot:
                bits_.clear();
                break;
            case Observation::Kind::Input: {
                auto it = m.input_chains.find(o.tau);
                if (it == m.input_chains.end()) return;
                const Provenance& chain = it->second;
                for (const auto& [pid, chains] : order_) {
                    auto pos = std::find(chains.begin(), chains.end(), chain);
                    if (pos == chains.end()) continue;
                    for (auto c = chains.begin(); c != pos; ++c)
                        if (!bits_.count(*c)) fired_.insert(pid);
                }
                bits_.insert(chain);
                break;
            }
            case Observation::Kind::Fresh:
                taint_by_decl_tau_[o.tau] = o.taint;
                site_by_decl_tau_[o.tau] = o.site;
                break;
            case Observation::Kind::Use: {
                auto taint = taint_by_decl_tau_.find(o.decl_tau);
                auto site = site_by_decl_tau_.find(o.decl_tau);
                if (taint == taint_by_decl_tau_.end() || site == site_by_decl_tau_.end()) return;
                auto pid = fresh_by_decl_.find(site->second);
                if (pid == fresh_by_decl_.end()) return;
                for (uint64_t t : taint->second) {
                    auto chain = m.input_chains.find(t);
                    if (chain == m.input_chains.end()) continue;
                    if (!bits_.count(chain->second)) fired_.insert(pid->second);
                }
                break;
            }
            default:
                break;
        }
    }

    const std::set<std::string>& fired() const { return fired_; }

  private:
    const PolicyDecls& pd_;
    std::map<std::string, std::vector<Provenance>> order_;
    std::map<Site, std::string> fresh_by_decl_;
    std::set<Provenance> bits_;
    std::map<uint64_t, std::set<uint64_t>> taint_by_decl_tau_;
    std::map<uint64_t, Site> site_by_decl_tau_;
    std::set<std::string> fired_;
};

// Execution order of each consistent set's inputs, resolved by a dry run.
inline std::map<std::string, std::vector<Provenance>> consistent_exec_order(const Program& p,
                                                                            const PolicyDecls& pd,
                                                                            InputOracle oracle,
                                                                            uint64_t fuel = 200000) {
    Machine dry = run_continuous(p, std::move(oracle), fuel);
    std::map<std::string, std::vector<Provenance>> order;
    for (const auto& [pid, pol] : pd.by_id) {
        if (pol.is_fresh()) continue;
        auto& chains = order[pid];
        std::set<Provenance> seen;
        for (const auto& o : dry.trace) {
            if (o.kind != Observation::Kind::Input) continue;
            auto it = dry.input_chains.find(o.tau);
            if (it == dry.input_chains.end()) continue;
            if (!pol.inputs().count(it->second) || seen.count(it->second)) continue;
            chains.push_back(it->second);
            seen.insert(it->second);
        }
        // chains never reached in the dry run keep a stable trailing order
        for (const auto& c : pol.inputs())
            if (!seen.count(c)) chains.push_back(c);
    }
    return order;
}

struct DetectorRun {
    RunVerdicts trace_verdicts;
    std::set<std::string> detector_fired;
    bool completed = false;
    std::optional<std::string> fault;

    bool agree() const {
        std::set<std::string> trace_fired;
        for (const auto& [pid, v] : trace_verdicts.by_policy)
            if (v.violated) trace_fired.insert(pid);
        return trace_fired == detector_fired;
    }
};

inline DetectorRun run_bitvector_detector(const Program& p, const PolicyDecls& pd,
                                          FailureSchedule schedule, InputOracle oracle,
                                          uint64_t fuel = 200000) {
    auto order = consistent_exec_order(p, pd, oracle);
    Machine m = machine_intermittent(p, oracle, std::move(schedule));
    BitVectorDetector det(pd, std::move(order));
    size_t seen = 0;
    uint64_t steps = 0;
    while (!m.done && !m.fault && steps++ < fuel) {
        step(m);
        for (; seen < m.trace.size(); ++seen) det.process(m, m.trace[seen]);
    }
    DetectorRun out;
    out.completed = m.done && !m.fault;
    out.fault = m.fault;
    out.trace_verdicts = check_trace(m.trace, pd);
    out.detector_fired = det.fired();
    return out;
}

// ---------------------------------------------------------------------------
// Exhaustive single-failure enumeration: one run per (instruction index,
// off-time) pair; a checker-passing program must show zero violations.

struct ExhaustiveSummary {
    uint64_t positions = 0;
    uint64_t runs = 0;
    uint64_t violating_runs = 0;
    std::map<std::string, uint64_t> violations_by_policy;
    std::vector<std::string> witnesses;
    bool budget_exceeded = false;
    bool detector_agreed = true;
};

inline ExhaustiveSummary exhaustive_verify(const Program& p, const PolicyDecls& pd,
                                           InputOracle oracle,
                                           const std::vector<uint64_t>& off_times = {1, 10, 1000},
                                           uint64_t max_positions = 4000, uint64_t fuel = 200000,
                                           bool with_detector = false) {
    ExhaustiveSummary out;
    Machine dry = run_continuous(p, oracle, fuel);
    if (!dry.done) {
        out.budget_exceeded = true;
        return out;
    }
    uint64_t positions = dry.instr_steps;
    if (positions > max_positions) {
        out.budget_exceeded = true;
        return out;
    }
    out.positions = positions;
    auto order = consistent_exec_order(p, pd, oracle);
    for (uint64_t k = 0; k < positions; ++k) {
        for (uint64_t n : off_times) {
            Machine m = machine_intermittent(p, oracle, FailureSchedule::exhaustive(k, n));
            BitVectorDetector det(pd, order);
            size_t seen = 0;
            uint64_t steps = 0;
            while (!m.done && !m.fault && steps++ < fuel) {
                step(m);
                if (with_detector)
                    for (; seen < m.trace.size(); ++seen) det.process(m, m.trace[seen]);
            }
            out.runs++;
            RunVerdicts verdicts = check_trace(m.trace, pd);
            if (verdicts.any()) {
                out.violating_runs++;
                for (const auto& [pid, v] : verdicts.by_policy)
                    if (v.violated) {
                        out.violations_by_policy[pid]++;
                        if (out.witnesses.size() < 16)
                            out.witnesses.push_back("k=" + std::to_string(k) +
                                                    " n=" + std::to_string(n) + " " + pid);
                    }
            }
            if (with_detector) {
                std::set<std::string> trace_fired;
                for (const auto& [pid, v] : verdicts.by_policy)
                    if (v.violated) trace_fired.insert(pid);
                if (trace_fired != det.fired()) out.detector_agreed = false;
            }
        }
    }
    return out;
}

}  // namespace oct
