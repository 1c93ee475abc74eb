// Acceptance suite. Runs every criterion at its stated tolerance and prints
// one PASS/FAIL line each; the process exit code is the number of failures.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oct/checker.hpp"
#include "oct/exec.hpp"
#include "oct/infer.hpp"
#include "oct/parser.hpp"
#include "oct/printer.hpp"
#include "oct/report.hpp"
#include "oct/validate.hpp"
#include "oct/verify.hpp"
#include "support/gen.hpp"

using namespace oct;

namespace {

int failures = 0;

void report_line(int idx, const std::string& name, bool pass, const std::string& detail) {
    std::printf("criterion %d: %-42s %s%s%s\n", idx, name.c_str(), pass ? "PASS" : "FAIL",
                detail.empty() ? "" : "  -- ", detail.c_str());
    if (!pass) failures++;
}

std::string repo(const std::string& rel) { return std::string(OCT_REPO_DIR) + "/" + rel; }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<std::string> kBenchmarks = {
    "activity", "cem", "greenhouse", "photo", "sendphoto", "tire",
};

struct Built {
    Program p;
    TaintAnalysis ta;
    PolicyDecls pd;
    InferResult inf;
    bool ok = false;
    std::string error;
};

Built build_and_transform(const std::string& src) {
    Built b;
    try {
        b.p = parse(src);
        auto diags = validate(b.p);
        if (!diags.empty()) {
            b.error = "validate: " + diags[0].message;
            return b;
        }
        b.ta = build_summary(b.p);
        b.pd = build_policies(b.p, b.ta).pd;
        b.inf = infer_atomic(b.p, b.ta, b.pd);
        b.ok = true;
    } catch (const std::exception& e) {
        b.error = e.what();
    }
    return b;
}

bool passes_check(Built& b) {
    return check_summaries(b.inf.transformed, b.ta.fs, b.pd).ok &&
           check_regions(b.inf.transformed, b.pd, b.inf.pm).ok;
}

// Percentage of violating runs under one failure point per run.
double percent_violating(const Program& variant, const PolicyDecls& pd, InputOracle oracle) {
    auto points = pathological_points(variant, pd, oracle);
    if (points.empty()) return 0.0;
    uint64_t violating = 0;
    for (const auto& pt : points) {
        Machine m = run_intermittent(variant, oracle, FailureSchedule::at_sites({pt}));
        if (!m.done) return -1.0;
        if (check_trace(m.trace, pd).any()) violating++;
    }
    return 100.0 * (double)violating / (double)points.size();
}

// ---------------------------------------------------------------------------

void criterion1_table4a() {
    auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    for (const auto& name : kBenchmarks) {
        Built b = build_and_transform(read_file(repo("benchmarks/" + name + ".oct")));
        if (!b.ok) {
            pass = false;
            detail = name + ": " + b.error;
            break;
        }
        double transformed = percent_violating(b.inf.transformed, b.pd, oracle_identity());
        Program jit = strip_atomics(b.p);
        double baseline = percent_violating(jit, b.pd, oracle_identity());
        if (transformed != 0.0 || baseline != 100.0) {
            pass = false;
            detail += name + "(transformed " + std::to_string(transformed) + "%, jit " +
                      std::to_string(baseline) + "%) ";
        }
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 10.0) {
        pass = false;
        detail += "took " + std::to_string(secs) + "s (limit 10s)";
    }
    report_line(1, "Table 4(a): transformed 0%, jit 100%", pass, detail);
}

void criterion2_theorem_as_test() {
    bool pass = true;
    std::string detail;
    auto t0 = std::chrono::steady_clock::now();
    int programs = 0;

    auto verify_one = [&](const std::string& tag, Built& b) {
        if (!b.ok) {
            pass = false;
            detail = tag + ": " + b.error;
            return;
        }
        if (!passes_check(b)) {
            pass = false;
            detail = tag + ": transformed program failed check";
            return;
        }
        ExhaustiveSummary s =
            exhaustive_verify(b.inf.transformed, b.pd, oracle_identity(), {1, 10, 1000});
        if (s.budget_exceeded || s.violating_runs != 0) {
            pass = false;
            detail = tag + ": " + std::to_string(s.violating_runs) + " violating runs" +
                     (s.witnesses.empty() ? "" : " (" + s.witnesses[0] + ")");
        }
        programs++;
    };

    for (const auto& name : kBenchmarks) {
        Built b = build_and_transform(read_file(repo("benchmarks/" + name + ".oct")));
        verify_one(name, b);
        if (!pass) break;
    }
    int generated = 0;
    for (uint64_t seed = 50000; pass && generated < 200; ++seed) {
        std::string src = octgen::generate_program(seed);
        Built b = build_and_transform(src);
        if (!b.ok) continue;  // generator emitted something invalid; skip, do not count
        verify_one("seed " + std::to_string(seed), b);
        generated++;
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 300.0) {
        pass = false;
        detail += " took " + std::to_string(secs) + "s (target < 5min)";
    }
    report_line(2, "theorem as test (exhaustive failures)", pass,
                pass ? std::to_string(programs) + " programs, all clean" : detail);
}

// Region mutants: drop the first or last statement out of the region, or
// delete the region wrapper entirely.
enum class Mutation { ShrinkHead, ShrinkTail, Delete };

bool mutate_region(Program& prog, int aid, Mutation kind) {
    bool changed = false;
    auto walk = [&](auto&& self, Block& b) -> void {
        for (size_t i = 0; i < b.stmts.size() && !changed; ++i) {
            Command& cmd = b.stmts[i];
            if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
                if (at->aid == aid) {
                    if (kind == Mutation::Delete) {
                        std::vector<Command> body = std::move(at->body.stmts);
                        b.stmts.erase(b.stmts.begin() + (long)i);
                        b.stmts.insert(b.stmts.begin() + (long)i,
                                       std::make_move_iterator(body.begin()),
                                       std::make_move_iterator(body.end()));
                    } else if (kind == Mutation::ShrinkHead) {
                        if (at->body.stmts.empty()) return;
                        Command head = std::move(at->body.stmts.front());
                        at->body.stmts.erase(at->body.stmts.begin());
                        b.stmts.insert(b.stmts.begin() + (long)i, std::move(head));
                    } else {
                        if (at->body.stmts.empty()) return;
                        Command tail = std::move(at->body.stmts.back());
                        at->body.stmts.pop_back();
                        b.stmts.insert(b.stmts.begin() + (long)i + 1, std::move(tail));
                    }
                    changed = true;
                    return;
                }
                self(self, at->body);
            } else if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
                self(self, iff->then_b);
                self(self, iff->else_b);
            }
        }
    };
    for (auto& f : prog.funcs) {
        walk(walk, f.body);
        if (changed) break;
    }
    if (changed) label_program(prog);
    return changed;
}

void criterion3_mutation() {
    bool pass = true;
    std::string detail;
    int mutants = 0, killed = 0;

    auto test_program = [&](const std::string& tag, Built& b) {
        if (!b.ok || !passes_check(b)) {
            pass = false;
            detail = tag + ": base program did not pass check";
            return;
        }
        for (const auto& region : b.inf.regions) {
            const Policy& pol = b.pd.by_id.at(region.policy);
            if (policy_vacuous(pol)) continue;
            for (Mutation kind : {Mutation::ShrinkHead, Mutation::ShrinkTail, Mutation::Delete}) {
                Program mutant = clone(b.inf.transformed);
                if (!mutate_region(mutant, region.aid, kind)) continue;
                mutants++;
                CheckResult r = check_regions(mutant, b.pd, b.inf.pm);
                if (!r.ok) {
                    killed++;
                } else {
                    pass = false;
                    detail = tag + ": mutant of region " + std::to_string(region.aid) +
                             " (policy " + region.policy + ") survived";
                }
            }
        }
    };

    for (const auto& name : kBenchmarks) {
        Built b = build_and_transform(read_file(repo("benchmarks/" + name + ".oct")));
        test_program(name, b);
    }
    for (const auto& fixture : {"fig5a", "fig5b", "weather"}) {
        Built b = build_and_transform(read_file(repo("benchmarks/" + std::string(fixture) + ".oct")));
        test_program(fixture, b);
    }
    int generated = 0;
    for (uint64_t seed = 60000; generated < 40; ++seed) {
        Built b = build_and_transform(octgen::generate_program(seed));
        if (!b.ok) continue;
        test_program("seed " + std::to_string(seed), b);
        generated++;
        if (!pass) break;
    }
    report_line(3, "region mutants all killed", pass,
                pass ? std::to_string(killed) + "/" + std::to_string(mutants) + " killed" : detail);
}

void criterion4_refinement() {
    bool pass = true;
    std::string detail;
    int pairs = 0;

    auto instr_seq = [](const Machine& m) { return committed_instructions(m.trace); };

    // (a) structural refinement on programs whose control flow is
    // input-independent, arbitrary identity oracle
    for (uint64_t seed = 70000; pass && pairs < 250; ++seed) {
        octgen::GenOptions opt;
        opt.tainted_branches = false;
        std::string src = octgen::generate_program(seed, opt);
        Built b = build_and_transform(src);
        if (!b.ok) continue;
        Machine cont = run_continuous(b.inf.transformed, oracle_identity());
        if (!cont.done) continue;
        Machine inter = run_intermittent(b.inf.transformed, oracle_identity(),
                                         FailureSchedule::random(seed * 31 + 7, 0.05, 1000, 6));
        if (!inter.done) continue;
        pairs++;
        if (instr_seq(cont) != instr_seq(inter)) {
            pass = false;
            detail = "structural divergence at seed " + std::to_string(seed);
        }
    }
    // (b) oracles constant over replay windows: value-level equality as well
    for (uint64_t seed = 80000; pass && pairs < 500; ++seed) {
        Built b = build_and_transform(octgen::generate_program(seed));
        if (!b.ok) continue;
        Machine cont = run_continuous(b.inf.transformed, oracle_constant(21));
        if (!cont.done) continue;
        Machine inter = run_intermittent(b.inf.transformed, oracle_constant(21),
                                         FailureSchedule::random(seed * 13 + 3, 0.05, 1000, 6));
        if (!inter.done) continue;
        pairs++;
        if (instr_seq(cont) != instr_seq(inter) || !memory_values_equal(cont.mem, inter.mem)) {
            pass = false;
            detail = "divergence at seed " + std::to_string(seed);
        }
    }
    // (c) zero scheduled failures: traces identical including markers
    for (uint64_t seed = 90000; pass && seed < 90050; ++seed) {
        Built b = build_and_transform(octgen::generate_program(seed));
        if (!b.ok) continue;
        Machine cont = run_continuous(b.inf.transformed, oracle_identity());
        Machine inter =
            run_intermittent(b.inf.transformed, oracle_identity(), FailureSchedule::none());
        if (!cont.done || !inter.done) continue;
        if (cont.trace.size() != inter.trace.size()) {
            pass = false;
            detail = "zero-failure trace mismatch at seed " + std::to_string(seed);
            break;
        }
        for (size_t i = 0; i < cont.trace.size(); ++i) {
            if (cont.trace[i].kind != inter.trace[i].kind ||
                cont.trace[i].tau != inter.trace[i].tau) {
                pass = false;
                detail = "zero-failure trace mismatch at seed " + std::to_string(seed);
                break;
            }
        }
    }
    report_line(4, "intermittent refines continuous", pass,
                pass ? std::to_string(pairs) + " pairs" : detail);
}

void criterion5_idempotence() {
    bool pass = true;
    std::string detail;
    int programs_with_rollback = 0;
    uint64_t omega_checks = 0;

    for (uint64_t seed = 100000; pass && programs_with_rollback < 200; ++seed) {
        Built b = build_and_transform(octgen::generate_program(seed));
        if (!b.ok || b.inf.regions.empty()) continue;
        // Oracle constant over every replay window.
        InputOracle oracle = oracle_constant(17);
        Machine clean = run_continuous(b.inf.transformed, oracle);
        if (!clean.done) continue;

        bool saw_rollback = false;
        for (uint64_t k = 0; k < clean.instr_steps && !saw_rollback; ++k) {
            Machine m = machine_intermittent(b.inf.transformed, oracle,
                                             FailureSchedule::exhaustive(k, 25));
            // Track region-entry snapshots to verify undo-log restoration.
            std::vector<std::pair<size_t, MemCell>> snapshot;
            bool in_atom = false;
            size_t seen = 0;
            while (!m.done && !m.fault) {
                bool was_atom = m.kappa.mode == Context::Mode::Atom;
                step(m);
                if (!was_atom && m.kappa.mode == Context::Mode::Atom) snapshot = m.kappa.undo;
                for (; seen < m.trace.size(); ++seen) {
                    const auto& o = m.trace[seen];
                    if (o.kind == Observation::Kind::Reboot && o.rolled_back) {
                        saw_rollback = true;
                        for (const auto& [slot, cell] : snapshot) {
                            omega_checks++;
                            if (slot >= m.mem.size() || m.mem[slot].name != cell.name ||
                                !memory_values_equal({m.mem[slot]}, {cell})) {
                                pass = false;
                                detail = "omega restore failed at seed " + std::to_string(seed);
                            }
                        }
                    }
                }
                (void)in_atom;
            }
            if (!m.done || !pass) continue;
            if (saw_rollback && !memory_values_equal(clean.mem, m.mem)) {
                pass = false;
                detail = "final memory diverged at seed " + std::to_string(seed) +
                         " k=" + std::to_string(k);
            }
        }
        if (saw_rollback) programs_with_rollback++;
    }
    report_line(5, "region idempotence (undo-log restore)", pass,
                pass ? std::to_string(programs_with_rollback) + " programs, " +
                           std::to_string(omega_checks) + " omega checks"
                     : detail);
}

void criterion6_taint_agreement() {
    bool pass = true;
    std::string detail;
    uint64_t defs_checked = 0;
    int programs = 0;

    for (uint64_t seed = 110000; pass && programs < 100; ++seed) {
        std::string src = octgen::generate_program(seed);
        Program p;
        try {
            p = parse(src);
        } catch (const std::exception&) {
            continue;
        }
        if (!validate(p).empty()) continue;
        TaintAnalysis ta = build_summary(p);
        Machine m = run_continuous(p, oracle_identity());
        if (!m.done) continue;
        programs++;
        for (const auto& [site, taint] : m.def_events) {
            defs_checked++;
            std::set<Site> dynamic_sites;
            for (uint64_t t : taint) {
                auto it = m.input_sites.find(t);
                if (it != m.input_sites.end()) dynamic_sites.insert(it->second);
            }
            std::set<Site> static_sites;
            auto dd = ta.def_deps.find(site);
            if (dd != ta.def_deps.end())
                for (const auto& d : dd->second) static_sites.insert(d.input);
            for (const auto& s : dynamic_sites) {
                if (!static_sites.count(s)) {
                    pass = false;
                    detail = "dynamic taint " + to_string(s) + " not predicted at " +
                             to_string(site) + " (seed " + std::to_string(seed) + ")";
                    break;
                }
            }
            if (!pass) break;
        }
    }
    report_line(6, "dynamic taint within static deps", pass,
                pass ? std::to_string(defs_checked) + " definitions" : detail);
}

void criterion7_oracle_agreement() {
    bool pass = true;
    std::string detail;
    int runs = 0;

    for (uint64_t seed = 120000; pass && runs < 500; ++seed) {
        Built b = build_and_transform(octgen::generate_program(seed));
        if (!b.ok) continue;
        for (int variant = 0; variant < 2 && pass; ++variant) {
            const Program& prog = variant == 0 ? b.p : b.inf.transformed;
            for (uint64_t i = 0; i < 2 && pass; ++i) {
                DetectorRun r = run_bitvector_detector(
                    prog, b.pd, FailureSchedule::random(seed * 7 + i * 3 + variant, 0.05, 1000, 5),
                    oracle_identity());
                if (!r.completed) continue;
                runs++;
                if (!r.agree()) {
                    pass = false;
                    detail = "verdicts diverged at seed " + std::to_string(seed);
                }
            }
        }
    }
    report_line(7, "bit-vector and trace checker agree", pass,
                pass ? std::to_string(runs) + " runs" : detail);
}

void criterion8_walkthroughs() {
    bool pass = true;
    std::string detail;
    try {
        // Fig 5(a): the fresh policy reaches both sensor reads through the
        // tmp callsite.
        Built a = build_and_transform(read_file(repo("benchmarks/fig5a.oct")));
        const auto& fp = std::get<FreshPolicy>(a.pd.by_id.at("fresh@main:1").v);
        std::set<Provenance> want_a{
            {{"main", 0}, {"tmp", 0}},
            {{"main", 0}, {"tmp", 1}},
        };
        if (fp.inputs != want_a) {
            pass = false;
            detail = "fig5a policy inputs differ";
        }

        // Fig 5(b): the two quoted provenance chains and a region in confirm.
        Built b = build_and_transform(read_file(repo("benchmarks/fig5b.oct")));
        const auto& cp = std::get<ConsistentPolicy>(b.pd.by_id.at("consistent@1").v);
        std::set<Provenance> want_b{
            {{"main", 1}, {"confirm", 2}, {"pres", 1}, {"sense", 0}},
            {{"main", 1}, {"confirm", 3}, {"pres", 1}, {"sense", 0}},
        };
        if (cp.inputs != want_b) {
            pass = false;
            detail = "fig5b chains differ";
        }
        if (b.inf.regions.size() != 1 || b.inf.regions[0].fn != "confirm") {
            pass = false;
            detail = "fig5b region not in confirm";
        }

        // Golden files: transformed sources and the fig5b analysis report.
        auto golden_compare = [&](const std::string& name, const std::string& actual) {
            std::string want = read_file(repo("tests/golden/" + name));
            if (want != actual) {
                pass = false;
                detail = "golden mismatch: " + name;
            }
        };
        golden_compare("fig5a.transformed.oct", pretty_print(a.inf.transformed));
        golden_compare("fig5b.transformed.oct", pretty_print(b.inf.transformed));
        {
            auto built = build_policies(b.p, b.ta);
            ojson rep = analyze_report("benchmarks/fig5b.oct", b.p, {}, b.ta, built.pd,
                                       built.warnings);
            golden_compare("fig5b.analyze.json", rep.dump(2) + "\n");
        }
        for (const auto& name : kBenchmarks) {
            Built bench = build_and_transform(read_file(repo("benchmarks/" + name + ".oct")));
            if (!bench.ok) {
                pass = false;
                detail = name + ": " + bench.error;
                continue;
            }
            golden_compare(name + ".transformed.oct", pretty_print(bench.inf.transformed));
        }
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    report_line(8, "paper walkthrough fixtures + goldens", pass, detail);
}

}  // namespace

int main() {
    auto t0 = std::chrono::steady_clock::now();
    criterion1_table4a();
    criterion2_theorem_as_test();
    criterion3_mutation();
    criterion4_refinement();
    criterion5_idempotence();
    criterion6_taint_agreement();
    criterion7_oracle_agreement();
    criterion8_walkthroughs();
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("acceptance: %d/8 passed in %.1fs\n", 8 - failures, secs);
    return failures;
}
