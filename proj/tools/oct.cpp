// Command-line driver for the oct toolchain.
//
// Subcommands:
//   analyze    parse + validate, build summaries and policies
//   transform  infer atomic regions and emit the rewritten program
//   check      verify summaries against an original and regions against a
//              transformed program (works on hand-placed regions too)
//   simulate   run intermittently under a failure schedule, report the
//              percentage of violating runs per policy
//   run        single execution with a trace dump
//   dump-cfg   control-flow graphs in DOT
//
// Exit codes: 0 ok, 1 diagnostics/errors, 2 violations found.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "oct/checker.hpp"
#include "oct/exec.hpp"
#include "oct/infer.hpp"
#include "oct/parser.hpp"
#include "oct/printer.hpp"
#include "oct/report.hpp"
#include "oct/validate.hpp"
#include "oct/verify.hpp"

namespace {

using namespace oct;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void emit_report(const std::string& path, const ojson& j) {
    if (path.empty()) return;
    write_file(path, j.dump(2) + "\n");
}

InputOracle make_oracle(const std::string& spec) {
    if (spec == "tau") return oracle_identity();
    if (spec.rfind("const:", 0) == 0) return oracle_constant(std::stoll(spec.substr(6)));
    throw CLI::ValidationError("--oracle", "expected 'tau' or 'const:<n>'");
}

struct Analysis {
    Program program;
    std::vector<Diagnostic> diags;
    TaintAnalysis taint;
    PolicyDecls pd;
    std::vector<std::string> warnings;
};

Analysis analyze_file(const std::string& path) {
    Analysis a;
    a.program = parse(read_file(path));
    a.diags = validate(a.program);
    if (!a.diags.empty()) return a;
    a.taint = build_summary(a.program);
    auto built = build_policies(a.program, a.taint);
    a.pd = std::move(built.pd);
    a.warnings = std::move(built.warnings);
    return a;
}

int print_diags(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        std::cerr << "error: " << to_string(d.site) << ": " << d.message << "\n";
    return 1;
}

int cmd_analyze(const std::string& file, const std::string& report) {
    Analysis a = analyze_file(file);
    ojson j = analyze_report(file, a.program, a.diags, a.taint, a.pd, a.warnings);
    emit_report(report, j);
    if (!a.diags.empty()) return print_diags(a.diags);
    std::cout << "functions: " << a.program.funcs.size() << ", policies: " << a.pd.by_id.size()
              << "\n";
    for (const auto& [pid, pol] : a.pd.by_id)
        std::cout << "  " << pid << ": " << pol.inputs().size() << " input provenance(s)\n";
    for (const auto& w : a.warnings) std::cout << "warning: " << w << "\n";
    return 0;
}

int cmd_transform(const std::string& file, const std::string& out_path,
                  const std::string& report) {
    Analysis a = analyze_file(file);
    if (!a.diags.empty()) return print_diags(a.diags);
    InferResult inf = infer_atomic(a.program, a.taint, a.pd);
    CheckResult sums = check_summaries(inf.transformed, a.taint.fs, a.pd);
    CheckResult regs = check_regions(inf.transformed, a.pd, inf.pm);
    std::string text = pretty_print(inf.transformed);
    if (out_path.empty()) std::cout << text;
    else write_file(out_path, text);

    ojson j;
    j["file"] = file;
    j["policy_map"] = to_json(inf.pm);
    j["regions"] = to_json(inf.regions);
    j["summary_check"] = to_json(sums);
    j["region_check"] = to_json(regs);
    j["warnings"] = ojson::array();
    for (const auto& w : inf.warnings) j["warnings"].push_back(w);
    emit_report(report, j);

    for (const auto& w : inf.warnings) std::cerr << "warning: " << w << "\n";
    if (!sums.ok || !regs.ok) {
        std::cerr << "error: transformed program failed self-check\n";
        for (const auto& d : sums.diags)
            std::cerr << "  " << d.rule << " " << to_string(d.site) << ": " << d.message << "\n";
        for (const auto& d : regs.diags)
            std::cerr << "  " << d.rule << " " << to_string(d.site) << ": " << d.message << "\n";
        return 1;
    }
    std::cerr << "inserted " << inf.regions.size() << " region(s)\n";
    return 0;
}

int cmd_check(const std::string& original, const std::string& transformed,
              const std::string& report) {
    Analysis a = analyze_file(original);
    if (!a.diags.empty()) return print_diags(a.diags);
    Program tp = parse(read_file(transformed));
    auto tdiags = validate(tp);
    if (!tdiags.empty()) return print_diags(tdiags);
    // the transformed program must be the original modulo regions
    if (!equal(strip_atomics(tp), strip_atomics(a.program))) {
        std::cerr << "error: transformed program does not match the original (regions aside)\n";
        return 1;
    }
    CheckResult sums = check_summaries(a.program, a.taint.fs, a.pd);
    CheckResult derivation;
    PolicyMap pm = derive_policy_map(tp, a.pd, derivation);
    CheckResult regs = check_regions(tp, a.pd, pm);

    ojson j;
    j["original"] = original;
    j["transformed"] = transformed;
    j["policy_map"] = to_json(pm);
    j["summary_check"] = to_json(sums);
    j["policy_map_derivation"] = to_json(derivation);
    j["region_check"] = to_json(regs);
    emit_report(report, j);

    bool ok = sums.ok && derivation.ok && regs.ok;
    std::cout << (ok ? "check: ok" : "check: FAILED") << "\n";
    if (!ok) {
        for (const auto& d : sums.diags)
            std::cerr << "  summaries: " << d.rule << " " << to_string(d.site) << ": " << d.message
                      << "\n";
        for (const auto& d : derivation.diags)
            std::cerr << "  policy map: " << d.message << "\n";
        for (const auto& d : regs.diags)
            std::cerr << "  regions: " << d.rule << " " << to_string(d.site) << ": " << d.message
                      << "\n";
    }
    return ok ? 0 : 1;
}

struct SimOptions {
    std::string mode = "transformed";      // jit | transformed | as-is
    std::string schedule = "pathological"; // pathological | exhaustive | random | none
    uint64_t seed = 1;
    uint64_t runs = 100;
    uint64_t fuel = 200000;
    uint64_t off_time = 100;
    std::string oracle = "tau";
};

int cmd_simulate(const std::string& file, const SimOptions& opt, const std::string& report) {
    Analysis a = analyze_file(file);
    if (!a.diags.empty()) return print_diags(a.diags);

    Program variant;
    if (opt.mode == "jit") {
        variant = strip_atomics(a.program);
    } else if (opt.mode == "transformed") {
        variant = infer_atomic(a.program, a.taint, a.pd).transformed;
    } else {
        variant = clone(a.program);
    }
    InputOracle oracle = make_oracle(opt.oracle);

    struct Tally {
        uint64_t runs = 0;
        uint64_t violating = 0;
        std::map<std::string, uint64_t> per_policy;
        bool detector_agreed = true;
    } tally;

    auto order = consistent_exec_order(variant, a.pd, oracle, opt.fuel);
    auto one_run = [&](FailureSchedule sched) {
        Machine m = machine_intermittent(variant, oracle, std::move(sched));
        BitVectorDetector det(a.pd, order);
        size_t seen = 0;
        uint64_t steps = 0;
        while (!m.done && !m.fault && steps++ < opt.fuel) {
            step(m);
            for (; seen < m.trace.size(); ++seen) det.process(m, m.trace[seen]);
        }
        tally.runs++;
        RunVerdicts v = check_trace(m.trace, a.pd);
        if (v.any()) tally.violating++;
        std::set<std::string> trace_fired;
        for (const auto& [pid, pv] : v.by_policy) {
            if (pv.violated) {
                tally.per_policy[pid]++;
                trace_fired.insert(pid);
            }
        }
        if (trace_fired != det.fired()) tally.detector_agreed = false;
    };

    if (opt.schedule == "none") {
        one_run(FailureSchedule::none());
    } else if (opt.schedule == "pathological") {
        auto points = pathological_points(variant, a.pd, oracle, opt.off_time, opt.fuel);
        for (const auto& pt : points) one_run(FailureSchedule::at_sites({pt}));
        if (points.empty()) one_run(FailureSchedule::none());
    } else if (opt.schedule == "exhaustive") {
        Machine dry = run_continuous(variant, oracle, opt.fuel);
        if (!dry.done) {
            std::cerr << "error: dry run did not finish within fuel\n";
            return 1;
        }
        for (uint64_t k = 0; k < dry.instr_steps; ++k)
            for (uint64_t n : {uint64_t{1}, uint64_t{10}, uint64_t{1000}})
                one_run(FailureSchedule::exhaustive(k, n));
    } else if (opt.schedule == "random") {
        for (uint64_t i = 0; i < opt.runs; ++i)
            one_run(FailureSchedule::random(opt.seed + i, 0.03, 1000, 6));
    } else {
        std::cerr << "error: unknown schedule '" << opt.schedule << "'\n";
        return 1;
    }

    double percent = tally.runs ? 100.0 * (double)tally.violating / (double)tally.runs : 0.0;
    std::cout << "file: " << file << "\nmode: " << opt.mode << ", schedule: " << opt.schedule
              << "\nruns: " << tally.runs << ", violating: " << tally.violating << " ("
              << percent << "%)\n";
    for (const auto& [pid, count] : tally.per_policy)
        std::cout << "  " << pid << ": " << count << "/" << tally.runs << "\n";
    if (!tally.detector_agreed)
        std::cout << "warning: bit-vector detector disagreed with the trace checker\n";

    ojson j;
    j["file"] = file;
    j["mode"] = opt.mode;
    j["schedule"] = opt.schedule;
    j["runs"] = tally.runs;
    j["violating_runs"] = tally.violating;
    j["percent_violating"] = percent;
    j["policies"] = ojson::object();
    for (const auto& [pid, count] : tally.per_policy) j["policies"][pid] = count;
    j["detector_agreed"] = tally.detector_agreed;
    emit_report(report, j);
    return tally.violating ? 2 : 0;
}

int cmd_run(const std::string& file, const SimOptions& opt, bool show_trace) {
    Analysis a = analyze_file(file);
    if (!a.diags.empty()) return print_diags(a.diags);
    Program variant;
    if (opt.mode == "jit") variant = strip_atomics(a.program);
    else if (opt.mode == "transformed") variant = infer_atomic(a.program, a.taint, a.pd).transformed;
    else variant = clone(a.program);

    FailureSchedule sched = FailureSchedule::none();
    if (opt.schedule == "random") sched = FailureSchedule::random(opt.seed, 0.03, 1000, 6);
    else if (opt.schedule == "pathological") {
        auto points = pathological_points(variant, a.pd, make_oracle(opt.oracle), opt.off_time);
        if (!points.empty()) sched = FailureSchedule::at_sites({points[0]});
    }
    Machine m = run_intermittent(variant, make_oracle(opt.oracle), sched, opt.fuel);
    if (show_trace) std::cout << dump_trace(m.trace);
    if (m.fault) {
        std::cout << "fault: " << *m.fault << "\n";
        return 1;
    }
    if (!m.done) {
        std::cout << "fuel exhausted\n";
        return 1;
    }
    if (m.result && m.result->value.kind == RtValue::Kind::Int)
        std::cout << "result: " << m.result->value.num << " (tau " << m.tau << ")\n";
    RunVerdicts v = check_trace(m.trace, a.pd);
    for (const auto& [pid, pv] : v.by_policy)
        if (pv.violated) std::cout << "violated: " << pid << "\n";
    return v.any() ? 2 : 0;
}

int cmd_dump_cfg(const std::string& file, const std::string& fn) {
    Program p = parse(read_file(file));
    for (const auto& f : p.funcs) {
        if (!fn.empty() && f.name != fn) continue;
        std::cout << to_dot(build_cfg(f));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oct: atomic-region inference and intermittent execution for .oct programs"};
    app.require_subcommand(1);

    std::string file, out_path, report, original, transformed, fn_filter;
    SimOptions sim;
    bool show_trace = false;

    auto* analyze = app.add_subcommand("analyze", "build summaries and policies");
    analyze->add_option("file", file)->required();
    analyze->add_option("--report", report, "write a JSON report");

    auto* transform = app.add_subcommand("transform", "infer and insert atomic regions");
    transform->add_option("file", file)->required();
    transform->add_option("-o,--output", out_path, "write the transformed program here");
    transform->add_option("--report", report);

    auto* check = app.add_subcommand("check", "verify a (hand-)transformed program");
    check->add_option("original", original)->required();
    check->add_option("transformed", transformed)->required();
    check->add_option("--report", report);

    auto* simulate = app.add_subcommand("simulate", "failure-injection campaign");
    simulate->add_option("file", file)->required();
    simulate->add_option("--mode", sim.mode, "jit | transformed | as-is");
    simulate->add_option("--schedule", sim.schedule, "pathological | exhaustive | random | none");
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--runs", sim.runs);
    simulate->add_option("--fuel", sim.fuel);
    simulate->add_option("--off-time", sim.off_time);
    simulate->add_option("--oracle", sim.oracle, "tau | const:<n>");
    simulate->add_option("--report", report);

    auto* runc = app.add_subcommand("run", "single execution with trace dump");
    runc->add_option("file", file)->required();
    runc->add_option("--mode", sim.mode);
    runc->add_option("--schedule", sim.schedule);
    runc->add_option("--seed", sim.seed);
    runc->add_option("--fuel", sim.fuel);
    runc->add_option("--oracle", sim.oracle);
    runc->add_flag("--trace", show_trace, "dump the observation trace");

    auto* dump = app.add_subcommand("dump-cfg", "control-flow graphs in DOT");
    dump->add_option("file", file)->required();
    dump->add_option("--fn", fn_filter, "only this function");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze) return cmd_analyze(file, report);
        if (*transform) return cmd_transform(file, out_path, report);
        if (*check) return cmd_check(original, transformed, report);
        if (*simulate) return cmd_simulate(file, sim, report);
        if (*runc) {
            if (sim.schedule == "pathological" && !runc->count("--schedule")) sim.schedule = "none";
            return cmd_run(file, sim, show_trace);
        }
        if (*dump) return cmd_dump_cfg(file, fn_filter);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
