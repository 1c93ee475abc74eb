#include <catch2/catch_amalgamated.hpp>

#include "oct/exec.hpp"
#include "oct/parser.hpp"
#include "oct/validate.hpp"
#include "support/gen.hpp"
#include "support/refinterp.hpp"
#include "support/util.hpp"

using namespace oct;

static const MemCell* find_mem(const Machine& m, const std::string& name) {
    for (auto it = m.mem.rbegin(); it != m.mem.rend(); ++it)
        if (it->name == name) return &*it;
    return nullptr;
}

TEST_CASE("input binds oracle value at current tau") {
    Program p = parse(
        "input s;\n"
        "fn main() { skip; skip; skip; skip; skip; let x = s(); ret x; }");
    Machine m = machine_continuous(p, oracle_identity());
    for (int i = 0; i < 6; ++i) step(m);
    const MemCell* x = find_mem(m, "x");
    REQUIRE(x);
    CHECK(x->scalar.value == RtValue::of_int(5));
    CHECK(x->scalar.taint == std::set<uint64_t>{5});
    CHECK(m.tau == 6);
}

TEST_CASE("skip advances tau only") {
    Program p = parse("fn main() { skip; ret 0; }");
    Machine m = machine_continuous(p, oracle_identity());
    step(m);
    CHECK(m.tau == 1);
    CHECK(m.mem.empty());
}

TEST_CASE("binary expressions union taint") {
    Program p = parse(
        "input s;\n"
        "fn main() { let a = s(); let b = s(); let c = a + b; ret c; }");
    Machine m = run_continuous(p, oracle_identity());
    const MemCell* c = find_mem(m, "c");
    REQUIRE(c);
    CHECK(c->scalar.taint == std::set<uint64_t>{0, 1});
}

TEST_CASE("fresh declarations emit fresh and use observations") {
    Program p = parse(
        "input s;\n"
        "fn main() { let t = s(); let fresh x = t; let u = x + 1; ret u; }");
    Machine m = run_continuous(p, oracle_identity());
    bool fresh_seen = false, use_seen = false;
    for (const auto& o : m.trace) {
        if (o.kind == Observation::Kind::Fresh) {
            fresh_seen = true;
            CHECK(o.site == Site{"main", 1});
            CHECK(o.taint == std::set<uint64_t>{0});
        }
        if (o.kind == Observation::Kind::Use) {
            use_seen = true;
            CHECK(o.site == Site{"main", 2});
            CHECK(o.decl_tau == 1);
        }
    }
    CHECK(fresh_seen);
    CHECK(use_seen);
}

TEST_CASE("weather alarm fires under a hot continuous run") {
    Program p = parse(octtest::read_file(octtest::repo_path("benchmarks/weather.oct")));
    Machine m = run_continuous(p, oracle_constant(100));
    const MemCell* alarm = find_mem(m, "alarm");
    REQUIRE(alarm);
    CHECK(alarm->scalar.value == RtValue::of_int(1));
    Machine cold = run_continuous(p, oracle_constant(10));
    CHECK(find_mem(cold, "alarm")->scalar.value == RtValue::of_int(0));
}

TEST_CASE("trivial main produces no semantic observations") {
    Program p = parse("fn main() { ret 0; }");
    Machine m = run_continuous(p, oracle_identity());
    for (const auto& o : m.trace) CHECK(o.kind == Observation::Kind::Instr);
}

TEST_CASE("values agree with the reference interpreter on the corpus") {
    int compared = 0;
    for (uint64_t seed = 700; compared < 60; ++seed) {
        std::string src = octgen::generate_program(seed);
        Program p = parse(src);
        REQUIRE(validate(p).empty());
        INFO("seed " << seed << "\n" << src);
        Machine m = run_continuous(p, oracle_constant(42));
        octtest::RefInterp ref(p, [](uint64_t) { return 42LL; });
        auto [ret, visible] = ref.run();
        REQUIRE(m.done);
        REQUIRE(m.result);
        if (m.result->value.kind == RtValue::Kind::Int) CHECK(m.result->value.num == ret);
        for (const auto& [name, cell] : visible) {
            const MemCell* mc = find_mem(m, name);
            REQUIRE(mc);
            if (cell.is_array) {
                REQUIRE(mc->is_array);
                REQUIRE(mc->cells.size() == cell.arr.size());
                for (size_t i = 0; i < cell.arr.size(); ++i)
                    CHECK(mc->cells[i].value.num == cell.arr[i]);
            } else if (!cell.is_ref && !cell.is_bool) {
                CHECK(mc->scalar.value.num == cell.num);
            }
        }
        compared++;
    }
}

TEST_CASE("jit failure checkpoints and resumes exactly") {
    Program p = parse(
        "input s;\n"
        "fn main() { let a = 1; let b = a + 2; let c = b * 3; ret c; }");
    FailureSchedule s = FailureSchedule::at_sites({PlannedFailure{{"main", 2}, 1, 3}});
    Machine m = run_intermittent(p, oracle_identity(), s);
    REQUIRE(m.done);
    CHECK(m.result->value == RtValue::of_int(9));
    int reboots = 0;
    for (const auto& o : m.trace)
        if (o.kind == Observation::Kind::Reboot) {
            reboots++;
            CHECK(o.off_time == 3);
            CHECK_FALSE(o.rolled_back);
        }
    CHECK(reboots == 1);
    // lowpower (+1) and reboot (+3) stretch tau by 4 relative to continuous
    Machine c = run_continuous(p, oracle_identity());
    CHECK(m.tau == c.tau + 4);
}

TEST_CASE("zero off-time reboot leaves state identical modulo tau") {
    Program p = parse("input s; fn main() { let a = s(); let b = a + 1; ret b; }");
    FailureSchedule s = FailureSchedule::at_sites({PlannedFailure{{"main", 1}, 1, 0}});
    Machine m = run_intermittent(p, oracle_constant(7), s);
    Machine c = run_continuous(p, oracle_constant(7));
    CHECK(memory_values_equal(m.mem, c.mem));
    CHECK(m.result->value == c.result->value);
}

TEST_CASE("mid-region failure rolls back to region entry") {
    Program p = parse(
        "input s;\n"
        "fn main() {\n"
        "  let x = 0;\n"
        "  atomic(1, {x, y, z}) {\n"
        "    let y = s();\n"
        "    x := y + 1;\n"
        "    let z = s();\n"
        "  }\n"
        "  let w = x + z;\n"
        "  ret w;\n"
        "}");
    REQUIRE(validate(p).empty());
    // fail right before the second input (inside the region)
    FailureSchedule s = FailureSchedule::at_sites({PlannedFailure{{"main", 3}, 1, 50}});
    Machine m = run_intermittent(p, oracle_constant(5), s);
    REQUIRE(m.done);
    Machine c = run_continuous(p, oracle_constant(5));
    CHECK(memory_values_equal(m.mem, c.mem));
    bool rolled = false;
    for (const auto& o : m.trace)
        if (o.kind == Observation::Kind::Reboot && o.rolled_back) rolled = true;
    CHECK(rolled);
}

TEST_CASE("undo log restores omega locations on rollback") {
    Program p = parse(
        "input s;\n"
        "fn main() {\n"
        "  let x = 11;\n"
        "  atomic(1, {x, t}) {\n"
        "    x := 99;\n"
        "    let t = s();\n"
        "  }\n"
        "  ret x;\n"
        "}");
    FailureSchedule s = FailureSchedule::at_sites({PlannedFailure{{"main", 2}, 1, 5}});
    Machine m = machine_intermittent(p, oracle_constant(3), s);
    while (!m.done && !m.fault) {
        step(m);
        if (!m.trace.empty() && m.trace.back().kind == Observation::Kind::Reboot &&
            m.trace.back().rolled_back)
            break;
    }
    const MemCell* x = find_mem(m, "x");
    REQUIRE(x);
    CHECK(x->scalar.value == RtValue::of_int(11));  // entry value restored
    RunOutcome rest = run(m);
    CHECK(rest.completed);
    CHECK(m.result->value == RtValue::of_int(99));
}

TEST_CASE("nested regions roll back to the outermost start") {
    Program p = parse(
        "input s;\n"
        "fn main() {\n"
        "  let a = 0;\n"
        "  atomic(1, {a, b, c}) {\n"
        "    let b = s();\n"
        "    atomic(2, {a, c}) {\n"
        "      a := 7;\n"
        "      let c = s();\n"
        "    }\n"
        "  }\n"
        "  ret a;\n"
        "}");
    REQUIRE(validate(p).empty());
    FailureSchedule s = FailureSchedule::at_sites({PlannedFailure{{"main", 3}, 1, 9}});
    Machine m = run_intermittent(p, oracle_constant(2), s);
    REQUIRE(m.done);
    // committed run re-executed both region bodies; a ends 7
    CHECK(m.result->value == RtValue::of_int(7));
    std::map<int, int> depth;
    for (const auto& o : m.trace) {
        if (o.kind == Observation::Kind::BeginAtom) depth[o.aid]++;
        if (o.kind == Observation::Kind::EndAtom) depth[o.aid]--;
    }
    CHECK(depth[1] == 0);
    // inner begin executed twice (before and after rollback), one end committed
    CHECK(depth[2] == 1);
}

TEST_CASE("region can cover the function return") {
    Program p = parse(
        "input s;\n"
        "fn main() {\n"
        "  atomic(1, {t}) {\n"
        "    let t = s();\n"
        "    ret t;\n"
        "  }\n"
        "}");
    Machine m = run_intermittent(p, oracle_constant(4), FailureSchedule::none());
    REQUIRE(m.done);
    CHECK(m.result->value == RtValue::of_int(4));
    bool end_seen = false;
    for (const auto& o : m.trace)
        if (o.kind == Observation::Kind::EndAtom) end_seen = true;
    CHECK(end_seen);
}

TEST_CASE("no scheduled failures: intermittent equals continuous") {
    for (uint64_t seed = 900; seed < 930; ++seed) {
        std::string src = octgen::generate_program(seed);
        Program p = parse(src);
        INFO("seed " << seed << "\n" << src);
        Machine a = run_continuous(p, oracle_identity());
        Machine b = run_intermittent(p, oracle_identity(), FailureSchedule::none());
        REQUIRE(a.done);
        REQUIRE(b.done);
        CHECK(memory_values_equal(a.mem, b.mem));
        CHECK(a.tau == b.tau);
        REQUIRE(a.trace.size() == b.trace.size());
        for (size_t i = 0; i < a.trace.size(); ++i) {
            CHECK(a.trace[i].kind == b.trace[i].kind);
            CHECK(a.trace[i].tau == b.trace[i].tau);
            CHECK(a.trace[i].site == b.trace[i].site);
        }
    }
}

TEST_CASE("monotone tau across failures") {
    Program p = parse(octtest::read_file(octtest::repo_path("benchmarks/fig5b.oct")));
    Machine m = machine_intermittent(p, oracle_identity(), FailureSchedule::random(3, 0.05, 100, 4));
    uint64_t prev = 0;
    while (!m.done && !m.fault) {
        step(m);
        CHECK(m.tau >= prev);
        prev = m.tau;
    }
    REQUIRE(m.done);
}

TEST_CASE("execution faults are reported distinctly") {
    Program p = parse("fn main() { let a = [1, 2]; let x = a[5]; ret x; }");
    Machine m = run_continuous(p, oracle_identity());
    REQUIRE(m.fault);
    CHECK(m.fault->find("out of bounds") != std::string::npos);
    Program q = parse("fn main() { let x = 1 / 0; ret x; }");
    Machine mq = run_continuous(q, oracle_identity());
    REQUIRE(mq.fault);
}
