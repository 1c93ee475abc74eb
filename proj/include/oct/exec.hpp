#pragma once

// Execution engines over one machine representation:
//
//   * continuous: taint-augmented small-step semantics with fresh/cnst/use
//     observations (power failures disabled);
//   * intermittent: the JIT + atomic-regions model. A low-power signal in
//     JIT mode checkpoints the volatile context (stack and current command)
//     into κ; in atomic mode κ already holds the region-entry snapshot and
//     the undo log. Reboot restores from κ and advances τ by the picked n.
//
// Nonvolatile memory is a stack of bindings; function return truncates to
// the height captured at the call. Region rollback truncates to the height
// at region entry and re-applies the undo log, so in-region bindings vanish
// and overwritten ω locations regain their entry values.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oct/ast.hpp"
#include "oct/schedule.hpp"

namespace oct {

using InputOracle = std::function<long long(uint64_t)>;

inline InputOracle oracle_identity() {
    return [](uint64_t tau) { return (long long)tau; };
}
inline InputOracle oracle_constant(long long v) {
    return [v](uint64_t) { return v; };
}

// Runtime values. References resolve to a memory slot when created.
struct RtValue {
    enum class Kind { Int, Bool, Ref };
    Kind kind = Kind::Int;
    long long num = 0;
    bool flag = false;
    size_t slot = 0;          // Ref
    bool is_cell = false;     // Ref into an array cell
    long long cell_index = 0;

    static RtValue of_int(long long n) { return {Kind::Int, n, false, 0, false, 0}; }
    static RtValue of_bool(bool b) { return {Kind::Bool, 0, b, 0, false, 0}; }

    bool operator==(const RtValue&) const = default;
};

struct FreshTag {
    Site decl;
    uint64_t tau = 0;
};

struct TaintedValue {
    RtValue value;
    std::set<uint64_t> taint;  // timestamps of input operations
};

struct MemCell {
    std::string name;
    bool is_array = false;
    TaintedValue scalar;
    std::vector<TaintedValue> cells;
    std::optional<FreshTag> fresh;
};

struct Observation {
    enum class Kind { Fresh, Cnst, Use, Input, Instr, BeginAtom, EndAtom, Reboot };
    uint64_t tau = 0;
    Kind kind = Kind::Instr;
    Site site;                    // fresh/cnst/use/input/instr
    std::set<uint64_t> taint;     // fresh/cnst
    long long set_id = 0;         // cnst
    uint64_t decl_tau = 0;        // use: τ of the fresh declaration
    int aid = 0;                  // begin/end atom
    uint64_t off_time = 0;        // reboot
    bool rolled_back = false;     // reboot happened in atomic mode
};

inline std::string to_string(const Observation& o) {
    using K = Observation::Kind;
    std::string head = "(" + std::to_string(o.tau) + ", ";
    switch (o.kind) {
        case K::Fresh: {
            std::string ts;
            for (uint64_t t : o.taint) ts += (ts.empty() ? "" : " ") + std::to_string(t);
            return head + "fresh, " + o.site.fn + ", " + std::to_string(o.site.label) + ", {" +
                   ts + "})";
        }
        case K::Cnst: {
            std::string ts;
            for (uint64_t t : o.taint) ts += (ts.empty() ? "" : " ") + std::to_string(t);
            return head + "cnst, " + o.site.fn + ", " + std::to_string(o.site.label) + ", " +
                   std::to_string(o.set_id) + ", {" + ts + "})";
        }
        case K::Use:
            return head + "use, " + o.site.fn + ", " + std::to_string(o.site.label) + ", " +
                   std::to_string(o.decl_tau) + ")";
        case K::Input:
            return head + "input, " + o.site.fn + ", " + std::to_string(o.site.label) + ")";
        case K::Instr:
            return head + "instr, " + o.site.fn + ", " + std::to_string(o.site.label) + ")";
        case K::BeginAtom: return head + "begin_atom, " + std::to_string(o.aid) + ")";
        case K::EndAtom: return head + "end_atom, " + std::to_string(o.aid) + ")";
        case K::Reboot:
            return head + std::string("reboot, ") + (o.rolled_back ? "atom" : "jit") + ", " +
                   std::to_string(o.off_time) + ")";
    }
    return head + "?)";
}

struct BlockFrame {
    const Block* block = nullptr;
    size_t idx = 0;
};
struct ReturnFrame {
    std::string callee;
    Site callsite;
    std::string binder;
    size_t mem_height = 0;
};
struct EndAtomicFrame {
    int aid = 0;
};
using Frame = std::variant<BlockFrame, ReturnFrame, EndAtomicFrame>;

struct Context {
    enum class Mode { Jit, Atom };
    Mode mode = Mode::Jit;
    std::vector<Frame> frames;
    // atomic contexts only:
    std::vector<std::pair<size_t, MemCell>> undo;  // slot → saved cell
    size_t mem_height = 0;
    int n_atom = 0;
    int aid = 0;
};

struct ExecFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Machine {
    const Program* prog = nullptr;
    InputOracle oracle;
    FailureSchedule schedule;
    bool intermittent = false;

    uint64_t tau = 0;
    std::vector<MemCell> mem;
    std::vector<Frame> frames;
    Context kappa;
    std::vector<int> open_regions;

    std::vector<Observation> trace;
    std::map<uint64_t, Site> input_sites;        // τ → input instruction
    std::map<uint64_t, Provenance> input_chains; // τ → dynamic call chain
    // every executed definition with the taint it stored
    std::vector<std::pair<Site, std::set<uint64_t>>> def_events;

    std::map<Site, int> occurrences;
    uint64_t instr_steps = 0;

    bool pending_reboot = false;
    uint64_t pending_off = 0;

    bool done = false;
    std::optional<std::string> fault;
    std::optional<TaintedValue> result;

    std::string current_fn() const {
        for (auto it = frames.rbegin(); it != frames.rend(); ++it)
            if (auto* rf = std::get_if<ReturnFrame>(&*it)) return rf->callee;
        return "main";
    }

    Provenance current_chain(Site leaf) const {
        Provenance p;
        for (const auto& f : frames)
            if (auto* rf = std::get_if<ReturnFrame>(&f)) p.push_back(rf->callsite);
        p.push_back(leaf);
        return p;
    }
};

namespace detail {

class Engine {
  public:
    explicit Engine(Machine& m) : m_(m) {}

    void step() {
        if (m_.done || m_.fault) return;
        try {
            if (m_.pending_reboot) {
                reboot();
                return;
            }
            // Unwind exhausted block frames (administrative).
            while (!m_.frames.empty()) {
                Frame& top = m_.frames.back();
                if (auto* bf = std::get_if<BlockFrame>(&top)) {
                    if (bf->idx >= bf->block->stmts.size()) {
                        m_.frames.pop_back();
                        continue;
                    }
                    dispatch(bf->block->stmts[bf->idx]);
                    return;
                }
                if (std::holds_alternative<EndAtomicFrame>(top)) {
                    int aid = std::get<EndAtomicFrame>(top).aid;
                    if (check_failure(Site{m_.current_fn(), -1})) return;
                    m_.frames.pop_back();
                    end_atomic(aid);
                    return;
                }
                throw ExecFault("return frame with no ret executed");
            }
            throw ExecFault("empty continuation");
        } catch (const ExecFault& e) {
            m_.fault = e.what();
            m_.done = true;
        }
    }

  private:
    // ---- power failures ----------------------------------------------------

    bool check_failure(const Site& site) {
        if (!m_.intermittent) return false;
        int occ = site.label >= 0 ? m_.occurrences[site] + 1 : 0;
        auto n = m_.schedule.should_fail(site, occ, m_.instr_steps);
        if (!n) return false;
        power_low(*n);
        return true;
    }

    void power_low(uint64_t n) {
        if (m_.kappa.mode == Context::Mode::Jit) {
            m_.kappa.frames = m_.frames;  // checkpoint volatile context
        }
        m_.tau += 1;
        m_.pending_reboot = true;
        m_.pending_off = n;
    }

    void reboot() {
        m_.tau += m_.pending_off;
        Observation o;
        o.tau = m_.tau;
        o.kind = Observation::Kind::Reboot;
        o.off_time = m_.pending_off;
        if (m_.kappa.mode == Context::Mode::Atom) {
            o.rolled_back = true;
            m_.mem.resize(m_.kappa.mem_height);
            for (const auto& [slot, cell] : m_.kappa.undo) m_.mem[slot] = cell;
            m_.frames = m_.kappa.frames;
            m_.kappa.n_atom = 0;
            m_.open_regions = {m_.kappa.aid};
        } else {
            m_.frames = m_.kappa.frames;
            m_.open_regions.clear();
        }
        m_.trace.push_back(std::move(o));
        m_.pending_reboot = false;
    }

    // ---- memory ------------------------------------------------------------

    MemCell* lookup(const std::string& name) {
        for (auto it = m_.mem.rbegin(); it != m_.mem.rend(); ++it)
            if (it->name == name) return &*it;
        return nullptr;
    }
    size_t lookup_slot(const std::string& name) {
        for (size_t i = m_.mem.size(); i-- > 0;)
            if (m_.mem[i].name == name) return i;
        throw ExecFault("unbound variable '" + name + "'");
    }

    // ---- evaluation --------------------------------------------------------

    struct EvalResult {
        RtValue value;
        std::set<uint64_t> taint;
    };

    void note_use(const MemCell& cell, Site use_site) {
        if (!cell.fresh) return;
        Observation o;
        o.tau = m_.tau;
        o.kind = Observation::Kind::Use;
        o.site = use_site;
        o.decl_tau = cell.fresh->tau;
        pending_uses_.push_back(std::move(o));
    }

    EvalResult eval_value(const Value& v, Site site) {
        switch (v.kind) {
            case Value::Kind::Int: return {RtValue::of_int(v.num), {}};
            case Value::Kind::Bool: return {RtValue::of_bool(v.flag), {}};
            case Value::Kind::RefVar: {
                size_t slot = lookup_slot(v.name);
                RtValue r;
                r.kind = RtValue::Kind::Ref;
                r.slot = slot;
                return {r, {}};
            }
            case Value::Kind::RefCell: {
                size_t slot = lookup_slot(v.name);
                if (!m_.mem[slot].is_array) throw ExecFault("'" + v.name + "' is not an array");
                RtValue r;
                r.kind = RtValue::Kind::Ref;
                r.slot = slot;
                r.is_cell = true;
                r.cell_index = v.num;
                return {r, {}};
            }
        }
        throw ExecFault("bad value");
    }

    EvalResult eval(const Expr& e, Site site) {
        return std::visit(
            [&](const auto& n) -> EvalResult {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, ExprVar>) {
                    MemCell* c = lookup(n.name);
                    if (!c) throw ExecFault("unbound variable '" + n.name + "'");
                    if (c->is_array) throw ExecFault("array '" + n.name + "' read as scalar");
                    note_use(*c, site);
                    return {c->scalar.value, c->scalar.taint};
                } else if constexpr (std::is_same_v<T, ExprLit>) {
                    return eval_value(n.value, site);
                } else if constexpr (std::is_same_v<T, ExprArrRead>) {
                    EvalResult idx = eval(*n.index, site);
                    if (idx.value.kind != RtValue::Kind::Int)
                        throw ExecFault("array index not an integer");
                    MemCell* c = lookup(n.arr);
                    if (!c) throw ExecFault("unbound array '" + n.arr + "'");
                    if (!c->is_array) throw ExecFault("'" + n.arr + "' is not an array");
                    long long i = idx.value.num;
                    if (i < 0 || (size_t)i >= c->cells.size())
                        throw ExecFault("array index out of bounds");
                    EvalResult out{c->cells[i].value, c->cells[i].taint};
                    out.taint.insert(idx.taint.begin(), idx.taint.end());
                    return out;
                } else if constexpr (std::is_same_v<T, ExprBin>) {
                    EvalResult l = eval(*n.lhs, site);
                    EvalResult r = eval(*n.rhs, site);
                    EvalResult out;
                    out.taint = l.taint;
                    out.taint.insert(r.taint.begin(), r.taint.end());
                    out.value = apply_bin(n.op, l.value, r.value);
                    return out;
                } else {
                    EvalResult v = eval(*n.operand, site);
                    EvalResult out;
                    out.taint = v.taint;
                    if (n.op == UnOp::Neg) {
                        if (v.value.kind != RtValue::Kind::Int) throw ExecFault("'-' on non-int");
                        out.value = RtValue::of_int(-v.value.num);
                    } else {
                        if (v.value.kind != RtValue::Kind::Bool) throw ExecFault("'!' on non-bool");
                        out.value = RtValue::of_bool(!v.value.flag);
                    }
                    return out;
                }
            },
            e.node);
    }

    RtValue apply_bin(BinOp op, const RtValue& l, const RtValue& r) {
        auto need_int = [&]() {
            if (l.kind != RtValue::Kind::Int || r.kind != RtValue::Kind::Int)
                throw ExecFault("arithmetic on non-integers");
        };
        auto need_bool = [&]() {
            if (l.kind != RtValue::Kind::Bool || r.kind != RtValue::Kind::Bool)
                throw ExecFault("logic on non-booleans");
        };
        switch (op) {
            case BinOp::Add: need_int(); return RtValue::of_int(l.num + r.num);
            case BinOp::Sub: need_int(); return RtValue::of_int(l.num - r.num);
            case BinOp::Mul: need_int(); return RtValue::of_int(l.num * r.num);
            case BinOp::Div:
                need_int();
                if (r.num == 0) throw ExecFault("division by zero");
                return RtValue::of_int(l.num / r.num);
            case BinOp::Lt: need_int(); return RtValue::of_bool(l.num < r.num);
            case BinOp::Le: need_int(); return RtValue::of_bool(l.num <= r.num);
            case BinOp::Gt: need_int(); return RtValue::of_bool(l.num > r.num);
            case BinOp::Ge: need_int(); return RtValue::of_bool(l.num >= r.num);
            case BinOp::Eq:
                if (l.kind != r.kind) throw ExecFault("'==' on mixed types");
                return RtValue::of_bool(l == r);
            case BinOp::Ne:
                if (l.kind != r.kind) throw ExecFault("'!=' on mixed types");
                return RtValue::of_bool(!(l == r));
            case BinOp::And: need_bool(); return RtValue::of_bool(l.flag && r.flag);
            case BinOp::Or: need_bool(); return RtValue::of_bool(l.flag || r.flag);
        }
        throw ExecFault("bad operator");
    }

    void flush_uses() {
        for (auto& o : pending_uses_) m_.trace.push_back(std::move(o));
        pending_uses_.clear();
    }

    // ---- dispatch ----------------------------------------------------------

    void charge_step(Site site) {
        m_.instr_steps++;
        if (site.label >= 0) {
            m_.occurrences[site]++;
            Observation o;
            o.tau = m_.tau;
            o.kind = Observation::Kind::Instr;
            o.site = site;
            m_.trace.push_back(std::move(o));
        }
    }

    void advance_top() {
        auto& bf = std::get<BlockFrame>(m_.frames.back());
        bf.idx++;
    }

    void dispatch(const Command& cmd) {
        Site site{m_.current_fn(), cmd.label};
        // ret may first have to close regions opened in this activation
        if (std::holds_alternative<CmdRet>(cmd.node)) {
            if (auto idx = open_end_frame_above_return()) {
                if (check_failure(Site{site.fn, -1})) return;
                int aid = std::get<EndAtomicFrame>(m_.frames[*idx]).aid;
                m_.frames.erase(m_.frames.begin() + (long)*idx);
                end_atomic(aid);
                return;
            }
        }
        if (check_failure(site)) return;
        charge_step(site);
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, InstrSkip>) {
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<T, InstrAssign>) {
                    EvalResult r = eval(n.rhs, site);
                    flush_uses();
                    size_t slot = lookup_slot(n.var);
                    if (m_.mem[slot].is_array) throw ExecFault("assign to array");
                    m_.mem[slot].scalar = {r.value, r.taint};
                    m_.def_events.emplace_back(site, r.taint);
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<T, InstrArrAssign>) {
                    EvalResult idx = eval(n.index, site);
                    EvalResult r = eval(n.rhs, site);
                    flush_uses();
                    if (idx.value.kind != RtValue::Kind::Int)
                        throw ExecFault("array index not an integer");
                    size_t slot = lookup_slot(n.arr);
                    if (!m_.mem[slot].is_array) throw ExecFault("'" + n.arr + "' is not an array");
                    long long i = idx.value.num;
                    if (i < 0 || (size_t)i >= m_.mem[slot].cells.size())
                        throw ExecFault("array index out of bounds");
                    std::set<uint64_t> t = r.taint;
                    t.insert(idx.taint.begin(), idx.taint.end());
                    m_.mem[slot].cells[i] = {r.value, t};
                    m_.def_events.emplace_back(site, t);
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<T, InstrDerefAssign>) {
                    MemCell* rc = lookup(n.refvar);
                    if (!rc) throw ExecFault("unbound variable '" + n.refvar + "'");
                    note_use(*rc, site);
                    if (rc->is_array || rc->scalar.value.kind != RtValue::Kind::Ref)
                        throw ExecFault("'" + n.refvar + "' is not a reference");
                    RtValue ref = rc->scalar.value;
                    EvalResult r = eval(n.rhs, site);
                    flush_uses();
                    if (ref.slot >= m_.mem.size()) throw ExecFault("dangling reference");
                    MemCell& target = m_.mem[ref.slot];
                    if (ref.is_cell) {
                        if (!target.is_array) throw ExecFault("reference target not an array");
                        if (ref.cell_index < 0 || (size_t)ref.cell_index >= target.cells.size())
                            throw ExecFault("array index out of bounds");
                        target.cells[ref.cell_index] = {r.value, r.taint};
                    } else {
                        if (target.is_array) throw ExecFault("reference target is an array");
                        target.scalar = {r.value, r.taint};
                        target.fresh.reset();
                    }
                    m_.def_events.emplace_back(site, r.taint);
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<T, CmdLet>) {
                    dispatch_let(cmd, n, site);
                } else if constexpr (std::is_same_v<T, CmdIf>) {
                    EvalResult c = eval(n.cond, site);
                    flush_uses();
                    if (c.value.kind != RtValue::Kind::Bool)
                        throw ExecFault("if condition not a boolean");
                    advance_top();
                    const Block* arm = c.value.flag ? &n.then_b : &n.else_b;
                    m_.frames.push_back(BlockFrame{arm, 0});
                    m_.tau++;
                } else if constexpr (std::is_same_v<T, CmdAtomic>) {
                    advance_top();
                    begin_atomic(n);
                } else {  // CmdRet
                    do_return(n, site);
                }
            },
            cmd.node);
    }

    std::optional<size_t> open_end_frame_above_return() {
        for (size_t i = m_.frames.size(); i-- > 0;) {
            if (std::holds_alternative<ReturnFrame>(m_.frames[i])) return std::nullopt;
            if (std::holds_alternative<EndAtomicFrame>(m_.frames[i])) return i;
        }
        return std::nullopt;
    }

    void dispatch_let(const Command& cmd, const CmdLet& n, Site site) {
        std::visit(
            [&](const auto& r) {
                using R = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<R, LetPlain>) {
                    EvalResult v = eval(r.rhs, site);
                    flush_uses();
                    push_scalar(n.var, v.value, v.taint, std::nullopt);
                    m_.def_events.emplace_back(site, v.taint);
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<R, LetInput>) {
                    long long v = m_.oracle(m_.tau);
                    m_.input_sites[m_.tau] = site;
                    m_.input_chains[m_.tau] = m_.current_chain(site);
                    Observation o;
                    o.tau = m_.tau;
                    o.kind = Observation::Kind::Input;
                    o.site = site;
                    m_.trace.push_back(std::move(o));
                    push_scalar(n.var, RtValue::of_int(v), {m_.tau}, std::nullopt);
                    m_.def_events.emplace_back(site, std::set<uint64_t>{m_.tau});
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<R, LetArray>) {
                    MemCell cell;
                    cell.name = n.var;
                    cell.is_array = true;
                    for (const auto& e : r.elems) {
                        EvalResult v = eval(e, site);
                        if (v.value.kind != RtValue::Kind::Int)
                            throw ExecFault("array elements must be integers");
                        cell.cells.push_back({v.value, v.taint});
                    }
                    flush_uses();
                    std::set<uint64_t> array_taint;
                    for (const auto& c : cell.cells)
                        array_taint.insert(c.taint.begin(), c.taint.end());
                    m_.def_events.emplace_back(site, std::move(array_taint));
                    m_.mem.push_back(std::move(cell));
                    advance_top();
                    m_.tau++;
                } else if constexpr (std::is_same_v<R, LetCall>) {
                    do_call(cmd, n, r, site);
                } else if constexpr (std::is_same_v<R, LetFresh>) {
                    EvalResult v = eval(r.rhs, site);
                    flush_uses();
                    Observation o;
                    o.tau = m_.tau;
                    o.kind = Observation::Kind::Fresh;
                    o.site = site;
                    o.taint = v.taint;
                    m_.trace.push_back(std::move(o));
                    push_scalar(n.var, v.value, v.taint, FreshTag{site, m_.tau});
                    m_.def_events.emplace_back(site, v.taint);
                    advance_top();
                    m_.tau++;
                } else {  // LetConsistent
                    EvalResult v = eval(r.rhs, site);
                    flush_uses();
                    Observation o;
                    o.tau = m_.tau;
                    o.kind = Observation::Kind::Cnst;
                    o.site = site;
                    o.set_id = r.set_id;
                    o.taint = v.taint;
                    m_.trace.push_back(std::move(o));
                    push_scalar(n.var, v.value, v.taint, std::nullopt);
                    m_.def_events.emplace_back(site, v.taint);
                    advance_top();
                    m_.tau++;
                }
            },
            n.rhs);
    }

    void push_scalar(const std::string& name, RtValue v, std::set<uint64_t> taint,
                     std::optional<FreshTag> tag) {
        MemCell cell;
        cell.name = name;
        cell.scalar = {v, std::move(taint)};
        cell.fresh = tag;
        m_.mem.push_back(std::move(cell));
    }

    void do_call(const Command& cmd, const CmdLet& n, const LetCall& r, Site site) {
        const FuncDecl& callee = m_.prog->fn(r.callee);
        std::optional<EvalResult> arg;
        if (r.arg) {
            if (r.arg->kind == CallArg::Kind::Var) {
                arg = eval(evar(r.arg->var), site);
            } else {
                arg = eval_value(r.arg->lit, site);
            }
        }
        flush_uses();
        advance_top();
        size_t height = m_.mem.size();
        m_.frames.push_back(ReturnFrame{r.callee, site, n.var, height});
        m_.frames.push_back(BlockFrame{&callee.body, 0});
        if (callee.param) {
            if (!arg) throw ExecFault("missing argument for '" + r.callee + "'");
            push_scalar(callee.param->name, arg->value, arg->taint, std::nullopt);
        }
        m_.tau++;
    }

    void do_return(const CmdRet& n, Site site) {
        EvalResult v = eval(n.value, site);
        flush_uses();
        std::optional<size_t> rf_idx;
        for (size_t i = m_.frames.size(); i-- > 0;) {
            if (std::holds_alternative<ReturnFrame>(m_.frames[i])) {
                rf_idx = i;
                break;
            }
        }
        if (!rf_idx) {
            m_.result = TaintedValue{v.value, v.taint};
            m_.done = true;
            m_.tau++;
            return;
        }
        ReturnFrame rf = std::get<ReturnFrame>(m_.frames[*rf_idx]);
        m_.frames.resize(*rf_idx);
        m_.mem.resize(rf.mem_height);
        push_scalar(rf.binder, v.value, v.taint, std::nullopt);
        m_.def_events.emplace_back(rf.callsite, v.taint);
        m_.tau++;
    }

    void begin_atomic(const CmdAtomic& n) {
        m_.frames.push_back(EndAtomicFrame{n.aid});
        m_.frames.push_back(BlockFrame{&n.body, 0});
        if (m_.kappa.mode == Context::Mode::Jit) {
            Context ctx;
            ctx.mode = Context::Mode::Atom;
            ctx.frames = m_.frames;  // resumes at the body start
            ctx.mem_height = m_.mem.size();
            ctx.n_atom = 0;
            ctx.aid = n.aid;
            for (const auto& loc : n.omega) {
                // `*p` saves the cell a reference points to.
                std::string name = loc;
                bool deref = !name.empty() && name[0] == '*';
                if (deref) name = name.substr(1);
                for (size_t i = m_.mem.size(); i-- > 0;) {
                    if (m_.mem[i].name != name) continue;
                    size_t slot = i;
                    if (deref) {
                        if (m_.mem[i].is_array ||
                            m_.mem[i].scalar.value.kind != RtValue::Kind::Ref)
                            break;
                        slot = m_.mem[i].scalar.value.slot;
                        if (slot >= m_.mem.size()) break;
                    }
                    ctx.undo.emplace_back(slot, m_.mem[slot]);
                    break;
                }
            }
            m_.kappa = std::move(ctx);
            m_.open_regions = {n.aid};
        } else {
            m_.kappa.n_atom++;
            m_.open_regions.push_back(n.aid);
        }
        Observation o;
        o.tau = m_.tau;
        o.kind = Observation::Kind::BeginAtom;
        o.aid = n.aid;
        m_.trace.push_back(std::move(o));
        m_.tau++;
    }

    void end_atomic(int aid) {
        m_.instr_steps++;
        if (m_.kappa.mode != Context::Mode::Atom)
            throw ExecFault("region end outside atomic context");
        if (m_.kappa.n_atom > 0) {
            m_.kappa.n_atom--;
        } else {
            Context jit;
            jit.mode = Context::Mode::Jit;
            m_.kappa = std::move(jit);  // empty context; next low-power fills it
        }
        if (!m_.open_regions.empty()) m_.open_regions.pop_back();
        Observation o;
        o.tau = m_.tau;
        o.kind = Observation::Kind::EndAtom;
        o.aid = aid;
        m_.trace.push_back(std::move(o));
        m_.tau++;
    }

    Machine& m_;
    std::vector<Observation> pending_uses_;
};

}  // namespace detail

inline Machine machine_continuous(const Program& p, InputOracle oracle) {
    Machine m;
    m.prog = &p;
    m.oracle = std::move(oracle);
    m.schedule = FailureSchedule::none();
    m.intermittent = false;
    m.frames.push_back(BlockFrame{&p.fn("main").body, 0});
    m.kappa.mode = Context::Mode::Jit;
    m.kappa.frames = m.frames;
    return m;
}

inline Machine machine_intermittent(const Program& p, InputOracle oracle, FailureSchedule s) {
    Machine m = machine_continuous(p, std::move(oracle));
    m.schedule = std::move(s);
    m.intermittent = true;
    return m;
}

inline void step(Machine& m) {
    detail::Engine e(m);
    e.step();
}

struct RunOutcome {
    bool completed = false;
    bool fuel_exhausted = false;
    std::optional<std::string> fault;
};

inline RunOutcome run(Machine& m, uint64_t fuel = 100000) {
    uint64_t steps = 0;
    while (!m.done && !m.fault) {
        if (steps++ >= fuel) return {false, true, std::nullopt};
        step(m);
    }
    return {m.done && !m.fault, false, m.fault};
}

inline Machine run_continuous(const Program& p, InputOracle oracle, uint64_t fuel = 100000) {
    Machine m = machine_continuous(p, std::move(oracle));
    run(m, fuel);
    return m;
}

inline Machine run_intermittent(const Program& p, InputOracle oracle, FailureSchedule s,
                                uint64_t fuel = 100000) {
    Machine m = machine_intermittent(p, std::move(oracle), std::move(s));
    run(m, fuel);
    return m;
}

// Value-level memory equality (names, array shapes, values; taint ignored).
inline bool memory_values_equal(const std::vector<MemCell>& a, const std::vector<MemCell>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || a[i].is_array != b[i].is_array) return false;
        if (a[i].is_array) {
            if (a[i].cells.size() != b[i].cells.size()) return false;
            for (size_t j = 0; j < a[i].cells.size(); ++j)
                if (!(a[i].cells[j].value == b[i].cells[j].value)) return false;
        } else if (!(a[i].scalar.value == b[i].scalar.value)) {
            return false;
        }
    }
    return true;
}

inline std::string dump_trace(const std::vector<Observation>& trace) {
    std::string out;
    for (const auto& o : trace) out += to_string(o) + "\n";
    return out;
}

}  // namespace oct
