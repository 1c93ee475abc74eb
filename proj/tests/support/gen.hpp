#pragma once

// Random generator for valid annotated `.oct` programs. Emits source text;
// callers parse it. Construction tracks scopes and types so every generated
// program passes validate().

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace octgen {

struct GenOptions {
    int max_stmts = 40;           // rough instruction budget for the program
    int max_helpers = 3;
    int max_sensors = 2;
    bool annotations = true;
    bool branches = true;
    bool arrays = true;
    bool refs = true;
    bool tainted_branches = true;  // allow input-derived vars in conditions
};

namespace detail {

struct Var {
    std::string name;
    enum class Ty { Int, Bool, Array } ty = Ty::Int;
    bool mut_ok = true;        // false for fresh/consistent bindings
    bool input_derived = false;
};

struct Helper {
    std::string name;
    enum class Param { None, Value, Ref } param = Param::None;
    bool returns_input = false;   // return value tainted by an input
    bool writes_ref = false;      // writes through its ref param
    bool ref_write_tainted = false;
};

class Gen {
  public:
    Gen(uint64_t seed, const GenOptions& opt) : rng_(seed), opt_(opt) {}

    std::string run() {
        int n_sensors = 1 + (int)pick(opt_.max_sensors);
        for (int i = 0; i < n_sensors; ++i) sensors_.push_back("s" + std::to_string(i));
        out_ << "input ";
        for (int i = 0; i < n_sensors; ++i) out_ << (i ? ", " : "") << sensors_[i];
        out_ << ";\n\n";

        int n_helpers = (int)pick(opt_.max_helpers + 1);
        for (int i = 0; i < n_helpers; ++i) gen_helper(i);
        gen_main();
        return out_.str();
    }

  private:
    uint64_t pick(uint64_t n) { return n ? rng_() % n : 0; }
    bool chance(int pct) { return (int)pick(100) < pct; }
    std::string fresh_name() { return "v" + std::to_string(name_counter_++); }

    const Var* pick_var(const std::vector<Var>& scope, auto&& pred) {
        std::vector<const Var*> cands;
        for (const auto& v : scope)
            if (pred(v)) cands.push_back(&v);
        if (cands.empty()) return nullptr;
        return cands[pick(cands.size())];
    }

    std::string int_expr(const std::vector<Var>& scope, bool allow_tainted, int depth = 0) {
        auto is_int = [&](const Var& v) {
            return v.ty == Var::Ty::Int && (allow_tainted || !v.input_derived);
        };
        if (depth < 2 && chance(40)) {
            const char* ops[] = {"+", "-", "*"};
            return "(" + int_expr(scope, allow_tainted, depth + 1) + " " + ops[pick(3)] + " " +
                   int_expr(scope, allow_tainted, depth + 1) + ")";
        }
        if (const Var* v = chance(70) ? pick_var(scope, is_int) : nullptr) return v->name;
        return std::to_string((long long)pick(100));
    }

    std::string bool_expr(const std::vector<Var>& scope, bool allow_tainted) {
        const char* rels[] = {"<", "<=", ">", ">=", "==", "!="};
        return int_expr(scope, allow_tainted) + " " + rels[pick(6)] + " " +
               int_expr(scope, allow_tainted);
    }

    bool expr_is_tainted(const std::string& e, const std::vector<Var>& scope) {
        for (const auto& v : scope)
            if (v.input_derived && e.find(v.name) != std::string::npos) return true;
        return false;
    }

    void gen_helper(int idx) {
        Helper h;
        h.name = "h" + std::to_string(idx);
        std::vector<Var> scope;
        std::ostringstream body;
        int kind = (int)pick(opt_.refs ? 4 : 3);
        if (kind == 3) {
            // Writes through a reference parameter, sometimes with input data.
            h.param = Helper::Param::Ref;
            h.writes_ref = true;
            bool tainted = chance(60);
            h.ref_write_tainted = tainted;
            if (tainted) {
                body << "  let t = " << sensors_[pick(sensors_.size())] << "();\n";
                body << "  *p := t + " << pick(10) << ";\n";
                h.returns_input = chance(50);
                body << "  ret " << (h.returns_input ? "t" : std::to_string((long long)pick(9))) << ";\n";
            } else {
                body << "  *p := " << pick(100) << ";\n";
                body << "  ret 0;\n";
            }
        } else if (kind == 2 && idx > 0) {
            // Calls an earlier helper (deep provenance chains).
            const Helper& inner = helpers_[pick(idx)];
            h.param = Helper::Param::None;
            if (inner.param == Helper::Param::Ref) {
                body << "  let x = 0;\n  let c = " << inner.name << "(&x);\n";
                body << "  ret x;\n";
                h.returns_input = inner.ref_write_tainted;
            } else {
                std::string arg = inner.param == Helper::Param::Value ? "(3)" : "()";
                body << "  let c = " << inner.name << arg << ";\n";
                body << "  let r = c + 1;\n  ret r;\n";
                h.returns_input = inner.returns_input;
            }
        } else if (kind == 1) {
            // Normalizes its value argument; taint flows arg -> ret.
            h.param = Helper::Param::Value;
            body << "  let w = p * 2;\n";
            body << "  ret w;\n";
            h.returns_input = false;  // depends on the argument at the callsite
        } else {
            // Samples a sensor.
            h.param = Helper::Param::None;
            body << "  let r = " << sensors_[pick(sensors_.size())] << "();\n";
            if (chance(40)) body << "  let r2 = r + " << pick(5) << ";\n  ret r2;\n";
            else body << "  ret r;\n";
            h.returns_input = true;
        }
        out_ << "fn " << h.name << "(";
        if (h.param == Helper::Param::Value) out_ << "p";
        if (h.param == Helper::Param::Ref) out_ << "&p";
        out_ << ") {\n" << body.str() << "}\n\n";
        helpers_.push_back(h);
    }

    void gen_main() {
        out_ << "fn main() {\n";
        std::vector<Var> scope;
        budget_ = opt_.max_stmts;
        gen_stmts(scope, 1, /*depth=*/0);
        // Force a use for every so-far-unused fresh variable.
        for (const auto& name : fresh_needing_use_) {
            out_ << "  let " << fresh_name() << " = " << name << " + 1;\n";
        }
        fresh_needing_use_.clear();
        const Var* v = pick_var(scope, [](const Var& v) { return v.ty == Var::Ty::Int; });
        out_ << "  ret " << (v ? v->name : "0") << ";\n}\n";
    }

    void indent(int depth) {
        for (int i = 0; i <= depth; ++i) out_ << "  ";
    }

    void gen_stmts(std::vector<Var>& scope, int min_stmts, int depth) {
        int n = min_stmts + (int)pick(6);
        for (int i = 0; i < n && budget_ > 0; ++i) gen_stmt(scope, depth);
    }

    void gen_stmt(std::vector<Var>& scope, int depth) {
        budget_--;
        int roll = (int)pick(100);
        if (roll < 8) {
            indent(depth);
            out_ << "skip;\n";
            return;
        }
        if (roll < 22) {  // sensor read, maybe annotated
            std::string v = fresh_name();
            indent(depth);
            out_ << "let " << v << " = " << sensors_[pick(sensors_.size())] << "();\n";
            scope.push_back({v, Var::Ty::Int, true, true});
            maybe_annotate(scope, depth);
            return;
        }
        if (roll < 40) {  // arithmetic binding
            std::string e = int_expr(scope, true);
            std::string v = fresh_name();
            indent(depth);
            out_ << "let " << v << " = " << e << ";\n";
            scope.push_back({v, Var::Ty::Int, true, expr_is_tainted(e, scope)});
            maybe_annotate(scope, depth);
            return;
        }
        if (roll < 52 && !helpers_.empty()) {  // helper call
            const Helper& h = helpers_[pick(helpers_.size())];
            std::string v = fresh_name();
            bool tainted = h.returns_input;
            indent(depth);
            if (h.param == Helper::Param::Ref) {
                const Var* tgt = pick_var(scope, [](const Var& v) {
                    return v.ty == Var::Ty::Int && v.mut_ok;
                });
                if (!tgt) {
                    std::string t = fresh_name();
                    out_ << "let " << t << " = 0;\n";
                    scope.push_back({t, Var::Ty::Int, true, false});
                    indent(depth);
                    tgt = &scope.back();
                }
                out_ << "let " << v << " = " << h.name << "(&" << tgt->name << ");\n";
                if (h.ref_write_tainted)
                    for (auto& sv : scope)
                        if (sv.name == tgt->name) sv.input_derived = true;
            } else if (h.param == Helper::Param::Value) {
                const Var* arg = pick_var(scope, [](const Var& v) { return v.ty == Var::Ty::Int; });
                std::string a = arg ? arg->name : std::to_string((long long)pick(50));
                tainted = tainted || (arg && arg->input_derived);
                out_ << "let " << v << " = " << h.name << "(" << a << ");\n";
            } else {
                out_ << "let " << v << " = " << h.name << "();\n";
            }
            scope.push_back({v, Var::Ty::Int, true, tainted});
            maybe_annotate(scope, depth);
            return;
        }
        if (roll < 62) {  // mutation
            const Var* v = pick_var(scope, [](const Var& v) {
                return v.ty == Var::Ty::Int && v.mut_ok;
            });
            if (!v) return gen_stmt(scope, depth);
            std::string e = int_expr(scope, true);
            indent(depth);
            out_ << v->name << " := " << e << ";\n";
            bool t = expr_is_tainted(e, scope);
            for (auto& sv : scope)
                if (sv.name == v->name) sv.input_derived = t;
            return;
        }
        if (roll < 72 && opt_.arrays) {
            if (const Var* a = pick_var(scope, [](const Var& v) { return v.ty == Var::Ty::Array; });
                a && chance(70)) {
                indent(depth);
                out_ << a->name << "[" << pick(3) << "] := " << int_expr(scope, true) << ";\n";
            } else {
                std::string v = fresh_name();
                indent(depth);
                out_ << "let " << v << " = [" << pick(10) << ", " << pick(10) << ", " << pick(10)
                     << "];\n";
                scope.push_back({v, Var::Ty::Array, true, false});
            }
            return;
        }
        if (roll < 84 && opt_.branches && depth < 2 && budget_ > 4) {
            indent(depth);
            out_ << "if " << bool_expr(scope, opt_.tainted_branches) << " {\n";
            size_t base = scope.size();
            gen_stmts(scope, 1, depth + 1);
            scope.resize(base);
            indent(depth);
            if (chance(60)) {
                out_ << "} else {\n";
                gen_stmts(scope, 1, depth + 1);
                scope.resize(base);
                indent(depth);
            }
            out_ << "}\n";
            return;
        }
        // Consistent group: a couple of sensor-derived bindings sharing an id.
        if (opt_.annotations && chance(60) && budget_ > 2) {
            long long id = next_set_id_++;
            int k = 2 + (int)pick(2);
            for (int i = 0; i < k && budget_ > 0; ++i, budget_--) {
                std::string v = fresh_name();
                indent(depth);
                if (!helpers_.empty() && chance(40)) {
                    std::vector<const Helper*> tainted;
                    for (const auto& h : helpers_)
                        if (h.returns_input && h.param == Helper::Param::None)
                            tainted.push_back(&h);
                    if (!tainted.empty()) {
                        const Helper* h = tainted[pick(tainted.size())];
                        out_ << "let " << v << " = " << h->name << "();\n";
                    } else {
                        out_ << "let " << v << " = " << sensors_[pick(sensors_.size())] << "();\n";
                    }
                } else {
                    out_ << "let " << v << " = " << sensors_[pick(sensors_.size())] << "();\n";
                }
                indent(depth);
                out_ << "Consistent(" << v << ", " << id << ");\n";
                scope.push_back({v, Var::Ty::Int, false, true});
            }
            return;
        }
        indent(depth);
        out_ << "skip;\n";
    }

    void maybe_annotate(std::vector<Var>& scope, int depth) {
        if (!opt_.annotations || scope.empty()) return;
        Var& v = scope.back();
        if (v.ty != Var::Ty::Int || !v.input_derived) return;
        if (chance(35)) {
            indent(depth);
            out_ << "Fresh(" << v.name << ");\n";
            v.mut_ok = false;
            // Guarantee at least one use so the policy is not vacuous.
            indent(depth);
            std::string u = fresh_name();
            out_ << "let " << u << " = " << v.name << " + " << pick(5) << ";\n";
            scope.push_back({u, Var::Ty::Int, true, true});
            budget_ -= 2;
        } else if (chance(20)) {
            indent(depth);
            out_ << "Consistent(" << v.name << ", " << next_set_id_++ << ");\n";
            v.mut_ok = false;
            budget_--;
        }
    }

    std::mt19937_64 rng_;
    GenOptions opt_;
    std::ostringstream out_;
    std::vector<std::string> sensors_;
    std::vector<Helper> helpers_;
    std::vector<std::string> fresh_needing_use_;
    int name_counter_ = 0;
    long long next_set_id_ = 1;
    int budget_ = 0;
};

}  // namespace detail

inline std::string generate_program(uint64_t seed, const GenOptions& opt = {}) {
    detail::Gen g(seed, opt);
    return g.run();
}

}  // namespace octgen
