#pragma once

// Static validation: lexical scope (no shadowing), a small type discipline,
// immutability of fresh/consistent bindings, and the singleton mutable-alias
// rule. An empty diagnostics list means the program is valid.
//
// Atomic bodies are scope-transparent: region boundaries are instrumentation,
// so a binding inside `atomic { ... }` stays live to the end of the enclosing
// block. If arms open their own scope.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oct/ast.hpp"

namespace oct {

struct Diagnostic {
    Site site;
    std::string message;
};

namespace detail {

struct VType {
    enum class Kind { Int, Bool, Ref, Array };
    Kind kind = Kind::Int;
    std::optional<std::string> ref_target;  // local alias target; nullopt for ref params

    static VType of_int() { return {Kind::Int, {}}; }
    static VType of_bool() { return {Kind::Bool, {}}; }
    static VType of_ref(std::optional<std::string> t) { return {Kind::Ref, std::move(t)}; }
    static VType of_array() { return {Kind::Array, {}}; }
};

struct VarInfo {
    VType type;
    bool immutable = false;  // fresh/consistent-bound
};

class Validator {
  public:
    explicit Validator(const Program& p) : prog_(p) {}

    std::vector<Diagnostic> run() {
        compute_return_types();
        if (!prog_.find("main")) {
            report({"main", -1}, "program has no 'main' function");
        } else if (prog_.fn("main").param) {
            report({"main", -1}, "'main' must not take a parameter");
        }
        for (const auto& f : prog_.funcs) validate_function(f);
        return std::move(diags_);
    }

  private:
    using Scope = std::map<std::string, VarInfo>;

    void report(Site s, std::string msg) { diags_.push_back({std::move(s), std::move(msg)}); }

    // Return types feed let-call bindings; computed in dependency order (the
    // call graph is acyclic once parsing succeeded).
    void compute_return_types() {
        for (const auto& f : prog_.funcs) compute_return_type(f.name);
    }
    VType compute_return_type(const std::string& name) {
        if (auto it = ret_types_.find(name); it != ret_types_.end()) return it->second;
        ret_types_[name] = VType::of_int();  // provisional
        const FuncDecl& f = prog_.fn(name);
        const Expr& v = f.ret().value;
        VType t = VType::of_int();
        if (auto* lit = std::get_if<ExprLit>(&v.node)) {
            if (lit->value.kind == Value::Kind::Bool) t = VType::of_bool();
        } else if (auto* var = std::get_if<ExprVar>(&v.node)) {
            // Walk the body to find the binding type; a light pass that only
            // tracks binds, sufficient because validate_function rechecks.
            t = infer_ret_var_type(f, var->name);
        }
        ret_types_[name] = t;
        return t;
    }
    VType infer_ret_var_type(const FuncDecl& f, const std::string& name) {
        VType result = VType::of_int();
        if (f.param && f.param->name == name)
            return f.param->by_ref ? VType::of_ref(std::nullopt) : VType::of_int();
        visit_commands(f.body, [&](const Command& c) {
            auto* let = std::get_if<CmdLet>(&c.node);
            if (!let || let->var != name) return;
            result = std::visit(
                [&](const auto& r) -> VType {
                    using R = std::decay_t<decltype(r)>;
                    if constexpr (std::is_same_v<R, LetCall>) return compute_return_type(r.callee);
                    else if constexpr (std::is_same_v<R, LetInput>) return VType::of_int();
                    else if constexpr (std::is_same_v<R, LetArray>) return VType::of_array();
                    else if constexpr (std::is_same_v<R, LetPlain>) return expr_type_shallow(f, r.rhs);
                    else if constexpr (std::is_same_v<R, LetFresh>) return expr_type_shallow(f, r.rhs);
                    else return expr_type_shallow(f, r.rhs);
                },
                let->rhs);
        });
        return result;
    }
    // Bool detection for return typing only; full typing happens per function.
    VType expr_type_shallow(const FuncDecl& f, const Expr& e) {
        if (auto* lit = std::get_if<ExprLit>(&e.node)) {
            if (lit->value.kind == Value::Kind::Bool) return VType::of_bool();
            if (lit->value.is_ref()) return VType::of_ref(std::nullopt);
            return VType::of_int();
        }
        if (auto* bin = std::get_if<ExprBin>(&e.node)) {
            switch (bin->op) {
                case BinOp::Add:
                case BinOp::Sub:
                case BinOp::Mul:
                case BinOp::Div: return VType::of_int();
                default: return VType::of_bool();
            }
        }
        if (auto* un = std::get_if<ExprUn>(&e.node))
            return un->op == UnOp::Neg ? VType::of_int() : VType::of_bool();
        if (auto* var = std::get_if<ExprVar>(&e.node)) return infer_ret_var_type(f, var->name);
        return VType::of_int();
    }

    void validate_function(const FuncDecl& f) {
        fn_ = f.name;
        std::vector<Scope> scopes;
        scopes.emplace_back();
        if (f.param) {
            VType t = f.param->by_ref ? VType::of_ref(std::nullopt) : VType::of_int();
            scopes.back()[f.param->name] = {t, false};
        }
        validate_block(f.body, scopes);
    }

    const VarInfo* lookup(const std::vector<Scope>& scopes, const std::string& name) {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            auto found = it->find(name);
            if (found != it->end()) return &found->second;
        }
        return nullptr;
    }

    bool visible(const std::vector<Scope>& scopes, const std::string& name) {
        return lookup(scopes, name) != nullptr;
    }

    // A live mutable reference to `target` exists somewhere in scope.
    bool has_live_ref(const std::vector<Scope>& scopes, const std::string& target) {
        for (const auto& sc : scopes)
            for (const auto& [_, info] : sc)
                if (info.type.kind == VType::Kind::Ref && info.type.ref_target == target) return true;
        return false;
    }

    std::optional<VType> type_of_value(const Value& v, std::vector<Scope>& scopes, Site site) {
        switch (v.kind) {
            case Value::Kind::Int: return VType::of_int();
            case Value::Kind::Bool: return VType::of_bool();
            case Value::Kind::RefVar: {
                const VarInfo* info = lookup(scopes, v.name);
                if (!info) {
                    report(site, "reference to undeclared variable '" + v.name + "'");
                    return std::nullopt;
                }
                if (info->immutable) {
                    report(site, "cannot take a mutable reference to immutable '" + v.name + "'");
                    return std::nullopt;
                }
                if (info->type.kind != VType::Kind::Int) {
                    report(site, "references may only target integer variables ('" + v.name + "')");
                    return std::nullopt;
                }
                return VType::of_ref(v.name);
            }
            case Value::Kind::RefCell: {
                const VarInfo* info = lookup(scopes, v.name);
                if (!info) {
                    report(site, "reference to undeclared array '" + v.name + "'");
                    return std::nullopt;
                }
                if (info->type.kind != VType::Kind::Array) {
                    report(site, "'" + v.name + "' is not an array");
                    return std::nullopt;
                }
                return VType::of_ref(v.name);
            }
        }
        return std::nullopt;
    }

    std::optional<VType> type_of_expr(const Expr& e, std::vector<Scope>& scopes, Site site) {
        return std::visit(
            [&](const auto& n) -> std::optional<VType> {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, ExprVar>) {
                    const VarInfo* info = lookup(scopes, n.name);
                    if (!info) {
                        report(site, "use of undeclared variable '" + n.name + "'");
                        return std::nullopt;
                    }
                    if (info->type.kind == VType::Kind::Array) {
                        report(site, "array '" + n.name + "' used as a scalar value");
                        return std::nullopt;
                    }
                    return info->type;
                } else if constexpr (std::is_same_v<T, ExprLit>) {
                    return type_of_value(n.value, scopes, site);
                } else if constexpr (std::is_same_v<T, ExprArrRead>) {
                    const VarInfo* info = lookup(scopes, n.arr);
                    if (!info) {
                        report(site, "read of undeclared array '" + n.arr + "'");
                        return std::nullopt;
                    }
                    if (info->type.kind != VType::Kind::Array)
                        report(site, "'" + n.arr + "' is not an array");
                    auto it = type_of_expr(*n.index, scopes, site);
                    if (it && it->kind != VType::Kind::Int)
                        report(site, "array index must be an integer");
                    return VType::of_int();
                } else if constexpr (std::is_same_v<T, ExprBin>) {
                    auto lt = type_of_expr(*n.lhs, scopes, site);
                    auto rt = type_of_expr(*n.rhs, scopes, site);
                    auto want = [&](VType::Kind k, const std::optional<VType>& t) {
                        if (t && t->kind != k)
                            report(site, std::string("operand type mismatch for '") +
                                             detail_op_name(n.op) + "'");
                    };
                    switch (n.op) {
                        case BinOp::Add:
                        case BinOp::Sub:
                        case BinOp::Mul:
                        case BinOp::Div:
                            want(VType::Kind::Int, lt);
                            want(VType::Kind::Int, rt);
                            return VType::of_int();
                        case BinOp::Lt:
                        case BinOp::Le:
                        case BinOp::Gt:
                        case BinOp::Ge:
                            want(VType::Kind::Int, lt);
                            want(VType::Kind::Int, rt);
                            return VType::of_bool();
                        case BinOp::Eq:
                        case BinOp::Ne:
                            if (lt && rt && lt->kind != rt->kind)
                                report(site, "comparison of differently typed operands");
                            return VType::of_bool();
                        case BinOp::And:
                        case BinOp::Or:
                            want(VType::Kind::Bool, lt);
                            want(VType::Kind::Bool, rt);
                            return VType::of_bool();
                    }
                    return VType::of_bool();
                } else {
                    auto t = type_of_expr(*n.operand, scopes, site);
                    if (n.op == UnOp::Neg) {
                        if (t && t->kind != VType::Kind::Int) report(site, "'-' expects an integer");
                        return VType::of_int();
                    }
                    if (t && t->kind != VType::Kind::Bool) report(site, "'!' expects a boolean");
                    return VType::of_bool();
                }
            },
            e.node);
    }

    static const char* detail_op_name(BinOp op) {
        switch (op) {
            case BinOp::Add: return "+";
            case BinOp::Sub: return "-";
            case BinOp::Mul: return "*";
            case BinOp::Div: return "/";
            case BinOp::Lt: return "<";
            case BinOp::Le: return "<=";
            case BinOp::Gt: return ">";
            case BinOp::Ge: return ">=";
            case BinOp::Eq: return "==";
            case BinOp::Ne: return "!=";
            case BinOp::And: return "&&";
            case BinOp::Or: return "||";
        }
        return "?";
    }

    void bind(std::vector<Scope>& scopes, Site site, const std::string& name, VarInfo info) {
        if (visible(scopes, name)) {
            report(site, "duplicate binding of '" + name + "' (shadowing is not allowed)");
            return;
        }
        if (info.type.kind == VType::Kind::Ref && info.type.ref_target &&
            has_live_ref(scopes, *info.type.ref_target)) {
            report(site, "second live mutable reference to '" + *info.type.ref_target + "'");
        }
        scopes.back()[name] = std::move(info);
    }

    void validate_block(const Block& b, std::vector<Scope>& scopes) {
        for (const auto& cmd : b.stmts) validate_command(cmd, scopes);
    }

    void validate_command(const Command& cmd, std::vector<Scope>& scopes) {
        Site site{fn_, cmd.label};
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, InstrSkip>) {
                } else if constexpr (std::is_same_v<T, InstrAssign>) {
                    auto rt = type_of_expr(n.rhs, scopes, site);
                    const VarInfo* info = lookup(scopes, n.var);
                    if (!info) {
                        report(site, "assignment to undeclared variable '" + n.var + "'");
                        return;
                    }
                    if (info->immutable)
                        report(site, "assignment to immutable binding '" + n.var + "'");
                    if (info->type.kind == VType::Kind::Ref)
                        report(site, "references cannot be reassigned ('" + n.var + "')");
                    else if (info->type.kind == VType::Kind::Array)
                        report(site, "arrays cannot be assigned as a whole ('" + n.var + "')");
                    else if (rt && rt->kind != info->type.kind)
                        report(site, "assignment changes the type of '" + n.var + "'");
                } else if constexpr (std::is_same_v<T, InstrArrAssign>) {
                    const VarInfo* info = lookup(scopes, n.arr);
                    if (!info) report(site, "write to undeclared array '" + n.arr + "'");
                    else if (info->type.kind != VType::Kind::Array)
                        report(site, "'" + n.arr + "' is not an array");
                    auto it = type_of_expr(n.index, scopes, site);
                    if (it && it->kind != VType::Kind::Int) report(site, "array index must be an integer");
                    auto rt = type_of_expr(n.rhs, scopes, site);
                    if (rt && rt->kind != VType::Kind::Int)
                        report(site, "array cells hold integers");
                } else if constexpr (std::is_same_v<T, InstrDerefAssign>) {
                    const VarInfo* info = lookup(scopes, n.refvar);
                    if (!info) {
                        report(site, "deref of undeclared variable '" + n.refvar + "'");
                    } else if (info->type.kind != VType::Kind::Ref) {
                        report(site, "'" + n.refvar + "' is not a reference");
                    }
                    auto rt = type_of_expr(n.rhs, scopes, site);
                    if (rt && rt->kind != VType::Kind::Int)
                        report(site, "writes through a reference must be integers");
                } else if constexpr (std::is_same_v<T, CmdLet>) {
                    validate_let(n, site, scopes);
                } else if constexpr (std::is_same_v<T, CmdIf>) {
                    auto ct = type_of_expr(n.cond, scopes, site);
                    if (ct && ct->kind != VType::Kind::Bool)
                        report(site, "if condition must be boolean");
                    scopes.emplace_back();
                    validate_block(n.then_b, scopes);
                    scopes.pop_back();
                    scopes.emplace_back();
                    validate_block(n.else_b, scopes);
                    scopes.pop_back();
                } else if constexpr (std::is_same_v<T, CmdAtomic>) {
                    validate_block(n.body, scopes);  // scope-transparent
                } else {  // CmdRet
                    auto t = type_of_expr(n.value, scopes, site);
                    if (t && t->kind == VType::Kind::Ref)
                        report(site, "functions may not return references");
                    if (t && t->kind == VType::Kind::Array)
                        report(site, "functions may not return arrays");
                }
            },
            cmd.node);
    }

    void validate_let(const CmdLet& let, Site site, std::vector<Scope>& scopes) {
        std::visit(
            [&](const auto& r) {
                using R = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<R, LetPlain>) {
                    auto t = type_of_expr(r.rhs, scopes, site);
                    bind(scopes, site, let.var, {t.value_or(VType::of_int()), false});
                } else if constexpr (std::is_same_v<R, LetCall>) {
                    validate_call(r, site, scopes);
                    VType rt = ret_types_.count(r.callee) ? ret_types_[r.callee] : VType::of_int();
                    bind(scopes, site, let.var, {rt, false});
                } else if constexpr (std::is_same_v<R, LetInput>) {
                    bind(scopes, site, let.var, {VType::of_int(), false});
                } else if constexpr (std::is_same_v<R, LetArray>) {
                    for (const auto& e : r.elems) {
                        auto t = type_of_expr(e, scopes, site);
                        if (t && t->kind != VType::Kind::Int)
                            report(site, "array literal elements must be integers");
                    }
                    bind(scopes, site, let.var, {VType::of_array(), false});
                } else if constexpr (std::is_same_v<R, LetFresh>) {
                    auto t = type_of_expr(r.rhs, scopes, site);
                    bind(scopes, site, let.var, {t.value_or(VType::of_int()), true});
                } else {
                    auto t = type_of_expr(r.rhs, scopes, site);
                    bind(scopes, site, let.var, {t.value_or(VType::of_int()), true});
                }
            },
            let.rhs);
    }

    void validate_call(const LetCall& call, Site site, std::vector<Scope>& scopes) {
        const FuncDecl* callee = prog_.find(call.callee);
        if (!callee) {
            report(site, "call to unknown function '" + call.callee + "'");
            return;
        }
        if (callee->param && !call.arg) {
            report(site, "'" + call.callee + "' expects an argument");
            return;
        }
        if (!callee->param && call.arg) {
            report(site, "'" + call.callee + "' takes no argument");
            return;
        }
        if (!call.arg) return;
        const CallArg& a = *call.arg;
        bool arg_is_ref = a.kind == CallArg::Kind::Lit && a.lit.is_ref();
        if (callee->param->by_ref != arg_is_ref) {
            report(site, callee->param->by_ref
                             ? "'" + call.callee + "' expects a reference argument"
                             : "'" + call.callee + "' expects a value argument");
            return;
        }
        if (a.kind == CallArg::Kind::Var) {
            const VarInfo* info = lookup(scopes, a.var);
            if (!info) {
                report(site, "argument uses undeclared variable '" + a.var + "'");
                return;
            }
            if (info->type.kind == VType::Kind::Ref || info->type.kind == VType::Kind::Array)
                report(site, "only scalar values may be passed by value ('" + a.var + "')");
        } else {
            type_of_value(a.lit, scopes, site);
            if (a.lit.kind == Value::Kind::RefVar && has_live_ref(scopes, a.lit.name))
                report(site, "passing '&" + a.lit.name + "' while another mutable reference is live");
        }
    }

    const Program& prog_;
    std::string fn_;
    std::map<std::string, VType> ret_types_;
    std::vector<Diagnostic> diags_;
};

}  // namespace detail

inline std::vector<Diagnostic> validate(const Program& p) {
    detail::Validator v(p);
    return v.run();
}

}  // namespace oct
