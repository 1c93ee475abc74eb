#pragma once

// Abstract syntax for the oct modeling language.
//
// A program is a set of function declarations plus a set of declared input
// (sensor) names. Every command carries a unique (function, label) identity
// once label_program() has run; all analyses index into that universe.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace oct {

using Label = int;

struct Site {
    std::string fn;
    Label label = -1;
    auto operator<=>(const Site&) const = default;
};

inline std::string to_string(const Site& s) {
    return "(" + s.fn + "," + std::to_string(s.label) + ")";
}

// Call chain from the entry function down to an input operation; the last
// element is the input instruction itself.
using Provenance = std::vector<Site>;

inline std::string to_string(const Provenance& p) {
    std::string out;
    for (size_t i = 0; i < p.size(); ++i) {
        if (i) out += "::";
        out += to_string(p[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Values and expressions

struct Value {
    enum class Kind { Int, Bool, RefVar, RefCell };
    Kind kind = Kind::Int;
    long long num = 0;     // Int payload, or RefCell index
    bool flag = false;     // Bool payload
    std::string name;      // RefVar / RefCell target

    static Value of_int(long long n) { return {Kind::Int, n, false, {}}; }
    static Value of_bool(bool b) { return {Kind::Bool, 0, b, {}}; }
    static Value ref_var(std::string v) { return {Kind::RefVar, 0, false, std::move(v)}; }
    static Value ref_cell(std::string a, long long i) { return {Kind::RefCell, i, false, std::move(a)}; }

    bool is_ref() const { return kind == Kind::RefVar || kind == Kind::RefCell; }
    auto operator<=>(const Value&) const = default;
};

enum class BinOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnOp { Neg, Not };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct ExprVar { std::string name; };
struct ExprLit { Value value; };
struct ExprArrRead { std::string arr; ExprPtr index; };
struct ExprBin { BinOp op; ExprPtr lhs, rhs; };
struct ExprUn { UnOp op; ExprPtr operand; };

struct Expr {
    std::variant<ExprVar, ExprLit, ExprArrRead, ExprBin, ExprUn> node;
};

inline ExprPtr make_expr(Expr e) { return std::make_unique<Expr>(std::move(e)); }
inline Expr evar(std::string n) { return Expr{ExprVar{std::move(n)}}; }
inline Expr elit(Value v) { return Expr{ExprLit{std::move(v)}}; }
inline Expr eint(long long n) { return elit(Value::of_int(n)); }

inline Expr clone(const Expr& e);
inline ExprPtr clone_ptr(const ExprPtr& e) { return e ? make_expr(clone(*e)) : nullptr; }

inline Expr clone(const Expr& e) {
    return std::visit(
        [](const auto& n) -> Expr {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ExprVar>) return Expr{ExprVar{n.name}};
            else if constexpr (std::is_same_v<T, ExprLit>) return Expr{ExprLit{n.value}};
            else if constexpr (std::is_same_v<T, ExprArrRead>)
                return Expr{ExprArrRead{n.arr, clone_ptr(n.index)}};
            else if constexpr (std::is_same_v<T, ExprBin>)
                return Expr{ExprBin{n.op, clone_ptr(n.lhs), clone_ptr(n.rhs)}};
            else
                return Expr{ExprUn{n.op, clone_ptr(n.operand)}};
        },
        e.node);
}

inline bool equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    if (auto* va = std::get_if<ExprVar>(&a.node)) return va->name == std::get<ExprVar>(b.node).name;
    if (auto* la = std::get_if<ExprLit>(&a.node)) return la->value == std::get<ExprLit>(b.node).value;
    if (auto* ra = std::get_if<ExprArrRead>(&a.node)) {
        const auto& rb = std::get<ExprArrRead>(b.node);
        return ra->arr == rb.arr && equal(*ra->index, *rb.index);
    }
    if (auto* ba = std::get_if<ExprBin>(&a.node)) {
        const auto& bb = std::get<ExprBin>(b.node);
        return ba->op == bb.op && equal(*ba->lhs, *bb.lhs) && equal(*ba->rhs, *bb.rhs);
    }
    const auto& ua = std::get<ExprUn>(a.node);
    const auto& ub = std::get<ExprUn>(b.node);
    return ua.op == ub.op && equal(*ua.operand, *ub.operand);
}

// Variables read by an expression (array reads contribute the array name and
// any variables in the index).
inline void free_vars(const Expr& e, std::vector<std::string>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ExprVar>) out.push_back(n.name);
            else if constexpr (std::is_same_v<T, ExprArrRead>) {
                out.push_back(n.arr);
                free_vars(*n.index, out);
            } else if constexpr (std::is_same_v<T, ExprBin>) {
                free_vars(*n.lhs, out);
                free_vars(*n.rhs, out);
            } else if constexpr (std::is_same_v<T, ExprUn>) {
                free_vars(*n.operand, out);
            }
        },
        e.node);
}

inline std::vector<std::string> free_vars(const Expr& e) {
    std::vector<std::string> out;
    free_vars(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Commands

struct Command;

struct Block {
    std::vector<Command> stmts;
};

// Call argument: a variable or a value (literals include references).
struct CallArg {
    enum class Kind { Var, Lit };
    Kind kind = Kind::Var;
    std::string var;
    Value lit;

    static CallArg of_var(std::string v) { return {Kind::Var, std::move(v), {}}; }
    static CallArg of_lit(Value v) { return {Kind::Lit, {}, std::move(v)}; }
    auto operator<=>(const CallArg&) const = default;
};

struct InstrSkip {};
struct InstrAssign { std::string var; Expr rhs; };
struct InstrArrAssign { std::string arr; Expr index; Expr rhs; };
struct InstrDerefAssign { std::string refvar; Expr rhs; };

struct LetPlain { Expr rhs; };
struct LetCall { std::string callee; std::optional<CallArg> arg; };
struct LetInput { std::string sensor; };
struct LetArray { std::vector<Expr> elems; };
struct LetFresh { Expr rhs; };
struct LetConsistent { long long set_id; Expr rhs; };

struct CmdLet {
    std::string var;
    std::variant<LetPlain, LetCall, LetInput, LetArray, LetFresh, LetConsistent> rhs;
};

struct CmdIf { Expr cond; Block then_b; Block else_b; };
struct CmdAtomic { int aid = 0; std::vector<std::string> omega; Block body; };
struct CmdRet { Expr value; };  // normalized by the parser to a variable or literal

struct Command {
    Label label = -1;
    std::variant<InstrSkip, InstrAssign, InstrArrAssign, InstrDerefAssign,
                 CmdLet, CmdIf, CmdAtomic, CmdRet>
        node;
};

inline Command clone(const Command& c);

inline Block clone(const Block& b) {
    Block out;
    out.stmts.reserve(b.stmts.size());
    for (const auto& s : b.stmts) out.stmts.push_back(clone(s));
    return out;
}

inline Command clone(const Command& c) {
    Command out;
    out.label = c.label;
    out.node = std::visit(
        [](const auto& n) -> decltype(out.node) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, InstrSkip>) return InstrSkip{};
            else if constexpr (std::is_same_v<T, InstrAssign>) return InstrAssign{n.var, clone(n.rhs)};
            else if constexpr (std::is_same_v<T, InstrArrAssign>)
                return InstrArrAssign{n.arr, clone(n.index), clone(n.rhs)};
            else if constexpr (std::is_same_v<T, InstrDerefAssign>)
                return InstrDerefAssign{n.refvar, clone(n.rhs)};
            else if constexpr (std::is_same_v<T, CmdLet>) {
                CmdLet l;
                l.var = n.var;
                l.rhs = std::visit(
                    [](const auto& r) -> decltype(l.rhs) {
                        using R = std::decay_t<decltype(r)>;
                        if constexpr (std::is_same_v<R, LetPlain>) return LetPlain{clone(r.rhs)};
                        else if constexpr (std::is_same_v<R, LetCall>) return LetCall{r.callee, r.arg};
                        else if constexpr (std::is_same_v<R, LetInput>) return LetInput{r.sensor};
                        else if constexpr (std::is_same_v<R, LetArray>) {
                            LetArray a;
                            for (const auto& e : r.elems) a.elems.push_back(clone(e));
                            return a;
                        } else if constexpr (std::is_same_v<R, LetFresh>) return LetFresh{clone(r.rhs)};
                        else return LetConsistent{r.set_id, clone(r.rhs)};
                    },
                    n.rhs);
                return l;
            } else if constexpr (std::is_same_v<T, CmdIf>)
                return CmdIf{clone(n.cond), clone(n.then_b), clone(n.else_b)};
            else if constexpr (std::is_same_v<T, CmdAtomic>)
                return CmdAtomic{n.aid, n.omega, clone(n.body)};
            else
                return CmdRet{clone(n.value)};
        },
        c.node);
    return out;
}

inline bool equal(const Command& a, const Command& b);

inline bool equal(const Block& a, const Block& b) {
    if (a.stmts.size() != b.stmts.size()) return false;
    for (size_t i = 0; i < a.stmts.size(); ++i)
        if (!equal(a.stmts[i], b.stmts[i])) return false;
    return true;
}

inline bool equal(const Command& a, const Command& b) {
    if (a.node.index() != b.node.index()) return false;
    if (std::holds_alternative<InstrSkip>(a.node)) return true;
    if (auto* x = std::get_if<InstrAssign>(&a.node)) {
        const auto& y = std::get<InstrAssign>(b.node);
        return x->var == y.var && equal(x->rhs, y.rhs);
    }
    if (auto* x = std::get_if<InstrArrAssign>(&a.node)) {
        const auto& y = std::get<InstrArrAssign>(b.node);
        return x->arr == y.arr && equal(x->index, y.index) && equal(x->rhs, y.rhs);
    }
    if (auto* x = std::get_if<InstrDerefAssign>(&a.node)) {
        const auto& y = std::get<InstrDerefAssign>(b.node);
        return x->refvar == y.refvar && equal(x->rhs, y.rhs);
    }
    if (auto* x = std::get_if<CmdLet>(&a.node)) {
        const auto& y = std::get<CmdLet>(b.node);
        if (x->var != y.var || x->rhs.index() != y.rhs.index()) return false;
        if (auto* p = std::get_if<LetPlain>(&x->rhs)) return equal(p->rhs, std::get<LetPlain>(y.rhs).rhs);
        if (auto* c = std::get_if<LetCall>(&x->rhs)) {
            const auto& d = std::get<LetCall>(y.rhs);
            return c->callee == d.callee && c->arg == d.arg;
        }
        if (auto* i = std::get_if<LetInput>(&x->rhs)) return i->sensor == std::get<LetInput>(y.rhs).sensor;
        if (auto* arr = std::get_if<LetArray>(&x->rhs)) {
            const auto& brr = std::get<LetArray>(y.rhs);
            if (arr->elems.size() != brr.elems.size()) return false;
            for (size_t i = 0; i < arr->elems.size(); ++i)
                if (!equal(arr->elems[i], brr.elems[i])) return false;
            return true;
        }
        if (auto* f = std::get_if<LetFresh>(&x->rhs)) return equal(f->rhs, std::get<LetFresh>(y.rhs).rhs);
        const auto& ca = std::get<LetConsistent>(x->rhs);
        const auto& cb = std::get<LetConsistent>(y.rhs);
        return ca.set_id == cb.set_id && equal(ca.rhs, cb.rhs);
    }
    if (auto* x = std::get_if<CmdIf>(&a.node)) {
        const auto& y = std::get<CmdIf>(b.node);
        return equal(x->cond, y.cond) && equal(x->then_b, y.then_b) && equal(x->else_b, y.else_b);
    }
    if (auto* x = std::get_if<CmdAtomic>(&a.node)) {
        const auto& y = std::get<CmdAtomic>(b.node);
        return x->aid == y.aid && x->omega == y.omega && equal(x->body, y.body);
    }
    return equal(std::get<CmdRet>(a.node).value, std::get<CmdRet>(b.node).value);
}

// ---------------------------------------------------------------------------
// Functions and programs

struct Param {
    std::string name;
    bool by_ref = false;
    auto operator<=>(const Param&) const = default;
};

struct FuncDecl {
    std::string name;
    std::optional<Param> param;
    Block body;  // last statement is always CmdRet

    // The trailing ret, looking through any atomic blocks wrapping it.
    const CmdRet& ret() const {
        const Block* b = &body;
        while (!b->stmts.empty()) {
            const Command& last = b->stmts.back();
            if (auto* at = std::get_if<CmdAtomic>(&last.node)) {
                b = &at->body;
                continue;
            }
            if (auto* r = std::get_if<CmdRet>(&last.node)) return *r;
            break;
        }
        throw std::logic_error("function body does not end in ret: " + name);
    }
};

struct Program {
    std::vector<FuncDecl> funcs;          // declaration order
    std::set<std::string> inputs;         // declared input-function names
    std::map<std::string, size_t> index;  // name -> position in funcs

    const FuncDecl* find(const std::string& name) const {
        auto it = index.find(name);
        return it == index.end() ? nullptr : &funcs[it->second];
    }
    FuncDecl* find(const std::string& name) {
        auto it = index.find(name);
        return it == index.end() ? nullptr : &funcs[it->second];
    }
    const FuncDecl& fn(const std::string& name) const {
        const FuncDecl* f = find(name);
        if (!f) throw std::logic_error("no such function: " + name);
        return *f;
    }
    void reindex() {
        index.clear();
        for (size_t i = 0; i < funcs.size(); ++i) index[funcs[i].name] = i;
    }
};

inline Program clone(const Program& p) {
    Program out;
    out.inputs = p.inputs;
    for (const auto& f : p.funcs) out.funcs.push_back(FuncDecl{f.name, f.param, clone(f.body)});
    out.reindex();
    return out;
}

inline bool equal(const Program& a, const Program& b) {
    if (a.inputs != b.inputs || a.funcs.size() != b.funcs.size()) return false;
    for (size_t i = 0; i < a.funcs.size(); ++i) {
        const auto& fa = a.funcs[i];
        const auto& fb = b.funcs[i];
        if (fa.name != fb.name || fa.param != fb.param || !equal(fa.body, fb.body)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Labeling
//
// Labels are assigned per function in pre-order: all non-atomic commands
// first, then atomic wrappers continue the counter in a second pre-order
// pass. Atomic nodes are transparent to the first pass so that inserting a
// region never renumbers the commands analyses and policies refer to.

namespace detail {

inline void label_pass(Block& b, int& next, bool atomics) {
    for (auto& cmd : b.stmts) {
        bool is_atomic = std::holds_alternative<CmdAtomic>(cmd.node);
        if (is_atomic == atomics) cmd.label = next++;
        if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
            label_pass(iff->then_b, next, atomics);
            label_pass(iff->else_b, next, atomics);
        } else if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
            label_pass(at->body, next, atomics);
        }
    }
}

}  // namespace detail

inline void label_function(FuncDecl& f) {
    int next = 0;
    detail::label_pass(f.body, next, false);
    detail::label_pass(f.body, next, true);
}

inline void label_program(Program& p) {
    for (auto& f : p.funcs) label_function(f);
}

// Visit every command in a block, recursing into if arms and atomic bodies.
template <typename F>
void visit_commands(const Block& b, F&& visit) {
    for (const auto& cmd : b.stmts) {
        visit(cmd);
        if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
            visit_commands(iff->then_b, visit);
            visit_commands(iff->else_b, visit);
        } else if (auto* at = std::get_if<CmdAtomic>(&cmd.node)) {
            visit_commands(at->body, visit);
        }
    }
}

template <typename F>
void visit_commands(const Program& p, F&& visit) {
    for (const auto& f : p.funcs)
        visit_commands(f.body, [&](const Command& c) { visit(f, c); });
}

inline const Command* find_command(const Block& b, Label l) {
    const Command* found = nullptr;
    visit_commands(b, [&](const Command& c) {
        if (c.label == l) found = &c;
    });
    return found;
}

inline const Command* find_command(const FuncDecl& f, Label l) { return find_command(f.body, l); }

// Expressions a command reads (used for fresh-use discovery and checkUse).
inline std::vector<const Expr*> read_exprs(const Command& c) {
    std::vector<const Expr*> out;
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, InstrAssign>) out.push_back(&n.rhs);
            else if constexpr (std::is_same_v<T, InstrArrAssign>) {
                out.push_back(&n.index);
                out.push_back(&n.rhs);
            } else if constexpr (std::is_same_v<T, InstrDerefAssign>) out.push_back(&n.rhs);
            else if constexpr (std::is_same_v<T, CmdLet>) {
                std::visit(
                    [&](const auto& r) {
                        using R = std::decay_t<decltype(r)>;
                        if constexpr (std::is_same_v<R, LetPlain>) out.push_back(&r.rhs);
                        else if constexpr (std::is_same_v<R, LetArray>) {
                            for (const auto& e : r.elems) out.push_back(&e);
                        } else if constexpr (std::is_same_v<R, LetFresh>) out.push_back(&r.rhs);
                        else if constexpr (std::is_same_v<R, LetConsistent>) out.push_back(&r.rhs);
                    },
                    n.rhs);
            } else if constexpr (std::is_same_v<T, CmdIf>) out.push_back(&n.cond);
            else if constexpr (std::is_same_v<T, CmdRet>) out.push_back(&n.value);
        },
        c.node);
    return out;
}

// Variables a command reads, including call arguments (a call argument is a
// use of the variable it names; &y arguments read y's identity, not value,
// and are reported separately by callers that care).
inline std::vector<std::string> read_vars(const Command& c) {
    std::vector<std::string> out;
    for (const Expr* e : read_exprs(c)) free_vars(*e, out);
    if (auto* let = std::get_if<CmdLet>(&c.node)) {
        if (auto* call = std::get_if<LetCall>(&let->rhs)) {
            if (call->arg && call->arg->kind == CallArg::Kind::Var) out.push_back(call->arg->var);
        }
    }
    if (auto* d = std::get_if<InstrDerefAssign>(&c.node)) out.push_back(d->refvar);
    return out;
}

}  // namespace oct
