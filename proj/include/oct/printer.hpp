#pragma once

// Pretty printer. Emits concrete syntax that re-parses to a structurally
// identical program (annotations are printed in their core `let fresh` /
// `let consistent(n)` forms).

#include <string>

#include "oct/ast.hpp"

namespace oct {

namespace detail {

inline int prec(BinOp op) {
    switch (op) {
        case BinOp::Or: return 1;
        case BinOp::And: return 2;
        case BinOp::Eq:
        case BinOp::Ne: return 3;
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: return 4;
        case BinOp::Add:
        case BinOp::Sub: return 5;
        case BinOp::Mul:
        case BinOp::Div: return 6;
    }
    return 0;
}

inline const char* op_text(BinOp op) {
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

constexpr int kUnaryPrec = 7;

}  // namespace detail

inline std::string print(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Int: return std::to_string(v.num);
        case Value::Kind::Bool: return v.flag ? "true" : "false";
        case Value::Kind::RefVar: return "&" + v.name;
        case Value::Kind::RefCell: return "&" + v.name + "[" + std::to_string(v.num) + "]";
    }
    return "?";
}

inline int expr_prec(const Expr& e) {
    if (auto* b = std::get_if<ExprBin>(&e.node)) return detail::prec(b->op);
    if (std::holds_alternative<ExprUn>(e.node)) return detail::kUnaryPrec;
    return 100;
}

inline std::string print(const Expr& e) {
    return std::visit(
        [&](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ExprVar>) return n.name;
            else if constexpr (std::is_same_v<T, ExprLit>) return print(n.value);
            else if constexpr (std::is_same_v<T, ExprArrRead>)
                return n.arr + "[" + print(*n.index) + "]";
            else if constexpr (std::is_same_v<T, ExprBin>) {
                int p = detail::prec(n.op);
                std::string l = print(*n.lhs);
                std::string r = print(*n.rhs);
                if (expr_prec(*n.lhs) < p) l = "(" + l + ")";
                if (expr_prec(*n.rhs) <= p) r = "(" + r + ")";
                return l + " " + detail::op_text(n.op) + " " + r;
            } else {
                std::string inner = print(*n.operand);
                if (expr_prec(*n.operand) < detail::kUnaryPrec) inner = "(" + inner + ")";
                return (n.op == UnOp::Neg ? "-" : "!") + inner;
            }
        },
        e.node);
}

inline std::string print(const CallArg& a) {
    return a.kind == CallArg::Kind::Var ? a.var : print(a.lit);
}

namespace detail {

inline void print_block(const Block& b, std::string& out, int indent);

inline void print_cmd(const Command& c, std::string& out, int indent) {
    std::string pad(2 * indent, ' ');
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, InstrSkip>) out += pad + "skip;\n";
            else if constexpr (std::is_same_v<T, InstrAssign>)
                out += pad + n.var + " := " + print(n.rhs) + ";\n";
            else if constexpr (std::is_same_v<T, InstrArrAssign>)
                out += pad + n.arr + "[" + print(n.index) + "] := " + print(n.rhs) + ";\n";
            else if constexpr (std::is_same_v<T, InstrDerefAssign>)
                out += pad + "*" + n.refvar + " := " + print(n.rhs) + ";\n";
            else if constexpr (std::is_same_v<T, CmdLet>) {
                std::visit(
                    [&](const auto& r) {
                        using R = std::decay_t<decltype(r)>;
                        if constexpr (std::is_same_v<R, LetPlain>)
                            out += pad + "let " + n.var + " = " + print(r.rhs) + ";\n";
                        else if constexpr (std::is_same_v<R, LetCall>)
                            out += pad + "let " + n.var + " = " + r.callee + "(" +
                                   (r.arg ? print(*r.arg) : "") + ");\n";
                        else if constexpr (std::is_same_v<R, LetInput>)
                            out += pad + "let " + n.var + " = " + r.sensor + "();\n";
                        else if constexpr (std::is_same_v<R, LetArray>) {
                            out += pad + "let " + n.var + " = [";
                            for (size_t i = 0; i < r.elems.size(); ++i) {
                                if (i) out += ", ";
                                out += print(r.elems[i]);
                            }
                            out += "];\n";
                        } else if constexpr (std::is_same_v<R, LetFresh>)
                            out += pad + "let fresh " + n.var + " = " + print(r.rhs) + ";\n";
                        else
                            out += pad + "let consistent(" + std::to_string(r.set_id) + ") " +
                                   n.var + " = " + print(r.rhs) + ";\n";
                    },
                    n.rhs);
            } else if constexpr (std::is_same_v<T, CmdIf>) {
                out += pad + "if " + print(n.cond) + " {\n";
                print_block(n.then_b, out, indent + 1);
                if (n.else_b.stmts.empty()) {
                    out += pad + "}\n";
                } else {
                    out += pad + "} else {\n";
                    print_block(n.else_b, out, indent + 1);
                    out += pad + "}\n";
                }
            } else if constexpr (std::is_same_v<T, CmdAtomic>) {
                out += pad + "atomic(" + std::to_string(n.aid) + ", {";
                for (size_t i = 0; i < n.omega.size(); ++i) {
                    if (i) out += ", ";
                    out += n.omega[i];
                }
                out += "}) {\n";
                print_block(n.body, out, indent + 1);
                out += pad + "}\n";
            } else {
                out += pad + "ret " + print(n.value) + ";\n";
            }
        },
        c.node);
}

inline void print_block(const Block& b, std::string& out, int indent) {
    for (const auto& c : b.stmts) print_cmd(c, out, indent);
}

}  // namespace detail

inline std::string pretty_print(const Program& p) {
    std::string out;
    if (!p.inputs.empty()) {
        out += "input ";
        bool first = true;
        for (const auto& s : p.inputs) {
            if (!first) out += ", ";
            out += s;
            first = false;
        }
        out += ";\n\n";
    }
    for (size_t i = 0; i < p.funcs.size(); ++i) {
        const auto& f = p.funcs[i];
        out += "fn " + f.name + "(";
        if (f.param) out += (f.param->by_ref ? "&" : "") + f.param->name;
        out += ") {\n";
        detail::print_block(f.body, out, 1);
        out += "}\n";
        if (i + 1 < p.funcs.size()) out += "\n";
    }
    return out;
}

}  // namespace oct
