#pragma once

// Recursive-descent parser for `.oct` sources.
//
// Besides the core forms (`let fresh x = e;`, `let consistent(n) x = e;`)
// the grammar accepts marker statements `Fresh(x);` / `Consistent(x, n);`
// immediately after the binding of x; these desugar into the core forms,
// introducing `$n` temporaries when the binding is a call, input, or array.
// Return expressions are normalized so that `ret` always returns a variable
// or a literal. Labels are assigned on the way out (see ast.hpp).

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oct/ast.hpp"
#include "oct/lexer.hpp"

namespace oct {

namespace detail {

class Parser {
  public:
    explicit Parser(const std::string& src) : toks_(lex(src)) {}

    Program parse_program() {
        Program p;
        while (!at(Tok::End)) {
            if (at(Tok::KwInput)) {
                eat(Tok::KwInput);
                do {
                    Token name = eat(Tok::Ident);
                    p.inputs.insert(name.text);
                } while (try_eat(Tok::Comma));
                eat(Tok::Semi);
            } else {
                FuncDecl f = parse_function();
                if (p.index.count(f.name))
                    throw ParseError(cur().pos, "duplicate function name '" + f.name + "'");
                p.index[f.name] = p.funcs.size();
                p.funcs.push_back(std::move(f));
            }
        }
        link(p);
        label_program(p);
        return p;
    }

  private:
    // --- token plumbing -----------------------------------------------------
    const Token& cur() const { return toks_[i_]; }
    bool at(Tok k) const { return cur().kind == k; }
    Token eat(Tok k) {
        if (!at(k))
            throw ParseError(cur().pos, std::string("expected ") + token_name(k) + ", found " +
                                            token_name(cur().kind));
        return toks_[i_++];
    }
    bool try_eat(Tok k) {
        if (at(k)) {
            i_++;
            return true;
        }
        return false;
    }

    // --- expressions --------------------------------------------------------
    Expr parse_expr() { return parse_or(); }

    Expr parse_or() {
        Expr e = parse_and();
        while (at(Tok::OrOr)) {
            eat(Tok::OrOr);
            e = Expr{ExprBin{BinOp::Or, make_expr(std::move(e)), make_expr(parse_and())}};
        }
        return e;
    }
    Expr parse_and() {
        Expr e = parse_eq();
        while (at(Tok::AndAnd)) {
            eat(Tok::AndAnd);
            e = Expr{ExprBin{BinOp::And, make_expr(std::move(e)), make_expr(parse_eq())}};
        }
        return e;
    }
    Expr parse_eq() {
        Expr e = parse_rel();
        while (at(Tok::EqEq) || at(Tok::Ne)) {
            BinOp op = at(Tok::EqEq) ? BinOp::Eq : BinOp::Ne;
            i_++;
            e = Expr{ExprBin{op, make_expr(std::move(e)), make_expr(parse_rel())}};
        }
        return e;
    }
    Expr parse_rel() {
        Expr e = parse_add();
        while (at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) || at(Tok::Ge)) {
            BinOp op = at(Tok::Lt)   ? BinOp::Lt
                       : at(Tok::Le) ? BinOp::Le
                       : at(Tok::Gt) ? BinOp::Gt
                                     : BinOp::Ge;
            i_++;
            e = Expr{ExprBin{op, make_expr(std::move(e)), make_expr(parse_add())}};
        }
        return e;
    }
    Expr parse_add() {
        Expr e = parse_mul();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            BinOp op = at(Tok::Plus) ? BinOp::Add : BinOp::Sub;
            i_++;
            e = Expr{ExprBin{op, make_expr(std::move(e)), make_expr(parse_mul())}};
        }
        return e;
    }
    Expr parse_mul() {
        Expr e = parse_unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            BinOp op = at(Tok::Star) ? BinOp::Mul : BinOp::Div;
            i_++;
            e = Expr{ExprBin{op, make_expr(std::move(e)), make_expr(parse_unary())}};
        }
        return e;
    }
    Expr parse_unary() {
        if (at(Tok::Minus)) {
            eat(Tok::Minus);
            if (at(Tok::Int)) {  // fold negative literals
                Token t = eat(Tok::Int);
                return eint(-t.num);
            }
            return Expr{ExprUn{UnOp::Neg, make_expr(parse_unary())}};
        }
        if (at(Tok::Not)) {
            eat(Tok::Not);
            return Expr{ExprUn{UnOp::Not, make_expr(parse_unary())}};
        }
        return parse_primary();
    }
    Expr parse_primary() {
        if (at(Tok::Int)) return eint(eat(Tok::Int).num);
        if (at(Tok::KwTrue)) {
            eat(Tok::KwTrue);
            return elit(Value::of_bool(true));
        }
        if (at(Tok::KwFalse)) {
            eat(Tok::KwFalse);
            return elit(Value::of_bool(false));
        }
        if (at(Tok::Amp)) {
            eat(Tok::Amp);
            Token name = eat(Tok::Ident);
            if (try_eat(Tok::LBracket)) {
                Token idx = eat(Tok::Int);
                eat(Tok::RBracket);
                return elit(Value::ref_cell(name.text, idx.num));
            }
            return elit(Value::ref_var(name.text));
        }
        if (at(Tok::Ident)) {
            Token name = eat(Tok::Ident);
            if (try_eat(Tok::LBracket)) {
                Expr idx = parse_expr();
                eat(Tok::RBracket);
                return Expr{ExprArrRead{name.text, make_expr(std::move(idx))}};
            }
            return evar(name.text);
        }
        if (at(Tok::LParen)) {
            eat(Tok::LParen);
            Expr e = parse_expr();
            eat(Tok::RParen);
            return e;
        }
        throw ParseError(cur().pos, std::string("expected expression, found ") + token_name(cur().kind));
    }

    // --- statements ---------------------------------------------------------

    struct Marker {
        bool fresh = false;   // Fresh(x) vs Consistent(x, n)
        std::string var;
        long long set_id = 0;
        SourcePos pos;
    };
    struct ParsedStmt {
        std::variant<Command, Marker> v;
    };

    CallArg parse_call_arg() {
        if (at(Tok::Amp)) {
            eat(Tok::Amp);
            Token name = eat(Tok::Ident);
            if (try_eat(Tok::LBracket)) {
                Token idx = eat(Tok::Int);
                eat(Tok::RBracket);
                return CallArg::of_lit(Value::ref_cell(name.text, idx.num));
            }
            return CallArg::of_lit(Value::ref_var(name.text));
        }
        if (at(Tok::Int)) return CallArg::of_lit(Value::of_int(eat(Tok::Int).num));
        if (at(Tok::Minus)) {
            eat(Tok::Minus);
            return CallArg::of_lit(Value::of_int(-eat(Tok::Int).num));
        }
        if (at(Tok::KwTrue)) {
            eat(Tok::KwTrue);
            return CallArg::of_lit(Value::of_bool(true));
        }
        if (at(Tok::KwFalse)) {
            eat(Tok::KwFalse);
            return CallArg::of_lit(Value::of_bool(false));
        }
        Token name = eat(Tok::Ident);
        return CallArg::of_var(name.text);
    }

    // Parse the right side of `let x =`; calls are parsed as LetCall and
    // resolved to LetInput in link().
    CmdLet parse_let_rhs(std::string var) {
        CmdLet let;
        let.var = std::move(var);
        if (at(Tok::LBracket)) {
            eat(Tok::LBracket);
            LetArray arr;
            if (!at(Tok::RBracket)) {
                do {
                    arr.elems.push_back(parse_expr());
                } while (try_eat(Tok::Comma));
            }
            eat(Tok::RBracket);
            let.rhs = std::move(arr);
            return let;
        }
        if (at(Tok::Ident) && toks_[i_ + 1].kind == Tok::LParen) {
            Token callee = eat(Tok::Ident);
            eat(Tok::LParen);
            LetCall call;
            call.callee = callee.text;
            if (!at(Tok::RParen)) call.arg = parse_call_arg();
            eat(Tok::RParen);
            let.rhs = std::move(call);
            return let;
        }
        let.rhs = LetPlain{parse_expr()};
        return let;
    }

    std::vector<ParsedStmt> parse_raw_block(bool& saw_ret) {
        std::vector<ParsedStmt> out;
        eat(Tok::LBrace);
        while (!at(Tok::RBrace)) {
            out.push_back(parse_stmt(saw_ret));
        }
        eat(Tok::RBrace);
        return out;
    }

    ParsedStmt parse_stmt(bool& saw_ret) {
        SourcePos pos = cur().pos;
        if (at(Tok::KwSkip)) {
            eat(Tok::KwSkip);
            eat(Tok::Semi);
            return {Command{-1, InstrSkip{}}};
        }
        if (at(Tok::KwRet)) {
            eat(Tok::KwRet);
            Expr e = parse_expr();
            eat(Tok::Semi);
            saw_ret = true;
            return {Command{-1, CmdRet{std::move(e)}}};
        }
        if (at(Tok::KwFreshMark)) {
            Token t = eat(Tok::KwFreshMark);
            eat(Tok::LParen);
            Token var = eat(Tok::Ident);
            eat(Tok::RParen);
            eat(Tok::Semi);
            return {Marker{true, var.text, 0, t.pos}};
        }
        if (at(Tok::KwConsistentMark)) {
            Token t = eat(Tok::KwConsistentMark);
            eat(Tok::LParen);
            Token var = eat(Tok::Ident);
            eat(Tok::Comma);
            Token id = eat(Tok::Int);
            eat(Tok::RParen);
            eat(Tok::Semi);
            return {Marker{false, var.text, id.num, t.pos}};
        }
        if (at(Tok::KwLet)) {
            eat(Tok::KwLet);
            if (try_eat(Tok::KwFresh)) {
                Token var = eat(Tok::Ident);
                eat(Tok::Eq);
                Expr e = parse_expr();
                eat(Tok::Semi);
                return {Command{-1, CmdLet{var.text, LetFresh{std::move(e)}}}};
            }
            if (try_eat(Tok::KwConsistent)) {
                eat(Tok::LParen);
                Token id = eat(Tok::Int);
                eat(Tok::RParen);
                Token var = eat(Tok::Ident);
                eat(Tok::Eq);
                Expr e = parse_expr();
                eat(Tok::Semi);
                return {Command{-1, CmdLet{var.text, LetConsistent{id.num, std::move(e)}}}};
            }
            Token var = eat(Tok::Ident);
            eat(Tok::Eq);
            CmdLet let = parse_let_rhs(var.text);
            eat(Tok::Semi);
            return {Command{-1, std::move(let)}};
        }
        if (at(Tok::KwIf)) {
            eat(Tok::KwIf);
            Expr cond = parse_expr();
            CmdIf iff;
            iff.cond = std::move(cond);
            iff.then_b = parse_block(saw_ret);
            if (try_eat(Tok::KwElse)) iff.else_b = parse_block(saw_ret);
            return {Command{-1, std::move(iff)}};
        }
        if (at(Tok::KwAtomic)) {
            eat(Tok::KwAtomic);
            eat(Tok::LParen);
            Token aid = eat(Tok::Int);
            eat(Tok::Comma);
            eat(Tok::LBrace);
            CmdAtomic at_cmd;
            at_cmd.aid = (int)aid.num;
            if (!at(Tok::RBrace)) {
                do {
                    // `*p` marks the location a reference parameter points to
                    std::string loc = try_eat(Tok::Star) ? "*" : "";
                    loc += eat(Tok::Ident).text;
                    at_cmd.omega.push_back(std::move(loc));
                } while (try_eat(Tok::Comma));
            }
            eat(Tok::RBrace);
            eat(Tok::RParen);
            at_cmd.body = parse_block(saw_ret);
            return {Command{-1, std::move(at_cmd)}};
        }
        if (at(Tok::Star)) {
            eat(Tok::Star);
            Token var = eat(Tok::Ident);
            eat(Tok::Assign);
            Expr rhs = parse_expr();
            eat(Tok::Semi);
            return {Command{-1, InstrDerefAssign{var.text, std::move(rhs)}}};
        }
        if (at(Tok::Ident)) {
            Token name = eat(Tok::Ident);
            if (try_eat(Tok::LBracket)) {
                Expr idx = parse_expr();
                eat(Tok::RBracket);
                eat(Tok::Assign);
                Expr rhs = parse_expr();
                eat(Tok::Semi);
                return {Command{-1, InstrArrAssign{name.text, std::move(idx), std::move(rhs)}}};
            }
            eat(Tok::Assign);
            Expr rhs = parse_expr();
            eat(Tok::Semi);
            return {Command{-1, InstrAssign{name.text, std::move(rhs)}}};
        }
        throw ParseError(pos, std::string("expected statement, found ") + token_name(cur().kind));
    }

    Block parse_block(bool& saw_ret) {
        std::vector<ParsedStmt> raw = parse_raw_block(saw_ret);
        return desugar(std::move(raw));
    }

    // Apply Fresh/Consistent markers to the binding immediately preceding them.
    Block desugar(std::vector<ParsedStmt> raw) {
        Block out;
        for (size_t i = 0; i < raw.size(); ++i) {
            if (auto* m = std::get_if<Marker>(&raw[i].v)) {
                throw ParseError(m->pos, "annotation '" + std::string(m->fresh ? "Fresh" : "Consistent") +
                                             "(" + m->var + ")' does not follow the binding of '" +
                                             m->var + "'");
            }
            Command cmd = std::move(std::get<Command>(raw[i].v));
            auto* let = std::get_if<CmdLet>(&cmd.node);
            bool bindable = let && !std::holds_alternative<LetFresh>(let->rhs) &&
                            !std::holds_alternative<LetConsistent>(let->rhs);
            // Collect markers that follow this binding.
            std::optional<Marker> fresh_m, cons_m;
            while (bindable && i + 1 < raw.size()) {
                auto* m = std::get_if<Marker>(&raw[i + 1].v);
                if (!m || m->var != let->var) break;
                if (m->fresh) {
                    if (fresh_m) throw ParseError(m->pos, "'" + m->var + "' is already marked Fresh");
                    fresh_m = *m;
                } else {
                    if (cons_m)
                        throw ParseError(m->pos, "'" + m->var + "' is already marked Consistent");
                    cons_m = *m;
                }
                ++i;
            }
            if (!fresh_m && !cons_m) {
                out.stmts.push_back(std::move(cmd));
                continue;
            }
            if (std::holds_alternative<LetArray>(let->rhs))
                throw ParseError((fresh_m ? fresh_m : cons_m)->pos,
                                 "annotations on array bindings are not supported");
            bool plain = std::holds_alternative<LetPlain>(let->rhs);
            std::string user_var = let->var;
            if (plain && fresh_m && !cons_m) {
                let->rhs = LetFresh{std::move(std::get<LetPlain>(let->rhs).rhs)};
                out.stmts.push_back(std::move(cmd));
                continue;
            }
            if (plain && cons_m && !fresh_m) {
                let->rhs = LetConsistent{cons_m->set_id, std::move(std::get<LetPlain>(let->rhs).rhs)};
                out.stmts.push_back(std::move(cmd));
                continue;
            }
            // Remaining cases route through temporaries. Fresh is always the
            // outermost wrapper so the user-visible name keeps its use sites.
            Expr src;
            if (plain && fresh_m && cons_m) {
                src = std::move(std::get<LetPlain>(let->rhs).rhs);
            } else {
                std::string t = fresh_temp();
                Command bind{-1, CmdLet{t, std::move(let->rhs)}};
                out.stmts.push_back(std::move(bind));
                src = evar(t);
            }
            if (cons_m && fresh_m) {
                std::string u = fresh_temp();
                out.stmts.push_back(Command{-1, CmdLet{u, LetConsistent{cons_m->set_id, std::move(src)}}});
                out.stmts.push_back(Command{-1, CmdLet{user_var, LetFresh{evar(u)}}});
            } else if (cons_m) {
                out.stmts.push_back(
                    Command{-1, CmdLet{user_var, LetConsistent{cons_m->set_id, std::move(src)}}});
            } else {
                out.stmts.push_back(Command{-1, CmdLet{user_var, LetFresh{std::move(src)}}});
            }
        }
        return out;
    }

    std::string fresh_temp() { return "$" + std::to_string(temp_counter_++); }

    FuncDecl parse_function() {
        eat(Tok::KwFn);
        FuncDecl f;
        temp_counter_ = 0;
        f.name = eat(Tok::Ident).text;
        eat(Tok::LParen);
        if (!at(Tok::RParen)) {
            bool by_ref = try_eat(Tok::Amp);
            Token p = eat(Tok::Ident);
            f.param = Param{p.text, by_ref};
        }
        eat(Tok::RParen);
        SourcePos body_pos = cur().pos;
        bool saw_ret = false;
        f.body = parse_block(saw_ret);
        if (!saw_ret) throw ParseError(body_pos, "function '" + f.name + "' has no ret statement");
        enforce_ret_position(f, body_pos);
        normalize_ret(f);
        return f;
    }

    // Exactly one ret per function, in tail position (possibly inside
    // trailing atomic blocks, never inside if arms).
    void enforce_ret_position(const FuncDecl& f, SourcePos pos) {
        int count = 0;
        visit_commands(f.body, [&](const Command& c) {
            if (std::holds_alternative<CmdRet>(c.node)) count++;
        });
        const Block* b = &f.body;
        const Command* tail = nullptr;
        while (true) {
            if (b->stmts.empty()) break;
            tail = &b->stmts.back();
            if (auto* at_cmd = std::get_if<CmdAtomic>(&tail->node)) {
                b = &at_cmd->body;
                continue;
            }
            break;
        }
        bool tail_is_ret = tail && std::holds_alternative<CmdRet>(tail->node);
        if (count != 1 || !tail_is_ret)
            throw ParseError(pos, "function '" + f.name +
                                      "' must have exactly one ret, as its final statement");
    }

    void normalize_ret(FuncDecl& f) {
        Block* b = &f.body;
        while (std::holds_alternative<CmdAtomic>(b->stmts.back().node))
            b = &std::get<CmdAtomic>(b->stmts.back().node).body;
        auto& ret = std::get<CmdRet>(b->stmts.back().node);
        bool simple = std::holds_alternative<ExprVar>(ret.value.node) ||
                      std::holds_alternative<ExprLit>(ret.value.node);
        if (simple) return;
        std::string t = fresh_temp();
        Command bind{-1, CmdLet{t, LetPlain{std::move(ret.value)}}};
        ret.value = evar(t);
        b->stmts.insert(b->stmts.end() - 1, std::move(bind));
    }

    // Resolve calls against declared functions/inputs; reject recursion.
    void link(Program& p) {
        for (auto& f : p.funcs) link_block(p, f.body);
        // Cycle check over the call graph.
        std::map<std::string, std::vector<std::string>> callees;
        for (const auto& f : p.funcs) {
            auto& out = callees[f.name];
            visit_commands(f.body, [&](const Command& c) {
                if (auto* let = std::get_if<CmdLet>(&c.node))
                    if (auto* call = std::get_if<LetCall>(&let->rhs)) out.push_back(call->callee);
            });
        }
        std::set<std::string> done, active;
        std::vector<std::string> stack;
        auto dfs = [&](auto&& self, const std::string& fn) -> void {
            if (done.count(fn)) return;
            if (active.count(fn)) {
                std::string cycle;
                for (const auto& s : stack) cycle += s + " -> ";
                throw ParseError({}, "recursion detected: " + cycle + fn);
            }
            active.insert(fn);
            stack.push_back(fn);
            for (const auto& g : callees[fn]) self(self, g);
            stack.pop_back();
            active.erase(fn);
            done.insert(fn);
        };
        for (const auto& f : p.funcs) dfs(dfs, f.name);
    }

    void link_block(Program& p, Block& b) {
        for (auto& cmd : b.stmts) {
            if (auto* let = std::get_if<CmdLet>(&cmd.node)) {
                if (auto* call = std::get_if<LetCall>(&let->rhs)) {
                    if (p.inputs.count(call->callee)) {
                        if (call->arg)
                            throw ParseError({}, "input operation '" + call->callee +
                                                     "' takes no argument");
                        let->rhs = LetInput{call->callee};
                    } else if (!p.index.count(call->callee)) {
                        throw ParseError({}, "unresolved call to '" + call->callee + "'");
                    }
                }
            } else if (auto* iff = std::get_if<CmdIf>(&cmd.node)) {
                link_block(p, iff->then_b);
                link_block(p, iff->else_b);
            } else if (auto* at_cmd = std::get_if<CmdAtomic>(&cmd.node)) {
                link_block(p, at_cmd->body);
            }
        }
    }

    std::vector<Token> toks_;
    size_t i_ = 0;
    int temp_counter_ = 0;
};

}  // namespace detail

inline Program parse(const std::string& source) {
    detail::Parser p(source);
    return p.parse_program();
}

}  // namespace oct
