#pragma once

// Tokenizer for `.oct` sources. Line comments start with `//`.

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

namespace oct {

struct SourcePos {
    int line = 1;
    int col = 1;
};

struct ParseError : std::runtime_error {
    SourcePos pos;
    ParseError(SourcePos p, const std::string& msg)
        : std::runtime_error("parse error at " + std::to_string(p.line) + ":" +
                             std::to_string(p.col) + ": " + msg),
          pos(p) {}
};

enum class Tok {
    Ident, Int,
    KwFn, KwLet, KwFresh, KwConsistent, KwIf, KwElse, KwAtomic, KwRet, KwSkip,
    KwInput, KwTrue, KwFalse, KwFreshMark, KwConsistentMark,
    LParen, RParen, LBrace, RBrace, LBracket, RBracket,
    Comma, Semi, Assign /* := */, Eq /* = */,
    Plus, Minus, Star, Slash,
    Lt, Le, Gt, Ge, EqEq, Ne, AndAnd, OrOr, Not, Amp,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    long long num = 0;
    SourcePos pos;
};

inline const char* token_name(Tok t) {
    switch (t) {
        case Tok::Ident: return "identifier";
        case Tok::Int: return "integer";
        case Tok::KwFn: return "'fn'";
        case Tok::KwLet: return "'let'";
        case Tok::KwFresh: return "'fresh'";
        case Tok::KwConsistent: return "'consistent'";
        case Tok::KwIf: return "'if'";
        case Tok::KwElse: return "'else'";
        case Tok::KwAtomic: return "'atomic'";
        case Tok::KwRet: return "'ret'";
        case Tok::KwSkip: return "'skip'";
        case Tok::KwInput: return "'input'";
        case Tok::KwTrue: return "'true'";
        case Tok::KwFalse: return "'false'";
        case Tok::KwFreshMark: return "'Fresh'";
        case Tok::KwConsistentMark: return "'Consistent'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::LBrace: return "'{'";
        case Tok::RBrace: return "'}'";
        case Tok::LBracket: return "'['";
        case Tok::RBracket: return "']'";
        case Tok::Comma: return "','";
        case Tok::Semi: return "';'";
        case Tok::Assign: return "':='";
        case Tok::Eq: return "'='";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::Lt: return "'<'";
        case Tok::Le: return "'<='";
        case Tok::Gt: return "'>'";
        case Tok::Ge: return "'>='";
        case Tok::EqEq: return "'=='";
        case Tok::Ne: return "'!='";
        case Tok::AndAnd: return "'&&'";
        case Tok::OrOr: return "'||'";
        case Tok::Not: return "'!'";
        case Tok::Amp: return "'&'";
        case Tok::End: return "end of input";
    }
    return "?";
}

inline std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    SourcePos pos;
    size_t i = 0;
    auto peek = [&](size_t k = 0) -> char { return i + k < src.size() ? src[i + k] : '\0'; };
    auto advance = [&]() {
        if (src[i] == '\n') {
            pos.line++;
            pos.col = 1;
        } else {
            pos.col++;
        }
        i++;
    };
    auto ident_start = [](char c) { return std::isalpha((unsigned char)c) || c == '_' || c == '$'; };
    auto ident_rest = [&](char c) { return ident_start(c) || std::isdigit((unsigned char)c); };

    while (i < src.size()) {
        char c = peek();
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance();
            continue;
        }
        if (c == '/' && peek(1) == '/') {
            while (i < src.size() && peek() != '\n') advance();
            continue;
        }
        Token t;
        t.pos = pos;
        if (std::isdigit((unsigned char)c)) {
            std::string digits;
            while (std::isdigit((unsigned char)peek())) {
                digits += peek();
                advance();
            }
            t.kind = Tok::Int;
            t.text = digits;
            t.num = std::stoll(digits);
            out.push_back(std::move(t));
            continue;
        }
        if (ident_start(c)) {
            std::string name;
            while (ident_rest(peek())) {
                name += peek();
                advance();
            }
            t.text = name;
            if (name == "fn") t.kind = Tok::KwFn;
            else if (name == "let") t.kind = Tok::KwLet;
            else if (name == "fresh") t.kind = Tok::KwFresh;
            else if (name == "consistent") t.kind = Tok::KwConsistent;
            else if (name == "if") t.kind = Tok::KwIf;
            else if (name == "else") t.kind = Tok::KwElse;
            else if (name == "atomic") t.kind = Tok::KwAtomic;
            else if (name == "ret") t.kind = Tok::KwRet;
            else if (name == "skip") t.kind = Tok::KwSkip;
            else if (name == "input") t.kind = Tok::KwInput;
            else if (name == "true") t.kind = Tok::KwTrue;
            else if (name == "false") t.kind = Tok::KwFalse;
            else if (name == "Fresh") t.kind = Tok::KwFreshMark;
            else if (name == "Consistent") t.kind = Tok::KwConsistentMark;
            else t.kind = Tok::Ident;
            out.push_back(std::move(t));
            continue;
        }
        auto two = [&](char a, char b, Tok k) -> bool {
            if (c == a && peek(1) == b) {
                t.kind = k;
                advance();
                advance();
                out.push_back(t);
                return true;
            }
            return false;
        };
        if (two(':', '=', Tok::Assign)) continue;
        if (two('=', '=', Tok::EqEq)) continue;
        if (two('!', '=', Tok::Ne)) continue;
        if (two('<', '=', Tok::Le)) continue;
        if (two('>', '=', Tok::Ge)) continue;
        if (two('&', '&', Tok::AndAnd)) continue;
        if (two('|', '|', Tok::OrOr)) continue;
        switch (c) {
            case '(': t.kind = Tok::LParen; break;
            case ')': t.kind = Tok::RParen; break;
            case '{': t.kind = Tok::LBrace; break;
            case '}': t.kind = Tok::RBrace; break;
            case '[': t.kind = Tok::LBracket; break;
            case ']': t.kind = Tok::RBracket; break;
            case ',': t.kind = Tok::Comma; break;
            case ';': t.kind = Tok::Semi; break;
            case '=': t.kind = Tok::Eq; break;
            case '+': t.kind = Tok::Plus; break;
            case '-': t.kind = Tok::Minus; break;
            case '*': t.kind = Tok::Star; break;
            case '/': t.kind = Tok::Slash; break;
            case '<': t.kind = Tok::Lt; break;
            case '>': t.kind = Tok::Gt; break;
            case '!': t.kind = Tok::Not; break;
            case '&': t.kind = Tok::Amp; break;
            default:
                throw ParseError(pos, std::string("unexpected character '") + c + "'");
        }
        advance();
        out.push_back(t);
    }
    Token end;
    end.kind = Tok::End;
    end.pos = pos;
    out.push_back(end);
    return out;
}

}  // namespace oct
