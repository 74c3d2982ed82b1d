#include "coordsem/expression.hpp"

#include <cctype>

namespace coordsem::expr {

std::string_view to_string(CountFn f) {
    switch (f) {
        case CountFn::SourceIn: return "#SourceIn";
        case CountFn::SourceAfter: return "#SourceAfter";
        case CountFn::SourceBefore: return "#SourceBefore";
        case CountFn::SourceTotal: return "#SourceTotal";
        case CountFn::TargetActive: return "#TargetActive";
    }
    return "?";
}

bool is_target_fn(CountFn f) { return f == CountFn::TargetActive; }

namespace lex {

enum class Tok { Int, Count, LParen, RParen, Str, Plus, Minus, Lt, Le, Eq, Ne, Ge, Gt, And, Or, Not, End };

struct Token {
    Tok kind = Tok::End;
    std::int64_t value = 0;
    CountFn fn = CountFn::SourceIn;
    std::string text;
    std::size_t col = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_ws();
            Token t;
            t.col = i_;
            if (i_ >= s_.size()) {
                out.push_back(t);
                return out;
            }
            char c = s_[i_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                std::int64_t v = 0;
                while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) v = v * 10 + (s_[i_++] - '0');
                t.kind = Tok::Int;
                t.value = v;
            } else if (c == '#') {
                ++i_;
                std::string word = ident();
                t.kind = Tok::Count;
                if (word == "SourceIn") t.fn = CountFn::SourceIn;
                else if (word == "SourceAfter") t.fn = CountFn::SourceAfter;
                else if (word == "SourceBefore") t.fn = CountFn::SourceBefore;
                else if (word == "SourceTotal") t.fn = CountFn::SourceTotal;
                else if (word == "TargetActive") t.fn = CountFn::TargetActive;
                else throw ParseError("unknown counting function #" + word, t.col);
            } else if (std::isalpha(static_cast<unsigned char>(c))) {
                std::string word = ident();
                if (word == "and") t.kind = Tok::And;
                else if (word == "or") t.kind = Tok::Or;
                else if (word == "not") t.kind = Tok::Not;
                else throw ParseError("unexpected word '" + word + "'", t.col);
            } else if (c == '"') {
                ++i_;
                std::string v;
                while (i_ < s_.size() && s_[i_] != '"') v += s_[i_++];
                if (i_ >= s_.size()) throw ParseError("unterminated string", t.col);
                ++i_;
                t.kind = Tok::Str;
                t.text = v;
            } else {
                t.kind = symbol(t.col);
            }
            out.push_back(t);
        }
    }

private:
    void skip_ws() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }

    std::string ident() {
        std::string w;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) w += s_[i_++];
        return w;
    }

    bool take(std::string_view lit) {
        if (s_.substr(i_, lit.size()) == lit) {
            i_ += lit.size();
            return true;
        }
        return false;
    }

    Tok symbol(std::size_t col) {
        // multi-byte forms first
        if (take("\xE2\x89\xA4")) return Tok::Le;   // ≤
        if (take("\xE2\x89\xA5")) return Tok::Ge;   // ≥
        if (take("\xE2\x89\xA0")) return Tok::Ne;   // ≠
        if (take("\xE2\x88\xA7")) return Tok::And;  // ∧
        if (take("\xE2\x88\xA8")) return Tok::Or;   // ∨
        if (take("\xC2\xAC")) return Tok::Not;      // ¬
        if (take("\xE2\x88\x92")) return Tok::Minus;
        if (take("<=")) return Tok::Le;
        if (take(">=")) return Tok::Ge;
        if (take("==")) return Tok::Eq;
        if (take("!=")) return Tok::Ne;
        if (take("&&")) return Tok::And;
        if (take("||")) return Tok::Or;
        char c = s_[i_++];
        switch (c) {
            case '(': return Tok::LParen;
            case ')': return Tok::RParen;
            case '+': return Tok::Plus;
            case '-': return Tok::Minus;
            case '<': return Tok::Lt;
            case '>': return Tok::Gt;
            case '=': return Tok::Eq;
            case '!': return Tok::Not;
            default: break;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", col);
    }

    std::string_view s_;
    std::size_t i_ = 0;
};

}  // namespace lex

using lex::Lexer;
using lex::Tok;
using lex::Token;

// Grammar, lowest precedence first:
//   or   := and ('or' and)*
//   and  := not ('and' not)*
//   not  := 'not' not | cmp
//   cmp  := sum (relop sum)?
//   sum  := atom (('+'|'-') atom)*
//   atom := INT | COUNT ['(' STR ')'] | '(' or ')'
class Parser {
public:
    Parser(std::vector<Token> toks, Expr& e) : t_(std::move(toks)), e_(e) {}

    void run() {
        auto [root, is_bool] = parse_or();
        if (peek().kind != Tok::End) throw ParseError("trailing input", peek().col);
        if (!is_bool) throw ParseError("expression must be boolean", 0);
        e_.root_ = root;
    }

private:
    using R = std::pair<int, bool>;  // node, is boolean

    const Token& peek() const { return t_[p_]; }
    const Token& next() { return t_[p_++]; }

    int add(Node n) {
        e_.nodes_.push_back(std::move(n));
        return static_cast<int>(e_.nodes_.size()) - 1;
    }

    int binary(Op op, int l, int r) {
        Node n;
        n.op = op;
        n.lhs = l;
        n.rhs = r;
        return add(n);
    }

    R parse_or() {
        R l = parse_and();
        while (peek().kind == Tok::Or) {
            std::size_t col = next().col;
            R r = parse_and();
            if (!l.second || !r.second) throw ParseError("'or' needs boolean operands", col);
            l = {binary(Op::Or, l.first, r.first), true};
        }
        return l;
    }

    R parse_and() {
        R l = parse_not();
        while (peek().kind == Tok::And) {
            std::size_t col = next().col;
            R r = parse_not();
            if (!l.second || !r.second) throw ParseError("'and' needs boolean operands", col);
            l = {binary(Op::And, l.first, r.first), true};
        }
        return l;
    }

    R parse_not() {
        if (peek().kind == Tok::Not) {
            std::size_t col = next().col;
            R r = parse_not();
            if (!r.second) throw ParseError("'not' needs a boolean operand", col);
            return {binary(Op::Not, r.first, -1), true};
        }
        return parse_cmp();
    }

    R parse_cmp() {
        R l = parse_sum();
        Op op;
        switch (peek().kind) {
            case Tok::Lt: op = Op::Lt; break;
            case Tok::Le: op = Op::Le; break;
            case Tok::Eq: op = Op::Eq; break;
            case Tok::Ne: op = Op::Ne; break;
            case Tok::Ge: op = Op::Ge; break;
            case Tok::Gt: op = Op::Gt; break;
            default: return l;
        }
        std::size_t col = next().col;
        R r = parse_sum();
        if (l.second || r.second) throw ParseError("comparison needs integer operands", col);
        return {binary(op, l.first, r.first), true};
    }

    R parse_sum() {
        R l = parse_atom();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            const Token& t = next();
            R r = parse_atom();
            if (l.second || r.second) throw ParseError("arithmetic needs integer operands", t.col);
            l = {binary(t.kind == Tok::Plus ? Op::Add : Op::Sub, l.first, r.first), false};
        }
        return l;
    }

    R parse_atom() {
        const Token& t = next();
        switch (t.kind) {
            case Tok::Int: {
                Node n;
                n.op = Op::Int;
                n.value = t.value;
                return {add(n), false};
            }
            case Tok::Count: {
                Node n;
                n.op = Op::Count;
                n.fn = t.fn;
                if (peek().kind == Tok::LParen && p_ + 1 < t_.size() && t_[p_ + 1].kind == Tok::Str) {
                    next();
                    n.state = next().text;
                    if (next().kind != Tok::RParen) throw ParseError("expected ')'", t.col);
                }
                return {add(n), false};
            }
            case Tok::LParen: {
                R inner = parse_or();
                if (next().kind != Tok::RParen) throw ParseError("expected ')'", t.col);
                return inner;
            }
            default: throw ParseError("unexpected token", t.col);
        }
    }

    std::vector<Token> t_;
    std::size_t p_ = 0;
    Expr& e_;
};

Expr Expr::parse(std::string_view text) {
    Expr e;
    e.text_ = std::string(text);
    Parser p(Lexer(text).run(), e);
    p.run();
    return e;
}

std::int64_t Expr::eval_int(int n, const Counter& c) const {
    const Node& x = nodes_[static_cast<std::size_t>(n)];
    switch (x.op) {
        case Op::Int: return x.value;
        case Op::Count: return c.count(x.fn, x.state_index);
        case Op::Add: return eval_int(x.lhs, c) + eval_int(x.rhs, c);
        case Op::Sub: return eval_int(x.lhs, c) - eval_int(x.rhs, c);
        default: return eval_bool(n, c) ? 1 : 0;
    }
}

bool Expr::eval_bool(int n, const Counter& c) const {
    const Node& x = nodes_[static_cast<std::size_t>(n)];
    switch (x.op) {
        case Op::Lt: return eval_int(x.lhs, c) < eval_int(x.rhs, c);
        case Op::Le: return eval_int(x.lhs, c) <= eval_int(x.rhs, c);
        case Op::Eq: return eval_int(x.lhs, c) == eval_int(x.rhs, c);
        case Op::Ne: return eval_int(x.lhs, c) != eval_int(x.rhs, c);
        case Op::Ge: return eval_int(x.lhs, c) >= eval_int(x.rhs, c);
        case Op::Gt: return eval_int(x.lhs, c) > eval_int(x.rhs, c);
        case Op::And: return eval_bool(x.lhs, c) && eval_bool(x.rhs, c);
        case Op::Or: return eval_bool(x.lhs, c) || eval_bool(x.rhs, c);
        case Op::Not: return !eval_bool(x.lhs, c);
        default: return eval_int(n, c) != 0;
    }
}

bool Expr::evaluate(const Counter& c) const {
    if (root_ < 0) return true;
    return eval_bool(root_, c);
}

std::vector<Node*> Expr::counting_nodes() {
    std::vector<Node*> out;
    for (auto& n : nodes_)
        if (n.op == Op::Count) out.push_back(&n);
    return out;
}

std::vector<const Node*> Expr::counting_nodes() const {
    std::vector<const Node*> out;
    for (const auto& n : nodes_)
        if (n.op == Op::Count) out.push_back(&n);
    return out;
}

void Expr::render(int n, std::string& out) const {
    const Node& x = nodes_[static_cast<std::size_t>(n)];
    auto bin = [&](const char* sym) {
        out += '(';
        render(x.lhs, out);
        out += sym;
        render(x.rhs, out);
        out += ')';
    };
    switch (x.op) {
        case Op::Int: out += std::to_string(x.value); break;
        case Op::Count:
            out += to_string(x.fn);
            if (!x.state.empty()) out += "(\"" + x.state + "\")";
            break;
        case Op::Add: bin(" + "); break;
        case Op::Sub: bin(" - "); break;
        case Op::Lt: bin(" < "); break;
        case Op::Le: bin(" <= "); break;
        case Op::Eq: bin(" = "); break;
        case Op::Ne: bin(" != "); break;
        case Op::Ge: bin(" >= "); break;
        case Op::Gt: bin(" > "); break;
        case Op::And: bin(" and "); break;
        case Op::Or: bin(" or "); break;
        case Op::Not:
            out += "not ";
            render(x.lhs, out);
            break;
    }
}

std::string Expr::to_canonical() const {
    std::string out;
    if (root_ >= 0) render(root_, out);
    return out;
}

}  // namespace coordsem::expr
