#ifndef RLLAB_EXPR_HPP
#define RLLAB_EXPR_HPP

// Expression trees for f: R^n -> R and their text grammar:
//
//   expr   := term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := '-' factor | primary ('^' int)*
//   primary:= number | 'x'digit | '(' expr ')'
//           | ('abs'|'sin'|'cos'|'exp'|'max') '(' expr (',' expr)* ')'
//           | 'norm2sq' '(' ')'
//
// Unary minus written directly before a numeric literal folds into the literal.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rllab/error.hpp"

namespace rllab::expr {

enum class Op { number, var, add, sub, mul, neg, pow, abs, sin, cos, exp, max, norm2sq };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op;
    double value = 0.0;  // number
    int index = 0;       // var (0-based) or pow exponent
    std::vector<NodePtr> args;
};

inline NodePtr make(Op op, std::vector<NodePtr> args = {}, double value = 0.0, int index = 0) {
    return std::make_shared<const Node>(Node{op, value, index, std::move(args)});
}
inline NodePtr number(double v) { return make(Op::number, {}, v); }
inline NodePtr var(int i) { return make(Op::var, {}, 0.0, i); }

inline bool equal(const Node& a, const Node& b) {
    if (a.op != b.op || a.args.size() != b.args.size()) return false;
    if (a.op == Op::number && a.value != b.value) return false;
    if ((a.op == Op::var || a.op == Op::pow) && a.index != b.index) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!equal(*a.args[i], *b.args[i])) return false;
    }
    return true;
}

/// Number of variables referenced: 1 + highest var index (0 if none).
inline int arity(const Node& n) {
    int m = n.op == Op::var ? n.index + 1 : 0;
    for (const auto& a : n.args) m = std::max(m, arity(*a));
    return m;
}

inline bool contains_op(const Node& n, Op op) {
    if (n.op == op) return true;
    return std::any_of(n.args.begin(), n.args.end(), [&](const NodePtr& a) { return contains_op(*a, op); });
}

inline bool is_polynomial(const Node& n) {
    switch (n.op) {
    case Op::number: case Op::var: case Op::norm2sq: return true;
    case Op::add: case Op::sub: case Op::mul: case Op::neg: break;
    case Op::pow:
        if (n.index < 0) return false;
        break;
    default: return false;
    }
    return std::all_of(n.args.begin(), n.args.end(), [](const NodePtr& a) { return is_polynomial(*a); });
}

/// Non-smooth building blocks (abs, max).
inline bool is_smooth(const Node& n) { return !contains_op(n, Op::abs) && !contains_op(n, Op::max); }

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != s_.size()) throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) {
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    NodePtr expr() {
        NodePtr lhs = term();
        while (true) {
            if (accept('+')) {
                lhs = make(Op::add, {lhs, term()});
            } else if (accept('-')) {
                lhs = make(Op::sub, {lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        while (accept('*')) lhs = make(Op::mul, {lhs, factor()});
        return lhs;
    }

    NodePtr factor() {
        if (accept('-')) {
            skip_ws();
            const bool literal_next =
                pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.');
            NodePtr inner = factor();
            if (literal_next && inner->op == Op::number) return number(-inner->value);
            return make(Op::neg, {inner});
        }
        NodePtr base = primary();
        while (accept('^')) base = make(Op::pow, {base}, 0.0, integer());
        return base;
    }

    int integer() {
        skip_ws();
        const std::size_t start = pos_;
        bool neg = false;
        if (pos_ < s_.size() && s_[pos_] == '-') {
            neg = true;
            ++pos_;
        }
        int v = 0;
        auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (ec != std::errc() || p == s_.data() + pos_) throw ParseError("expected integer exponent", start);
        pos_ = static_cast<std::size_t>(p - s_.data());
        return neg ? -v : v;
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return literal();
        if (accept('(')) {
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    NodePtr literal() {
        const std::size_t start = pos_;
        double v = 0.0;
        auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (ec != std::errc()) throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(p - s_.data());
        return number(v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        const std::string_view id = s_.substr(start, pos_ - start);
        if (id.size() == 2 && id[0] == 'x' && id[1] >= '1' && id[1] <= '9') return var(id[1] - '1');
        Op op;
        if (id == "abs") op = Op::abs;
        else if (id == "sin") op = Op::sin;
        else if (id == "cos") op = Op::cos;
        else if (id == "exp") op = Op::exp;
        else if (id == "max") op = Op::max;
        else if (id == "norm2sq") {
            expect('(');
            expect(')');
            return make(Op::norm2sq);
        } else {
            throw ParseError("unknown identifier '" + std::string(id) + "'", start);
        }
        expect('(');
        std::vector<NodePtr> args{expr()};
        while (accept(',')) args.push_back(expr());
        expect(')');
        if (op != Op::max && args.size() != 1) throw ParseError("function takes one argument", start);
        return make(op, std::move(args));
    }
};

inline NodePtr parse(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Canonical printer (fully parenthesised; parse(print(e)) is structurally e)

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (v < 0 || (v == 0 && std::signbit(v))) s = "(" + s + ")";
    return s;
}

inline std::string print(const Node& n) {
    auto a = [&](std::size_t i) { return print(*n.args[i]); };
    switch (n.op) {
    case Op::number: return format_number(n.value);
    case Op::var: return "x" + std::to_string(n.index + 1);
    case Op::add: return "(" + a(0) + " + " + a(1) + ")";
    case Op::sub: return "(" + a(0) + " - " + a(1) + ")";
    case Op::mul: return "(" + a(0) + " * " + a(1) + ")";
    case Op::neg: return "(-(" + a(0) + "))";
    case Op::pow: return "(" + a(0) + "^" + std::to_string(n.index) + ")";
    case Op::abs: return "abs(" + a(0) + ")";
    case Op::sin: return "sin(" + a(0) + ")";
    case Op::cos: return "cos(" + a(0) + ")";
    case Op::exp: return "exp(" + a(0) + ")";
    case Op::norm2sq: return "norm2sq()";
    case Op::max: {
        std::string s = "max(";
        for (std::size_t i = 0; i < n.args.size(); ++i) s += (i ? ", " : "") + a(i);
        return s + ")";
    }
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Evaluation

inline double evaluate(const Node& n, std::span<const double> x) {
    switch (n.op) {
    case Op::number: return n.value;
    case Op::var:
        if (static_cast<std::size_t>(n.index) >= x.size()) throw DimensionError("variable out of range");
        return x[n.index];
    case Op::add: return evaluate(*n.args[0], x) + evaluate(*n.args[1], x);
    case Op::sub: return evaluate(*n.args[0], x) - evaluate(*n.args[1], x);
    case Op::mul: return evaluate(*n.args[0], x) * evaluate(*n.args[1], x);
    case Op::neg: return -evaluate(*n.args[0], x);
    case Op::pow: {
        const double b = evaluate(*n.args[0], x);
        double r = 1.0;
        const int e = std::abs(n.index);
        for (int k = 0; k < e; ++k) r *= b;
        return n.index < 0 ? 1.0 / r : r;
    }
    case Op::abs: return std::abs(evaluate(*n.args[0], x));
    case Op::sin: return std::sin(evaluate(*n.args[0], x));
    case Op::cos: return std::cos(evaluate(*n.args[0], x));
    case Op::exp: return std::exp(evaluate(*n.args[0], x));
    case Op::norm2sq: {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    }
    case Op::max: {
        double m = evaluate(*n.args[0], x);
        for (std::size_t i = 1; i < n.args.size(); ++i) m = std::max(m, evaluate(*n.args[i], x));
        return m;
    }
    }
    return 0.0;
}

/// Value and one-sided directional derivative f'(x; d), exact for this grammar.
struct Jet {
    double v;
    double d;
};

inline Jet directional(const Node& n, std::span<const double> x, std::span<const double> dir) {
    auto arg = [&](std::size_t i) { return directional(*n.args[i], x, dir); };
    switch (n.op) {
    case Op::number: return {n.value, 0.0};
    case Op::var:
        if (static_cast<std::size_t>(n.index) >= x.size()) throw DimensionError("variable out of range");
        return {x[n.index], dir[n.index]};
    case Op::add: {
        auto a = arg(0), b = arg(1);
        return {a.v + b.v, a.d + b.d};
    }
    case Op::sub: {
        auto a = arg(0), b = arg(1);
        return {a.v - b.v, a.d - b.d};
    }
    case Op::mul: {
        auto a = arg(0), b = arg(1);
        return {a.v * b.v, a.d * b.v + a.v * b.d};
    }
    case Op::neg: {
        auto a = arg(0);
        return {-a.v, -a.d};
    }
    case Op::pow: {
        auto a = arg(0);
        const int e = n.index;
        if (e == 0) return {1.0, 0.0};
        double pm1 = 1.0;
        for (int k = 0; k < std::abs(e) - 1; ++k) pm1 *= a.v;
        if (e > 0) return {pm1 * a.v, e * pm1 * a.d};
        const double p = pm1 * a.v; // a^|e|
        return {1.0 / p, -std::abs(e) * pm1 * a.d / (p * p)};
    }
    case Op::abs: {
        auto a = arg(0);
        if (a.v > 0) return {a.v, a.d};
        if (a.v < 0) return {-a.v, -a.d};
        return {0.0, std::abs(a.d)};
    }
    case Op::sin: {
        auto a = arg(0);
        return {std::sin(a.v), std::cos(a.v) * a.d};
    }
    case Op::cos: {
        auto a = arg(0);
        return {std::cos(a.v), -std::sin(a.v) * a.d};
    }
    case Op::exp: {
        auto a = arg(0);
        const double e = std::exp(a.v);
        return {e, e * a.d};
    }
    case Op::norm2sq: {
        double s = 0.0, d = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            s += x[i] * x[i];
            d += 2.0 * x[i] * dir[i];
        }
        return {s, d};
    }
    case Op::max: {
        std::vector<Jet> js;
        for (std::size_t i = 0; i < n.args.size(); ++i) js.push_back(arg(i));
        double m = js[0].v;
        for (const auto& jt : js) m = std::max(m, jt.v);
        double d = -std::numeric_limits<double>::infinity();
        for (const auto& jt : js) {
            if (jt.v == m) d = std::max(d, jt.d);
        }
        return {m, d};
    }
    }
    return {0.0, 0.0};
}

} // namespace rllab::expr

#endif
