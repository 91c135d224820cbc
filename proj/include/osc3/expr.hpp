#pragma once

// Scalar expressions in one variable `t`, used for ODE coefficients and test solutions.
//
// Grammar (highest precedence first):
//   primary  := number | 't' | 'pi' | func '(' sum ')' | '(' sum ')'
//   power    := primary [ '^' unary ]          right associative
//   unary    := '-' unary | power
//   product  := unary { ('*' | '/') unary }    left associative
//   sum      := product { ('+' | '-') product } left associative
//   func     := sin | cos | tan | exp | log | sqrt | abs

#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>

#include "osc3/error.hpp"

namespace osc3::expr {

enum class Function { sin, cos, tan, exp, log, sqrt, abs };
enum class BinaryOp { add, sub, mul, div, pow };

struct UnknownIdentifierError : ParseError {
    UnknownIdentifierError(const std::string& name, std::size_t offset)
        : ParseError("unknown identifier '" + name + "'", offset), name(name) {}
    std::string name;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Constant {
    double value;
};
struct Variable {};
struct Negate {
    NodePtr operand;
};
struct Binary {
    BinaryOp op;
    NodePtr lhs;
    NodePtr rhs;
};
struct Call {
    Function fn;
    NodePtr arg;
};

struct Node {
    std::variant<Constant, Variable, Negate, Binary, Call> data;
};

inline const char* function_name(Function f) {
    switch (f) {
        case Function::sin: return "sin";
        case Function::cos: return "cos";
        case Function::tan: return "tan";
        case Function::exp: return "exp";
        case Function::log: return "log";
        case Function::sqrt: return "sqrt";
        case Function::abs: return "abs";
    }
    return "?";
}

inline char operator_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::add: return '+';
        case BinaryOp::sub: return '-';
        case BinaryOp::mul: return '*';
        case BinaryOp::div: return '/';
        case BinaryOp::pow: return '^';
    }
    return '?';
}

inline bool equal(const Node& a, const Node& b) {
    if (a.data.index() != b.data.index()) return false;
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const auto& rhs = std::get<T>(b.data);
            if constexpr (std::is_same_v<T, Constant>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                return true;
            } else if constexpr (std::is_same_v<T, Negate>) {
                return equal(*lhs.operand, *rhs.operand);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return lhs.op == rhs.op && equal(*lhs.lhs, *rhs.lhs) && equal(*lhs.rhs, *rhs.rhs);
            } else {
                return lhs.fn == rhs.fn && equal(*lhs.arg, *rhs.arg);
            }
        },
        a.data);
}

namespace detail {

inline double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
    return v;
}

inline double apply(Function f, double x) {
    switch (f) {
        case Function::sin: return std::sin(x);
        case Function::cos: return std::cos(x);
        case Function::tan: {
            // odd multiples of pi/2
            const double d = std::remainder(x - std::numbers::pi / 2, std::numbers::pi);
            if (std::abs(d) < 1e-12) throw DomainError("tan at an odd multiple of pi/2");
            return std::tan(x);
        }
        case Function::exp: return checked(std::exp(x), "exp");
        case Function::log:
            if (!(x > 0.0)) throw DomainError("log of non-positive value");
            return std::log(x);
        case Function::sqrt:
            if (x < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(x);
        case Function::abs: return std::abs(x);
    }
    return 0.0;
}

inline double apply(BinaryOp op, double l, double r) {
    switch (op) {
        case BinaryOp::add: return checked(l + r, "+");
        case BinaryOp::sub: return checked(l - r, "-");
        case BinaryOp::mul: return checked(l * r, "*");
        case BinaryOp::div:
            if (r == 0.0) throw DomainError("division by zero");
            return checked(l / r, "/");
        case BinaryOp::pow:
            if (l < 0.0 && std::trunc(r) != r) throw DomainError("negative base with non-integer exponent");
            if (l == 0.0 && r < 0.0) throw DomainError("zero base with negative exponent");
            return checked(std::pow(l, r), "^");
    }
    return 0.0;
}

inline double eval(const Node& n, double t) {
    return std::visit(
        [t](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return v.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                return t;
            } else if constexpr (std::is_same_v<T, Negate>) {
                return -eval(*v.operand, t);
            } else if constexpr (std::is_same_v<T, Binary>) {
                const double l = eval(*v.lhs, t);
                const double r = eval(*v.rhs, t);
                return apply(v.op, l, r);
            } else {
                return apply(v.fn, eval(*v.arg, t));
            }
        },
        n.data);
}

inline void print(const Node& n, std::string& out) {
    std::visit(
        [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Constant>) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", v.value);
                out += buf;
            } else if constexpr (std::is_same_v<T, Variable>) {
                out += 't';
            } else if constexpr (std::is_same_v<T, Negate>) {
                out += "(-";
                print(*v.operand, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, Binary>) {
                out += '(';
                print(*v.lhs, out);
                out += ' ';
                out += operator_symbol(v.op);
                out += ' ';
                print(*v.rhs, out);
                out += ')';
            } else {
                out += function_name(v.fn);
                out += '(';
                print(*v.arg, out);
                out += ')';
            }
        },
        n.data);
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse() {
        skip_space();
        if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
        NodePtr root = parse_sum();
        skip_space();
        if (pos_ != src_.size()) throw ParseError("unexpected character '" + std::string(1, src_[pos_]) + "'", pos_);
        return root;
    }

private:
    static NodePtr make(auto v) { return std::make_shared<const Node>(Node{std::move(v)}); }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr parse_sum() {
        NodePtr lhs = parse_product();
        for (;;) {
            if (accept('+')) {
                lhs = make(Binary{BinaryOp::add, lhs, parse_product()});
            } else if (accept('-')) {
                lhs = make(Binary{BinaryOp::sub, lhs, parse_product()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Binary{BinaryOp::mul, lhs, parse_unary()});
            } else if (accept('/')) {
                lhs = make(Binary{BinaryOp::div, lhs, parse_unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make(Negate{parse_unary()});
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return make(Binary{BinaryOp::pow, base, parse_unary()});
        return base;
    }

    static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    NodePtr parse_primary() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input, expected operand", pos_);
        const char c = src_[pos_];
        if (is_digit(c) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_sum();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (is_alpha(c)) {
            const std::size_t start = pos_;
            while (pos_ < src_.size() && (is_alpha(src_[pos_]) || is_digit(src_[pos_]))) ++pos_;
            const std::string name(src_.substr(start, pos_ - start));
            if (name == "t") return make(Variable{});
            if (name == "pi") return make(Constant{std::numbers::pi});
            static constexpr Function functions[] = {Function::sin, Function::cos, Function::tan, Function::exp,
                                                     Function::log, Function::sqrt, Function::abs};
            for (Function f : functions) {
                if (name == function_name(f)) {
                    if (!accept('(')) throw ParseError("expected '(' after " + name, pos_);
                    NodePtr arg = parse_sum();
                    if (!accept(')')) throw ParseError("expected ')'", pos_);
                    return make(Call{f, arg});
                }
            }
            throw UnknownIdentifierError(name, start);
        }
        throw ParseError("expected operand, found '" + std::string(1, c) + "'", pos_);
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && is_digit(src_[p])) {
                while (p < src_.size() && is_digit(src_[p])) ++p;
                pos_ = p;
            }
        }
        double value = 0.0;
        const auto [end, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (ec != std::errc() || end != src_.data() + pos_) throw ParseError("malformed number", start);
        return make(Constant{value});
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Immutable parsed expression; cheap to copy, safe to evaluate from many threads.
class Expression {
public:
    Expression() : root_(std::make_shared<const Node>(Node{Constant{0.0}})) {}
    explicit Expression(NodePtr root) : root_(std::move(root)) {}

    /// Throws ParseError (with byte offset) or UnknownIdentifierError.
    static Expression parse(std::string_view source) { return Expression(detail::Parser(source).parse()); }

    /// Throws DomainError instead of returning NaN or infinity.
    double operator()(double t) const { return detail::eval(*root_, t); }

    /// Fully parenthesised text with 17 significant digits per constant; reparses to an equal AST.
    std::string to_string() const {
        std::string out;
        detail::print(*root_, out);
        return out;
    }

    const Node& root() const { return *root_; }

    friend bool operator==(const Expression& a, const Expression& b) { return equal(*a.root_, *b.root_); }

private:
    NodePtr root_;
};

inline Expression parse(std::string_view source) { return Expression::parse(source); }
inline double eval(const Expression& e, double t) { return e(t); }
inline std::string print(const Expression& e) { return e.to_string(); }

}  // namespace osc3::expr
