#pragma once

// A small expression language for user-supplied scalar fields.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | ident | ident '(' args ')' | '(' expr ')'
//
// Precedence: ^ > unary minus > * / > + -, so "-l1^2" is -(l1^2).
// Variables are drawn from a fixed alphabet determined by n:
// t, S, a1..an, l1..ln.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace qtgeom::expr {

/// Slot layout of the variable alphabet for a given n:
/// 0 -> t, 1 -> S, 2..n+1 -> a1..an, n+2..2n+1 -> l1..ln.
class Alphabet {
public:
    explicit Alphabet(int n) : n_(n) {
        if (n < 0) throw ConfigError("expression alphabet size must be nonnegative");
    }

    int n() const noexcept { return n_; }
    int size() const noexcept { return 2 * n_ + 2; }

    static constexpr int t_slot() { return 0; }
    static constexpr int S_slot() { return 1; }
    int a_slot(int i) const { return 2 + i; }          // i is 0-based
    int l_slot(int i) const { return 2 + n_ + i; }     // i is 0-based

    /// Slot of a variable name, or -1.
    int lookup(std::string_view name) const {
        if (name == "t") return t_slot();
        if (name == "S") return S_slot();
        if (name.size() >= 2 && (name[0] == 'a' || name[0] == 'l')) {
            int idx = 0;
            const auto* first = name.data() + 1;
            const auto* last = name.data() + name.size();
            if (name[1] == '0') return -1;
            auto [ptr, ec] = std::from_chars(first, last, idx);
            if (ec != std::errc() || ptr != last || idx < 1 || idx > n_) return -1;
            return name[0] == 'a' ? a_slot(idx - 1) : l_slot(idx - 1);
        }
        return -1;
    }

    std::string name(int slot) const {
        if (slot == t_slot()) return "t";
        if (slot == S_slot()) return "S";
        if (slot < 2 + n_) return "a" + std::to_string(slot - 1);
        return "l" + std::to_string(slot - 1 - n_);
    }

    std::string describe() const {
        std::string s = "{t, S";
        if (n_ >= 1) s += ", a1..a" + std::to_string(n_) + ", l1..l" + std::to_string(n_);
        return s + "}";
    }

private:
    int n_;
};

/// Variable bindings, one value per alphabet slot (all default to 0).
class Environment {
public:
    explicit Environment(int n) : alphabet_(n), values_(alphabet_.size(), 0.0) {}

    const Alphabet& alphabet() const noexcept { return alphabet_; }
    double operator[](int slot) const { return values_.at(slot); }

    Environment& set_t(double t) { values_[Alphabet::t_slot()] = t; return *this; }
    Environment& set_S(double s) { values_[Alphabet::S_slot()] = s; return *this; }
    Environment& set_a(int i, double v) { values_.at(alphabet_.a_slot(i)) = v; return *this; }
    Environment& set_l(int i, double v) { values_.at(alphabet_.l_slot(i)) = v; return *this; }

    template <typename Vec>
    Environment& set_a(const Vec& a) {
        for (int i = 0; i < alphabet_.n(); ++i) set_a(i, a[i]);
        return *this;
    }
    template <typename Vec>
    Environment& set_l(const Vec& l) {
        for (int i = 0; i < alphabet_.n(); ++i) set_l(i, l[i]);
        return *this;
    }

    Environment& set(std::string_view name, double v) {
        const int slot = alphabet_.lookup(name);
        if (slot < 0) throw ConfigError("unknown variable '" + std::string(name) + "'");
        values_[slot] = v;
        return *this;
    }

private:
    Alphabet alphabet_;
    std::vector<double> values_;
};

enum class BinaryOp : char { add = '+', sub = '-', mul = '*', div = '/', pow = '^' };

enum class Func { exp, log, sqrt, sin, cos, sinh, cosh, tanh, abs, min, max, pow };

struct FuncInfo {
    Func func;
    std::string_view name;
    int arity;
};

inline constexpr std::array<FuncInfo, 12> kFunctions{{
    {Func::exp, "exp", 1},   {Func::log, "log", 1},   {Func::sqrt, "sqrt", 1},
    {Func::sin, "sin", 1},   {Func::cos, "cos", 1},   {Func::sinh, "sinh", 1},
    {Func::cosh, "cosh", 1}, {Func::tanh, "tanh", 1}, {Func::abs, "abs", 1},
    {Func::min, "min", 2},   {Func::max, "max", 2},   {Func::pow, "pow", 2},
}};

inline const FuncInfo* find_function(std::string_view name) {
    for (const auto& f : kFunctions)
        if (f.name == name) return &f;
    return nullptr;
}

inline const FuncInfo& function_info(Func f) {
    for (const auto& info : kFunctions)
        if (info.func == f) return info;
    throw std::logic_error("unknown function");
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Number { double value; };
struct Variable { int slot; std::string name; };
struct Negate { NodePtr operand; };
struct Binary { BinaryOp op; NodePtr lhs, rhs; };
struct Call { Func func; std::vector<NodePtr> args; };

struct Node {
    std::variant<Number, Variable, Negate, Binary, Call> v;
};

namespace detail {

enum Prec : int { kAdd = 1, kMul = 2, kNeg = 3, kPow = 4, kAtom = 5 };

inline int precedence(const Node& n) {
    if (const auto* b = std::get_if<Binary>(&n.v)) {
        switch (b->op) {
            case BinaryOp::add:
            case BinaryOp::sub: return kAdd;
            case BinaryOp::mul:
            case BinaryOp::div: return kMul;
            case BinaryOp::pow: return kPow;
        }
    }
    if (std::holds_alternative<Negate>(n.v)) return kNeg;
    return kAtom;
}

inline std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline void print(const Node& n, std::string& out);

inline void print_child(const Node& child, bool parens, std::string& out) {
    if (parens) out += '(';
    print(child, out);
    if (parens) out += ')';
}

inline void print(const Node& n, std::string& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Number>) {
                out += format_number(node.value);
            } else if constexpr (std::is_same_v<T, Variable>) {
                out += node.name;
            } else if constexpr (std::is_same_v<T, Negate>) {
                out += '-';
                print_child(*node.operand, precedence(*node.operand) < kNeg, out);
            } else if constexpr (std::is_same_v<T, Binary>) {
                const int p = precedence(n);
                const int pl = precedence(*node.lhs);
                const int pr = precedence(*node.rhs);
                if (node.op == BinaryOp::pow) {
                    print_child(*node.lhs, pl <= p, out);
                    out += '^';
                    print_child(*node.rhs, pr < kNeg, out);
                } else {
                    print_child(*node.lhs, pl < p, out);
                    out += static_cast<char>(node.op);
                    print_child(*node.rhs, pr <= p, out);
                }
            } else {
                out += function_info(node.func).name;
                out += '(';
                for (std::size_t i = 0; i < node.args.size(); ++i) {
                    if (i) out += ',';
                    print(*node.args[i], out);
                }
                out += ')';
            }
        },
        n.v);
}

inline std::string to_text(const Node& n) {
    std::string s;
    print(n, s);
    return s;
}

[[noreturn]] inline void domain_error(const Node& n, const std::string& what, double operand) {
    std::ostringstream os;
    os.precision(17);
    os << "expression domain error in '" << to_text(n) << "': " << what << " (operand "
       << operand << ")";
    throw ExprDomainError(os.str());
}

inline bool is_integral(double x) { return std::isfinite(x) && std::floor(x) == x; }

inline double int_power(double base, std::int64_t e) {
    const bool invert = e < 0;
    std::uint64_t k = invert ? static_cast<std::uint64_t>(-(e + 1)) + 1u : static_cast<std::uint64_t>(e);
    double result = 1.0;
    double b = base;
    while (k) {
        if (k & 1u) result *= b;
        b *= b;
        k >>= 1u;
    }
    return invert ? 1.0 / result : result;
}

inline double checked_pow(const Node& n, double base, double e) {
    if (is_integral(e) && std::abs(e) <= 1024.0) {
        if (base == 0.0 && e < 0.0) domain_error(n, "zero raised to a negative power", base);
        return int_power(base, static_cast<std::int64_t>(e));
    }
    if (base < 0.0) domain_error(n, "negative base with non-integer exponent", base);
    if (base == 0.0 && e < 0.0) domain_error(n, "zero raised to a negative power", base);
    return std::pow(base, e);
}

inline double eval(const Node& n, const Environment& env) {
    const double r = std::visit(
        [&](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Number>) {
                return node.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                return env[node.slot];
            } else if constexpr (std::is_same_v<T, Negate>) {
                return -eval(*node.operand, env);
            } else if constexpr (std::is_same_v<T, Binary>) {
                const double x = eval(*node.lhs, env);
                const double y = eval(*node.rhs, env);
                switch (node.op) {
                    case BinaryOp::add: return x + y;
                    case BinaryOp::sub: return x - y;
                    case BinaryOp::mul: return x * y;
                    case BinaryOp::div:
                        if (y == 0.0) domain_error(n, "division by zero", y);
                        return x / y;
                    case BinaryOp::pow: return checked_pow(n, x, y);
                }
                return 0.0;
            } else {
                const double x = eval(*node.args[0], env);
                switch (node.func) {
                    case Func::exp: return std::exp(x);
                    case Func::log:
                        if (!(x > 0.0)) domain_error(n, "log of a non-positive value", x);
                        return std::log(x);
                    case Func::sqrt:
                        if (x < 0.0) domain_error(n, "sqrt of a negative value", x);
                        return std::sqrt(x);
                    case Func::sin: return std::sin(x);
                    case Func::cos: return std::cos(x);
                    case Func::sinh: return std::sinh(x);
                    case Func::cosh: return std::cosh(x);
                    case Func::tanh: return std::tanh(x);
                    case Func::abs: return std::abs(x);
                    case Func::min: return std::min(x, eval(*node.args[1], env));
                    case Func::max: return std::max(x, eval(*node.args[1], env));
                    case Func::pow: return checked_pow(n, x, eval(*node.args[1], env));
                }
                return 0.0;
            }
        },
        n.v);
    if (!std::isfinite(r)) domain_error(n, "non-finite result", r);
    return r;
}

class Parser {
public:
    Parser(std::string_view text, const Alphabet& alphabet) : src_(text), alphabet_(alphabet) {}

    NodePtr parse() {
        skip_ws();
        if (at_end()) fail("empty expression");
        NodePtr e = parse_expr();
        skip_ws();
        if (!at_end()) fail(std::string("unexpected character '") + src_[pos_] + "'");
        return e;
    }

private:
    static constexpr int kMaxDepth = 200;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    bool at_end() const { return pos_ >= src_.size(); }

    void skip_ws() {
        while (!at_end() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                             src_[pos_] == '\r'))
            ++pos_;
    }

    // Peek at the next significant character; U+2212 (minus sign) reads as '-'.
    char peek() {
        skip_ws();
        if (at_end()) return '\0';
        if (src_.substr(pos_, 3) == "\xE2\x88\x92") return '-';
        return src_[pos_];
    }

    void advance() {
        if (src_.substr(pos_, 3) == "\xE2\x88\x92")
            pos_ += 3;
        else
            ++pos_;
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p_(p) {
            if (++p_.depth_ > kMaxDepth) p_.fail("expression nested too deeply");
        }
        ~DepthGuard() { --p_.depth_; }
        Parser& p_;
    };

    static NodePtr make(auto node) { return std::make_shared<const Node>(Node{std::move(node)}); }

    NodePtr parse_expr() {
        DepthGuard guard(*this);
        NodePtr lhs = parse_term();
        for (char c = peek(); c == '+' || c == '-'; c = peek()) {
            advance();
            NodePtr rhs = parse_term();
            lhs = make(Binary{static_cast<BinaryOp>(c), lhs, rhs});
        }
        return lhs;
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (char c = peek(); c == '*' || c == '/'; c = peek()) {
            advance();
            NodePtr rhs = parse_unary();
            lhs = make(Binary{static_cast<BinaryOp>(c), lhs, rhs});
        }
        return lhs;
    }

    NodePtr parse_unary() {
        DepthGuard guard(*this);
        if (peek() == '-') {
            advance();
            return make(Negate{parse_unary()});
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (peek() == '^') {
            advance();
            return make(Binary{BinaryOp::pow, base, parse_unary()});
        }
        return base;
    }

    NodePtr parse_primary() {
        const char c = peek();
        if (c == '\0') fail("unexpected end of expression");
        if (c == '(') {
            advance();
            NodePtr e = parse_expr();
            if (peek() != ')') fail("expected ')'");
            advance();
            return e;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t k = 0;
            while (!at_end() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_, ++k;
            return k;
        };
        std::size_t nd = digits();
        if (!at_end() && src_[pos_] == '.') {
            ++pos_;
            nd += digits();
        }
        if (nd == 0) {
            pos_ = start;
            fail("malformed number");
        }
        if (!at_end() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (!at_end() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) fail("malformed exponent");
        }
        double value = 0.0;
        const auto* first = src_.data() + start;
        const auto* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
            pos_ = start;
            fail("number out of range");
        }
        return make(Number{value});
    }

    NodePtr parse_ident() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        if (peek() == '(') {
            const FuncInfo* f = find_function(name);
            if (!f) {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            advance();
            std::vector<NodePtr> args;
            if (peek() != ')') {
                args.push_back(parse_expr());
                while (peek() == ',') {
                    advance();
                    args.push_back(parse_expr());
                }
            }
            if (peek() != ')') fail("expected ')' or ',' in call to " + name);
            advance();
            if (static_cast<int>(args.size()) != f->arity) {
                pos_ = start;
                fail("function '" + name + "' takes " + std::to_string(f->arity) +
                     " argument(s), got " + std::to_string(args.size()));
            }
            return make(Call{f->func, std::move(args)});
        }
        const int slot = alphabet_.lookup(name);
        if (slot < 0) {
            pos_ = start;
            fail("unknown identifier '" + name + "'; allowed variables are " + alphabet_.describe());
        }
        return make(Variable{slot, name});
    }

    std::string_view src_;
    const Alphabet& alphabet_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

inline bool references(const Node& node, int slot) {
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Variable>) {
                return x.slot == slot;
            } else if constexpr (std::is_same_v<T, Negate>) {
                return references(*x.operand, slot);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return references(*x.lhs, slot) || references(*x.rhs, slot);
            } else if constexpr (std::is_same_v<T, Call>) {
                return std::any_of(x.args.begin(), x.args.end(), [&](const NodePtr& a) { return references(*a, slot); });
            } else {
                return false;
            }
        },
        node.v);
}

}  // namespace detail

/// Parsed, immutable expression. Copies share the tree.
class Expr {
public:
    Expr() = default;

    const Node& root() const { return *root_; }
    int n() const noexcept { return n_; }
    explicit operator bool() const noexcept { return static_cast<bool>(root_); }

    double eval(const Environment& env) const {
        if (env.alphabet().n() != n_) {
            throw ConfigError("environment alphabet n=" + std::to_string(env.alphabet().n()) +
                              " does not match expression n=" + std::to_string(n_));
        }
        return detail::eval(*root_, env);
    }

    std::string to_string() const { return detail::to_text(*root_); }

    /// True if the variable in alphabet slot `slot` occurs anywhere in the tree.
    bool references(int slot) const { return detail::references(*root_, slot); }

    friend Expr parse(std::string_view text, int n);

private:
    NodePtr root_;
    int n_ = 0;
};

inline Expr parse(std::string_view text, int n) {
    const Alphabet alphabet(n);
    Expr e;
    e.root_ = detail::Parser(text, alphabet).parse();
    e.n_ = n;
    return e;
}

}  // namespace qtgeom::expr
