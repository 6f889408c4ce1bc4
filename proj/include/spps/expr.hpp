#pragma once

// Complex-valued expressions in the real variable x.
//
//   expr    := term (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := unary ('^' factor)?
//   unary   := '-' unary | primary
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names: x, pi, e, i and the functions sin cos tan exp log sqrt sinh cosh
// tanh sech abs conj re im. Multivalued functions use principal branches.
// There is no implicit multiplication.

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "spps/error.hpp"
#include "spps/grid.hpp"

namespace spps::expr {

enum class Op { add, sub, mul, div, pow };
enum class Fn { sin, cos, tan, exp, log, sqrt, sinh, cosh, tanh, sech, abs, conj, re, im };

/// Position-annotated syntax error.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t pos)
      : InputError("coeff_expr", what + " at position " + std::to_string(pos)), pos_(pos) {}
  std::size_t position() const noexcept { return pos_; }

 private:
  std::size_t pos_;
};

/// Evaluation outside a function's domain (log 0, division by 0, overflow).
class DomainError : public InputError {
 public:
  explicit DomainError(const std::string& what) : InputError("coeff_expr", what) {}
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { number, variable, negate, binary, call };
  Kind kind;
  Complex value{};
  Op op{};
  Fn fn{};
  NodePtr lhs{}, rhs{};
};

inline const char* fn_name(Fn f) {
  switch (f) {
    case Fn::sin: return "sin";
    case Fn::cos: return "cos";
    case Fn::tan: return "tan";
    case Fn::exp: return "exp";
    case Fn::log: return "log";
    case Fn::sqrt: return "sqrt";
    case Fn::sinh: return "sinh";
    case Fn::cosh: return "cosh";
    case Fn::tanh: return "tanh";
    case Fn::sech: return "sech";
    case Fn::abs: return "abs";
    case Fn::conj: return "conj";
    case Fn::re: return "re";
    case Fn::im: return "im";
  }
  return "?";
}

inline std::optional<Fn> fn_from_name(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(Fn::im); ++k)
    if (s == fn_name(static_cast<Fn>(k))) return static_cast<Fn>(k);
  return std::nullopt;
}

namespace detail {

inline NodePtr number(Complex c) { return std::make_shared<Node>(Node{Node::Kind::number, c}); }
inline NodePtr variable() { return std::make_shared<Node>(Node{Node::Kind::variable}); }
inline NodePtr call(Fn f, NodePtr a) {
  return std::make_shared<Node>(Node{Node::Kind::call, {}, {}, f, std::move(a), nullptr});
}

inline bool is_number(const NodePtr& n, Complex v) { return n->kind == Node::Kind::number && n->value == v; }

inline Complex int_pow(Complex z, long n) {
  if (n < 0) return 1.0 / int_pow(z, -n);
  Complex r = 1.0;
  while (n) {
    if (n & 1) r *= z;
    z *= z;
    n >>= 1;
  }
  return r;
}

inline Complex power(Complex u, Complex v) {
  if (v.imag() == 0 && std::abs(v.real()) <= 64 && v.real() == std::round(v.real()))
    return int_pow(u, static_cast<long>(v.real()));
  if (u == Complex(0)) {
    if (v.real() > 0) return 0.0;
    throw DomainError("0 raised to a non-positive power");
  }
  return std::exp(v * std::log(u));
}

inline Complex apply(Op op, Complex a, Complex b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (b == Complex(0)) throw DomainError("division by zero");
      return a / b;
    case Op::pow: return power(a, b);
  }
  return 0.0;
}

inline Complex apply(Fn f, Complex z) {
  switch (f) {
    case Fn::sin: return std::sin(z);
    case Fn::cos: return std::cos(z);
    case Fn::tan: return std::tan(z);
    case Fn::exp: return std::exp(z);
    case Fn::log:
      if (z == Complex(0)) throw DomainError("log of zero");
      return std::log(z);
    case Fn::sqrt: return std::sqrt(z);
    case Fn::sinh: return std::sinh(z);
    case Fn::cosh: return std::cosh(z);
    case Fn::tanh: return std::tanh(z);
    case Fn::sech: {
      const Complex c = std::cosh(z);
      if (c == Complex(0)) throw DomainError("sech pole");
      return 1.0 / c;
    }
    case Fn::abs: return std::abs(z);
    case Fn::conj: return std::conj(z);
    case Fn::re: return z.real();
    case Fn::im: return z.imag();
  }
  return 0.0;
}

// -0 is normalized to +0 so that sqrt(-4) and log(-1) stay on the principal branch
inline Complex negated(Complex z) { return {-z.real() + 0.0, -z.imag() + 0.0}; }

// Constant-folding constructors.
inline NodePtr negate(NodePtr a) {
  if (a->kind == Node::Kind::number) return number(negated(a->value));
  return std::make_shared<Node>(Node{Node::Kind::negate, {}, {}, {}, std::move(a), nullptr});
}

inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
  if (a->kind == Node::Kind::number && b->kind == Node::Kind::number &&
      !(op == Op::div && b->value == Complex(0)))
    return number(apply(op, a->value, b->value));
  switch (op) {
    case Op::add:
      if (is_number(a, 0)) return b;
      if (is_number(b, 0)) return a;
      break;
    case Op::sub:
      if (is_number(b, 0)) return a;
      if (is_number(a, 0)) return negate(b);
      break;
    case Op::mul:
      if (is_number(a, 0) || is_number(b, 0)) return number(0);
      if (is_number(a, 1)) return b;
      if (is_number(b, 1)) return a;
      break;
    case Op::div:
      if (is_number(a, 0)) return number(0);
      if (is_number(b, 1)) return a;
      break;
    case Op::pow:
      if (is_number(b, 1)) return a;
      if (is_number(b, 0)) return number(1);
      break;
  }
  return std::make_shared<Node>(Node{Node::Kind::binary, {}, op, {}, std::move(a), std::move(b)});
}

inline bool depends_on_x(const NodePtr& n) {
  switch (n->kind) {
    case Node::Kind::number: return false;
    case Node::Kind::variable: return true;
    case Node::Kind::negate:
    case Node::Kind::call: return depends_on_x(n->lhs);
    case Node::Kind::binary: return depends_on_x(n->lhs) || depends_on_x(n->rhs);
  }
  return false;
}

inline Complex eval(const NodePtr& n, double x) {
  switch (n->kind) {
    case Node::Kind::number: return n->value;
    case Node::Kind::variable: return x;
    case Node::Kind::negate: return negated(eval(n->lhs, x));
    case Node::Kind::binary: return apply(n->op, eval(n->lhs, x), eval(n->rhs, x));
    case Node::Kind::call: return apply(n->fn, eval(n->lhs, x));
  }
  return 0.0;
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string print(const NodePtr& n) {
  switch (n->kind) {
    case Node::Kind::number: {
      const Complex c = n->value;
      if (c.imag() == 0) return "(" + format_real(c.real()) + ")";
      if (c.real() == 0) return "(" + format_real(c.imag()) + "*i)";
      return "(" + format_real(c.real()) + "+" + format_real(c.imag()) + "*i)";
    }
    case Node::Kind::variable: return "x";
    case Node::Kind::negate: return "(-" + print(n->lhs) + ")";
    case Node::Kind::binary: {
      static constexpr const char* sym[] = {"+", "-", "*", "/", "^"};
      return "(" + print(n->lhs) + sym[static_cast<int>(n->op)] + print(n->rhs) + ")";
    }
    case Node::Kind::call: return std::string(fn_name(n->fn)) + "(" + print(n->lhs) + ")";
  }
  return "";
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  NodePtr parse_all() {
    NodePtr e = expr();
    if (tok_ != Tok::end) fail("unexpected token '" + std::string(text_) + "'");
    return e;
  }

 private:
  enum class Tok { end, number, name, plus, minus, star, slash, caret, lparen, rparen };
  static constexpr int kMaxDepth = 256;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, tok_pos_); }

  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_pos_ = pos_;
    if (pos_ >= src_.size()) {
      tok_ = Tok::end;
      text_ = {};
      return;
    }
    const char c = src_[pos_];
    // U+2212 minus sign
    if (src_.substr(pos_, 3) == "\xE2\x88\x92") {
      tok_ = Tok::minus;
      text_ = src_.substr(pos_, 3);
      pos_ += 3;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) ++end;
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        std::size_t k = end + 1;
        if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
        if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
          while (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) ++k;
          end = k;
        }
      }
      text_ = src_.substr(pos_, end - pos_);
      double v = 0;
      const auto [ptr, ec] = std::from_chars(text_.data(), text_.data() + text_.size(), v);
      if (ec != std::errc() || ptr != text_.data() + text_.size()) fail("malformed number '" + std::string(text_) + "'");
      number_ = v;
      tok_ = Tok::number;
      pos_ = end;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) ++end;
      text_ = src_.substr(pos_, end - pos_);
      tok_ = Tok::name;
      pos_ = end;
      return;
    }
    text_ = src_.substr(pos_, 1);
    ++pos_;
    switch (c) {
      case '+': tok_ = Tok::plus; return;
      case '-': tok_ = Tok::minus; return;
      case '*': tok_ = Tok::star; return;
      case '/': tok_ = Tok::slash; return;
      case '^': tok_ = Tok::caret; return;
      case '(': tok_ = Tok::lparen; return;
      case ')': tok_ = Tok::rparen; return;
      default: fail("unexpected character '" + std::string(text_) + "'");
    }
  }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxDepth) p.fail("expression nested too deeply");
    }
    ~DepthGuard() { --p.depth_; }
  };

  NodePtr expr() {
    DepthGuard g(*this);
    NodePtr lhs = term();
    while (tok_ == Tok::plus || tok_ == Tok::minus) {
      const Op op = tok_ == Tok::plus ? Op::add : Op::sub;
      advance();
      lhs = make(op, std::move(lhs), term());
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = factor();
    while (tok_ == Tok::star || tok_ == Tok::slash) {
      const Op op = tok_ == Tok::star ? Op::mul : Op::div;
      advance();
      lhs = make(op, std::move(lhs), factor());
    }
    return lhs;
  }

  NodePtr factor() {
    DepthGuard g(*this);
    NodePtr base = unary();
    if (tok_ == Tok::caret) {
      advance();
      return make(Op::pow, std::move(base), factor());
    }
    return base;
  }

  NodePtr unary() {
    DepthGuard g(*this);
    if (tok_ == Tok::minus) {
      advance();
      return negate(unary());
    }
    return primary();
  }

  NodePtr primary() {
    switch (tok_) {
      case Tok::number: {
        NodePtr n = number(number_);
        advance();
        return n;
      }
      case Tok::lparen: {
        advance();
        NodePtr e = expr();
        if (tok_ != Tok::rparen) fail("unbalanced parenthesis: expected ')'");
        advance();
        return e;
      }
      case Tok::name: {
        const std::string name(text_);
        const std::size_t at = tok_pos_;
        advance();
        if (tok_ == Tok::lparen) {
          const auto f = fn_from_name(name);
          if (!f) throw ParseError("unknown function name '" + name + "'", at);
          advance();
          NodePtr arg = expr();
          if (tok_ != Tok::rparen) fail("unbalanced parenthesis: expected ')'");
          advance();
          return call(*f, std::move(arg));
        }
        constexpr double kPi = 3.14159265358979323846;
        if (name == "x") return variable();
        if (name == "pi") return number(kPi);
        if (name == "e") return number(std::exp(1.0));
        if (name == "i") return number(Complex(0, 1));
        if (fn_from_name(name)) throw ParseError("function '" + name + "' needs an argument", at);
        throw ParseError("unknown name '" + name + "'", at);
      }
      case Tok::end: fail("unexpected end of input");
      case Tok::rparen: fail("unbalanced parenthesis: unexpected ')'");
      default: fail("unexpected token '" + std::string(text_) + "'");
    }
  }

  // literal arithmetic is folded; anything involving x is kept as written
  static NodePtr make(Op op, NodePtr a, NodePtr b) {
    if (a->kind == Node::Kind::number && b->kind == Node::Kind::number) {
      try {
        return number(apply(op, a->value, b->value));
      } catch (const DomainError&) {
      }
    }
    return std::make_shared<Node>(Node{Node::Kind::binary, {}, op, {}, std::move(a), std::move(b)});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t tok_pos_ = 0;
  Tok tok_ = Tok::end;
  std::string_view text_;
  double number_ = 0;
  int depth_ = 0;
};

inline NodePtr diff(const NodePtr& n) {
  using K = Node::Kind;
  if (!depends_on_x(n)) return number(0);
  switch (n->kind) {
    case K::number: return number(0);
    case K::variable: return number(1);
    case K::negate: return negate(diff(n->lhs));
    case K::binary: {
      const NodePtr &u = n->lhs, &v = n->rhs;
      switch (n->op) {
        case Op::add: return binary(Op::add, diff(u), diff(v));
        case Op::sub: return binary(Op::sub, diff(u), diff(v));
        case Op::mul: return binary(Op::add, binary(Op::mul, diff(u), v), binary(Op::mul, u, diff(v)));
        case Op::div:
          return binary(Op::div, binary(Op::sub, binary(Op::mul, diff(u), v), binary(Op::mul, u, diff(v))),
                        binary(Op::pow, v, number(2)));
        case Op::pow:
          if (!depends_on_x(v))
            return binary(Op::mul, binary(Op::mul, v, binary(Op::pow, u, binary(Op::sub, v, number(1)))), diff(u));
          return binary(Op::mul, n,
                        binary(Op::add, binary(Op::mul, diff(v), call(Fn::log, u)),
                               binary(Op::div, binary(Op::mul, v, diff(u)), u)));
      }
      break;
    }
    case K::call: {
      const NodePtr& u = n->lhs;
      NodePtr outer;
      switch (n->fn) {
        case Fn::sin: outer = call(Fn::cos, u); break;
        case Fn::cos: outer = negate(call(Fn::sin, u)); break;
        case Fn::tan: outer = binary(Op::add, number(1), binary(Op::pow, call(Fn::tan, u), number(2))); break;
        case Fn::exp: outer = call(Fn::exp, u); break;
        case Fn::log: outer = binary(Op::div, number(1), u); break;
        case Fn::sqrt: outer = binary(Op::div, number(1), binary(Op::mul, number(2), call(Fn::sqrt, u))); break;
        case Fn::sinh: outer = call(Fn::cosh, u); break;
        case Fn::cosh: outer = call(Fn::sinh, u); break;
        case Fn::tanh: outer = binary(Op::sub, number(1), binary(Op::pow, call(Fn::tanh, u), number(2))); break;
        case Fn::sech: outer = negate(binary(Op::mul, call(Fn::sech, u), call(Fn::tanh, u))); break;
        case Fn::abs:
        case Fn::conj:
        case Fn::re:
        case Fn::im:
          throw InputError("coeff_expr", std::string("cannot differentiate non-holomorphic function '") +
                                             fn_name(n->fn) + "'");
      }
      return binary(Op::mul, outer, diff(u));
    }
  }
  return number(0);
}

}  // namespace detail

/// Immutable parsed expression.
class Expr {
 public:
  explicit Expr(NodePtr root) : root_(std::move(root)) {}

  Complex operator()(double x) const { return detail::eval(root_, x); }
  std::string to_string() const { return detail::print(root_); }
  bool depends_on_x() const { return detail::depends_on_x(root_); }
  const NodePtr& root() const noexcept { return root_; }

 private:
  NodePtr root_;
};

inline Expr parse(std::string_view src) { return Expr(detail::Parser(src).parse_all()); }

/// Symbolic d/dx. abs, conj, re and im of x-dependent arguments are rejected.
inline Expr differentiate(const Expr& e) { return Expr(detail::diff(e.root())); }

inline SampledFunction evaluate_on_grid(const Expr& e, const Grid& grid) {
  std::vector<Complex> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = grid.node(i);
    try {
      v[i] = e(x);
    } catch (const DomainError& err) {
      throw InputError("coeff_expr", std::string(err.what()) + " at node " + std::to_string(i) + " (x = " +
                                         detail::format_real(x) + ")");
    }
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag()))
      throw InputError("coeff_expr", "non-finite value at node " + std::to_string(i) + " (x = " +
                                         detail::format_real(x) + ")");
  }
  return SampledFunction(grid, std::move(v));
}

/// Value of an x-independent expression, e.g. a spectral-shift center.
inline Complex evaluate_constant(std::string_view src) {
  const Expr e = parse(src);
  if (e.depends_on_x()) throw InputError("coeff_expr", "expected a constant, got '" + std::string(src) + "'");
  return e(0.0);
}

}  // namespace spps::expr
