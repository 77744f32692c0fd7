#pragma once

// Arithmetic expression DSL for periodic profiles z(u,v), a(u), b(v).
//
// Grammar (see docs/expression-grammar.md for the EBNF):
//   expression = term { ("+" | "-") term }
//   term       = unary { ("*" | "/") unary }
//   unary      = "-" unary | power
//   power      = primary [ "^" unary ]          -- right-associative
//   primary    = number | "u" | "v" | func "(" expression ")" | "(" expression ")"
//   func       = "sin" | "cos" | "exp"
//
// "^" binds tighter than unary minus, so "-u^2" is -(u^2) and "2*u^2"
// is 2*(u^2). Expressions are immutable after parse and safe for
// concurrent evaluation.

#include <isoshell/errors.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>

namespace isoshell {

class Expr {
 public:
  enum class Kind { Number, VarU, VarV, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    Kind kind;
    double value = 0.0;  // Kind::Number only
    NodePtr lhs, rhs;    // rhs empty for unary nodes
  };

  Expr() = default;

  /// Parse UTF-8 source into an AST. Throws ParseError with the byte
  /// offset and the expected-token set on malformed input.
  static Expr parse(std::string_view source);

  bool empty() const { return !root_; }

  /// IEEE double evaluation. Division by zero, 0^negative and
  /// negative^non-integer raise EvalError.
  double operator()(double u, double v) const { return eval(root_.get(), u, v); }

  /// True if the expression references the given variable.
  bool uses_u() const { return uses(root_.get(), Kind::VarU); }
  bool uses_v() const { return uses(root_.get(), Kind::VarV); }

  /// Print with minimal parentheses; parse(str()) evaluates identically.
  std::string str() const;

  const NodePtr& root() const { return root_; }

  static Expr number(double x) { return Expr(make(Kind::Number, x)); }
  static Expr var_u() { return Expr(make(Kind::VarU)); }
  static Expr var_v() { return Expr(make(Kind::VarV)); }
  static Expr unary(Kind k, Expr a) { return Expr(make(k, 0.0, a.root_, nullptr)); }
  static Expr binary(Kind k, Expr a, Expr b) { return Expr(make(k, 0.0, a.root_, b.root_)); }

 private:
  explicit Expr(NodePtr n) : root_(std::move(n)) {}

  static NodePtr make(Kind k, double v = 0.0, NodePtr l = nullptr, NodePtr r = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = v;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  static double eval(const Node* n, double u, double v) {
    switch (n->kind) {
      case Kind::Number: return n->value;
      case Kind::VarU: return u;
      case Kind::VarV: return v;
      case Kind::Add: return eval(n->lhs.get(), u, v) + eval(n->rhs.get(), u, v);
      case Kind::Sub: return eval(n->lhs.get(), u, v) - eval(n->rhs.get(), u, v);
      case Kind::Mul: return eval(n->lhs.get(), u, v) * eval(n->rhs.get(), u, v);
      case Kind::Div: {
        const double den = eval(n->rhs.get(), u, v);
        if (den == 0.0) throw EvalError("division by zero");
        return eval(n->lhs.get(), u, v) / den;
      }
      case Kind::Pow: {
        const double base = eval(n->lhs.get(), u, v);
        const double ex = eval(n->rhs.get(), u, v);
        if (base == 0.0 && ex < 0.0) throw EvalError("zero raised to a negative power");
        if (base < 0.0 && ex != std::floor(ex))
          throw EvalError("negative base raised to a non-integer power");
        return std::pow(base, ex);
      }
      case Kind::Neg: return -eval(n->lhs.get(), u, v);
      case Kind::Sin: return std::sin(eval(n->lhs.get(), u, v));
      case Kind::Cos: return std::cos(eval(n->lhs.get(), u, v));
      case Kind::Exp: return std::exp(eval(n->lhs.get(), u, v));
    }
    throw EvalError("corrupt expression node");
  }

  static bool uses(const Node* n, Kind k) {
    if (!n) return false;
    if (n->kind == k) return true;
    return (n->lhs && uses(n->lhs.get(), k)) || (n->rhs && uses(n->rhs.get(), k));
  }

  // Precedence levels used by the printer; higher binds tighter.
  static int prec(Kind k) {
    switch (k) {
      case Kind::Add:
      case Kind::Sub: return 1;
      case Kind::Mul:
      case Kind::Div: return 2;
      case Kind::Neg: return 3;
      case Kind::Pow: return 4;
      default: return 5;
    }
  }

  static void print(const Node* n, std::string& out, int parent_prec) {
    const int p = prec(n->kind);
    const bool parens = p < parent_prec;
    if (parens) out += '(';
    switch (n->kind) {
      case Kind::Number: {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, n->value);
        out.append(buf, res.ptr);
        break;
      }
      case Kind::VarU: out += 'u'; break;
      case Kind::VarV: out += 'v'; break;
      case Kind::Add:
        print(n->lhs.get(), out, p);
        out += '+';
        print(n->rhs.get(), out, p + 1);
        break;
      case Kind::Sub:
        print(n->lhs.get(), out, p);
        out += '-';
        print(n->rhs.get(), out, p + 1);
        break;
      case Kind::Mul:
        print(n->lhs.get(), out, p);
        out += '*';
        print(n->rhs.get(), out, p + 1);
        break;
      case Kind::Div:
        print(n->lhs.get(), out, p);
        out += '/';
        print(n->rhs.get(), out, p + 1);
        break;
      case Kind::Pow:
        print(n->lhs.get(), out, p + 1);
        out += '^';
        print(n->rhs.get(), out, p);  // right-associative
        break;
      case Kind::Neg:
        out += '-';
        print(n->lhs.get(), out, p + 1);
        break;
      case Kind::Sin:
        out += "sin(";
        print(n->lhs.get(), out, 0);
        out += ')';
        break;
      case Kind::Cos:
        out += "cos(";
        print(n->lhs.get(), out, 0);
        out += ')';
        break;
      case Kind::Exp:
        out += "exp(";
        print(n->lhs.get(), out, 0);
        out += ')';
        break;
    }
    if (parens) out += ')';
  }

  NodePtr root_;
};

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string_view src) : src_(src) {}

  Expr::NodePtr run() {
    auto e = expression();
    skip_ws();
    if (pos_ != src_.size()) fail("end of input");
    return e;
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& expected) {
    throw ParseError(pos_, expected);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  Expr::NodePtr expression() {
    auto lhs = term();
    for (;;) {
      if (eat('+'))
        lhs = node(Expr::Kind::Add, lhs, term());
      else if (eat('-'))
        lhs = node(Expr::Kind::Sub, lhs, term());
      else
        return lhs;
    }
  }

  Expr::NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (eat('*'))
        lhs = node(Expr::Kind::Mul, lhs, unary());
      else if (eat('/'))
        lhs = node(Expr::Kind::Div, lhs, unary());
      else
        return lhs;
    }
  }

  Expr::NodePtr unary() {
    if (eat('-')) return node(Expr::Kind::Neg, unary(), nullptr);
    return power();
  }

  Expr::NodePtr power() {
    auto base = primary();
    if (eat('^')) return node(Expr::Kind::Pow, base, unary());
    return base;
  }

  Expr::NodePtr primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      auto e = expression();
      if (!eat(')')) fail("\")\"");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("number, variable, function or \"(\"");
  }

  Expr::NodePtr number() {
    skip_ws();
    const size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t mark = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // "2e" is the number 2 followed by an identifier
      }
    }
    double value = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
      pos_ = start;
      fail("number");
    }
    return leaf(Expr::Kind::Number, value);
  }

  Expr::NodePtr identifier() {
    skip_ws();
    const size_t start = pos_;
    while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    if (name == "u") return leaf(Expr::Kind::VarU);
    if (name == "v") return leaf(Expr::Kind::VarV);
    Expr::Kind fn;
    if (name == "sin")
      fn = Expr::Kind::Sin;
    else if (name == "cos")
      fn = Expr::Kind::Cos;
    else if (name == "exp")
      fn = Expr::Kind::Exp;
    else {
      pos_ = start;
      throw ParseError(start, "one of u, v, sin, cos, exp",
                       "unknown identifier \"" + std::string(name) + "\"");
    }
    if (!eat('(')) fail("\"(\"");
    auto arg = expression();
    if (!eat(')')) fail("\")\"");
    return node(fn, arg, nullptr);
  }

  static Expr::NodePtr leaf(Expr::Kind k, double v = 0.0) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = k;
    n->value = v;
    return n;
  }

  static Expr::NodePtr node(Expr::Kind k, Expr::NodePtr l, Expr::NodePtr r) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = k;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }
};

}  // namespace detail

inline Expr Expr::parse(std::string_view source) {
  return Expr(detail::ExprParser(source).run());
}

inline std::string Expr::str() const {
  std::string out;
  if (root_) print(root_.get(), out, 0);
  return out;
}

}  // namespace isoshell
