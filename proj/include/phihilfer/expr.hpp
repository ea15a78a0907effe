#pragma once

// A small arithmetic expression language used to carry right-hand sides,
// impulse maps, kernel functions and perturbation shapes in config files.
//
// Grammar (EBNF):
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = ("-" | "+") unary | power ;
//   power   = primary [ "^" unary ] ;          (* right-associative *)
//   primary = number | name | name "(" [ expr { "," expr } ] ")" | "(" expr ")" ;
//
// "^" binds tighter than unary minus, so "-2^2" is -4 and "2^-1" is 0.5.
// Variables are t and u; constants pi and e. Functions: sin cos exp ln abs
// sqrt erf gamma phi (one argument) and pow min max (two arguments).

#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "phihilfer/errors.hpp"
#include "phihilfer/special_functions.hpp"

namespace phihilfer {

/// Values for the free symbols of an expression.
struct Bindings {
  double t = 0.0;
  double u = 0.0;
  bool has_t = false;
  bool has_u = false;
  /// Target of phi(...) calls; must outlive the evaluation.
  const std::function<double(double)>* phi = nullptr;

  static Bindings at(double t_value) {
    Bindings b;
    b.t = t_value;
    b.has_t = true;
    return b;
  }
  static Bindings at(double t_value, double u_value) {
    Bindings b = at(t_value);
    b.u = u_value;
    b.has_u = true;
    return b;
  }
  static Bindings state(double u_value) {
    Bindings b;
    b.u = u_value;
    b.has_u = true;
    return b;
  }
};

namespace detail {

enum class NodeKind { number, constant, var_t, var_u, negate, add, sub, mul, div, pow, call };

enum class Func { sin, cos, exp, ln, abs, sqrt, erf, gamma, phi, pow, min, max };

struct FuncInfo {
  std::string_view name;
  Func id;
  int arity;
};

inline constexpr FuncInfo kFunctions[] = {
    {"sin", Func::sin, 1},   {"cos", Func::cos, 1},     {"exp", Func::exp, 1},
    {"ln", Func::ln, 1},     {"abs", Func::abs, 1},     {"sqrt", Func::sqrt, 1},
    {"erf", Func::erf, 1},   {"gamma", Func::gamma, 1}, {"phi", Func::phi, 1},
    {"pow", Func::pow, 2},   {"min", Func::min, 2},     {"max", Func::max, 2},
};

struct Node {
  NodeKind kind = NodeKind::number;
  double value = 0.0;   // number / constant
  std::string name;     // constant or function name
  Func func = Func::sin;
  std::vector<int> children;
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Immutable parsed expression; cheap to copy.
class Expression {
 public:
  Expression() = default;

  /// Parses text, accepting only variables listed in allowed_vars.
  /// Throws SyntaxError for malformed text, unknown names, arity mismatches
  /// and disallowed variables.
  static Expression parse(std::string_view text, const std::set<std::string>& allowed_vars,
                          bool allow_phi = true);

  double eval(const Bindings& b) const {
    if (!nodes_) throw EvalError("eval: empty expression");
    return eval_node(root_, b);
  }

  /// Fully parenthesized rendering that reparses to the same tree.
  std::string to_string() const { return nodes_ ? render(root_) : std::string(); }

  const std::string& source() const { return source_; }
  bool empty() const { return !nodes_; }

  bool uses_variable(std::string_view v) const {
    if (!nodes_) return false;
    const auto want = v == "t" ? detail::NodeKind::var_t : detail::NodeKind::var_u;
    for (const auto& n : *nodes_) {
      if (n.kind == want) return true;
    }
    return false;
  }

  bool structurally_equal(const Expression& other) const {
    if (empty() || other.empty()) return empty() == other.empty();
    return same(root_, other, other.root_);
  }

 private:
  using Node = detail::Node;
  using NodeKind = detail::NodeKind;

  std::shared_ptr<const std::vector<Node>> nodes_;
  int root_ = -1;
  std::string source_;

  const Node& node(int i) const { return (*nodes_)[static_cast<std::size_t>(i)]; }

  bool same(int i, const Expression& other, int j) const {
    const Node& a = node(i);
    const Node& b = other.node(j);
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case NodeKind::number:
        return a.value == b.value;
      case NodeKind::constant:
        return a.name == b.name;
      case NodeKind::call:
        if (a.func != b.func) return false;
        break;
      default:
        break;
    }
    if (a.children.size() != b.children.size()) return false;
    for (std::size_t k = 0; k < a.children.size(); ++k) {
      if (!same(a.children[k], other, b.children[k])) return false;
    }
    return true;
  }

  std::string render(int i) const {
    const Node& n = node(i);
    auto bin = [&](const char* op) {
      return "(" + render(n.children[0]) + " " + op + " " + render(n.children[1]) + ")";
    };
    switch (n.kind) {
      case NodeKind::number:
        return detail::format_number(n.value);
      case NodeKind::constant:
        return n.name;
      case NodeKind::var_t:
        return "t";
      case NodeKind::var_u:
        return "u";
      case NodeKind::negate:
        return "(-" + render(n.children[0]) + ")";
      case NodeKind::add:
        return bin("+");
      case NodeKind::sub:
        return bin("-");
      case NodeKind::mul:
        return bin("*");
      case NodeKind::div:
        return bin("/");
      case NodeKind::pow:
        return bin("^");
      case NodeKind::call: {
        std::string s = n.name + "(";
        for (std::size_t k = 0; k < n.children.size(); ++k) {
          if (k) s += ", ";
          s += render(n.children[k]);
        }
        return s + ")";
      }
    }
    return {};
  }

  [[noreturn]] void fail(int i, const std::string& what) const {
    throw EvalError("domain error in " + render(i) + ": " + what);
  }

  double checked(int i, double v) const {
    if (std::isnan(v)) fail(i, "result is not a number");
    if (std::isinf(v)) fail(i, "result is not finite");
    return v;
  }

  double eval_node(int i, const Bindings& b) const {
    const Node& n = node(i);
    switch (n.kind) {
      case NodeKind::number:
      case NodeKind::constant:
        return n.value;
      case NodeKind::var_t:
        if (!b.has_t) throw EvalError("missing binding for variable t");
        return b.t;
      case NodeKind::var_u:
        if (!b.has_u) throw EvalError("missing binding for variable u");
        return b.u;
      case NodeKind::negate:
        return -eval_node(n.children[0], b);
      case NodeKind::add:
        return checked(i, eval_node(n.children[0], b) + eval_node(n.children[1], b));
      case NodeKind::sub:
        return checked(i, eval_node(n.children[0], b) - eval_node(n.children[1], b));
      case NodeKind::mul:
        return checked(i, eval_node(n.children[0], b) * eval_node(n.children[1], b));
      case NodeKind::div: {
        const double num = eval_node(n.children[0], b);
        const double den = eval_node(n.children[1], b);
        if (den == 0.0) fail(i, "division by zero");
        return checked(i, num / den);
      }
      case NodeKind::pow:
        return power(i, eval_node(n.children[0], b), eval_node(n.children[1], b));
      case NodeKind::call:
        return call(i, n, b);
    }
    return 0.0;
  }

  double power(int i, double base, double expo) const {
    if (base < 0.0 && expo != std::nearbyint(expo)) {
      fail(i, "negative base " + detail::format_number(base) + " with non-integer exponent");
    }
    if (base == 0.0 && expo < 0.0) fail(i, "zero raised to a negative power");
    return checked(i, std::pow(base, expo));
  }

  double call(int i, const Node& n, const Bindings& b) const {
    const double x = eval_node(n.children[0], b);
    using detail::Func;
    switch (n.func) {
      case Func::sin:
        return checked(i, std::sin(x));
      case Func::cos:
        return checked(i, std::cos(x));
      case Func::exp:
        return checked(i, std::exp(x));
      case Func::ln:
        if (!(x > 0.0)) fail(i, "logarithm of non-positive value " + detail::format_number(x));
        return std::log(x);
      case Func::abs:
        return std::fabs(x);
      case Func::sqrt:
        if (x < 0.0) fail(i, "square root of negative value " + detail::format_number(x));
        return std::sqrt(x);
      case Func::erf:
        return std::erf(x);
      case Func::gamma:
        if (!(x > 0.0)) fail(i, "gamma of non-positive value " + detail::format_number(x));
        return checked(i, std::tgamma(x));
      case Func::phi:
        if (b.phi == nullptr || !*b.phi) throw EvalError("phi() is not bound in this context");
        try {
          return checked(i, (*b.phi)(x));
        } catch (const DomainError& e) {
          fail(i, e.what());
        }
      case Func::pow:
        return power(i, x, eval_node(n.children[1], b));
      case Func::min:
        return std::min(x, eval_node(n.children[1], b));
      case Func::max:
        return std::max(x, eval_node(n.children[1], b));
    }
    return 0.0;
  }

  friend class ExpressionParser;
};

/// Recursive-descent parser producing an Expression.
class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const std::set<std::string>& vars, bool allow_phi)
      : text_(text), vars_(vars), allow_phi_(allow_phi) {}

  Expression run() {
    nodes_ = std::make_shared<std::vector<detail::Node>>();
    advance();
    const int root = parse_expr();
    if (tok_.kind != Tok::end) {
      error("expected one of {operator, ')', end of input}");
    }
    Expression e;
    e.nodes_ = nodes_;
    e.root_ = root;
    e.source_ = std::string(text_);
    return e;
  }

 private:
  enum class Tok { number, name, op, lparen, rparen, comma, end };
  struct Token {
    Tok kind = Tok::end;
    char op = 0;
    double value = 0.0;
    std::string text;
    std::size_t pos = 0;
  };

  std::string_view text_;
  const std::set<std::string>& vars_;
  bool allow_phi_;
  std::size_t cursor_ = 0;
  Token tok_;
  std::shared_ptr<std::vector<detail::Node>> nodes_;

  [[noreturn]] void error(const std::string& expected) const {
    std::string found;
    switch (tok_.kind) {
      case Tok::end:
        found = "end of input";
        break;
      case Tok::number:
      case Tok::name:
        found = "'" + tok_.text + "'";
        break;
      default:
        found = std::string("'") + (tok_.op ? tok_.op : tok_.text[0]) + "'";
    }
    throw SyntaxError("syntax error: " + expected + ", found " + found, tok_.pos);
  }

  void advance() {
    while (cursor_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[cursor_]))) {
      ++cursor_;
    }
    tok_ = Token{};
    tok_.pos = cursor_;
    if (cursor_ >= text_.size()) return;
    const char c = text_[cursor_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = cursor_;
      while (end < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
        ++end;
      }
      tok_.kind = Tok::name;
      tok_.text = std::string(text_.substr(cursor_, end - cursor_));
      cursor_ = end;
      return;
    }
    ++cursor_;
    tok_.text = std::string(1, c);
    switch (c) {
      case '+':
      case '-':
      case '*':
      case '/':
      case '^':
        tok_.kind = Tok::op;
        tok_.op = c;
        return;
      case '(':
        tok_.kind = Tok::lparen;
        return;
      case ')':
        tok_.kind = Tok::rparen;
        return;
      case ',':
        tok_.kind = Tok::comma;
        return;
      default:
        throw SyntaxError(std::string("syntax error: unexpected character '") + c + "'", tok_.pos);
    }
  }

  void lex_number() {
    std::size_t end = cursor_;
    auto digits = [&] {
      std::size_t start = end;
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
      return end > start;
    };
    bool any = digits();
    if (end < text_.size() && text_[end] == '.') {
      ++end;
      any = digits() || any;
    }
    if (!any) throw SyntaxError("syntax error: malformed number", cursor_);
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t save = end;
      ++end;
      if (end < text_.size() && (text_[end] == '+' || text_[end] == '-')) ++end;
      if (!digits()) end = save;
    }
    tok_.kind = Tok::number;
    tok_.text = std::string(text_.substr(cursor_, end - cursor_));
    tok_.value = std::stod(tok_.text);
    cursor_ = end;
  }

  int add(detail::Node n) {
    nodes_->push_back(std::move(n));
    return static_cast<int>(nodes_->size()) - 1;
  }

  int binary(detail::NodeKind k, int lhs, int rhs) {
    detail::Node n;
    n.kind = k;
    n.children = {lhs, rhs};
    return add(std::move(n));
  }

  int parse_expr() {
    int lhs = parse_term();
    while (tok_.kind == Tok::op && (tok_.op == '+' || tok_.op == '-')) {
      const auto k = tok_.op == '+' ? detail::NodeKind::add : detail::NodeKind::sub;
      advance();
      lhs = binary(k, lhs, parse_term());
    }
    return lhs;
  }

  int parse_term() {
    int lhs = parse_unary();
    while (tok_.kind == Tok::op && (tok_.op == '*' || tok_.op == '/')) {
      const auto k = tok_.op == '*' ? detail::NodeKind::mul : detail::NodeKind::div;
      advance();
      lhs = binary(k, lhs, parse_unary());
    }
    return lhs;
  }

  int parse_unary() {
    if (tok_.kind == Tok::op && tok_.op == '-') {
      advance();
      detail::Node n;
      n.kind = detail::NodeKind::negate;
      n.children = {parse_unary()};
      return add(std::move(n));
    }
    if (tok_.kind == Tok::op && tok_.op == '+') {
      advance();
      return parse_unary();
    }
    return parse_power();
  }

  int parse_power() {
    const int base = parse_primary();
    if (tok_.kind == Tok::op && tok_.op == '^') {
      advance();
      return binary(detail::NodeKind::pow, base, parse_unary());
    }
    return base;
  }

  int parse_primary() {
    if (tok_.kind == Tok::number) {
      detail::Node n;
      n.kind = detail::NodeKind::number;
      n.value = tok_.value;
      advance();
      return add(std::move(n));
    }
    if (tok_.kind == Tok::lparen) {
      advance();
      const int inner = parse_expr();
      if (tok_.kind != Tok::rparen) error("expected ')'");
      advance();
      return inner;
    }
    if (tok_.kind == Tok::name) return parse_name();
    error("expected one of {number, identifier, '(', '-'}");
  }

  int parse_name() {
    const Token name = tok_;
    advance();
    if (tok_.kind == Tok::lparen) return parse_call(name);

    detail::Node n;
    if (name.text == "pi" || name.text == "e") {
      n.kind = detail::NodeKind::constant;
      n.name = name.text;
      n.value = name.text == "pi" ? std::numbers::pi : std::numbers::e;
      return add(std::move(n));
    }
    if (name.text == "t" || name.text == "u") {
      if (!vars_.count(name.text)) {
        throw SyntaxError("variable '" + name.text + "' is not allowed here", name.pos);
      }
      n.kind = name.text == "t" ? detail::NodeKind::var_t : detail::NodeKind::var_u;
      return add(std::move(n));
    }
    throw SyntaxError("unknown identifier '" + name.text + "'", name.pos);
  }

  int parse_call(const Token& name) {
    const detail::FuncInfo* info = nullptr;
    for (const auto& f : detail::kFunctions) {
      if (f.name == name.text) info = &f;
    }
    if (info == nullptr) throw SyntaxError("unknown function '" + name.text + "'", name.pos);
    if (info->id == detail::Func::phi && !allow_phi_) {
      throw SyntaxError("phi() is not available in this expression", name.pos);
    }
    advance();  // '('
    std::vector<int> args;
    if (tok_.kind != Tok::rparen) {
      args.push_back(parse_expr());
      while (tok_.kind == Tok::comma) {
        advance();
        args.push_back(parse_expr());
      }
    }
    if (tok_.kind != Tok::rparen) error("expected one of {',', ')'}");
    advance();
    if (static_cast<int>(args.size()) != info->arity) {
      throw SyntaxError("function '" + name.text + "' expects " + std::to_string(info->arity) +
                            " argument(s), got " + std::to_string(args.size()),
                        name.pos);
    }
    detail::Node n;
    n.kind = detail::NodeKind::call;
    n.func = info->id;
    n.name = name.text;
    n.children = std::move(args);
    return add(std::move(n));
  }
};

inline Expression Expression::parse(std::string_view text, const std::set<std::string>& allowed_vars,
                                    bool allow_phi) {
  return ExpressionParser(text, allowed_vars, allow_phi).run();
}

}  // namespace phihilfer
