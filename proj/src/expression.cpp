#include "pmc/expression.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <optional>

namespace pmc {

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error("parse error at position " + std::to_string(position) +
                         ": " + message),
      position_(position) {}

enum class Op {
  constant,
  variable,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  sin,
  cos,
  tan,
  exp,
  ln,
  sqrt,
  tanh,
  abs,
  min,
  max,
  // internal: sign(a) and step(a - b) used by derivatives of abs/min/max
  sign,
  step,
};

struct Expression::Node {
  Op op = Op::constant;
  double value = 0.0;
  std::size_t slot = 0;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

struct FunctionName {
  const char* name;
  Op op;
  int args;
};

constexpr std::array<FunctionName, 10> kFunctions{{
    {"sin", Op::sin, 1},
    {"cos", Op::cos, 1},
    {"tan", Op::tan, 1},
    {"exp", Op::exp, 1},
    {"ln", Op::ln, 1},
    {"sqrt", Op::sqrt, 1},
    {"tanh", Op::tanh, 1},
    {"abs", Op::abs, 1},
    {"min", Op::min, 2},
    {"max", Op::max, 2},
}};

NodePtr make_const(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::constant;
  n->value = v;
  return n;
}

NodePtr make_var(std::size_t slot) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::variable;
  n->slot = slot;
  return n;
}

bool is_const(const NodePtr& n, double v) {
  return n->op == Op::constant && n->value == v;
}

NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
  // constant folding and the identities needed to keep derivative trees small
  const bool ca = a && a->op == Op::constant;
  const bool cb = b && b->op == Op::constant;
  switch (op) {
    case Op::neg:
      if (ca) return make_const(-a->value);
      if (a->op == Op::neg) return a->a;
      break;
    case Op::add:
      if (ca && cb) return make_const(a->value + b->value);
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::sub:
      if (ca && cb) return make_const(a->value - b->value);
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make(Op::neg, b);
      break;
    case Op::mul:
      if (ca && cb) return make_const(a->value * b->value);
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return make(Op::neg, b);
      if (is_const(b, -1.0)) return make(Op::neg, a);
      break;
    case Op::div:
      if (ca && cb && b->value != 0.0) return make_const(a->value / b->value);
      if (is_const(a, 0.0)) return make_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::pow:
      if (is_const(b, 0.0)) return make_const(1.0);
      if (is_const(b, 1.0)) return a;
      break;
    default:
      break;
  }
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double eval(const Expression::Node& n, std::span<const double> v) {
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return v[n.slot];
    case Op::neg: return -eval(*n.a, v);
    case Op::add: return eval(*n.a, v) + eval(*n.b, v);
    case Op::sub: return eval(*n.a, v) - eval(*n.b, v);
    case Op::mul: return eval(*n.a, v) * eval(*n.b, v);
    case Op::div: return eval(*n.a, v) / eval(*n.b, v);
    case Op::pow: {
      if (n.b->op == Op::constant && n.b->value == 2.0) {
        const double x = eval(*n.a, v);
        return x * x;
      }
      return std::pow(eval(*n.a, v), eval(*n.b, v));
    }
    case Op::sin: return std::sin(eval(*n.a, v));
    case Op::cos: return std::cos(eval(*n.a, v));
    case Op::tan: return std::tan(eval(*n.a, v));
    case Op::exp: return std::exp(eval(*n.a, v));
    case Op::ln: return std::log(eval(*n.a, v));
    case Op::sqrt: return std::sqrt(eval(*n.a, v));
    case Op::tanh: return std::tanh(eval(*n.a, v));
    case Op::abs: return std::abs(eval(*n.a, v));
    case Op::min: return std::min(eval(*n.a, v), eval(*n.b, v));
    case Op::max: return std::max(eval(*n.a, v), eval(*n.b, v));
    case Op::sign: {
      const double x = eval(*n.a, v);
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    }
    case Op::step: return eval(*n.a, v) <= eval(*n.b, v) ? 1.0 : 0.0;
  }
  return 0.0;
}

bool depends(const Expression::Node& n, std::size_t slot) {
  if (n.op == Op::variable) return n.slot == slot;
  if (n.a && depends(*n.a, slot)) return true;
  if (n.b && depends(*n.b, slot)) return true;
  return false;
}

NodePtr diff(const NodePtr& n, std::size_t s) {
  if (!depends(*n, s)) return make_const(0.0);
  const NodePtr& a = n->a;
  const NodePtr& b = n->b;
  switch (n->op) {
    case Op::constant: return make_const(0.0);
    case Op::variable: return make_const(1.0);
    case Op::neg: return make(Op::neg, diff(a, s));
    case Op::add: return make(Op::add, diff(a, s), diff(b, s));
    case Op::sub: return make(Op::sub, diff(a, s), diff(b, s));
    case Op::mul:
      return make(Op::add, make(Op::mul, diff(a, s), b),
                  make(Op::mul, a, diff(b, s)));
    case Op::div:
      // (a' b - a b') / b^2
      return make(Op::div,
                  make(Op::sub, make(Op::mul, diff(a, s), b),
                       make(Op::mul, a, diff(b, s))),
                  make(Op::mul, b, b));
    case Op::pow:
      if (!depends(*b, s)) {
        // b a^(b-1) a'
        return make(Op::mul,
                    make(Op::mul, b,
                         make(Op::pow, a, make(Op::sub, b, make_const(1.0)))),
                    diff(a, s));
      }
      // a^b (b' ln a + b a'/a)
      return make(Op::mul, n,
                  make(Op::add, make(Op::mul, diff(b, s), make(Op::ln, a)),
                       make(Op::div, make(Op::mul, b, diff(a, s)), a)));
    case Op::sin: return make(Op::mul, make(Op::cos, a), diff(a, s));
    case Op::cos:
      return make(Op::neg, make(Op::mul, make(Op::sin, a), diff(a, s)));
    case Op::tan: {
      auto c = make(Op::cos, a);
      return make(Op::div, diff(a, s), make(Op::mul, c, c));
    }
    case Op::exp: return make(Op::mul, n, diff(a, s));
    case Op::ln: return make(Op::div, diff(a, s), a);
    case Op::sqrt:
      return make(Op::div, diff(a, s), make(Op::mul, make_const(2.0), n));
    case Op::tanh: {
      auto one_minus = make(Op::sub, make_const(1.0), make(Op::mul, n, n));
      return make(Op::mul, one_minus, diff(a, s));
    }
    case Op::abs: return make(Op::mul, make(Op::sign, a), diff(a, s));
    case Op::min: {
      // min(a,b) = a where a <= b
      auto sel = make(Op::step, a, b);
      return make(Op::add, make(Op::mul, sel, diff(a, s)),
                  make(Op::mul, make(Op::sub, make_const(1.0), sel), diff(b, s)));
    }
    case Op::max: {
      auto sel = make(Op::step, b, a);
      return make(Op::add, make(Op::mul, sel, diff(a, s)),
                  make(Op::mul, make(Op::sub, make_const(1.0), sel), diff(b, s)));
    }
    case Op::sign:
    case Op::step:
      return make_const(0.0);
  }
  return make_const(0.0);
}

const char* op_name(Op op) {
  for (const auto& f : kFunctions)
    if (f.op == op) return f.name;
  if (op == Op::sign) return "sign";
  if (op == Op::step) return "step";
  return "?";
}

std::string render(const Expression::Node& n) {
  switch (n.op) {
    case Op::constant: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      return n.value < 0 ? "(" + std::string(buf) + ")" : std::string(buf);
    }
    case Op::variable: return "#" + std::to_string(n.slot);
    case Op::neg: return "(-" + render(*n.a) + ")";
    case Op::add: return "(" + render(*n.a) + "+" + render(*n.b) + ")";
    case Op::sub: return "(" + render(*n.a) + "-" + render(*n.b) + ")";
    case Op::mul: return "(" + render(*n.a) + "*" + render(*n.b) + ")";
    case Op::div: return "(" + render(*n.a) + "/" + render(*n.b) + ")";
    case Op::pow: return "(" + render(*n.a) + "^" + render(*n.b) + ")";
    case Op::min:
    case Op::max:
    case Op::step:
      return std::string(op_name(n.op)) + "(" + render(*n.a) + "," +
             render(*n.b) + ")";
    default:
      return std::string(op_name(n.op)) + "(" + render(*n.a) + ")";
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> vars)
      : text_(text), vars_(vars) {}

  NodePtr run() {
    skip_space();
    if (pos_ >= text_.size()) fail("empty expression", pos_);
    auto n = expr();
    skip_space();
    if (pos_ < text_.size())
      fail("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, at + 1);
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make(Op::add, lhs, term());
      else if (accept('-'))
        lhs = make(Op::sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Op::mul, lhs, unary());
      else if (accept('/'))
        lhs = make(Op::div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Op::pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = expr();
      if (!accept(')')) fail("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    fail("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_])))
          ++pos_;
      }
    }
    const std::string lit(text_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(lit.c_str(), &end);
    if (end != lit.c_str() + lit.size() || lit == ".")
      fail("malformed number '" + lit + "'", start);
    return make_const(v);
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_'))
      ++pos_;
    const std::string id(text_.substr(start, pos_ - start));

    skip_space();
    const bool call = pos_ < text_.size() && text_[pos_] == '(';
    if (call) {
      const auto it = std::find_if(kFunctions.begin(), kFunctions.end(),
                                   [&](const FunctionName& f) { return id == f.name; });
      if (it == kFunctions.end()) fail("unknown function '" + id + "'", start);
      ++pos_;
      auto a = expr();
      NodePtr b;
      if (it->args == 2) {
        if (!accept(',')) fail("function '" + id + "' expects two arguments", pos_);
        b = expr();
      }
      if (!accept(')')) fail("expected ')' after arguments of '" + id + "'", pos_);
      return make(it->op, a, b);
    }
    for (std::size_t k = 0; k < vars_.size(); ++k)
      if (vars_[k] == id) return make_var(k);
    if (id == "pi") return make_const(std::numbers::pi);
    if (id == "e") return make_const(std::numbers::e);
    fail("unknown identifier '" + id + "'", start);
  }

  std::string_view text_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, std::size_t arity,
                       std::string text)
    : root_(std::move(root)), arity_(arity), text_(std::move(text)) {}

Expression Expression::parse(std::string_view text,
                             std::span<const std::string> variables) {
  Parser p(text, variables);
  auto root = p.run();
  return Expression(std::move(root), variables.size(), std::string(text));
}

Expression Expression::constant(double value, std::size_t arity) {
  auto root = make_const(value);
  return Expression(root, arity, render(*root));
}

double Expression::operator()(std::span<const double> values) const {
  if (!root_) throw std::logic_error("evaluating an empty expression");
  if (values.size() < arity_)
    throw std::invalid_argument("expression needs " + std::to_string(arity_) +
                                " variable values");
  return eval(*root_, values);
}

Expression Expression::derivative(std::size_t slot) const {
  if (!root_) throw std::logic_error("differentiating an empty expression");
  auto d = diff(root_, slot);
  return Expression(d, arity_, render(*d));
}

bool Expression::depends_on(std::size_t slot) const {
  return root_ && depends(*root_, slot);
}

bool Expression::is_constant() const {
  return root_ && root_->op == Op::constant;
}

std::string Expression::to_string() const { return root_ ? render(*root_) : ""; }

}  // namespace pmc
