#pragma once

// Small expression language used for PMC functions, conformal factors,
// warped profiles, barrier graphs and initial fields.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: sin cos tan exp ln sqrt tanh abs (one argument), min max (two).
// Named constants pi and e (a variable of the same name takes precedence).

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pmc {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position);

  /// 1-based character column of the offending token.
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class Expression {
 public:
  struct Node;

  Expression() = default;

  /// Parses `text`; identifiers must be one of `variables` (slot order is
  /// the order of the list) or a known function name.
  static Expression parse(std::string_view text,
                          std::span<const std::string> variables);

  static Expression constant(double value, std::size_t arity);

  /// Evaluates with `values[k]` bound to variable slot k.
  double operator()(std::span<const double> values) const;

  /// Symbolic partial derivative with respect to variable slot `slot`.
  Expression derivative(std::size_t slot) const;

  bool depends_on(std::size_t slot) const;
  bool is_constant() const;

  const std::string& text() const { return text_; }
  std::size_t arity() const { return arity_; }
  bool empty() const { return !root_; }

  /// Canonical rendering of the parse tree (used for derived expressions).
  std::string to_string() const;

 private:
  Expression(std::shared_ptr<const Node> root, std::size_t arity,
             std::string text);

  std::shared_ptr<const Node> root_;
  std::size_t arity_ = 0;
  std::string text_;
};

}  // namespace pmc
