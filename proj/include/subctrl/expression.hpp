#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace subctrl {

/// Compiled scalar expression in the variables x1..xd.
///
/// Grammar (whitespace-insensitive):
///
///     comparison := sum [ ("<" | "<=" | ">" | ">=") sum ]
///     sum        := product { ("+" | "-") product }
///     product    := unary { ("*" | "/") unary }
///     unary      := "-" unary | "+" unary | power
///     power      := primary [ "^" unary ]
///     primary    := number | "x"<k> | "pi" | func "(" comparison ")" | "(" comparison ")"
///     func       := "sin" | "cos" | "exp"
///
/// Comparisons evaluate to 1 or 0 and exist so domain masks can be written as
/// predicates ("x1+x2<=1"). Exponentiation is right associative.
class Expression {
 public:
  Expression() = default;

  /// Parses `text`. Throws SyntaxError with the failing offset.
  static Expression parse(std::string_view text);

  double evaluate(std::span<const double> x) const;

  /// Value and partial derivative with respect to variable `var` (0-based),
  /// by forward-mode differentiation. Comparisons have zero derivative.
  std::pair<double, double> evaluate_with_derivative(std::span<const double> x, int var) const;

  /// Largest variable index referenced (1-based), 0 for constant expressions.
  int max_variable() const { return max_variable_; }
  const std::string& text() const { return text_; }

 private:
  enum class Op : std::uint8_t {
    Constant,
    Variable,
    Negate,
    Add,
    Subtract,
    Multiply,
    Divide,
    Power,
    Sin,
    Cos,
    Exp,
    Less,
    LessEqual,
    Greater,
    GreaterEqual,
  };
  struct Instruction {
    Op op;
    int index = 0;
    double value = 0.0;
  };

  friend class ExpressionParser;

  std::vector<Instruction> program_;
  int max_variable_ = 0;
  int stack_depth_ = 0;
  std::string text_;
};

}  // namespace subctrl
