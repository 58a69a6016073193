#include "subctrl/expression.hpp"

#include <cctype>
#include <charconv>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "subctrl/errors.hpp"

namespace subctrl {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Expression run() {
    Expression expr;
    out_ = &expr;
    parse_comparison();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    if (expr.program_.empty()) fail("empty expression");
    int depth = 0;
    for (const auto& ins : expr.program_) {
      if (ins.op == Op::Constant || ins.op == Op::Variable) {
        expr.stack_depth_ = std::max(expr.stack_depth_, ++depth);
      } else if (ins.op != Op::Negate && ins.op != Op::Sin && ins.op != Op::Cos && ins.op != Op::Exp) {
        --depth;
      }
    }
    expr.text_ = std::string(text_);
    return expr;
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& message) const { throw SyntaxError(message, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void emit(Op op, int index = 0, double value = 0.0) { out_->program_.push_back({op, index, value}); }

  void parse_comparison() {
    parse_sum();
    Op op;
    if (accept("<=")) {
      op = Op::LessEqual;
    } else if (accept(">=")) {
      op = Op::GreaterEqual;
    } else if (accept("<")) {
      op = Op::Less;
    } else if (accept(">")) {
      op = Op::Greater;
    } else {
      return;
    }
    parse_sum();
    emit(op);
  }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept("+")) {
        parse_product();
        emit(Op::Add);
      } else if (accept("-")) {
        parse_product();
        emit(Op::Subtract);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept("*")) {
        parse_unary();
        emit(Op::Multiply);
      } else if (accept("/")) {
        parse_unary();
        emit(Op::Divide);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept("-")) {
      parse_unary();
      emit(Op::Negate);
      return;
    }
    if (accept("+")) {
      parse_unary();
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_primary();
    if (accept("^")) {
      parse_unary();
      emit(Op::Power);
    }
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char ch = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      parse_number();
      return;
    }
    if (ch == '(') {
      ++pos_;
      parse_comparison();
      if (!accept(")")) fail("expected ')'");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string_view word = text_.substr(start, pos_ - start);
      if (word == "pi") {
        emit(Op::Constant, 0, std::numbers::pi);
        return;
      }
      if (word.size() > 1 && word[0] == 'x') {
        int index = 0;
        const auto [ptr, ec] = std::from_chars(word.data() + 1, word.data() + word.size(), index);
        if (ec != std::errc() || ptr != word.data() + word.size() || index < 1) {
          pos_ = start;
          fail("invalid variable '" + std::string(word) + "'");
        }
        emit(Op::Variable, index - 1);
        out_->max_variable_ = std::max(out_->max_variable_, index);
        return;
      }
      Op func;
      if (word == "sin") {
        func = Op::Sin;
      } else if (word == "cos") {
        func = Op::Cos;
      } else if (word == "exp") {
        func = Op::Exp;
      } else {
        pos_ = start;
        fail("unknown identifier '" + std::string(word) + "'");
      }
      if (!accept("(")) fail("expected '(' after function name");
      parse_comparison();
      if (!accept(")")) fail("expected ')'");
      emit(func);
      return;
    }
    fail("unexpected character '" + std::string(1, ch) + "'");
  }

  void parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    emit(Op::Constant, 0, value);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Expression* out_ = nullptr;
};

Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

namespace {

struct Dual {
  double v;
  double d;
};

}  // namespace

double Expression::evaluate(std::span<const double> x) const {
  double local[32]{};
  std::vector<double> heap;
  double* stack = local;
  if (stack_depth_ > 32) {
    heap.resize(stack_depth_);
    stack = heap.data();
  }
  int top = 0;
  auto checked_var = [&](int index) -> double {
    if (static_cast<std::size_t>(index) >= x.size()) {
      throw EvaluationError("expression '" + text_ + "' references x" + std::to_string(index + 1) +
                            " but the point has dimension " + std::to_string(x.size()));
    }
    return x[index];
  };
  for (const Instruction& ins : program_) {
    switch (ins.op) {
      case Op::Constant: stack[top++] = ins.value; break;
      case Op::Variable: stack[top++] = checked_var(ins.index); break;
      case Op::Negate: stack[top - 1] = -stack[top - 1]; break;
      case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
      default: {
        const double b = stack[--top];
        double& a = stack[top - 1];
        switch (ins.op) {
          case Op::Add: a = a + b; break;
          case Op::Subtract: a = a - b; break;
          case Op::Multiply: a = a * b; break;
          case Op::Divide: a = a / b; break;
          case Op::Power: a = std::pow(a, b); break;
          case Op::Less: a = a < b ? 1.0 : 0.0; break;
          case Op::LessEqual: a = a <= b ? 1.0 : 0.0; break;
          case Op::Greater: a = a > b ? 1.0 : 0.0; break;
          case Op::GreaterEqual: a = a >= b ? 1.0 : 0.0; break;
          default: break;
        }
      }
    }
  }
  return stack[0];
}

std::pair<double, double> Expression::evaluate_with_derivative(std::span<const double> x,
                                                               int var) const {
  std::vector<Dual> stack;
  stack.reserve(16);
  for (const Instruction& ins : program_) {
    switch (ins.op) {
      case Op::Constant: stack.push_back({ins.value, 0.0}); break;
      case Op::Variable:
        if (static_cast<std::size_t>(ins.index) >= x.size()) {
          throw EvaluationError("expression '" + text_ + "' references x" +
                                std::to_string(ins.index + 1) + " out of range");
        }
        stack.push_back({x[ins.index], ins.index == var ? 1.0 : 0.0});
        break;
      case Op::Negate: stack.back() = {-stack.back().v, -stack.back().d}; break;
      case Op::Sin: {
        const Dual a = stack.back();
        stack.back() = {std::sin(a.v), std::cos(a.v) * a.d};
        break;
      }
      case Op::Cos: {
        const Dual a = stack.back();
        stack.back() = {std::cos(a.v), -std::sin(a.v) * a.d};
        break;
      }
      case Op::Exp: {
        const Dual a = stack.back();
        const double e = std::exp(a.v);
        stack.back() = {e, e * a.d};
        break;
      }
      default: {
        const Dual b = stack.back();
        stack.pop_back();
        Dual& a = stack.back();
        switch (ins.op) {
          case Op::Add: a = {a.v + b.v, a.d + b.d}; break;
          case Op::Subtract: a = {a.v - b.v, a.d - b.d}; break;
          case Op::Multiply: a = {a.v * b.v, a.d * b.v + a.v * b.d}; break;
          case Op::Divide: a = {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; break;
          case Op::Power: {
            const double p = std::pow(a.v, b.v);
            double d = 0.0;
            if (a.d != 0.0) d += b.v * std::pow(a.v, b.v - 1.0) * a.d;
            if (b.d != 0.0) d += p * std::log(a.v) * b.d;
            a = {p, d};
            break;
          }
          case Op::Less: a = {a.v < b.v ? 1.0 : 0.0, 0.0}; break;
          case Op::LessEqual: a = {a.v <= b.v ? 1.0 : 0.0, 0.0}; break;
          case Op::Greater: a = {a.v > b.v ? 1.0 : 0.0, 0.0}; break;
          case Op::GreaterEqual: a = {a.v >= b.v ? 1.0 : 0.0, 0.0}; break;
          default: break;
        }
      }
    }
  }
  return {stack[0].v, stack[0].d};
}

}  // namespace subctrl
