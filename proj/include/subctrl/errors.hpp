#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace subctrl {

/// Malformed or inconsistent input (config documents, expressions, arguments).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Expression syntax error with the byte offset where parsing failed.
class SyntaxError : public ConfigError {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : ConfigError(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A vector field, interpolant or velocity produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query point lies outside the discretized domain.
class OutOfDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver failed to reach the requested tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double final_residual)
      : std::runtime_error(what), final_residual_(final_residual) {}
  double final_residual() const { return final_residual_; }

 private:
  double final_residual_;
};

/// The operator has a (near-)kernel on mean-zero functions: no certificate of
/// controllability can be issued. This is a mathematical negative, not a failure.
class NotControllableError : public std::runtime_error {
 public:
  NotControllableError(const std::string& what, double gap, std::size_t kernel_dim)
      : std::runtime_error(what), gap_(gap), kernel_dim_(kernel_dim) {}
  double gap() const { return gap_; }
  std::size_t kernel_dim() const { return kernel_dim_; }

 private:
  double gap_;
  std::size_t kernel_dim_;
};

/// A density drops below the lower bound required for steering.
class DensityFloorError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace subctrl
