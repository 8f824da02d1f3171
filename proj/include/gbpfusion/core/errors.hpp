#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gbpfusion {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural problem with a factor graph (unknown ids, dangling edges, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Invalid construction-time input: bad noise covariance, dimension mismatch,
/// malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A factor's measurement function or Jacobian produced non-finite values.
class LinearizationError : public Error {
 public:
  LinearizationError(std::string factor_id, const std::string& what)
      : Error("linearization failure in factor '" + factor_id + "': " + what),
        factor_id_(std::move(factor_id)) {}
  const std::string& factor_id() const noexcept { return factor_id_; }

 private:
  std::string factor_id_;
};

/// The eliminated block of a factor-to-variable message could not be solved.
class EliminationSingularity : public Error {
 public:
  EliminationSingularity(std::string factor_id, std::string variable_id)
      : Error("elimination singularity in factor '" + factor_id + "' while messaging variable '" +
              variable_id + "'"),
        factor_id_(std::move(factor_id)),
        variable_id_(std::move(variable_id)) {}
  const std::string& factor_id() const noexcept { return factor_id_; }
  const std::string& variable_id() const noexcept { return variable_id_; }

 private:
  std::string factor_id_;
  std::string variable_id_;
};

/// The summed incoming information of a variable is singular.
class UnobservableVariable : public Error {
 public:
  explicit UnobservableVariable(std::string variable_id)
      : Error("unobservable variable '" + variable_id + "'"), variable_id_(std::move(variable_id)) {}
  const std::string& variable_id() const noexcept { return variable_id_; }

 private:
  std::string variable_id_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}
  /// "source:line: what".
  ParseError(const std::string& source, const std::string& what, std::size_t line)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line), column_(0), source_(source) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& source() const noexcept { return source_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    std::string out = "line " + std::to_string(line);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ": " + what;
  }
  std::size_t line_;
  std::size_t column_;
  std::string source_;
};

class PowerFlowDiverged : public Error {
 public:
  PowerFlowDiverged(int iterations, double mismatch)
      : Error("power flow diverged after " + std::to_string(iterations) +
              " iterations (max mismatch " + std::to_string(mismatch) + ")"),
        iterations_(iterations),
        mismatch_(mismatch) {}
  /// Same failure with `context` (e.g. the hour) prefixed to the message.
  PowerFlowDiverged(const std::string& context, const PowerFlowDiverged& cause)
      : Error(context + ": " + cause.what()), iterations_(cause.iterations_), mismatch_(cause.mismatch_) {}
  int iterations() const noexcept { return iterations_; }
  double mismatch() const noexcept { return mismatch_; }

 private:
  int iterations_;
  double mismatch_;
};

/// Regression fit failure (insufficient history, rank-deficient design, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace gbpfusion
