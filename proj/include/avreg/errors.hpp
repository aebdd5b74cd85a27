#pragma once

#include <stdexcept>
#include <string>

namespace avreg {

// Error taxonomy shared by the library and the CLI. Each error carries a
// stable string code; the CLI maps categories to exit codes
// (config = 2, data = 3, numerical = 4).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
  ConfigError(std::string code, const std::string& msg) : Error(std::move(code), msg) {}
};

class DataError : public Error {
 public:
  DataError(std::string code, const std::string& msg) : Error(std::move(code), msg) {}
};

class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& msg) : DataError("parse_error", msg) {}
};

class MissingColumn : public DataError {
 public:
  explicit MissingColumn(const std::string& name)
      : DataError("missing_column", "column not found in header: " + name) {}
};

class NonNumericCell : public DataError {
 public:
  NonNumericCell(const std::string& msg) : DataError("non_numeric_cell", msg) {}
};

class EmptyData : public DataError {
 public:
  explicit EmptyData(const std::string& msg) : DataError("empty_data", msg) {}
};

// Treatment values incompatible with the declared propensity-score family.
class SupportViolation : public DataError {
 public:
  explicit SupportViolation(const std::string& msg)
      : DataError("support_violation", msg) {}
};

class TooFewRows : public DataError {
 public:
  explicit TooFewRows(const std::string& msg) : DataError("too_few_rows", msg) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string code, const std::string& msg) : Error(std::move(code), msg) {}
};

// Cross-moment or Jacobian matrix beyond the condition-number guard.
// Usually a sign of failed overlap or a collinear basis.
class SingularSystem : public NumericalError {
 public:
  explicit SingularSystem(const std::string& msg)
      : NumericalError("singular_system", msg) {}
};

class NonFiniteMoment : public NumericalError {
 public:
  explicit NonFiniteMoment(const std::string& msg)
      : NumericalError("non_finite_moment", msg) {}
};

// Newton step-halving stalled; for a binary treatment this is the classic
// perfect-separation failure mode.
class NonConvergence : public NumericalError {
 public:
  explicit NonConvergence(const std::string& msg)
      : NumericalError("non_convergence", msg) {}
};

// Conditional treatment variance numerically singular at some row.
class DegenerateVariance : public NumericalError {
 public:
  explicit DegenerateVariance(const std::string& msg)
      : NumericalError("degenerate_variance", msg) {}
};

class CellTooSmall : public NumericalError {
 public:
  explicit CellTooSmall(const std::string& msg)
      : NumericalError("cell_too_small", msg) {}
};

class NegativeDensity : public NumericalError {
 public:
  explicit NegativeDensity(const std::string& msg)
      : NumericalError("negative_density", msg) {}
};

class TooManyFailures : public NumericalError {
 public:
  explicit TooManyFailures(const std::string& msg)
      : NumericalError("too_many_failures", msg) {}
};

}  // namespace avreg
