#pragma once
// Error taxonomy shared by every module. All failures are reported by throwing
// one of these types; each carries a human-readable diagnostic.

#include <stdexcept>
#include <string>

namespace mqshmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-positive lengths, bad grain counts, ...
class InvalidGeometry : public Error { public: using Error::Error; };
// Cell layout parameters outside their admissible range.
class InvalidLayout : public Error { public: using Error::Error; };
// Zero/negative-area triangle handed to an element routine.
class SingularElement : public Error { public: using Error::Error; };
// Linear solver breakdown; message carries a conditioning diagnostic.
class SolverFailure : public Error { public: using Error::Error; };
// Non-finite inputs to a constitutive law.
class NumericDomain : public Error { public: using Error::Error; };
// Inconsistent cross-references (pairing vs. mesh, grid mismatch, ...).
class Inconsistency : public Error { public: using Error::Error; };
// Newton iteration did not reach its tolerance.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }
 private:
  double last_residual_;
};
// A homogenized Gauss point has no constitutive data.
class CoverageError : public Error { public: using Error::Error; };
// Evaluation requested outside a sampled time grid.
class RangeError : public Error { public: using Error::Error; };
// Relative error with a vanishing denominator.
class UndefinedNorm : public Error { public: using Error::Error; };
// Malformed configuration file or option.
class ConfigError : public Error { public: using Error::Error; };
// Instance exceeds a configured memory/DOF budget.
class BudgetExceeded : public Error { public: using Error::Error; };

// Prefixes the message of `e` with `context` and rethrows the same dynamic type.
[[noreturn]] void rethrow_with_context(const std::string& context);

}  // namespace mqshmm
