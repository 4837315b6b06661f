#pragma once

#include <stdexcept>
#include <string>

namespace etcsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query or argument fell outside the domain where it is defined.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition (dimension mismatch, bad parameter, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The integrator produced a non-finite value.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(const std::string& what, double t) : Error(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

/// An iterative numerical routine failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Bisection could not shrink the event bracket below the requested tolerance.
class DetectionError : public Error {
 public:
  DetectionError(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}
  double bracket_lo() const noexcept { return lo_; }
  double bracket_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// A hypothesis of the stability / dwell-time theory does not hold.
/// `inequality()` names the failed condition, e.g. "b < mu - sigma".
class AssumptionViolation : public Error {
 public:
  AssumptionViolation(const std::string& inequality, const std::string& detail)
      : Error("assumption violated: " + inequality + " (" + detail + ")"),
        inequality_(inequality) {}
  const std::string& inequality() const noexcept { return inequality_; }

 private:
  std::string inequality_;
};

/// A preset whose derived constants make it unusable (e.g. mu <= 0).
class ConfigurationRejected : public Error {
 public:
  using Error::Error;
};

}  // namespace etcsim
