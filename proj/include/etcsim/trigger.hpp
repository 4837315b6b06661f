#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "etcsim/class_k.hpp"
#include "etcsim/history.hpp"

namespace etcsim {

/// Execution rule chi(|eps|) <= sigma * alpha1(|x|) + chi(a * exp(-b (t - t0))).
/// sigma = 0 gives the purely time-dependent rule, a = 0 the purely
/// state-dependent one; neither needs a separate code path.
struct TriggerRule {
  double sigma = 0.0;
  double a = 0.0;
  double b = 1.0;
  ClassKFunction alpha1;
  ClassKFunction chi;
  double t0 = 0.0;

  void validate() const {
    if (!(sigma >= 0.0)) throw ContractError("trigger rule needs sigma >= 0");
    if (!(a >= 0.0)) throw ContractError("trigger rule needs a >= 0");
    if (!(b > 0.0)) throw ContractError("trigger rule needs b > 0");
    if (!alpha1.forward || !chi.forward)
      throw ContractError("trigger rule needs alpha1 and chi");
  }
};

using MeasurementError = StateVector;

/// eps = x(t_i) - x(t).
inline MeasurementError measurement_error(const StateVector& x_at_event, const StateVector& x_now) {
  if (x_at_event.size() != x_now.size())
    throw ContractError("measurement_error: dimension mismatch");
  return x_at_event - x_now;
}

inline double threshold(const TriggerRule& rule, double t, const StateVector& x) {
  return rule.sigma * rule.alpha1(x.norm()) + rule.chi(rule.a * std::exp(-rule.b * (t - rule.t0)));
}

/// chi(|eps|) - threshold. Negative while the rule is strictly satisfied.
inline double trigger_margin(const TriggerRule& rule, double t, const StateVector& x,
                             const MeasurementError& eps) {
  return rule.chi(eps.norm()) - threshold(rule, t, x);
}

/// Bisection for the first sign change of `margin_at` on [t_lo, t_hi].
///
/// Requires margin_at(t_lo) < 0. Returns nullopt when margin_at(t_hi) < 0,
/// otherwise the right end of the final bracket, so the returned time lies in
/// (t_lo, t_hi] and the margin there is >= 0.
template <class MarginFn>
std::optional<double> locate_event(MarginFn&& margin_at, double t_lo, double t_hi, double tol,
                                   int max_iterations = 30) {
  if (!(t_lo < t_hi)) throw ContractError("locate_event needs t_lo < t_hi");
  if (!(tol > 0.0)) throw ContractError("locate_event needs tol > 0");
  if (!(margin_at(t_lo) < 0.0))
    throw ContractError("locate_event needs a strictly negative margin at t_lo");
  if (margin_at(t_hi) < 0.0) return std::nullopt;

  double lo = t_lo;
  double hi = t_hi;
  for (int it = 0; it < max_iterations && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted in floating point
    if (margin_at(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  if (hi - lo > tol && 0.5 * (lo + hi) > lo && 0.5 * (lo + hi) < hi)
    throw DetectionError("event bisection did not reach tolerance", lo, hi);
  return hi;
}

}  // namespace etcsim
