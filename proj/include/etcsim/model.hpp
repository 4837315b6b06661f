#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "etcsim/history.hpp"

namespace etcsim {

/// Lipschitz data used by the dwell-time certificate.
/// `functional`: constant of f(t, ., u) in the history argument (uniform in u).
/// `feedback_composite`: constant of x -> f(t, phi, k(x)).
struct LipschitzData {
  double functional = 0.0;
  double feedback_composite = 0.0;
};

/// Delay system x'(t) = f(t, x_t, u) with state feedback u = k(x).
struct SystemModel {
  using Dynamics =
      std::function<StateVector(double t, const HistoryWindow& window, const InputVector& u)>;
  using Feedback = std::function<InputVector(const StateVector& x)>;

  Eigen::Index n = 0;
  Eigen::Index m = 0;
  double tau = 0.0;
  Dynamics dynamics;
  Feedback feedback;
  std::optional<LipschitzData> lipschitz;

  StateVector rhs(double t, const HistoryWindow& window, const InputVector& u) const {
    return dynamics(t, window, u);
  }
};

/// Checks f(t, 0, 0) = 0 on the sampled times and k(0) = 0. Returns a
/// description of the first failure, or an empty string.
inline std::string check_trivial_solution(const SystemModel& model,
                                          const std::vector<double>& sample_times) {
  const StateVector zero = StateVector::Zero(model.n);
  const InputVector u0 = InputVector::Zero(model.m);
  if (model.feedback(zero).norm() != 0.0) return "feedback(0) != 0";
  for (double t : sample_times) {
    SolutionHistory h(t, InitialFunction::constant(zero, model.tau), zero);
    HistoryWindow w(h, t, zero);
    if (model.rhs(t, w, u0).norm() != 0.0)
      return "dynamics(t, 0, 0) != 0 at t=" + std::to_string(t);
  }
  return {};
}

struct StepResult {
  StateVector x;
  StateVector dx;  // f(t + h, window, u_held)
};

/// One classical RK4 step of x' = f(t, x_t, u_held) from time t, which must
/// be covered by `history`. Delayed lookups beyond the last node use the
/// history's extrapolation.
inline StepResult rk4_step(const SystemModel& model, const SolutionHistory& history,
                           const InputVector& u_held, double t, double h) {
  if (!(h > 0.0)) throw ContractError("rk4_step needs h > 0");
  if (t > history.t_last() || t - model.tau < history.t0() - history.tau() - 1e-12)
    throw RangeError("rk4_step: history does not cover [t - tau, t] at t=" +
                     std::to_string(t));

  const StateVector x = history.query(t);
  auto f = [&](double ts, const StateVector& xs) {
    HistoryWindow w(history, ts, xs);
    StateVector d = model.rhs(ts, w, u_held);
    if (!all_finite(d)) throw NumericalBlowup("non-finite dynamics output", ts);
    return d;
  };

  const double half = 0.5 * h;
  const StateVector k1 = f(t, x);
  const StateVector k2 = f(t + half, x + half * k1);
  const StateVector k3 = f(t + half, x + half * k2);
  const StateVector k4 = f(t + h, x + h * k3);
  StateVector xn = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(xn)) throw NumericalBlowup("non-finite state after RK4 step", t + h);
  StateVector dn = f(t + h, xn);
  return {std::move(xn), std::move(dn)};
}

}  // namespace etcsim
