#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "etcsim/closed_loop.hpp"

namespace etcsim {

/// V(t, x_t) = V1(t, x(t)) + V2(t, x_t), with the functional part given as an
/// integrand over s in [-tau, 0]:  V2 = int_{-tau}^0 w(s, x(t + s)) ds.
struct LyapunovCandidate {
  std::function<double(double t, const StateVector& x)> V1;
  std::function<double(double s, const StateVector& x)> V2_integrand;
  double tau = 0.0;
  ClassKFunction alpha1;
  ClassKFunction alpha2;
  ClassKFunction alpha3;
  ClassKFunction chi;
  double mu = 0.0;
};

namespace detail {

inline double simpson(double fa, double fm, double fb, double width) {
  return width / 6.0 * (fa + 4.0 * fm + fb);
}

}  // namespace detail

/// V2 of an arbitrary window s -> x(t + s), composite Simpson with `panels`
/// uniform panels.
inline double eval_functional(const LyapunovCandidate& cand,
                              const std::function<StateVector(double)>& window,
                              int panels = 400) {
  const double w = cand.tau / panels;
  double total = 0.0;
  double s_a = -cand.tau;
  double f_a = cand.V2_integrand(s_a, window(s_a));
  for (int i = 0; i < panels; ++i) {
    const double s_b = -cand.tau + (i + 1) * w;
    const double s_m = 0.5 * (s_a + s_b);
    const double f_b = cand.V2_integrand(s_b, window(s_b));
    total += detail::simpson(f_a, cand.V2_integrand(s_m, window(s_m)), f_b, s_b - s_a);
    s_a = s_b;
    f_a = f_b;
  }
  return total;
}

/// V1(t, x(t)) plus composite Simpson over the history mesh on [t - tau, t].
/// Panels follow the node spacing; midpoints come from the Hermite segments.
/// The part before t0 is split into panels of the first step width.
inline double eval_candidate(const LyapunovCandidate& cand, double t, const SolutionHistory& hist) {
  const double lo = t - cand.tau;
  if (lo < hist.t0() - hist.tau() - 1e-12 || t > hist.t_last()) {
    throw RangeError("eval_candidate: history does not cover " + detail::window_text(lo, t));
  }
  const auto& nodes = hist.nodes();
  auto w = [&](double time, const StateVector& x) { return cand.V2_integrand(time - t, x); };

  double total = 0.0;
  if (lo < hist.t0()) {
    const double hi = std::min(t, hist.t0());
    const double h_ref = nodes.size() > 1 ? nodes[1].t - nodes[0].t : cand.tau / 1000.0;
    const int panels = std::max(2, static_cast<int>(std::ceil((hi - lo) / h_ref - 1e-9)));
    const double pw = (hi - lo) / panels;
    const auto& phi = hist.initial();
    const double t0 = hist.t0();
    for (int i = 0; i < panels; ++i) {
      const double a = lo + i * pw;
      const double b = (i + 1 == panels) ? hi : a + pw;
      const double m = 0.5 * (a + b);
      total += detail::simpson(w(a, phi(a - t0)), w(m, phi(m - t0)), w(b, phi(b - t0)), b - a);
    }
  }
  const double start = std::max(lo, hist.t0());
  if (nodes.size() > 1 && t > start) {
    std::size_t k = std::min(hist.segment_index(start), nodes.size() - 2);
    for (; k + 1 < nodes.size(); ++k) {
      const double a = std::max(nodes[k].t, start);
      const double b = std::min(nodes[k + 1].t, t);
      if (b <= a) {
        if (nodes[k].t >= t) break;
        continue;
      }
      const double m = 0.5 * (a + b);
      total += detail::simpson(w(a, hist.segment_eval(k, a)), w(m, hist.segment_eval(k, m)),
                               w(b, hist.segment_eval(k, b)), b - a);
      if (nodes[k + 1].t >= t) break;
    }
  }
  return cand.V1(t, hist.query(t)) + total;
}

struct SandwichReport {
  std::size_t probes = 0;
  std::size_t violations = 0;
  std::string first_failure;
};

/// Randomized probes of alpha1(|x|) <= V1 <= alpha2(|x|) and
/// 0 <= V2(phi) <= alpha3(|phi|_tau). Windows are offset sinusoids.
inline SandwichReport check_sandwich(const LyapunovCandidate& cand, Eigen::Index n,
                                     std::size_t probes = 1000, std::uint64_t seed = 1,
                                     double scale = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kRel = 1e-12;
  SandwichReport rep;
  auto fail = [&](const std::string& what) {
    ++rep.violations;
    if (rep.first_failure.empty()) rep.first_failure = what;
  };
  for (std::size_t i = 0; i < probes; ++i) {
    ++rep.probes;
    StateVector x(n);
    for (Eigen::Index j = 0; j < n; ++j) x[j] = normal(rng);
    const double t = 10.0 * unit(rng);
    const double v1 = cand.V1(t, x);
    const double r = x.norm();
    if (v1 < cand.alpha1(r) * (1 - kRel)) fail("V1 < alpha1(|x|)");
    if (v1 > cand.alpha2(r) * (1 + kRel)) fail("V1 > alpha2(|x|)");

    StateVector offset(n), amp(n), phase(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      offset[j] = normal(rng);
      amp[j] = normal(rng);
      phase[j] = 6.283185307179586 * unit(rng);
    }
    const double omega = 4.0 * unit(rng) / cand.tau;
    auto window = [&](double s) -> StateVector {
      StateVector v(n);
      for (Eigen::Index j = 0; j < n; ++j) v[j] = offset[j] + amp[j] * std::sin(omega * s + phase[j]);
      return v;
    };
    constexpr int kPanels = 400;
    const double v2 = eval_functional(cand, window, kPanels);
    double sup = 0.0;
    for (int k = 0; k <= 2 * kPanels; ++k)
      sup = std::max(sup, window(-cand.tau + cand.tau * k / (2.0 * kPanels)).norm());
    if (v2 < 0.0) fail("V2 < 0");
    if (v2 > cand.alpha3(sup) * (1 + kRel)) fail("V2 > alpha3(|phi|_tau)");
  }
  return rep;
}

struct DecayEnvelope {
  double eta = 0.0;
  double M = 0.0;
  double c = 0.0;
  double Mbar = 0.0;
  double L = 0.0;  // Lipschitz constant of chi on [0, a]
};

/// Exponential bound v(t) <= M exp(-eta (t - t0)) for the closed loop.
/// When b == c the rate is the free parameter xi in (0, c), default c / 2.
inline DecayEnvelope decay_envelope(const LyapunovCandidate& cand, const TriggerRule& rule,
                                    const InitialFunction& phi,
                                    std::optional<double> xi = std::nullopt) {
  if (!(rule.sigma < cand.mu))
    throw AssumptionViolation("0 <= sigma < mu", "sigma=" + std::to_string(rule.sigma) +
                                                     ", mu=" + std::to_string(cand.mu));
  DecayEnvelope env;
  env.c = cand.mu - rule.sigma;
  env.L = rule.a > 0.0 ? cand.chi.lipschitz_on(rule.a) : 0.0;
  const bool b_equals_c = std::abs(rule.b - env.c) <= 1e-12 * std::max(rule.b, env.c);
  if (b_equals_c) {
    const double x = xi.value_or(0.5 * env.c);
    if (!(x > 0.0 && x < env.c)) throw ContractError("xi must lie in (0, c)");
    env.eta = x;
    env.Mbar = rule.a * env.L / std::abs(env.c - x);
  } else {
    env.eta = std::min(rule.b, env.c);
    env.Mbar = rule.a * env.L / std::abs(env.c - rule.b);
  }
  env.M = cand.alpha2(phi(0.0).norm()) + cand.alpha3(phi.sup_norm()) + env.Mbar;
  return env;
}

struct Violation {
  std::string audit;
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ViolationReport {
  std::vector<Violation> items;
  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

/// v(t) along the recorded samples.
inline std::vector<double> candidate_along(const LyapunovCandidate& cand, const Trajectory& traj) {
  std::vector<double> v;
  v.reserve(traj.samples.size());
  for (const auto& s : traj.samples) v.push_back(eval_candidate(cand, s.t, traj.history));
  return v;
}

/// Forward-difference probe of D+v <= -mu v + chi(|eps|). Sample pairs within
/// one integration step of an event are skipped, since v' jumps there.
inline ViolationReport verify_dissipation(const LyapunovCandidate& cand, const Trajectory& traj,
                                          double margin_tol) {
  ViolationReport rep;
  const auto& s = traj.samples;
  if (s.size() < 2) return rep;
  const std::vector<double> v = candidate_along(cand, traj);
  std::vector<double> events;
  for (const auto& smp : s)
    if (smp.is_event) events.push_back(smp.t);
  auto near_event = [&](double a, double b) {
    auto it = std::lower_bound(events.begin(), events.end(), a - traj.step);
    return it != events.end() && *it <= b + traj.step;
  };
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double dt = s[k + 1].t - s[k].t;
    if (!(dt > 0.0) || near_event(s[k].t, s[k + 1].t)) continue;
    const double lhs = (v[k + 1] - v[k]) / dt;
    const double rhs = -cand.mu * v[k] + cand.chi(s[k].err_norm) + margin_tol;
    if (lhs > rhs) rep.items.push_back({"dissipation", s[k].t, lhs, rhs});
  }
  return rep;
}

/// Flags samples above M exp(-eta (t - t0)) in v, or above
/// alpha1^{-1}(M exp(-eta (t - t0))) in |x|, each with relative slack `tol`.
inline ViolationReport envelope_check(const LyapunovCandidate& cand, const DecayEnvelope& env,
                                      const Trajectory& traj, double tol) {
  if (!cand.alpha1.inverse) throw ContractError("envelope_check needs alpha1 inverse");
  ViolationReport rep;
  const double t0 = traj.history.t0();
  for (const auto& smp : traj.samples) {
    const double bound = env.M * std::exp(-env.eta * (smp.t - t0));
    const double v = eval_candidate(cand, smp.t, traj.history);
    if (v > bound * (1.0 + tol)) rep.items.push_back({"envelope-v", smp.t, v, bound});
    const double xb = cand.alpha1.inverse(bound);
    if (smp.x.norm() > xb * (1.0 + tol))
      rep.items.push_back({"envelope-x", smp.t, smp.x.norm(), xb});
  }
  return rep;
}

/// mu for the scalar delay example: min{-(k + q2), (q2 - q1) / (r q2)},
/// valid when -k > q2 > q1 > 0.
inline double mu_example1(double p, double q1, double q2, double k, double r) {
  if (!(p > 0.0)) throw AssumptionViolation("p > 0", "p=" + std::to_string(p));
  if (!(r > 0.0)) throw AssumptionViolation("r > 0", "r=" + std::to_string(r));
  if (!(q1 > 0.0)) throw AssumptionViolation("q1 > 0", "q1=" + std::to_string(q1));
  if (!(q2 > q1))
    throw AssumptionViolation("q2 > q1", "q1=" + std::to_string(q1) + ", q2=" + std::to_string(q2));
  if (!(-k > q2))
    throw AssumptionViolation("-k > q2", "k=" + std::to_string(k) + ", q2=" + std::to_string(q2));
  return std::min(-(k + q2), (q2 - q1) / (r * q2));
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopping when the Rayleigh quotient changes by less than
/// `tol` (relative to max(1, |rho|)).
inline double largest_eigenvalue_psd(const Eigen::MatrixXd& S, double tol = 1e-10,
                                     int max_iterations = 200000) {
  if (S.rows() != S.cols() || S.rows() == 0) throw ContractError("power iteration needs a square matrix");
  Eigen::VectorXd v(S.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.3 * std::sin(1.7 * (i + 1.0));
  v.normalize();
  double rho = v.dot(S * v);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd w = S * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    const double next = v.dot(S * v);
    if (std::abs(next - rho) <= tol * std::max(1.0, std::abs(next))) return next;
    rho = next;
  }
  throw NumericalError("power iteration did not converge");
}

/// Largest singular value.
inline double spectral_norm(const Eigen::MatrixXd& M) {
  return std::sqrt(largest_eigenvalue_psd(M.transpose() * M));
}

/// mu for the nonlinear delay example:
/// min{-(Lambda + L^2 + 1 + q + eps2), q / (d (q + 1))}, Lambda the largest
/// eigenvalue of (A + BK)^T (A + BK). The result may be <= 0; callers reject
/// such configurations.
inline double mu_example2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& K, double L, double d, double q, double eps2) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || K.cols() != A.rows() || K.rows() != B.cols())
    throw ContractError("mu_example2: inconsistent matrix dimensions");
  if (!(L > 0.0 && d > 0.0 && q > 0.0 && eps2 > 0.0))
    throw ContractError("mu_example2 needs L, d, q, eps2 > 0");
  const Eigen::MatrixXd Acl = A + B * K;
  const double lambda = largest_eigenvalue_psd(Acl.transpose() * Acl);
  return std::min(-(lambda + L * L + 1.0 + q + eps2), q / (d * (q + 1.0)));
}

}  // namespace etcsim
