#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "etcsim/lyapunov.hpp"

namespace etcsim {

/// Scalar delay system x' = B x(t - r) + u with u = k x(t_i) and the
/// functional V = p|x| + int_{-r}^0 |x(t+s)| ((-s/r) q1 + ((s+r)/r) q2) ds.
struct Example1Preset {
  double B = -0.1;
  double r = 16.0;
  double k = -0.2;
  double p = 0.01;
  double q1 = 0.001;  // must equal p |B|
  double q2 = 0.125;  // p / q2 = 0.08

  void validate() const {
    if (!(p > 0.0)) throw AssumptionViolation("p > 0", "p=" + std::to_string(p));
    if (!(r > 0.0)) throw AssumptionViolation("r > 0", "r=" + std::to_string(r));
    if (std::abs(q1 - p * std::abs(B)) > 1e-12 * std::max(1.0, q1))
      throw AssumptionViolation("q1 = p|B|", "q1=" + std::to_string(q1) +
                                                 ", p|B|=" + std::to_string(p * std::abs(B)));
    mu_example1(p, q1, q2, k, r);
  }
};

struct Example1System {
  SystemModel model;
  LyapunovCandidate candidate;
  double L1 = 0.0;  // Lipschitz constant of alpha1^{-1}
  double L2 = 0.0;
  double L3 = 0.0;
};

inline Example1System example1_build(const Example1Preset& pre) {
  pre.validate();
  Example1System sys;
  const double B = pre.B;
  const double r = pre.r;
  const double k = pre.k;
  sys.model.n = 1;
  sys.model.m = 1;
  sys.model.tau = r;
  sys.model.dynamics = [B, r](double, const HistoryWindow& w, const InputVector& u) {
    StateVector d = B * w.at(-r);
    d += u;
    return d;
  };
  sys.model.feedback = [k](const StateVector& x) -> InputVector { return k * x; };
  sys.L1 = 1.0 / pre.p;
  sys.L2 = std::abs(B);
  sys.L3 = std::abs(k);
  sys.model.lipschitz = LipschitzData{sys.L2, sys.L3};

  auto& c = sys.candidate;
  const double p = pre.p, q1 = pre.q1, q2 = pre.q2;
  c.V1 = [p](double, const StateVector& x) { return p * x.norm(); };
  c.V2_integrand = [r, q1, q2](double s, const StateVector& x) {
    return x.norm() * ((-s / r) * q1 + ((s + r) / r) * q2);
  };
  c.tau = r;
  c.alpha1 = ClassKFunction::linear(p);
  c.alpha2 = ClassKFunction::linear(p);
  c.alpha3 = ClassKFunction::linear(r * q2);
  c.chi = ClassKFunction::linear(p * std::abs(k));
  c.mu = mu_example1(p, q1, q2, k, r);
  return sys;
}

/// |eps| = (sigma/|k|) |x| + a e^{-b(t - t0)}: the generic rule with the
/// common factor p|k| divided out (chi = id, alpha1 = id / |k|).
inline TriggerRule example1_rule(double sigma, double a, double b, double k, double t0 = 0.0) {
  if (!(k != 0.0)) throw ContractError("example1_rule needs k != 0");
  TriggerRule rule{sigma, a, b, ClassKFunction::linear(1.0 / std::abs(k)),
                   ClassKFunction::linear(1.0), t0};
  rule.validate();
  return rule;
}

/// x' = A x + g(x(t - d)) + B u with u = K x(t_i).
struct Example2Preset {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd K;
  std::function<StateVector(const StateVector&)> g;
  double L = 0.1;  // global Lipschitz constant of g
  double d = 1.0;
  double q = 0.1;
  double eps2 = 0.1;
  bool allow_nonpositive_mu = false;

  /// n = 2, A + BK = diag(-1.5, -1.2), g(x) = L sin(x) componentwise.
  static Example2Preset default_instance() {
    Example2Preset pre;
    pre.A = Eigen::MatrixXd(2, 2);
    pre.A << 0.5, 0.0, 0.0, -0.2;
    pre.B = Eigen::MatrixXd::Identity(2, 2);
    pre.K = Eigen::MatrixXd(2, 2);
    pre.K << -2.0, 0.0, 0.0, -1.0;
    pre.g = sine_nonlinearity(pre.L);
    return pre;
  }

  static std::function<StateVector(const StateVector&)> sine_nonlinearity(double L) {
    return [L](const StateVector& x) -> StateVector { return L * x.array().sin().matrix(); };
  }

  /// ||g(x) - g(y)|| <= L ||x - y|| on `probes` random pairs.
  bool lipschitz_holds(std::size_t probes = 1000, std::uint64_t seed = 7) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 2.0);
    const Eigen::Index n = A.rows();
    for (std::size_t i = 0; i < probes; ++i) {
      StateVector x(n), y(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        x[j] = normal(rng);
        y[j] = x[j] + 0.1 * normal(rng);
      }
      if ((g(x) - g(y)).norm() > L * (x - y).norm() * (1.0 + 1e-12)) return false;
    }
    return true;
  }

  void validate() const {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || K.cols() != n || K.rows() != B.cols())
      throw ContractError("example 2: inconsistent matrix dimensions");
    if (!g) throw ContractError("example 2: nonlinearity g missing");
    if (!(L > 0.0 && d > 0.0 && q > 0.0 && eps2 > 0.0))
      throw ContractError("example 2 needs L, d, q, eps2 > 0");
    if (g(StateVector::Zero(n)).norm() != 0.0) throw ContractError("example 2 needs g(0) = 0");
    if (!lipschitz_holds()) throw AssumptionViolation("|g(x)-g(y)| <= L|x-y|", "probe failed");
  }
};

struct Example2System {
  SystemModel model;
  LyapunovCandidate candidate;
  double mu = 0.0;
  double bk_norm = 0.0;
  /// (sigma, a, b, t0) -> rule whose zero set is
  /// |eps|^2 = (sigma eps2 / |BK|^2) |x|^2 + a^2 e^{-2b(t - t0)}.
  std::function<TriggerRule(double, double, double, double)> rule_factory;
};

inline Example2System example2_build(const Example2Preset& pre) {
  pre.validate();
  Example2System sys;
  sys.mu = mu_example2(pre.A, pre.B, pre.K, pre.L, pre.d, pre.q, pre.eps2);
  if (!(sys.mu > 0.0) && !pre.allow_nonpositive_mu)
    throw ConfigurationRejected("example 2 rejected: mu = " + std::to_string(sys.mu) +
                                " <= 0 (requires Lambda + L^2 + 1 + q + eps2 < 0)");
  const Eigen::MatrixXd BK = pre.B * pre.K;
  sys.bk_norm = spectral_norm(BK);
  if (!(sys.bk_norm > 0.0)) throw ConfigurationRejected("example 2 rejected: BK = 0");

  const Eigen::MatrixXd A = pre.A;
  const Eigen::MatrixXd B = pre.B;
  const Eigen::MatrixXd K = pre.K;
  const double d = pre.d;
  const double q = pre.q;
  auto g = pre.g;
  auto& m = sys.model;
  m.n = A.rows();
  m.m = B.cols();
  m.tau = d;
  m.dynamics = [A, B, g, d](double, const HistoryWindow& w, const InputVector& u) -> StateVector {
    return A * w.now() + g(w.at(-d)) + B * u;
  };
  m.feedback = [K](const StateVector& x) -> InputVector { return K * x; };
  m.lipschitz = LipschitzData{spectral_norm(A) + pre.L, sys.bk_norm};

  auto& c = sys.candidate;
  c.V1 = [](double, const StateVector& x) { return x.squaredNorm(); };
  c.V2_integrand = [d, q](double s, const StateVector& x) {
    return x.squaredNorm() * ((d + s) / d * q + 1.0);
  };
  c.tau = d;
  c.alpha1 = ClassKFunction::quadratic(1.0);
  c.alpha2 = ClassKFunction::quadratic(1.0);
  c.alpha3 = ClassKFunction::quadratic(d * (0.5 * q + 1.0));
  const double chi_gain = sys.bk_norm * sys.bk_norm / pre.eps2;
  c.chi = ClassKFunction::quadratic(chi_gain);
  c.mu = sys.mu;

  sys.rule_factory = [chi_gain](double sigma, double a, double b, double t0) {
    TriggerRule rule{sigma, a, b, ClassKFunction::quadratic(1.0),
                     ClassKFunction::quadratic(chi_gain), t0};
    rule.validate();
    return rule;
  };
  return sys;
}

}  // namespace etcsim
