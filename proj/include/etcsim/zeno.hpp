#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "etcsim/lyapunov.hpp"

namespace etcsim {

/// g(T) = a e^{-bT} - lambda1 (1 - e^{-bT}) - lambda2 T. Strictly decreasing
/// with g(0) = a.
inline double g_function(double a, double b, double lambda1, double lambda2, double T) {
  const double e = std::exp(-b * T);
  return a * e - lambda1 * (1.0 - e) - lambda2 * T;
}

/// Unique positive root of g. Doubles an upper bracket until g < 0, then
/// bisects until |g| <= tol * a (or the bracket is exhausted in floating
/// point).
inline double solve_min_dwell(double a, double b, double lambda1, double lambda2,
                              double tol = 1e-10) {
  if (!(a > 0.0 && b > 0.0 && lambda1 >= 0.0 && lambda2 > 0.0 && tol > 0.0))
    throw ContractError("solve_min_dwell needs a, b, lambda2, tol > 0 and lambda1 >= 0");
  double hi = 1e-6;
  int doublings = 0;
  while (g_function(a, b, lambda1, lambda2, hi) >= 0.0) {
    if (++doublings > 200) throw NumericalError("min dwell bracket expansion failed");
    hi *= 2.0;
  }
  double lo = 0.0;
  const double target = tol * a;
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    const double g = g_function(a, b, lambda1, lambda2, mid);
    if (std::abs(g) <= target || mid <= lo || mid >= hi) return mid;
    if (g > 0.0)
      lo = mid;
    else
      hi = mid;
  }
}

struct CertificateHypotheses {
  bool sigma_lt_mu = false;
  bool a_positive = false;
  bool b_lt_mu_minus_sigma = false;
  bool alpha1_inverse_lipschitz_at_zero = false;
};

/// Guaranteed lower bound T* on inter-event times.
struct ZenoCertificate {
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
  DecayEnvelope envelope;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> Tstar;
  CertificateHypotheses hypotheses;
  std::string failure;  // empty for a valid certificate

  bool valid() const { return Tstar.has_value() && failure.empty(); }
  double eta() const { return envelope.eta; }
  double M() const { return envelope.M; }
};

/// Builds lambda1 = L1 L2 M e^{eta tau} / eta, lambda2 = L1 L3 M (with
/// eta = b) and solves g(T*) = 0. A candidate whose alpha1^{-1} is not
/// Lipschitz at zero yields a flagged certificate without T*; any other
/// failed hypothesis throws AssumptionViolation.
inline ZenoCertificate build_certificate(const SystemModel& model, const LyapunovCandidate& cand,
                                         const TriggerRule& rule, const InitialFunction& phi,
                                         std::optional<double> L1, double tol = 1e-10) {
  if (!model.lipschitz) throw ContractError("build_certificate needs model Lipschitz data");
  ZenoCertificate cert;
  cert.L2 = model.lipschitz->functional;
  cert.L3 = model.lipschitz->feedback_composite;
  auto& h = cert.hypotheses;
  h.sigma_lt_mu = rule.sigma < cand.mu;
  h.a_positive = rule.a > 0.0;
  h.b_lt_mu_minus_sigma = rule.b < cand.mu - rule.sigma;
  h.alpha1_inverse_lipschitz_at_zero =
      cand.alpha1.inverse_lipschitz_at_zero && L1.has_value() && *L1 > 0.0;

  if (!h.alpha1_inverse_lipschitz_at_zero) {
    cert.failure = "alpha1^-1 not Lipschitz at zero";
    if (h.sigma_lt_mu) cert.envelope = decay_envelope(cand, rule, phi);
    return cert;
  }
  cert.L1 = *L1;
  const std::string params = "sigma=" + std::to_string(rule.sigma) + ", a=" +
                             std::to_string(rule.a) + ", b=" + std::to_string(rule.b) +
                             ", mu=" + std::to_string(cand.mu);
  if (!h.sigma_lt_mu) throw AssumptionViolation("sigma < mu", params);
  if (!h.a_positive) throw AssumptionViolation("a > 0", params);
  if (!h.b_lt_mu_minus_sigma) throw AssumptionViolation("b < mu - sigma", params);

  cert.envelope = decay_envelope(cand, rule, phi);
  const double eta = cert.envelope.eta;  // == b because b < c
  const double M = cert.envelope.M;
  cert.lambda1 = cert.L1 * cert.L2 * M * std::exp(eta * model.tau) / eta;
  cert.lambda2 = cert.L1 * cert.L3 * M;
  cert.Tstar = solve_min_dwell(rule.a, rule.b, *cert.lambda1, *cert.lambda2, tol);
  return cert;
}

}  // namespace etcsim
