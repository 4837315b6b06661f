#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "etcsim/lyapunov.hpp"
#include "etcsim/systems.hpp"

using namespace etcsim;

namespace {

StateVector scalar(double v) { return StateVector::Constant(1, v); }

SimulationResult run_decaying(double horizon = 200.0) {
  const Example1System sys = example1_build({});
  SimConfig cfg;
  cfg.horizon = horizon;
  return simulate(sys.model, example1_rule(0.03, 0.3, 0.03, -0.2),
                  InitialFunction::constant(1.0, 16.0), cfg);
}

}  // namespace

TEST(EvalCandidate, ZeroHistory) {
  const Example1System sys = example1_build({});
  SolutionHistory hist(0.0, InitialFunction::constant(0.0, 16.0), scalar(0.0));
  for (int i = 1; i <= 100; ++i) hist.append(i * 0.5, scalar(0.0), scalar(0.0));
  EXPECT_EQ(eval_candidate(sys.candidate, 0.0, hist), 0.0);
  EXPECT_EQ(eval_candidate(sys.candidate, 30.0, hist), 0.0);
}

TEST(EvalCandidate, Example1ConstantHistory) {
  const Example1Preset pre;
  const Example1System sys = example1_build(pre);
  // int_{-r}^0 ((-s/r) q1 + ((s+r)/r) q2) ds = r (q1 + q2) / 2
  const double expected = pre.p + pre.r * (pre.q1 + pre.q2) / 2.0;
  SolutionHistory hist(0.0, InitialFunction::constant(1.0, 16.0), scalar(0.0));
  EXPECT_NEAR(eval_candidate(sys.candidate, 0.0, hist), expected, 1e-13);
  for (int i = 1; i <= 3000; ++i) hist.append(i * 0.01, scalar(1.0), scalar(0.0));
  EXPECT_NEAR(eval_candidate(sys.candidate, 7.005, hist), expected, 1e-12);
  EXPECT_NEAR(eval_candidate(sys.candidate, 30.0, hist), expected, 1e-12);
}

TEST(EvalCandidate, Example2ConstantHistory) {
  Example2Preset pre = Example2Preset::default_instance();
  pre.allow_nonpositive_mu = true;
  pre.q = 0.3;
  pre.d = 2.0;
  const Example2System sys = example2_build(pre);
  StateVector e1 = StateVector::Zero(2);
  e1[0] = 1.0;
  SolutionHistory hist(0.0, InitialFunction::constant(e1, pre.d), StateVector::Zero(2));
  // int_{-d}^0 ((d+s)/d q + 1) ds = d (q/2 + 1)
  EXPECT_NEAR(eval_candidate(sys.candidate, 0.0, hist), 1.0 + pre.d * (pre.q / 2 + 1), 1e-13);
}

TEST(EvalCandidate, SimpsonConvergesOnSmoothHistory) {
  const Example1System sys = example1_build({});
  auto build = [&](double h) {
    InitialFunction phi{[](double s) { return scalar(2.0 + std::sin(s)); }, 16.0};
    SolutionHistory hist(0.0, phi, scalar(std::cos(0.0)));
    const int n = static_cast<int>(std::lround(20.0 / h));
    for (int i = 1; i <= n; ++i) {
      const double t = i * h;
      hist.append(t, scalar(2.0 + std::sin(t)), scalar(std::cos(t)));
    }
    return eval_candidate(sys.candidate, 20.0, hist);
  };
  const double ref = build(0.0125);
  const double d1 = std::abs(build(0.1) - ref);
  const double d2 = std::abs(build(0.05) - ref);
  EXPECT_GT(d1 / d2, 12.0);  // fourth order: ~16
}

TEST(EvalCandidate, RangeError) {
  const Example1System sys = example1_build({});
  SolutionHistory hist(0.0, InitialFunction::constant(1.0, 16.0), scalar(0.0));
  EXPECT_THROW(eval_candidate(sys.candidate, 1.0, hist), RangeError);
}

TEST(Sandwich, BuiltinCandidates) {
  const Example1System s1 = example1_build({});
  const auto r1 = check_sandwich(s1.candidate, 1, 1000, 5);
  EXPECT_EQ(r1.probes, 1000u);
  EXPECT_EQ(r1.violations, 0u) << r1.first_failure;

  Example2Preset pre = Example2Preset::default_instance();
  pre.allow_nonpositive_mu = true;
  const Example2System s2 = example2_build(pre);
  const auto r2 = check_sandwich(s2.candidate, 2, 1000, 6);
  EXPECT_EQ(r2.violations, 0u) << r2.first_failure;

  LyapunovCandidate bad = s1.candidate;
  bad.alpha2 = ClassKFunction::linear(0.5 * 0.01);
  EXPECT_GT(check_sandwich(bad, 1, 100, 5).violations, 0u);
}

TEST(DecayEnvelope, Example1Chain) {
  const Example1Preset pre;
  const Example1System sys = example1_build(pre);
  const TriggerRule rule = example1_rule(0.03, 0.3, 0.03, pre.k);
  const DecayEnvelope env = decay_envelope(sys.candidate, rule, InitialFunction::constant(1.0, 16.0));
  EXPECT_NEAR(env.c, 0.032, 1e-12);
  EXPECT_NEAR(env.eta, 0.03, 1e-15);
  EXPECT_NEAR(env.L, pre.p * 0.2, 1e-15);
  EXPECT_NEAR(env.M / pre.p, 231.0, 1e-6);  // 1 + r q2 / p + a |k| / (c - b)
  EXPECT_NEAR(env.Mbar / pre.p, 30.0, 1e-6);
}

TEST(DecayEnvelope, ZeroOffsetHasNoMbar) {
  const Example1System sys = example1_build({});
  const DecayEnvelope env = decay_envelope(sys.candidate, example1_rule(0.03, 0.0, 0.03, -0.2),
                                           InitialFunction::constant(1.0, 16.0));
  EXPECT_EQ(env.Mbar, 0.0);
  EXPECT_NEAR(env.M, 0.01 + 16 * 0.125, 1e-15);
}

TEST(DecayEnvelope, EqualRatesUseXi) {
  const Example1System sys = example1_build({});
  const double c = sys.candidate.mu - 0.03;
  const TriggerRule rule = example1_rule(0.03, 0.3, c, -0.2);
  const InitialFunction phi = InitialFunction::constant(1.0, 16.0);
  const DecayEnvelope env = decay_envelope(sys.candidate, rule, phi);
  const double L = 0.01 * 0.2;
  EXPECT_NEAR(env.eta, c / 2, 1e-15);
  EXPECT_NEAR(env.Mbar, 2 * 0.3 * L / c, 1e-12);
  EXPECT_NEAR(decay_envelope(sys.candidate, rule, phi, c / 4).eta, c / 4, 1e-15);
  EXPECT_THROW(decay_envelope(sys.candidate, rule, phi, c), ContractError);
}

TEST(DecayEnvelope, SigmaAtLeastMuRejected) {
  const Example1System sys = example1_build({});
  EXPECT_THROW(decay_envelope(sys.candidate, example1_rule(0.07, 0.3, 0.03, -0.2),
                              InitialFunction::constant(1.0, 16.0)),
               AssumptionViolation);
}

TEST(DecayEnvelope, ScaleConsistent) {
  const InitialFunction phi = InitialFunction::constant(1.0, 16.0);
  const TriggerRule rule = example1_rule(0.03, 0.3, 0.03, -0.2);
  const DecayEnvelope base = decay_envelope(example1_build({}).candidate, rule, phi);
  for (double lambda : {0.1, 0.5, 1.1}) {
    Example1Preset pre;
    pre.p *= lambda;
    pre.q2 *= lambda;
    pre.q1 = pre.p * 0.1;
    const DecayEnvelope env = decay_envelope(example1_build(pre).candidate, rule, phi);
    EXPECT_NEAR(env.M, lambda * base.M, 1e-12 * base.M * lambda);
    EXPECT_DOUBLE_EQ(env.eta, base.eta);
    EXPECT_NEAR(env.c, base.c, 1e-15);
  }
}

TEST(Audits, ZeroTrajectoryIsClean) {
  const Example1System sys = example1_build({});
  const auto res = simulate(sys.model, example1_rule(0.03, 0.3, 0.03, -0.2),
                            InitialFunction::constant(0.0, 16.0), SimConfig{});
  EXPECT_TRUE(verify_dissipation(sys.candidate, res.trajectory, 0.0).empty());
  const DecayEnvelope env = decay_envelope(sys.candidate, example1_rule(0.03, 0.3, 0.03, -0.2),
                                           InitialFunction::constant(0.0, 16.0));
  EXPECT_TRUE(envelope_check(sys.candidate, env, res.trajectory, 0.0).empty());
}

TEST(Audits, DissipativeWeightsPassAndFalsificationsFail) {
  Example1Preset pre;
  pre.p = 1.0;
  pre.q1 = 0.1;
  pre.q2 = 0.1735;
  const Example1System sys = example1_build(pre);
  const TriggerRule rule = example1_rule(0.01, 0.3, 0.01, pre.k);
  const InitialFunction phi = InitialFunction::constant(1.0, 16.0);
  SimConfig cfg;
  cfg.horizon = 200.0;
  const auto res = simulate(sys.model, rule, phi, cfg);
  double vmax = 0.0;
  for (double v : candidate_along(sys.candidate, res.trajectory)) vmax = std::max(vmax, v);
  EXPECT_TRUE(verify_dissipation(sys.candidate, res.trajectory, 1e-3 * vmax).empty());

  LyapunovCandidate inflated = sys.candidate;
  inflated.mu *= 100.0;
  EXPECT_FALSE(verify_dissipation(inflated, res.trajectory, 1e-3 * vmax).empty());

  const DecayEnvelope env = decay_envelope(sys.candidate, rule, phi);
  EXPECT_TRUE(envelope_check(sys.candidate, env, res.trajectory, 0.05).empty());
  DecayEnvelope fast = env;
  fast.eta *= 10.0;
  EXPECT_FALSE(envelope_check(sys.candidate, fast, res.trajectory, 0.05).empty());
}

// With p / q2 = 0.08 the |x(t)| coefficient of D+V is p k + q2 > 0, so the
// decay inequality with mu = 0.062 cannot hold; near t0 with phi = 1,
// D+V = p k = -0.003 while -mu V = -0.062 (p + r (q1 + q2) / 2).
TEST(Audits, PublishedWeightsViolateDissipation) {
  const Example1System sys = example1_build({});
  const auto res = run_decaying();
  const std::vector<double> v = candidate_along(sys.candidate, res.trajectory);
  const double vmax = *std::max_element(v.begin(), v.end());
  const auto rep = verify_dissipation(sys.candidate, res.trajectory, 1e-3 * vmax);
  ASSERT_FALSE(rep.empty());
  EXPECT_LT(rep.items.front().t, 0.2);
  EXPECT_NEAR(rep.items.front().lhs, -0.003, 0.01);
  EXPECT_LT(rep.items.front().rhs, -0.05);

  const DecayEnvelope env = decay_envelope(sys.candidate, example1_rule(0.03, 0.3, 0.03, -0.2),
                                           InitialFunction::constant(1.0, 16.0));
  EXPECT_TRUE(envelope_check(sys.candidate, env, res.trajectory, 0.05).empty());
}

TEST(MuExample1, PublishedValue) {
  const double p = 0.01;
  EXPECT_NEAR(mu_example1(p, 0.1 * p, p / 0.08, -0.2, 16.0), 0.062, 1e-9);
}

TEST(MuExample1, FirstTermBinds) {
  EXPECT_NEAR(mu_example1(0.1, 0.01, 0.19, -0.2, 16.0), 0.01, 1e-12);
}

TEST(MuExample1, OrderingViolations) {
  try {
    mu_example1(0.01, 0.1, 0.1, -0.2, 16.0);
    FAIL();
  } catch (const AssumptionViolation& e) {
    EXPECT_EQ(e.inequality(), "q2 > q1");
  }
  try {
    mu_example1(0.01, 0.001, 0.3, -0.2, 16.0);
    FAIL();
  } catch (const AssumptionViolation& e) {
    EXPECT_EQ(e.inequality(), "-k > q2");
  }
}

TEST(PowerIteration, AgreesWithSelfAdjointSolver) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 5;
    Eigen::MatrixXd M(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) M(i, j) = n(rng);
    const Eigen::MatrixXd S = M.transpose() * M;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const double oracle = es.eigenvalues().maxCoeff();
    EXPECT_NEAR(largest_eigenvalue_psd(S), oracle, 1e-6 * std::max(1.0, oracle));
  }
}

TEST(MuExample2, ScaledIdentityRejected) {
  const Eigen::MatrixXd A = -2.0 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2, 2);
  const double mu = mu_example2(A, B, K, 0.5, 1.0, 0.1, 0.1);
  EXPECT_NEAR(mu, -(4.0 + 0.25 + 1.0 + 0.1 + 0.1), 1e-9);
  EXPECT_LT(mu, 0.0);
}

TEST(MuExample2, DiagonalRejected) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = -0.5;
  A(1, 1) = -0.3;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const double mu = mu_example2(A, I, Eigen::MatrixXd::Zero(2, 2), 0.4, 2.0, 0.05, 0.05);
  EXPECT_NEAR(mu, -(0.25 + 0.16 + 1.0 + 0.05 + 0.05), 1e-9);
}

TEST(MuExample2, OrthogonalMatrixHasUnitLambda) {
  Eigen::MatrixXd R(2, 2);
  R << 0.0, 1.0, -1.0, 0.0;
  EXPECT_NEAR(largest_eigenvalue_psd(R.transpose() * R), 1.0, 1e-12);
  EXPECT_THROW(mu_example2(R, Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(3, 2), 1, 1, 1, 1),
               ContractError);
}
