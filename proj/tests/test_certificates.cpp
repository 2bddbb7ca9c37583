#include "etcons/certificates.hpp"
#include "etcons/demo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace etcons;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Reference values from a dense-grid SciPy evaluation of the same chain of
// formulas on the six-agent example (root agent 1).
struct SixAgentOracle {
  static constexpr double lambda_hat = 0.95;
  static constexpr double beta_hat = 2.672192574529783;
  static constexpr double gamma_l = 44.09270552256642;
  static constexpr double gamma = 53.09270552256642;
  static constexpr double big_gamma = 210.52614377956064;
  static constexpr double eta0 = 5.830951894845301;
  static constexpr double l_norm = 3.454993958848147;
  static constexpr double h1 = -3480.099915282277;
  static constexpr double h2 = 3642.1190602570955;
  static constexpr double tau = 0.0001156001506282314;
  static constexpr double d = 0.0010399446117680697;
};

// Γ recomputed straight from the adjacency rows.
double xi_gain_oracle(const std::vector<std::vector<int>>& adj, double beta, double gamma) {
  int max_deg = 0;
  double sum_sq = 0.0;
  for (const auto& row : adj) {
    int deg = 0;
    for (int a : row) deg += a;
    max_deg = std::max(max_deg, deg);
    sum_sq += deg * deg;
  }
  return max_deg * std::sqrt(static_cast<double>(adj.size())) * beta + gamma * std::sqrt(sum_sq);
}

Scenario pair_scenario() {
  Scenario s;
  s.graph = build_graph({{0, 1}, {1, 0}});
  s.x0.resize(2, 1);
  s.x0 << 1.0, -1.0;
  s.trigger.beta = 1.0;
  s.trigger.lambda = 0.1;
  s.trigger.delta_bar = 1.0;
  s.trigger.gamma_d = 1.0;
  s.dropout.rho = 2;
  return s;
}

}  // namespace

TEST(GammaLoss, TermByTermOracle) {
  double sum = 0.0;
  for (int mu = 1; mu <= 4; ++mu) sum += std::exp(4 * 0.4 * 1.5) * std::exp(-mu * 0.4 * 0.0);
  EXPECT_NEAR(gamma_loss(1.0, 0.4, 4, 1.5), sum, 1e-12);
  EXPECT_NEAR(gamma_loss(1.0, 0.4, 4, 1.5), 4.0 * std::exp(2.4), 1e-12);
  EXPECT_NEAR(gamma_loss(1.0, 0.4, 4, 1.5), 44.09, 5e-3);
}

TEST(GammaLoss, SingleTermAndLinearity) {
  EXPECT_DOUBLE_EQ(gamma_loss(1.0, 0.37, 1, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(gamma_loss(2.0, 0.4, 4, 1.5), 2.0 * gamma_loss(1.0, 0.4, 4, 1.5));
}

TEST(GammaLoss, IncreasesWithRhoAndDeltaBar) {
  double prev = 0.0;
  for (int rho = 2; rho <= 10; ++rho) {
    const double g = gamma_loss(1.0, 0.4, rho, 1.5);
    EXPECT_GT(g, prev);
    prev = g;
  }
  EXPECT_LT(gamma_loss(1.0, 0.4, 4, 1.0), gamma_loss(1.0, 0.4, 4, 2.0));
}

TEST(XiGain, Examples) {
  const auto chain = build_graph({{0, 0}, {1, 0}});
  EXPECT_NEAR(xi_gain(chain, 1.3, 5.0), std::sqrt(2.0) * 1.3 + 5.0, 1e-14);
  EXPECT_EQ(xi_gain(build_graph({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}), 1.0, 7.0), 0.0);
  const auto g = demo_scenario().graph;
  const double gamma = gamma_loss(1.0, 0.4, 4, 1.5) + 9.0;
  EXPECT_NEAR(xi_gain(g, 1.0, gamma), xi_gain_oracle(g.adjacency_rows(), 1.0, gamma), 1e-12);
  EXPECT_NEAR(xi_gain(g, 1.0, gamma), SixAgentOracle::big_gamma, 1e-9);
}

TEST(HCoefficients, CancellationCases) {
  const auto zero = h_coefficients(3.0, 2.0, 1.0, 0.5, 0.0, 0.0, 2.0, 1.0, 5.0);
  EXPECT_EQ(zero.first, 0.0);
  EXPECT_DOUBLE_EQ(zero.second, 2.0 * (1.0 + 5.0));
  const double big_gamma = 7.0;
  const auto cancel = h_coefficients(3.0, 2.0, 1.0, 0.5, big_gamma / 0.5, big_gamma, 2.0, 1.0, 5.0);
  EXPECT_NEAR(cancel.first, 0.0, 1e-12);
  EXPECT_THROW(h_coefficients(3.0, 2.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0), InvalidSpectralGap);
}

TEST(KCoefficients, CancellationCases) {
  const auto zero = k_coefficients(3.0, 2.0, 1.0, 0.5, 4.0, 0.0, 4.0, 2.0, 6.0);
  EXPECT_DOUBLE_EQ(zero.first, 3.0 * 2.0 * 4.0);
  EXPECT_EQ(zero.second, 0.0);
  const double ratio = 1.5 * 2.0 * 6.0 / 0.5;
  const auto cancel = k_coefficients(3.0, 2.0, 1.0, 0.5, ratio, 1.5, 4.0, 2.0, 6.0);
  EXPECT_NEAR(cancel.first, 0.0, 1e-12);
  EXPECT_THROW(k_coefficients(1.0, 1.0, 0.4, 0.5, 1.0, 1.0, 2.0, 1.0, 1.0), InvalidSpectralGap);
}

TEST(InterEventTime, StationaryValueWithUnitArgument) {
  const double lambda = 0.4;
  const double lambda_hat = 0.9;
  const double beta = 1.7;
  const Coefficients c{0.0, lambda * beta};
  EXPECT_NEAR(min_inter_event_time(c, beta, lambda, lambda_hat, inf), std::log(2.0) / lambda_hat, 1e-14);
  EXPECT_NEAR(certified_inter_event_time(c, beta, lambda, lambda_hat), std::log(2.0) / lambda_hat, 1e-14);
}

TEST(InterEventTime, VanishesWithBeta) {
  const Coefficients c{5.0, 10.0};
  EXPECT_NEAR(certified_inter_event_time(c, 1e-12, 0.4, 0.9), 0.0, 1e-10);
  double prev = 0.0;
  for (double beta : {0.01, 0.1, 1.0, 10.0}) {
    const double t = certified_inter_event_time(c, beta, 0.4, 0.9);
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(InterEventTime, PositiveH1IsTightestAtZero) {
  const Coefficients c{50.0, 10.0};
  const double t0 = min_inter_event_time(c, 1.0, 0.4, 0.9, 0.0);
  const double t5 = min_inter_event_time(c, 1.0, 0.4, 0.9, 5.0);
  const double tinf = min_inter_event_time(c, 1.0, 0.4, 0.9, inf);
  EXPECT_LT(t0, t5);
  EXPECT_LT(t5, tinf);
  EXPECT_DOUBLE_EQ(certified_inter_event_time(c, 1.0, 0.4, 0.9), t0);
}

TEST(AdmissibleDelay, InvertedFormulaGivesUnitDelay) {
  const double lambda = 0.4;
  const double lambda_hat = 0.9;
  const Coefficients c{0.0, 12.0};
  const double gamma_d = c.second / lambda * (std::exp(lambda_hat) - 1.0);
  EXPECT_NEAR(max_admissible_delay(c, gamma_d, lambda, lambda_hat, inf), 1.0, 1e-13);
  EXPECT_NEAR(certified_admissible_delay(c, gamma_d, lambda, lambda_hat), 1.0, 1e-13);
  EXPECT_NEAR(certified_admissible_delay(c, 1e-14, lambda, lambda_hat), 0.0, 1e-12);
}

TEST(LogBound, DegenerateDenominator) {
  EXPECT_THROW(certified_inter_event_time({-1.0, 0.0}, 1.0, 0.4, 0.9), DegenerateBound);
  EXPECT_THROW(certified_admissible_delay({0.0, -3.0}, 1.0, 0.4, 0.9), DegenerateBound);
}

TEST(GrowthInequality, CertifiedWindowIsConservative) {
  const double lambda = 0.4;
  const double lambda_hat = 0.9;
  const double horizon = 125.0;
  for (const Coefficients c : {Coefficients{-30.0, 40.0}, Coefficients{0.0, 3.0}, Coefficients{25.0, 8.0}}) {
    const double s = certified_inter_event_time(c, 1.0, lambda, lambda_hat);
    EXPECT_EQ(growth_violations(c, 1.0, lambda, lambda_hat, s, horizon), 0u);
    // Longest safe window at the tightest start time, by bisection.
    const double t_bind = c.first > 0.0 ? 0.0 : horizon;
    double lo = s;
    double hi = 100.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (growth_margin(c, 1.0, lambda, lambda_hat, mid, t_bind) >= 0.0 ? lo : hi) = mid;
    }
    EXPECT_LE(s, lo);
    EXPECT_GT(growth_violations(c, 1.0, lambda, lambda_hat, 1.01 * hi, horizon), 0u);
  }
}

TEST(Certify, SixAgentMatchesOracle) {
  const auto r = certify(demo_scenario());
  using O = SixAgentOracle;
  EXPECT_EQ(r.root, 0u);
  EXPECT_NEAR(r.lambda_hat, O::lambda_hat, 1e-9);
  EXPECT_NEAR(r.beta_hat / O::beta_hat, 1.0, 1e-6);
  EXPECT_NEAR(r.gamma_l, O::gamma_l, 1e-10);
  EXPECT_DOUBLE_EQ(r.gamma, r.gamma_l + 9.0);
  EXPECT_NEAR(r.gamma, O::gamma, 1e-10);
  EXPECT_NEAR(r.big_gamma, O::big_gamma, 1e-9);
  EXPECT_NEAR(r.eta0, O::eta0, 1e-12);
  EXPECT_NEAR(r.l_norm, O::l_norm, 1e-9);
  EXPECT_NEAR(r.h1 / O::h1, 1.0, 1e-5);
  EXPECT_NEAR(r.h2 / O::h2, 1.0, 1e-5);
  EXPECT_NEAR(r.tau / O::tau, 1.0, 1e-5);
  EXPECT_NEAR(r.d_max / O::d, 1.0, 1e-5);
  EXPECT_GT(r.tau, 0.0);
  EXPECT_GT(r.d_max, 0.0);
  EXPECT_EQ(r.inequality_violations, 0u);
  EXPECT_LE(r.decay_residual, 1.0);
  EXPECT_FALSE(r.k1.has_value());
  ASSERT_EQ(r.tau_per_agent.size(), 6u);
  for (double t : r.tau_per_agent) EXPECT_GE(t, r.tau);
}

TEST(Certify, FourCycleAverageModeMatchesOracle) {
  Scenario s;
  s.graph = build_graph({{0, 1, 0, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}, {1, 0, 1, 0}});
  s.x0.resize(4, 1);
  s.x0 << 0.7, -1.3, 2.4, 0.1;
  s.trigger.beta = 1.0;
  s.trigger.lambda = 0.4;
  s.trigger.delta_bar = 1.5;
  s.trigger.gamma_d = 1.0;
  s.dropout.rho = 3;
  s.mode = ConsensusMode::average;
  s.consistency = Consistency::consistent;
  const auto r = certify(s);
  ASSERT_TRUE(r.k1 && r.k2 && r.tau_avg && r.d_avg && r.lprime_norm);
  EXPECT_NEAR(*r.lprime_norm, 6.090949751109549, 1e-9);
  EXPECT_NEAR(r.lambda_hat, 1.9, 1e-9);
  EXPECT_NEAR(r.beta_hat / 1.1706791008350272, 1.0, 1e-6);
  EXPECT_NEAR(*r.k1 / -610.8179760706834, 1.0, 1e-6);
  EXPECT_NEAR(*r.k2 / 698.1758587437716, 1.0, 1e-6);
  EXPECT_NEAR(*r.tau_avg / 0.0003014513158050004, 1.0, 1e-6);
  EXPECT_NEAR(*r.d_avg / 0.0003014513158050004, 1.0, 1e-6);
  EXPECT_EQ(r.inequality_violations, 0u);
}

TEST(Certify, UndirectedPairAllFieldsPositive) {
  const auto r = certify(pair_scenario());
  for (double v : {r.beta_hat, r.lambda_hat, r.gamma_l, r.gamma, r.big_gamma, r.h2, r.tau, r.d_max, r.eta0, r.l_norm})
    EXPECT_TRUE(std::isfinite(v) && v > 0.0) << v;
  EXPECT_EQ(r.inequality_violations, 0u);
  EXPECT_LT(r.lambda, r.lambda_hat);
}

TEST(Certify, LambdaAboveDecayRateRejected) {
  Scenario s = pair_scenario();
  s.trigger.lambda = 3.0;
  EXPECT_THROW(certify(s), AssumptionViolated);
}

TEST(Certify, NoSpanningTreeRejected) {
  Scenario s = pair_scenario();
  s.graph = build_graph({{0, 0}, {0, 0}});
  EXPECT_THROW(certify(s), AssumptionViolated);
}

TEST(Certify, UniformPerAgentThresholdsReduceToScalarCase) {
  Scenario a = demo_scenario();
  Scenario b = a;
  b.trigger.per_agent.assign(6, AgentThreshold{a.trigger.beta, a.trigger.lambda});
  const auto ra = certify(a);
  const auto rb = certify(b);
  EXPECT_DOUBLE_EQ(ra.tau, rb.tau);
  EXPECT_DOUBLE_EQ(ra.d_max, rb.d_max);
  EXPECT_DOUBLE_EQ(ra.big_gamma, rb.big_gamma);
}

TEST(Certify, HeterogeneousThresholdsUseWorstCase) {
  Scenario s = demo_scenario();
  s.trigger.per_agent = {{1.0, 0.4}, {2.0, 0.4}, {1.0, 0.3}, {1.0, 0.4}, {0.5, 0.5}, {1.0, 0.4}};
  const auto r = certify(s);
  EXPECT_DOUBLE_EQ(r.beta, 2.0);
  EXPECT_DOUBLE_EQ(r.lambda, 0.3);
  EXPECT_NEAR(r.gamma_l, gamma_loss(2.0, 0.3, 4, 1.5), 1e-12);
}

TEST(Certify, BoundsShrinkWithLossBudget) {
  Scenario s = demo_scenario();
  double prev_tau = inf;
  for (int rho : {2, 3, 4, 5}) {
    s.dropout.rho = rho;
    const auto r = certify(s);
    EXPECT_LT(r.tau, prev_tau);
    prev_tau = r.tau;
  }
}
