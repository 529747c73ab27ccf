#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <gtest/gtest.h>

#include "nesht/problems.hpp"
#include "nesht/theory.hpp"

namespace nesht {
namespace {

TEST(Smoothness, PinnedValues) {
  EXPECT_DOUBLE_EQ(smoothness_constant(1.0, 1, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(smoothness_constant(1.0, 9, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(smoothness_constant(2.0, 3, 0.5), 32.0);
}

TEST(VarianceBound, PinnedValues) {
  // C*d/(N*sigma^2) + d*B^2/(n*sigma^2)
  EXPECT_DOUBLE_EQ(variance_bound(1.0, 1.0, 2, 1.0, 1, 1), 4.0);
  EXPECT_DOUBLE_EQ(variance_bound(2.0, 1.0, 2, 1.0, 4, 1), 4.5);
  EXPECT_DOUBLE_EQ(variance_bound(0.0, 3.0, 2, 3.0, 1, 7), 2.0);
}

TEST(Budget, QuarterFractionConstants) {
  const TheoremBudget b = theorem_budget(1.0, 1.0, 4, 1.0, 0.5, 0.25);
  EXPECT_DOUBLE_EQ(b.c1, 18.0);
  EXPECT_DOUBLE_EQ(b.c2, 20.0);
  EXPECT_DOUBLE_EQ(b.L, 5.0);            // (d + 1) B / sigma^2
  EXPECT_DOUBLE_EQ(b.alpha, 0.25 / 5.0); // c / L
  // T = ceil(2 * c2 * B / (alpha * eps^2)) = ceil(40 / (0.05 * 0.25)) = 3200
  EXPECT_EQ(b.T, 3200u);
  // N = ceil(4 * c1 * d * C / (sigma^2 eps^2)) = ceil(288 / 0.25) = 1152
  EXPECT_EQ(b.N, 1152u);
  // n = ceil(4 * c1 * d * B^2 / (sigma^2 eps^2)) = 1152
  EXPECT_EQ(b.n, 1152u);
}

TEST(Budget, GeneralFractionFormulas) {
  const double c = 0.1;
  const TheoremBudget b = theorem_budget(2.0, 0.5, 3, 0.8, 0.3, c);
  EXPECT_NEAR(b.c1, (2.0 * c * (1.0 - 2.0 * c) + 2.0) / (c * (1.0 - 2.0 * c)),
              1e-12);
  EXPECT_NEAR(b.c2, (12.0 - 8.0 * c) / (1.0 - 2.0 * c), 1e-12);
}

TEST(Budget, NoiselessProblemNeedsSingleRollout) {
  const TheoremBudget b = theorem_budget(1.0, 0.0, 8, 1.0, 0.2, 0.25);
  EXPECT_EQ(b.N, 1u);
  EXPECT_GE(b.n, 1u);
}

TEST(Budget, GuardRejectsDegenerateFractions) {
  EXPECT_THROW(theorem_budget(1.0, 1.0, 4, 1.0, 0.5, 0.005), std::invalid_argument);
  EXPECT_THROW(theorem_budget(1.0, 1.0, 4, 1.0, 0.5, 0.49), std::invalid_argument);
  EXPECT_THROW(theorem_budget(1.0, 1.0, 4, 1.0, 0.5, 0.6), std::invalid_argument);
  EXPECT_THROW(theorem_budget(0.0, 1.0, 4, 1.0, 0.5, 0.25), std::invalid_argument);
  EXPECT_THROW(theorem_budget(1.0, -1.0, 4, 1.0, 0.5, 0.25), std::invalid_argument);
  EXPECT_THROW(theorem_budget(1.0, 1.0, 4, 1.0, 0.0, 0.25), std::invalid_argument);
}

TEST(Budget, PlugInVarianceMeetsTheTarget) {
  // With the budgeted n and N, the variance bound must not exceed
  // eps^2 / (2 c1); integer ceilings only help.
  for (double eps : {0.05, 0.2, 1.0}) {
    for (double c : {0.1, 0.25, 0.4}) {
      const TheoremBudget b = theorem_budget(2.0, 1.5, 6, 0.7, eps, c);
      const double v = variance_bound(1.5, 2.0, 6, 0.7,
                                      static_cast<int>(b.n),
                                      static_cast<int>(b.N));
      EXPECT_LE(v, eps * eps / (2.0 * b.c1) + 1e-12)
          << "eps=" << eps << " c=" << c;
    }
  }
}

TEST(Budget, EpisodeComplexityScaling) {
  // T*N*n scales as d^3 (per-factor: T ~ d via L, n ~ d, N ~ d).
  const auto total = [](int d, double eps) {
    return static_cast<double>(
        episode_complexity(theorem_budget(1.0, 1.0, d, 1.0, eps, 0.25)));
  };
  const double t1 = total(4, 0.3);
  const double t2 = total(8, 0.3);
  // (d+1) enters L, so use the exact factor rather than 2^3.
  const double lratio = (9.0 / 5.0) * (8.0 / 4.0) * (8.0 / 4.0);
  EXPECT_NEAR(t2 / t1, lratio, 0.05 * lratio);

  const double e1 = total(4, 0.4);
  const double e2 = total(4, 0.2);
  EXPECT_NEAR(e2 / e1, 64.0, 0.05 * 64.0);  // eps^-6
}

TEST(Budget, EpisodeComplexityOverflowDetected) {
  TheoremBudget b;
  b.T = 1ull << 40;
  b.N = 1ull << 40;
  b.n = 1ull << 40;
  EXPECT_THROW(episode_complexity(b), std::overflow_error);
  b.T = 100;
  b.N = 200;
  b.n = 3;
  EXPECT_EQ(episode_complexity(b), 60000u);
}

// ---- smoothing oracle ----

TEST(SmoothingOracle, MatchesExactSmoothedQuadratic) {
  SparseQuadratic problem(4, 2, 1.0, 0.4, 5);
  const ParamVector theta{0.3, -0.5, 0.1, 0.8};
  const double sigma = 0.7;
  const auto exact = problem.exact_smoothed(theta, sigma);
  ASSERT_TRUE(exact.has_value());
  RngStream rng(17);
  const SmoothingEstimate est = smoothing_oracle(problem, theta, sigma, 400000, rng);
  EXPECT_NEAR(est.value, exact->value, 4.0 * est.value_se);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(est.grad[i], exact->grad[i], 4.0 * est.grad_se[i]) << i;
  }
}

TEST(SmoothingOracle, MatchesClosedFormIndicator) {
  BoundedStep problem(ParamVector{0.2}, 1.0);
  const ParamVector theta{0.6};
  const double sigma = 0.8;
  const auto exact = problem.exact_smoothed(theta, sigma);
  ASSERT_TRUE(exact.has_value());
  RngStream rng(19);
  const SmoothingEstimate est = smoothing_oracle(problem, theta, sigma, 400000, rng);
  EXPECT_NEAR(est.value, exact->value, 4.0 * est.value_se);
  EXPECT_NEAR(est.grad[0], exact->grad[0], 4.0 * est.grad_se[0]);
}

TEST(SmoothingOracle, RejectsTinySampleCounts) {
  SparseQuadratic problem(2, 1, 1.0, 0.0, 1);
  RngStream rng(1);
  EXPECT_THROW(smoothing_oracle(problem, zeros(2), 1.0, 999, rng),
               std::invalid_argument);
}

// ---- Lipschitz probe ----

TEST(LipschitzProbe, QuadraticRatioIsExactlyTwiceTheScale) {
  SparseQuadratic problem(6, 2, 1.7, 0.0, 2);
  LipschitzProbeConfig cfg;
  cfg.pairs = 32;
  RngStream rng(23);
  const LipschitzProbe probe = lipschitz_probe(problem, 0.9, cfg, rng);
  EXPECT_TRUE(probe.used_exact);
  EXPECT_NEAR(probe.max_ratio, 2.0 * 1.7, 1e-9);
  EXPECT_DOUBLE_EQ(probe.se_at_max, 0.0);
}

TEST(LipschitzProbe, IndicatorStaysUnderTheSmoothnessConstant) {
  const int d = 2;
  BoundedStep problem(zeros(d), 1.0);
  const double sigma = 0.8;
  LipschitzProbeConfig cfg;
  cfg.pairs = 60;
  cfg.samples = 30000;
  RngStream rng(29);
  const LipschitzProbe probe = lipschitz_probe(problem, sigma, cfg, rng);
  EXPECT_FALSE(probe.used_exact);
  const double L = smoothness_constant(1.0, d, sigma);
  EXPECT_LE(probe.max_ratio, L + 5.0 * probe.se_at_max);
  EXPECT_GT(probe.max_ratio, 0.0);
}

}  // namespace
}  // namespace nesht
