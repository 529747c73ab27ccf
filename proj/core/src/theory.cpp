#include "nesht/theory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace nesht {
namespace {

void check_bounds_args(double B, int d, double sigma) {
  if (!(B >= 0.0) || !std::isfinite(B)) {
    throw std::invalid_argument("theory: B must be finite and >= 0");
  }
  if (d < 1) throw std::invalid_argument("theory: d must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("theory: sigma must be finite and > 0");
  }
}

// ceil with a relative backoff so values that are integers up to rounding
// noise (e.g. 40/0.0125) do not get bumped to the next integer.
std::uint64_t ceil_count(double x, const char* what) {
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument(std::string("theory: ") + what +
                                " must be finite and >= 0");
  }
  const double c = std::ceil(x * (1.0 - 1e-12));
  if (c > 9.0e18) {
    throw std::overflow_error(std::string("theory: ") + what +
                              " does not fit in a 64-bit count");
  }
  return static_cast<std::uint64_t>(c);
}

// Streaming per-coordinate mean and M2 (Welford); single fixed order, so the
// oracle replays exactly.
struct Welford {
  explicit Welford(std::size_t d) : mean(d, 0.0), m2(d, 0.0) {}
  void add(std::size_t c, double x, std::uint64_t count) {
    const double delta = x - mean[c];
    mean[c] += delta / static_cast<double>(count);
    m2[c] += delta * (x - mean[c]);
  }
  std::vector<double> mean, m2;
};

}  // namespace

double smoothness_constant(double B, int d, double sigma) {
  check_bounds_args(B, d, sigma);
  return (d + 1) * B / (sigma * sigma);
}

double variance_bound(double C, double B, int d, double sigma, int n, int N) {
  check_bounds_args(B, d, sigma);
  if (!(C >= 0.0) || !std::isfinite(C)) {
    throw std::invalid_argument("variance_bound: C must be finite and >= 0");
  }
  if (n < 1 || N < 1) {
    throw std::invalid_argument("variance_bound: n and N must be >= 1");
  }
  const double s2 = sigma * sigma;
  return C * d / (N * s2) + d * B * B / (n * s2);
}

TheoremBudget theorem_budget(double B, double C, int d, double sigma,
                             double epsilon, double c) {
  check_bounds_args(B, d, sigma);
  if (!(B > 0.0)) throw std::invalid_argument("theorem_budget: B must be > 0");
  if (!(C >= 0.0) || !std::isfinite(C)) {
    throw std::invalid_argument("theorem_budget: C must be finite and >= 0");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("theorem_budget: epsilon must be > 0");
  }
  if (!(c > 0.01) || !(c < 0.49)) {
    throw std::invalid_argument(
        "theorem_budget: c must lie in (0.01, 0.49); the constants diverge "
        "toward 0 and 1/2");
  }

  TheoremBudget budget;
  budget.c = c;
  budget.c1 = (2.0 * c * (1.0 - 2.0 * c) + 2.0) / (c * (1.0 - 2.0 * c));
  budget.c2 = (12.0 - 8.0 * c) / (1.0 - 2.0 * c);
  budget.L = smoothness_constant(B, d, sigma);
  budget.alpha = c / budget.L;
  budget.epsilon = epsilon;

  const double eps2 = epsilon * epsilon;
  const double s2 = sigma * sigma;
  budget.T = ceil_count(2.0 * budget.c2 * B / (budget.alpha * eps2), "T");
  budget.N = std::max<std::uint64_t>(
      1, ceil_count(4.0 * budget.c1 * d * C / (s2 * eps2), "N"));
  budget.n = std::max<std::uint64_t>(
      1, ceil_count(4.0 * budget.c1 * d * B * B / (s2 * eps2), "n"));
  budget.T = std::max<std::uint64_t>(1, budget.T);
  return budget;
}

std::uint64_t episode_complexity(const TheoremBudget& budget) {
  std::uint64_t tn = 0, tnn = 0;
  if (__builtin_mul_overflow(budget.T, budget.N, &tn) ||
      __builtin_mul_overflow(tn, budget.n, &tnn)) {
    throw std::overflow_error("episode_complexity: T*N*n overflows 64 bits");
  }
  return tnn;
}

SmoothingEstimate smoothing_oracle(const FitnessProblem& problem,
                                   const ParamVector& theta, double sigma,
                                   std::uint64_t M, RngStream& rng,
                                   int inner_rollouts) {
  check_finite(theta, "smoothing_oracle: theta");
  check_dim(theta, static_cast<std::size_t>(problem.dim()),
            "smoothing_oracle: theta");
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("smoothing_oracle: sigma must be > 0");
  }
  if (M < 1000) {
    throw std::invalid_argument("smoothing_oracle: M must be >= 1000");
  }
  if (inner_rollouts < 1) {
    throw std::invalid_argument("smoothing_oracle: inner_rollouts must be >= 1");
  }

  const std::size_t d = theta.size();
  Welford grad_acc(d);
  Welford value_acc(1);
  ParamVector eps(d), shifted(d);

  for (std::uint64_t m = 0; m < M; ++m) {
    for (std::size_t c = 0; c < d; ++c) {
      eps[c] = rng.next_normal();
      shifted[c] = theta[c] + sigma * eps[c];
    }
    double F;
    if (const auto exact = problem.exact_expectation(shifted)) {
      F = *exact;
    } else {
      double s = 0.0;
      for (int r = 0; r < inner_rollouts; ++r) s += problem.rollout(shifted, rng);
      F = s / inner_rollouts;
    }
    const std::uint64_t count = m + 1;
    value_acc.add(0, F, count);
    const double w = F / sigma;
    for (std::size_t c = 0; c < d; ++c) grad_acc.add(c, w * eps[c], count);
  }

  SmoothingEstimate est;
  est.samples = M;
  est.value = value_acc.mean[0];
  est.value_se =
      std::sqrt(value_acc.m2[0] / static_cast<double>(M - 1) / static_cast<double>(M));
  est.grad.resize(d);
  est.grad_se.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    est.grad[c] = grad_acc.mean[c];
    est.grad_se[c] =
        std::sqrt(grad_acc.m2[c] / static_cast<double>(M - 1) / static_cast<double>(M));
  }
  return est;
}

LipschitzProbe lipschitz_probe(const FitnessProblem& problem, double sigma,
                               const LipschitzProbeConfig& cfg, RngStream& rng) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("lipschitz_probe: sigma must be > 0");
  }
  if (cfg.pairs < 2) {
    throw std::invalid_argument("lipschitz_probe: need at least 2 pairs");
  }
  const int d = problem.dim();
  const ParamVector probe_origin = zeros(d);
  const bool exact = problem.exact_smoothed(probe_origin, sigma).has_value();

  LipschitzProbe out;
  out.pairs = cfg.pairs;
  out.used_exact = exact;

  for (int p = 0; p < cfg.pairs; ++p) {
    RngStream pair_stream = rng.child(p);
    RngStream geom = pair_stream.child(0);

    ParamVector theta1(d);
    for (int c = 0; c < d; ++c) theta1[c] = cfg.anchor_spread * geom.next_normal();
    const double dist = (p % 2 == 0 ? cfg.near_scale : cfg.far_scale) * sigma;
    ParamVector dir(d);
    for (int c = 0; c < d; ++c) dir[c] = geom.next_normal();
    const double dir_norm = l2_norm(dir);
    ParamVector theta2(d);
    for (int c = 0; c < d; ++c) theta2[c] = theta1[c] + dist * dir[c] / dir_norm;

    double ratio, se;
    if (exact) {
      const auto g1 = problem.exact_smoothed(theta1, sigma);
      const auto g2 = problem.exact_smoothed(theta2, sigma);
      if (!g1 || !g2) {
        throw std::logic_error("lipschitz_probe: exact_smoothed vanished mid-probe");
      }
      ratio = l2_distance(g1->grad, g2->grad) / dist;
      se = 0.0;
    } else {
      // Common random numbers: the same perturbation and the same rollout
      // stream at both endpoints, so the difference estimator is tight.
      Welford acc(d);
      ParamVector eps(d), s1(d), s2(d);
      for (std::uint64_t m = 0; m < cfg.samples; ++m) {
        RngStream m_stream = pair_stream.child(1 + m);
        RngStream eps_stream = m_stream.child(0);
        for (int c = 0; c < d; ++c) {
          eps[c] = eps_stream.next_normal();
          s1[c] = theta1[c] + sigma * eps[c];
          s2[c] = theta2[c] + sigma * eps[c];
        }
        double f1, f2;
        if (const auto e1 = problem.exact_expectation(s1)) {
          f1 = *e1;
          f2 = *problem.exact_expectation(s2);
        } else {
          RngStream r1 = m_stream.child(1);
          RngStream r2 = m_stream.child(1);
          f1 = problem.rollout(s1, r1);
          f2 = problem.rollout(s2, r2);
        }
        const double w = (f1 - f2) / sigma;
        for (int c = 0; c < d; ++c) acc.add(c, w * eps[c], m + 1);
      }
      double norm_sq = 0.0, se_sq = 0.0;
      const double denom =
          static_cast<double>(cfg.samples - 1) * static_cast<double>(cfg.samples);
      for (int c = 0; c < d; ++c) {
        norm_sq += acc.mean[c] * acc.mean[c];
        se_sq += acc.m2[c] / denom;
      }
      ratio = std::sqrt(norm_sq) / dist;
      se = std::sqrt(se_sq) / dist;
    }

    if (ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.se_at_max = se;
    }
  }
  return out;
}

}  // namespace nesht
