#include "nesht/estimator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nesht/parallel.hpp"

namespace nesht {
namespace {

void check_config(const EstimatorConfig& cfg) {
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) {
    throw std::invalid_argument("estimator: sigma must be finite and > 0");
  }
  if (cfg.n < 1) throw std::invalid_argument("estimator: n must be >= 1");
  if (cfg.N < 1) throw std::invalid_argument("estimator: N must be >= 1");
}

// Fixed-bracketing pairwise reduction of sum_f[i] * eps_i over i in [lo, hi).
ParamVector reduce_weighted(const std::vector<ParamVector>& eps,
                            const std::vector<double>& sum_f, int lo, int hi) {
  if (hi - lo == 1) {
    ParamVector out(eps[lo].size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = sum_f[lo] * eps[lo][c];
    return out;
  }
  const int mid = lo + (hi - lo) / 2;
  ParamVector left = reduce_weighted(eps, sum_f, lo, mid);
  const ParamVector right = reduce_weighted(eps, sum_f, mid, hi);
  for (std::size_t c = 0; c < left.size(); ++c) left[c] += right[c];
  return left;
}

}  // namespace

ParamVector sample_perturbation(RngStream& rng, int dim) {
  if (dim < 1) throw std::invalid_argument("sample_perturbation: dim must be >= 1");
  ParamVector eps(dim);
  for (auto& x : eps) x = rng.next_normal();
  return eps;
}

ParamVector single_estimate(double f, const ParamVector& eps, double sigma) {
  if (!std::isfinite(f)) {
    throw std::invalid_argument("single_estimate: non-finite fitness");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("single_estimate: sigma must be > 0");
  }
  check_finite(eps, "single_estimate: eps");
  ParamVector g(eps.size());
  const double w = f / sigma;
  for (std::size_t i = 0; i < eps.size(); ++i) g[i] = w * eps[i];
  return g;
}

GradientEstimate averaged_estimate(const FitnessProblem& problem,
                                   const ParamVector& theta,
                                   const EstimatorConfig& cfg,
                                   const RngStream& step_stream) {
  check_config(cfg);
  check_finite(theta, "averaged_estimate: theta");
  check_dim(theta, static_cast<std::size_t>(problem.dim()),
            "averaged_estimate: theta");

  const int d = problem.dim();
  std::vector<ParamVector> eps(cfg.n);
  std::vector<double> sum_f(cfg.n, 0.0);

  parallel_for(static_cast<std::size_t>(cfg.n), cfg.workers, [&](std::size_t i) {
    RngStream pert_stream = step_stream.child(i);
    RngStream eps_stream = pert_stream.child(0);
    eps[i] = sample_perturbation(eps_stream, d);

    ParamVector shifted(theta);
    for (int c = 0; c < d; ++c) shifted[c] += cfg.sigma * eps[i][c];

    std::vector<double> scores(cfg.N);
    for (int j = 1; j <= cfg.N; ++j) {
      RngStream rollout_stream = pert_stream.child(j);
      const double f = problem.rollout(shifted, rollout_stream);
      if (!std::isfinite(f)) {
        throw std::runtime_error(
            "averaged_estimate: non-finite fitness at perturbation i=" +
            std::to_string(i) + ", rollout j=" + std::to_string(j));
      }
      scores[j - 1] = f;
    }
    sum_f[i] = pairwise_sum(scores);
  });

  GradientEstimate est;
  est.g = reduce_weighted(eps, sum_f, 0, cfg.n);
  const double scale = 1.0 / (static_cast<double>(cfg.n) * cfg.N * cfg.sigma);
  for (auto& x : est.g) x *= scale;
  est.n_used = cfg.n;
  est.N_used = cfg.N;
  est.sigma = cfg.sigma;
  est.per_perturbation_score.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) est.per_perturbation_score[i] = sum_f[i] / cfg.N;
  return est;
}

VarianceProbe empirical_estimator_variance(const FitnessProblem& problem,
                                           const ParamVector& theta,
                                           const EstimatorConfig& cfg,
                                           const RngStream& root, int reps,
                                           const ParamVector& reference_grad) {
  if (reps < 2) {
    throw std::invalid_argument("empirical_estimator_variance: reps must be >= 2");
  }
  check_dim(reference_grad, theta.size(), "empirical_estimator_variance: reference");

  std::vector<double> sq(reps);
  for (int r = 0; r < reps; ++r) {
    const GradientEstimate est =
        averaged_estimate(problem, theta, cfg, root.child(r));
    double s = 0.0;
    for (std::size_t c = 0; c < theta.size(); ++c) {
      const double dgc = est.g[c] - reference_grad[c];
      s += dgc * dgc;
    }
    sq[r] = s;
  }

  VarianceProbe probe;
  probe.reps = reps;
  probe.value = pairwise_sum(sq) / reps;
  double var = 0.0;
  for (double s : sq) {
    const double dev = s - probe.value;
    var += dev * dev;
  }
  var /= (reps - 1);
  probe.se = std::sqrt(var / reps);
  return probe;
}

VarianceProbe empirical_estimator_variance(const FitnessProblem& problem,
                                           const ParamVector& theta,
                                           const EstimatorConfig& cfg,
                                           const RngStream& root, int reps) {
  const auto exact = problem.exact_smoothed(theta, cfg.sigma);
  if (!exact) {
    throw std::invalid_argument(
        "empirical_estimator_variance: problem has no exact smoothed gradient; "
        "pass a reference gradient explicitly");
  }
  return empirical_estimator_variance(problem, theta, cfg, root, reps,
                                      exact->grad);
}

}  // namespace nesht
