#pragma once

#include <vector>

#include "nesht/fitness.hpp"
#include "nesht/param_vector.hpp"
#include "nesht/rng.hpp"

namespace nesht {

struct EstimatorConfig {
  double sigma = 1.0;  // perturbation scale, > 0
  int n = 1;           // perturbations per estimate, >= 1
  int N = 1;           // rollouts per perturbation, >= 1
  int workers = 1;     // threads for the n perturbation tasks
};

struct GradientEstimate {
  ParamVector g;
  int n_used = 0;
  int N_used = 0;
  double sigma = 0.0;
  // Mean fitness over the N rollouts of each perturbation, for diagnostics.
  std::vector<double> per_perturbation_score;
};

// d i.i.d. standard-normal coordinates from the stream.
ParamVector sample_perturbation(RngStream& rng, int dim);

// Single-sample score-direction estimate: (f / sigma) * eps.
ParamVector single_estimate(double f, const ParamVector& eps, double sigma);

// Averaged estimate at theta:
//   g = 1/(n*N*sigma) * sum_i sum_j f(theta + sigma*eps_i; tau_ij) * eps_i
// eps_i comes from step_stream.child(i).child(0) and rollout j (1-based) from
// step_stream.child(i).child(j), i.e. paths (t, i, 0) and (t, i, j) when
// step_stream is (base_seed, [t]). Rollouts are drawn after their
// perturbation, perturbation tasks may run concurrently, and the reduction is
// a fixed pairwise tree over i, so the result is a pure function of (theta,
// step_stream, cfg). Non-finite fitness values are rejected with the failing
// (i, j) in the error.
GradientEstimate averaged_estimate(const FitnessProblem& problem,
                                   const ParamVector& theta,
                                   const EstimatorConfig& cfg,
                                   const RngStream& step_stream);

struct VarianceProbe {
  double value = 0.0;  // mean of ||g_hat - ref||^2 over reps
  double se = 0.0;     // standard error of that mean
  int reps = 0;
};

// Empirical estimator error against a reference smoothed gradient. The
// reference comes from problem.exact_smoothed (throws std::invalid_argument
// when missing) or is passed explicitly (e.g. a Monte Carlo oracle).
// Repetition r uses step stream root.child(r).
VarianceProbe empirical_estimator_variance(const FitnessProblem& problem,
                                           const ParamVector& theta,
                                           const EstimatorConfig& cfg,
                                           const RngStream& root, int reps);
VarianceProbe empirical_estimator_variance(const FitnessProblem& problem,
                                           const ParamVector& theta,
                                           const EstimatorConfig& cfg,
                                           const RngStream& root, int reps,
                                           const ParamVector& reference_grad);

}  // namespace nesht
