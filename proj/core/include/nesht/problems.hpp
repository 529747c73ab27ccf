#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nesht/fitness.hpp"
#include "nesht/sparsity.hpp"

namespace nesht {

// Per-step observation sampler shared by the linear-policy problems. Each
// observation is [real features | noise features]: real_dim coordinates
// N(0, sigma_x^2) followed by real_dim*noise_ratio unit-variance distractor
// coordinates. Reals are drawn first, so a parameter vector supported only on
// real coordinates produces returns bit-identical to the un-augmented problem
// under matched seeds.
struct ObservationModel {
  int real_dim = 1;
  double sigma_x = 1.0;
  int noise_ratio = 0;

  int dim() const { return real_dim * (1 + noise_ratio); }
  void sample(RngStream& rng, double* out) const;
};

// Sign vector +-1 on a random support of size k_star (chosen from the first
// d0 coordinates), zero elsewhere; fixed by problem_seed.
ParamVector make_theta_star(int d0, int k_star, std::uint64_t problem_seed,
                            int full_dim);

// Problems whose rollouts consume per-step observation vectors; augmentation
// rebuilds them with noise_ratio distractor features per real feature.
class ObservationProblem {
 public:
  virtual ~ObservationProblem() = default;
  virtual int obs_dim() const = 0;  // real feature count d0
  virtual int noise_ratio() const = 0;
  virtual std::unique_ptr<FitnessProblem> with_noise_ratio(int ratio) const = 0;
};

std::unique_ptr<FitnessProblem> augment_with_noise(
    const ObservationProblem& inner, int ratio);

// Problems that expose the per-step immediate rewards of one episode.
class EpisodicProblem : public FitnessProblem {
 public:
  virtual int horizon() const = 0;
  virtual void rollout_rewards(const ParamVector& theta, RngStream& rng,
                               std::vector<double>& rewards) const = 0;
  double rollout(const ParamVector& theta, RngStream& rng) const override;
};

// One-step linear score: f(theta) = x . (theta - theta*), x per
// ObservationModel. F == 0 everywhere, so the smoothed gradient is exactly
// zero and Var[f(theta)] = sigma_x^2 ||Delta_real||^2 + ||Delta_noise||^2 in
// closed form.
class NoisyLinearBandit : public FitnessProblem, public ObservationProblem {
 public:
  NoisyLinearBandit(int d0, int k_star, double sigma_x,
                    std::uint64_t problem_seed, int noise_ratio = 0);

  int dim() const override;
  std::string name() const override { return "noisy_linear_bandit"; }
  double rollout(const ParamVector& theta, RngStream& rng) const override;
  std::optional<double> exact_expectation(const ParamVector&) const override;
  std::optional<SmoothedPoint> exact_smoothed(const ParamVector&,
                                              double sigma) const override;

  int obs_dim() const override { return obs_.real_dim; }
  int noise_ratio() const override { return obs_.noise_ratio; }
  std::unique_ptr<FitnessProblem> with_noise_ratio(int ratio) const override;

  double closed_form_variance(const ParamVector& theta) const;
  const ParamVector& theta_star() const { return theta_star_full_; }
  SparsityMask true_support() const;

 private:
  ObservationModel obs_;
  int k_star_;
  std::uint64_t problem_seed_;
  ParamVector theta_star_full_;
};

// Deterministic indicator of a ball: f = 1 if ||theta - center|| <= radius
// else 0. B = 1, C = 0. For d = 1 the smoothed value and gradient have a
// closed form via the normal CDF.
class BoundedStep : public FitnessProblem {
 public:
  BoundedStep(ParamVector center, double radius);

  int dim() const override { return static_cast<int>(center_.size()); }
  std::string name() const override { return "bounded_step"; }
  double rollout(const ParamVector& theta, RngStream& rng) const override;
  std::optional<double> bound_B() const override { return 1.0; }
  std::optional<double> var_bound_C() const override { return 0.0; }
  std::optional<double> exact_expectation(const ParamVector&) const override;
  std::optional<SmoothedPoint> exact_smoothed(const ParamVector&,
                                              double sigma) const override;

 private:
  ParamVector center_;
  double radius_;
};

// f(theta) = -scale * ||theta - theta*||^2 + noise_std * z. Smoothing shifts
// the value by -scale*sigma^2*d and leaves the gradient affine:
// grad F_sigma = -2*scale*(theta - theta*).
class SparseQuadratic : public FitnessProblem {
 public:
  SparseQuadratic(int d, int k_star, double scale, double noise_std,
                  std::uint64_t problem_seed);

  int dim() const override { return d_; }
  std::string name() const override { return "sparse_quadratic"; }
  double rollout(const ParamVector& theta, RngStream& rng) const override;
  std::optional<double> var_bound_C() const override {
    return noise_std_ * noise_std_;
  }
  std::optional<double> exact_expectation(const ParamVector&) const override;
  std::optional<SmoothedPoint> exact_smoothed(const ParamVector&,
                                              double sigma) const override;

  const ParamVector& theta_star() const { return theta_star_; }
  SparsityMask true_support() const;

 private:
  int d_;
  int k_star_;
  double scale_;
  double noise_std_;
  ParamVector theta_star_;
};

// Episodic linear-regulation chain: per step t an observation x_t is drawn,
// the policy emits a_t = theta . x_t, and the immediate reward is
//   -min((a_t - theta* . x_t)^2, reward_clip) + noise_std * z_t.
// Clipping keeps expected per-step reward in [-reward_clip, 0], giving the
// global bounds B = H * reward_clip and (Popoviciu plus independent reward
// noise) C = H * (reward_clip^2/4 + noise_std^2). E[f] has a closed form via
// chi-square CDFs, so exact_expectation is available at any theta.
class MultiStepChain : public EpisodicProblem, public ObservationProblem {
 public:
  MultiStepChain(int d0, int k_star, int horizon, double sigma_x,
                 double reward_clip, double noise_std,
                 std::uint64_t problem_seed, int noise_ratio = 0);

  int dim() const override;
  std::string name() const override { return "multi_step_chain"; }
  int horizon() const override { return horizon_; }
  void rollout_rewards(const ParamVector& theta, RngStream& rng,
                       std::vector<double>& rewards) const override;
  std::optional<double> bound_B() const override;
  std::optional<double> var_bound_C() const override;
  std::optional<double> exact_expectation(const ParamVector&) const override;

  int obs_dim() const override { return obs_.real_dim; }
  int noise_ratio() const override { return obs_.noise_ratio; }
  std::unique_ptr<FitnessProblem> with_noise_ratio(int ratio) const override;

  const ParamVector& theta_star() const { return theta_star_full_; }
  SparsityMask true_support() const;
  // Residual variance r^2 = Var[(theta - theta*) . x] at this theta.
  double residual_variance(const ParamVector& theta) const;

 private:
  ObservationModel obs_;
  int k_star_;
  int horizon_;
  double reward_clip_;
  double noise_std_;
  std::uint64_t problem_seed_;
  ParamVector theta_star_full_;
};

// Zeroes each immediate reward independently with probability p_zero before
// summation. Mask draws come from the episode stream after the inner rollout,
// so p_zero = 0 reproduces the inner returns exactly.
class SparseRewardMask : public EpisodicProblem, public ObservationProblem {
 public:
  SparseRewardMask(std::shared_ptr<const EpisodicProblem> inner, double p_zero);

  int dim() const override { return inner_->dim(); }
  std::string name() const override;
  int horizon() const override { return inner_->horizon(); }
  void rollout_rewards(const ParamVector& theta, RngStream& rng,
                       std::vector<double>& rewards) const override;
  std::optional<double> bound_B() const override;
  std::optional<double> var_bound_C() const override;
  std::optional<double> exact_expectation(const ParamVector&) const override;

  int obs_dim() const override;
  int noise_ratio() const override;
  std::unique_ptr<FitnessProblem> with_noise_ratio(int ratio) const override;

  double p_zero() const { return p_zero_; }
  const EpisodicProblem& inner() const { return *inner_; }

 private:
  std::shared_ptr<const EpisodicProblem> inner_;
  double p_zero_;
};

// Expected value of min(r2 * chi2_1, clip) for r2 >= 0 (closed form).
double clipped_chi_square_mean(double r2, double clip);

}  // namespace nesht
