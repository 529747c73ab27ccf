#include "nesht/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nesht {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / kSqrt2Pi; }

void check_rollout_dim(const ParamVector& theta, int dim, const char* who) {
  if (static_cast<int>(theta.size()) != dim) {
    throw std::invalid_argument(std::string(who) + ": theta has dimension " +
                                std::to_string(theta.size()) + ", expected " +
                                std::to_string(dim));
  }
}

}  // namespace

void ObservationModel::sample(RngStream& rng, double* out) const {
  for (int i = 0; i < real_dim; ++i) out[i] = sigma_x * rng.next_normal();
  const int total = dim();
  for (int i = real_dim; i < total; ++i) out[i] = rng.next_normal();
}

ParamVector make_theta_star(int d0, int k_star, std::uint64_t problem_seed,
                            int full_dim) {
  if (d0 < 1 || full_dim < d0) {
    throw std::invalid_argument("make_theta_star: need full_dim >= d0 >= 1");
  }
  if (k_star < 0 || k_star > d0) {
    throw std::invalid_argument("make_theta_star: k_star must be in [0, d0]");
  }
  ParamVector star(full_dim, 0.0);
  RngStream support_rng = derive_stream(problem_seed, {0});
  RngStream sign_rng = derive_stream(problem_seed, {1});

  // Partial Fisher-Yates over the first d0 coordinates.
  std::vector<int> idx(d0);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k_star; ++i) {
    const int j = i + static_cast<int>(support_rng.next_u64() %
                                       static_cast<std::uint64_t>(d0 - i));
    std::swap(idx[i], idx[j]);
    star[idx[i]] = (sign_rng.next_u64() & 1) ? 1.0 : -1.0;
  }
  return star;
}

std::unique_ptr<FitnessProblem> augment_with_noise(
    const ObservationProblem& inner, int ratio) {
  if (ratio < 0) {
    throw std::invalid_argument("augment_with_noise: ratio must be >= 0");
  }
  return inner.with_noise_ratio(ratio);
}

double EpisodicProblem::rollout(const ParamVector& theta, RngStream& rng) const {
  std::vector<double> rewards;
  rollout_rewards(theta, rng, rewards);
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

// ---- NoisyLinearBandit ----

NoisyLinearBandit::NoisyLinearBandit(int d0, int k_star, double sigma_x,
                                     std::uint64_t problem_seed, int noise_ratio)
    : obs_{d0, sigma_x, noise_ratio},
      k_star_(k_star),
      problem_seed_(problem_seed) {
  if (d0 < 1) throw std::invalid_argument("NoisyLinearBandit: d0 must be >= 1");
  if (!(sigma_x > 0.0)) {
    throw std::invalid_argument("NoisyLinearBandit: sigma_x must be > 0");
  }
  if (noise_ratio < 0) {
    throw std::invalid_argument("NoisyLinearBandit: noise_ratio must be >= 0");
  }
  theta_star_full_ = make_theta_star(d0, k_star, problem_seed, dim());
}

int NoisyLinearBandit::dim() const { return obs_.dim(); }

double NoisyLinearBandit::rollout(const ParamVector& theta, RngStream& rng) const {
  check_rollout_dim(theta, dim(), "NoisyLinearBandit::rollout");
  std::vector<double> x(dim());
  obs_.sample(rng, x.data());
  double f = 0.0;
  for (int i = 0; i < dim(); ++i) f += x[i] * (theta[i] - theta_star_full_[i]);
  return f;
}

std::optional<double> NoisyLinearBandit::exact_expectation(const ParamVector&) const {
  return 0.0;
}

std::optional<SmoothedPoint> NoisyLinearBandit::exact_smoothed(
    const ParamVector& theta, double sigma) const {
  (void)sigma;
  return SmoothedPoint{0.0, ParamVector(theta.size(), 0.0)};
}

std::unique_ptr<FitnessProblem> NoisyLinearBandit::with_noise_ratio(
    int ratio) const {
  return std::make_unique<NoisyLinearBandit>(obs_.real_dim, k_star_,
                                             obs_.sigma_x, problem_seed_, ratio);
}

double NoisyLinearBandit::closed_form_variance(const ParamVector& theta) const {
  check_rollout_dim(theta, dim(), "NoisyLinearBandit::closed_form_variance");
  double v = 0.0;
  for (int i = 0; i < obs_.real_dim; ++i) {
    const double delta = theta[i] - theta_star_full_[i];
    v += obs_.sigma_x * obs_.sigma_x * delta * delta;
  }
  for (int i = obs_.real_dim; i < dim(); ++i) v += theta[i] * theta[i];
  return v;
}

SparsityMask NoisyLinearBandit::true_support() const {
  return make_mask(support_of(theta_star_full_), std::max(1, k_star_), dim());
}

// ---- BoundedStep ----

BoundedStep::BoundedStep(ParamVector center, double radius)
    : center_(std::move(center)), radius_(radius) {
  check_finite(center_, "BoundedStep: center");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("BoundedStep: radius must be finite and > 0");
  }
}

double BoundedStep::rollout(const ParamVector& theta, RngStream&) const {
  check_rollout_dim(theta, dim(), "BoundedStep::rollout");
  return l2_distance(theta, center_) <= radius_ ? 1.0 : 0.0;
}

std::optional<double> BoundedStep::exact_expectation(const ParamVector& theta) const {
  return l2_distance(theta, center_) <= radius_ ? 1.0 : 0.0;
}

std::optional<SmoothedPoint> BoundedStep::exact_smoothed(const ParamVector& theta,
                                                         double sigma) const {
  if (dim() != 1) return std::nullopt;
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("BoundedStep::exact_smoothed: sigma must be > 0");
  }
  const double hi = (center_[0] + radius_ - theta[0]) / sigma;
  const double lo = (center_[0] - radius_ - theta[0]) / sigma;
  SmoothedPoint p;
  p.value = normal_cdf(hi) - normal_cdf(lo);
  p.grad = {(normal_pdf(lo) - normal_pdf(hi)) / sigma};
  return p;
}

// ---- SparseQuadratic ----

SparseQuadratic::SparseQuadratic(int d, int k_star, double scale,
                                 double noise_std, std::uint64_t problem_seed)
    : d_(d), k_star_(k_star), scale_(scale), noise_std_(noise_std) {
  if (d < 1) throw std::invalid_argument("SparseQuadratic: d must be >= 1");
  if (!(scale > 0.0)) {
    throw std::invalid_argument("SparseQuadratic: scale must be > 0");
  }
  if (noise_std < 0.0) {
    throw std::invalid_argument("SparseQuadratic: noise_std must be >= 0");
  }
  theta_star_ = make_theta_star(d, k_star, problem_seed, d);
}

double SparseQuadratic::rollout(const ParamVector& theta, RngStream& rng) const {
  check_rollout_dim(theta, d_, "SparseQuadratic::rollout");
  double sq = 0.0;
  for (int i = 0; i < d_; ++i) {
    const double delta = theta[i] - theta_star_[i];
    sq += delta * delta;
  }
  double f = -scale_ * sq;
  if (noise_std_ > 0.0) f += noise_std_ * rng.next_normal();
  return f;
}

std::optional<double> SparseQuadratic::exact_expectation(
    const ParamVector& theta) const {
  double sq = 0.0;
  for (int i = 0; i < d_; ++i) {
    const double delta = theta[i] - theta_star_[i];
    sq += delta * delta;
  }
  return -scale_ * sq;
}

std::optional<SmoothedPoint> SparseQuadratic::exact_smoothed(
    const ParamVector& theta, double sigma) const {
  SmoothedPoint p;
  double sq = 0.0;
  p.grad.resize(d_);
  for (int i = 0; i < d_; ++i) {
    const double delta = theta[i] - theta_star_[i];
    sq += delta * delta;
    p.grad[i] = -2.0 * scale_ * delta;
  }
  p.value = -scale_ * (sq + sigma * sigma * d_);
  return p;
}

SparsityMask SparseQuadratic::true_support() const {
  return make_mask(support_of(theta_star_), std::max(1, k_star_), d_);
}

// ---- MultiStepChain ----

MultiStepChain::MultiStepChain(int d0, int k_star, int horizon, double sigma_x,
                               double reward_clip, double noise_std,
                               std::uint64_t problem_seed, int noise_ratio)
    : obs_{d0, sigma_x, noise_ratio},
      k_star_(k_star),
      horizon_(horizon),
      reward_clip_(reward_clip),
      noise_std_(noise_std),
      problem_seed_(problem_seed) {
  if (d0 < 1) throw std::invalid_argument("MultiStepChain: d0 must be >= 1");
  if (horizon < 1) throw std::invalid_argument("MultiStepChain: horizon must be >= 1");
  if (!(sigma_x > 0.0)) {
    throw std::invalid_argument("MultiStepChain: sigma_x must be > 0");
  }
  if (!(reward_clip > 0.0)) {
    throw std::invalid_argument("MultiStepChain: reward_clip must be > 0");
  }
  if (noise_std < 0.0) {
    throw std::invalid_argument("MultiStepChain: noise_std must be >= 0");
  }
  if (noise_ratio < 0) {
    throw std::invalid_argument("MultiStepChain: noise_ratio must be >= 0");
  }
  theta_star_full_ = make_theta_star(d0, k_star, problem_seed, dim());
}

int MultiStepChain::dim() const { return obs_.dim(); }

void MultiStepChain::rollout_rewards(const ParamVector& theta, RngStream& rng,
                                     std::vector<double>& rewards) const {
  check_rollout_dim(theta, dim(), "MultiStepChain::rollout_rewards");
  rewards.resize(horizon_);
  std::vector<double> x(dim());
  const int d = dim();
  for (int t = 0; t < horizon_; ++t) {
    // Per-step sub-streams keep observation draws aligned across noise
    // ratios: child 0 observations, child 1 reward noise.
    RngStream step = rng.child(static_cast<std::uint64_t>(t));
    RngStream obs_stream = step.child(0);
    obs_.sample(obs_stream, x.data());
    double resid = 0.0;
    for (int i = 0; i < d; ++i) resid += x[i] * (theta[i] - theta_star_full_[i]);
    double r = -std::min(resid * resid, reward_clip_);
    if (noise_std_ > 0.0) {
      RngStream noise_stream = step.child(1);
      r += noise_std_ * noise_stream.next_normal();
    }
    rewards[t] = r;
  }
}

std::optional<double> MultiStepChain::bound_B() const {
  return horizon_ * reward_clip_;
}

std::optional<double> MultiStepChain::var_bound_C() const {
  return horizon_ *
         (reward_clip_ * reward_clip_ / 4.0 + noise_std_ * noise_std_);
}

std::optional<double> MultiStepChain::exact_expectation(
    const ParamVector& theta) const {
  const double r2 = residual_variance(theta);
  return -static_cast<double>(horizon_) *
         clipped_chi_square_mean(r2, reward_clip_);
}

std::unique_ptr<FitnessProblem> MultiStepChain::with_noise_ratio(
    int ratio) const {
  return std::make_unique<MultiStepChain>(obs_.real_dim, k_star_, horizon_,
                                          obs_.sigma_x, reward_clip_,
                                          noise_std_, problem_seed_, ratio);
}

double MultiStepChain::residual_variance(const ParamVector& theta) const {
  check_rollout_dim(theta, dim(), "MultiStepChain::residual_variance");
  double v = 0.0;
  for (int i = 0; i < obs_.real_dim; ++i) {
    const double delta = theta[i] - theta_star_full_[i];
    v += obs_.sigma_x * obs_.sigma_x * delta * delta;
  }
  for (int i = obs_.real_dim; i < dim(); ++i) v += theta[i] * theta[i];
  return v;
}

SparsityMask MultiStepChain::true_support() const {
  return make_mask(support_of(theta_star_full_), std::max(1, k_star_), dim());
}

// ---- SparseRewardMask ----

SparseRewardMask::SparseRewardMask(std::shared_ptr<const EpisodicProblem> inner,
                                   double p_zero)
    : inner_(std::move(inner)), p_zero_(p_zero) {
  if (!inner_) throw std::invalid_argument("SparseRewardMask: inner is null");
  if (!(p_zero >= 0.0) || p_zero >= 1.0) {
    throw std::invalid_argument("SparseRewardMask: p_zero must be in [0, 1)");
  }
}

std::string SparseRewardMask::name() const {
  return inner_->name() + "_masked";
}

void SparseRewardMask::rollout_rewards(const ParamVector& theta, RngStream& rng,
                                       std::vector<double>& rewards) const {
  inner_->rollout_rewards(theta, rng, rewards);
  for (auto& r : rewards) {
    if (rng.next_double() < p_zero_) r = 0.0;
  }
}

std::optional<double> SparseRewardMask::bound_B() const {
  const auto inner_b = inner_->bound_B();
  if (!inner_b) return std::nullopt;
  return (1.0 - p_zero_) * *inner_b;
}

std::optional<double> SparseRewardMask::var_bound_C() const {
  // Valid when the inner episode has i.i.d. per-step rewards with uniform
  // per-step bounds C_inner/H and B_inner/H (true for MultiStepChain):
  // per step, Var[mask*r] = (1-p)Var[r] + p(1-p)E[r]^2.
  const auto inner_c = inner_->var_bound_C();
  const auto inner_b = inner_->bound_B();
  if (!inner_c || !inner_b) return std::nullopt;
  const double h = inner_->horizon();
  const double per_step_b = *inner_b / h;
  return (1.0 - p_zero_) * *inner_c +
         p_zero_ * (1.0 - p_zero_) * per_step_b * per_step_b * h;
}

std::optional<double> SparseRewardMask::exact_expectation(
    const ParamVector& theta) const {
  const auto inner_f = inner_->exact_expectation(theta);
  if (!inner_f) return std::nullopt;
  return (1.0 - p_zero_) * *inner_f;
}

int SparseRewardMask::obs_dim() const {
  const auto* obs = dynamic_cast<const ObservationProblem*>(inner_.get());
  if (!obs) {
    throw std::invalid_argument("SparseRewardMask: inner has no observations");
  }
  return obs->obs_dim();
}

int SparseRewardMask::noise_ratio() const {
  const auto* obs = dynamic_cast<const ObservationProblem*>(inner_.get());
  if (!obs) {
    throw std::invalid_argument("SparseRewardMask: inner has no observations");
  }
  return obs->noise_ratio();
}

std::unique_ptr<FitnessProblem> SparseRewardMask::with_noise_ratio(
    int ratio) const {
  const auto* obs = dynamic_cast<const ObservationProblem*>(inner_.get());
  if (!obs) {
    throw std::invalid_argument("SparseRewardMask: inner has no observations");
  }
  std::unique_ptr<FitnessProblem> rebuilt = obs->with_noise_ratio(ratio);
  auto* episodic = dynamic_cast<EpisodicProblem*>(rebuilt.get());
  if (!episodic) {
    throw std::invalid_argument(
        "SparseRewardMask: augmented inner is not episodic");
  }
  rebuilt.release();
  return std::make_unique<SparseRewardMask>(
      std::shared_ptr<const EpisodicProblem>(episodic), p_zero_);
}

double clipped_chi_square_mean(double r2, double clip) {
  if (r2 < 0.0) {
    throw std::invalid_argument("clipped_chi_square_mean: r2 must be >= 0");
  }
  if (!(clip > 0.0)) {
    throw std::invalid_argument("clipped_chi_square_mean: clip must be > 0");
  }
  if (r2 == 0.0) return 0.0;
  // E[min(r2*X, clip)] for X ~ chi2_1, via E[X 1{X<a}] = P(chi2_3 <= a):
  constexpr double kTwoOverPi = 0.6366197723675814;
  const double a = clip / r2;
  const double s = std::sqrt(a / 2.0);
  const double p1 = std::erf(s);                                 // P(chi2_1 <= a)
  const double p3 = p1 - std::sqrt(a * kTwoOverPi) * std::exp(-a / 2.0);
  return r2 * p3 + clip * (1.0 - p1);
}

}  // namespace nesht
