#pragma once

#include <optional>
#include <string>

#include "nesht/param_vector.hpp"
#include "nesht/rng.hpp"

namespace nesht {

struct SmoothedPoint {
  double value = 0.0;
  ParamVector grad;
};

// A maximization target observed through noisy rollouts. rollout() draws one
// return f(theta) with E[f(theta)] = F(theta); all stochasticity must come
// from the passed stream so runs replay bit-identically.
class FitnessProblem {
 public:
  virtual ~FitnessProblem() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual double rollout(const ParamVector& theta, RngStream& rng) const = 0;

  // Global bound on |F|, if one exists.
  virtual std::optional<double> bound_B() const { return std::nullopt; }
  // Global bound on Var[f(theta)], if one exists.
  virtual std::optional<double> var_bound_C() const { return std::nullopt; }
  // Exact F(theta) when available in closed form.
  virtual std::optional<double> exact_expectation(const ParamVector&) const {
    return std::nullopt;
  }
  // Exact Gaussian-smoothed value and gradient: F_sigma(theta) = E_eps
  // F(theta + sigma*eps) and its gradient, when available in closed form.
  virtual std::optional<SmoothedPoint> exact_smoothed(const ParamVector&,
                                                      double sigma) const {
    return std::nullopt;
  }
};

}  // namespace nesht
