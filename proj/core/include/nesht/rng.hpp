#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace nesht {

// Deterministic stream family. A stream is identified by (base_seed, path)
// where path is a sequence of u64 indices; derivation is a pure function of
// that tuple, so any (t, i, j) stream can be reconstructed without replaying
// the schedule that first used it. child() derives a sub-stream and does not
// advance the parent.
//
// Stream layout used across the library for optimization step t with n
// perturbations and N rollouts each:
//   (t, i, 0)            perturbation vector for population slot i in [0, n)
//   (t, i, j), j >= 1    fitness rollout j under perturbation i
//   (t, n, j), j >= 1    evaluation rollout j at the unperturbed iterate
//
// Generator: a SplitMix64-style digest chain over the path seeds xoshiro256++.
// Standard normals use the Acklam inverse-CDF approximation plus one Halley
// refinement against erfc. Both are part of the replay contract: outputs for a
// given (base_seed, path) are fixed for a release and must not change.
class RngStream {
 public:
  explicit RngStream(std::uint64_t base_seed);
  RngStream(std::uint64_t base_seed, std::span<const std::uint64_t> path);

  RngStream child(std::uint64_t index) const;

  std::uint64_t next_u64();
  double next_double();  // uniform in [0, 1)
  double next_normal();  // standard normal

  std::uint64_t digest() const { return digest_; }

 private:
  struct FromDigest {};
  RngStream(FromDigest, std::uint64_t digest);
  void init_state();

  std::uint64_t digest_;
  std::uint64_t s_[4];
};

RngStream derive_stream(std::uint64_t base_seed, std::span<const std::uint64_t> path);
RngStream derive_stream(std::uint64_t base_seed, std::initializer_list<std::uint64_t> path);

// Inverse standard-normal CDF on (0, 1). Exposed so tests can pin the sampler.
double inverse_normal_cdf(double p);

}  // namespace nesht
