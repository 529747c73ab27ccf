#include <benchmark/benchmark.h>

#include "nesht/estimator.hpp"
#include "nesht/hard_threshold.hpp"
#include "nesht/param_vector.hpp"
#include "nesht/problems.hpp"
#include "nesht/rng.hpp"

namespace nesht {
namespace {

void BM_NextNormal(benchmark::State& state) {
  RngStream rng(1);
  double sink = 0.0;
  for (auto _ : state) sink += rng.next_normal();
  benchmark::DoNotOptimize(sink);
}
BENCHMARK(BM_NextNormal);

void BM_Trunc(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  RngStream rng(2);
  ParamVector theta = zeros(d);
  for (int i = 0; i < d; ++i) theta[i] = rng.next_normal();
  const int k = d / 10 + 1;
  for (auto _ : state) {
    ParamVector out = trunc(theta, k);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * d);
}
BENCHMARK(BM_Trunc)->Arg(1024)->Arg(262144);

void BM_AveragedEstimate(benchmark::State& state) {
  SparseQuadratic problem(static_cast<int>(state.range(0)), 3, 1.0, 0.1, 7);
  EstimatorConfig cfg;
  cfg.sigma = 0.5;
  cfg.n = static_cast<int>(state.range(1));
  const ParamVector theta = zeros(problem.dim());
  const RngStream root(3);
  std::uint64_t t = 0;
  for (auto _ : state) {
    GradientEstimate est = averaged_estimate(problem, theta, cfg, root.child(t++));
    benchmark::DoNotOptimize(est.g.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.n);
}
BENCHMARK(BM_AveragedEstimate)->Args({32, 8})->Args({256, 16});

void BM_ChainRollout(benchmark::State& state) {
  MultiStepChain chain(11, 11, 6, 1.0, 60.0, 0.5, 17, 10);
  const ParamVector theta = zeros(chain.dim());
  RngStream rng(4);
  double sink = 0.0;
  for (auto _ : state) sink += chain.rollout(theta, rng);
  benchmark::DoNotOptimize(sink);
}
BENCHMARK(BM_ChainRollout);

}  // namespace
}  // namespace nesht

BENCHMARK_MAIN();
