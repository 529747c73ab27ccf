#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nesht/estimator.hpp"
#include "nesht/fitness.hpp"
#include "nesht/hard_threshold.hpp"

namespace nesht {

struct OptimizerConfig {
  double alpha = 0.01;          // step size, > 0
  int T = 1;                    // iteration budget, >= 1
  EstimatorConfig est;
  std::optional<HtConfig> ht;   // absent = vanilla (no truncation)
  std::uint64_t base_seed = 0;
  int eval_rollouts = 8;        // per-step evaluation at the truncated iterate
  int group_size = 0;           // 0 = whole vector is one group
  int checkpoint_every = 0;     // 0 = disabled
  std::string checkpoint_dir;   // required when checkpoint_every > 0
  std::optional<ParamVector> theta0;  // default all-zero
  double divergence_linf = 1e12;
};

struct OptimizerState {
  ParamVector theta;
  int t = 0;
  std::optional<ParamVector> last_half_step;  // theta_{t-1} + alpha*g, pre-trunc
};

struct StepRow {
  double score = 0.0;   // mean of eval_rollouts rollouts at the new iterate
  double proxy = 0.0;   // ||theta_{t+1} - theta_t|| / alpha
  int l0 = 0;
  std::vector<double> group_norms;
};

struct RunRecord {
  std::vector<StepRow> steps;   // one row per executed step
  ParamVector final_theta;
  OptimizerConfig config;       // snapshot
  int group_size = 0;           // group size the norms were recorded at
  double wall_time_s = 0.0;
};

struct RunResult {
  RunRecord record;
  bool completed = false;
  std::string error;  // diagnostic dump when aborted, empty otherwise
};

// Gradient-mapping magnitude ||after - before|| / alpha.
double stationarity_proxy(const ParamVector& before, const ParamVector& after,
                          double alpha);

// One update theta_{t+1} = trunc(theta_t + alpha * g_hat, k) using streams
// (base_seed, [state.t, ., .]). Pure in (state, cfg, problem).
OptimizerState step(const FitnessProblem& problem, const OptimizerState& state,
                    const OptimizerConfig& cfg);

// T-step run from theta0 (truncated once up front when ht is set). Aborts on
// a non-finite or divergent iterate (||theta||_inf > divergence_linf) with a
// diagnostic message and the partial record preserved.
RunResult run(const FitnessProblem& problem, const OptimizerConfig& cfg,
              std::optional<OptimizerState> resume = std::nullopt);

// Checkpoints: JSON snapshot of (t, theta, last_half_step, config hash).
// Doubles survive the round trip exactly; resuming from a checkpoint with the
// same config continues bit-identically to the uninterrupted run.
struct Checkpoint {
  OptimizerState state;
  std::uint64_t config_hash = 0;
};

std::uint64_t optimizer_config_hash(const OptimizerConfig& cfg);
void save_checkpoint(const std::string& path, const OptimizerState& state,
                     std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nesht
