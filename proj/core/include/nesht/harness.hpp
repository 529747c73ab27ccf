#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nesht/fitness.hpp"
#include "nesht/optimizer.hpp"
#include "nesht/sparsity.hpp"

namespace nesht {

// Invalid or inconsistent configuration: CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Filesystem failure: CLI exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RunMode { kRun, kSweep, kTheoryCheck, kVarianceProbe };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

// Problem section of a config. Interpreted by make_problem according to
// `name`; fields irrelevant to a given problem must be absent in the JSON.
struct ProblemSpec {
  std::string name;
  int d = 0;                 // bounded_step, sparse_quadratic
  int d0 = 0;                // bandit, chain: real feature count
  int k_star = 0;
  int noise_ratio = 0;       // distractor features per real feature
  int horizon = 1;
  double sigma_x = 1.0;
  double scale = 1.0;
  double noise_std = 0.0;
  double radius = 1.0;
  double reward_clip = 25.0;
  double reward_mask_p = 0.0;
  std::uint64_t problem_seed = 0;
};

struct BuiltProblem {
  std::shared_ptr<const FitnessProblem> problem;
  std::optional<SparsityMask> true_support;
  std::optional<ParamVector> theta_star;
};

BuiltProblem make_problem(const ProblemSpec& spec);

struct TheorySection {
  int d = 8;
  double sigma = 1.0;
  int reps = 2000;
  std::uint64_t oracle_samples = 200000;
  int pairs = 100;
  std::uint64_t probe_samples = 20000;
  std::uint64_t seed = 1;
};

struct VarianceSection {
  std::vector<int> grid_n{1, 4};
  std::vector<int> grid_N{1, 4};
  std::vector<double> sigmas{0.5, 1.0};
  int reps = 2000;
  int theta_samples = 2;
  double theta_spread = 1.0;
  std::uint64_t oracle_samples = 200000;
  std::uint64_t seed = 1;
};

// Parsed experiment configuration. The JSON schema is strict: unknown keys
// anywhere are rejected, as are sections that do not belong to the mode.
struct ExperimentConfig {
  int schema_version = 1;
  RunMode mode = RunMode::kRun;
  ProblemSpec problem;

  // optimizer section
  double alpha = 0.01;
  int steps = 1;
  double sigma = 1.0;
  int perturbations = 1;            // n
  int rollouts_per_perturbation = 1; // N
  int eval_rollouts = 8;
  int checkpoint_every = 0;

  std::optional<double> ht_beta;    // exactly one of beta/k, or neither
  std::optional<int> ht_k;
  std::vector<double> sweep_betas;  // sweep mode
  std::vector<std::uint64_t> seeds;
  int group_size = 0;               // 0 = single group
  std::string out_dir;              // overridable by --out / NESHT_OUT

  TheorySection theory;             // theory-check mode
  VarianceSection variance;         // variance-probe mode

  std::string canonical_json;       // sorted-key dump, input to config_hash
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// FNV-1a 64 over the canonical (sorted-key) JSON dump, as a hex string.
std::string config_hash(const ExperimentConfig& cfg);

struct SupportMetrics {
  double recall = 0.0;     // |support(theta) ∩ S| / |S|
  double precision = 0.0;  // |support(theta) ∩ S| / max(1, |support(theta)|)
};

SupportMetrics support_metrics(const ParamVector& theta,
                               const SparsityMask& truth);

struct SummaryRow {
  std::string problem;
  double beta = 0.0;  // 0 for vanilla runs
  std::uint64_t seed = 0;
  double final_score = 0.0;
  double mean_last10 = 0.0;
  double final_proxy = 0.0;
  std::optional<double> support_recall;
  std::optional<double> support_precision;
  std::optional<double> dist_theta_star;
  double wall_time_s = 0.0;  // only column exempt from byte-identity
};

struct RunOptions {
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_dir_override;
};

struct ExperimentResult {
  bool ok = true;            // theory-check / variance-probe verdict
  std::vector<SummaryRow> rows;
  std::vector<std::string> trajectory_files;
  std::string summary_file;
  std::string manifest_file;
  std::string report;        // human-readable table (theory/variance modes)
  std::string error;         // aggregate run failures, empty when clean
};

// Runs the experiment and persists artifacts into the resolved output
// directory: per-run trajectory and heatmap CSVs, summary.csv, manifest.json,
// and error.json on failure. Seeds (and sweep betas) run concurrently under
// options.workers; artifacts are written via temp-file + rename and are
// byte-identical for identical (config, seeds) regardless of worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options = {});

// Step-by-group matrix of L1 norms with a header row; re-import returns the
// numerically identical matrix.
void heatmap_export(const RunRecord& record, int group_size,
                    const std::string& path);
std::vector<std::vector<double>> heatmap_import(const std::string& path);

}  // namespace nesht
