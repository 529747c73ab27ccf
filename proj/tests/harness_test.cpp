#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "nesht/csv.hpp"
#include "nesht/harness.hpp"
#include "nesht/sparsity.hpp"

namespace nesht {
namespace {

namespace fs = std::filesystem;

std::string temp_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / "nesht_harness_test" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Summary minus its wall-time column (the one field allowed to vary).
std::string summary_without_wall_time(const std::string& path) {
  std::istringstream in(read_file(path));
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    out << line.substr(0, cut) << "\n";
  }
  return out.str();
}

std::string run_config_json(const std::string& extra) {
  return R"({
    "schema_version": 1,
    "mode": "run",
    "problem": {"name": "sparse_quadratic", "d": 6, "k_star": 2, "scale": 1.0,
                "noise_std": 0.2, "problem_seed": 5},
    "optimizer": {"alpha": 0.05, "steps": 6, "sigma": 0.5, "perturbations": 4,
                  "rollouts_per_perturbation": 1, "eval_rollouts": 2},
    "seeds": [1, 2],
    "group_size": 3)" +
         extra + "\n}";
}

TEST(Parse, MinimalRunConfigAndDefaults) {
  const std::string text = R"({
    "schema_version": 1,
    "mode": "run",
    "problem": {"name": "bounded_step", "d": 2, "radius": 1.5},
    "optimizer": {"alpha": 0.1, "steps": 3, "sigma": 1.0, "perturbations": 2},
    "seeds": [7]
  })";
  const ExperimentConfig cfg = parse_experiment_config(text);
  EXPECT_EQ(cfg.mode, RunMode::kRun);
  EXPECT_EQ(cfg.problem.name, "bounded_step");
  EXPECT_EQ(cfg.rollouts_per_perturbation, 1);
  EXPECT_EQ(cfg.eval_rollouts, 8);
  EXPECT_EQ(cfg.group_size, 0);
  EXPECT_FALSE(cfg.ht_beta || cfg.ht_k);
  ASSERT_EQ(cfg.seeds.size(), 1u);
  EXPECT_EQ(cfg.seeds[0], 7u);
}

TEST(Parse, RejectsUnknownAndMalformedKeys) {
  EXPECT_THROW(parse_experiment_config("not json"), ConfigError);
  EXPECT_THROW(parse_experiment_config("[1,2]"), ConfigError);
  EXPECT_THROW(parse_experiment_config(run_config_json(", \"surprise\": 1")),
               ConfigError);
  // unknown key inside a section
  EXPECT_THROW(
      parse_experiment_config(run_config_json(", \"ht\": {\"beta\": 0.5, \"x\": 1}")),
      ConfigError);
  // both beta and k
  EXPECT_THROW(
      parse_experiment_config(run_config_json(", \"ht\": {\"beta\": 0.5, \"k\": 2}")),
      ConfigError);
  // neither beta nor k
  EXPECT_THROW(parse_experiment_config(run_config_json(", \"ht\": {}")),
               ConfigError);
  // beta out of range
  EXPECT_THROW(
      parse_experiment_config(run_config_json(", \"ht\": {\"beta\": 1.0}")),
      ConfigError);
  // sweep section not allowed in run mode
  EXPECT_THROW(
      parse_experiment_config(run_config_json(", \"sweep\": {\"betas\": [0.5]}")),
      ConfigError);
}

TEST(Parse, RejectsBadTypesAndValues) {
  std::string bad_alpha = run_config_json("");
  bad_alpha.replace(bad_alpha.find("\"alpha\": 0.05"), 13, "\"alpha\": \"x\"");
  EXPECT_THROW(parse_experiment_config(bad_alpha), ConfigError);

  std::string bad_schema = run_config_json("");
  bad_schema.replace(bad_schema.find("\"schema_version\": 1"), 19,
                     "\"schema_version\": 2");
  EXPECT_THROW(parse_experiment_config(bad_schema), ConfigError);

  std::string dup_seeds = run_config_json("");
  dup_seeds.replace(dup_seeds.find("\"seeds\": [1, 2]"), 15, "\"seeds\": [1, 1]");
  EXPECT_THROW(parse_experiment_config(dup_seeds), ConfigError);

  std::string no_seeds = run_config_json("");
  no_seeds.replace(no_seeds.find("\"seeds\": [1, 2]"), 15, "\"seeds\": []");
  EXPECT_THROW(parse_experiment_config(no_seeds), ConfigError);

  std::string bad_problem = run_config_json("");
  bad_problem.replace(bad_problem.find("sparse_quadratic"), 16, "unknown_problem_");
  EXPECT_THROW(parse_experiment_config(bad_problem), ConfigError);

  std::string bad_mode = run_config_json("");
  bad_mode.replace(bad_mode.find("\"mode\": \"run\""), 13, "\"mode\": \"xxx\"");
  EXPECT_THROW(parse_experiment_config(bad_mode), ConfigError);
}

TEST(Parse, SweepRequiresBetasAndForbidsHt) {
  const std::string text = R"({
    "schema_version": 1,
    "mode": "sweep",
    "problem": {"name": "sparse_quadratic", "d": 6, "k_star": 2, "problem_seed": 5},
    "optimizer": {"alpha": 0.05, "steps": 3, "sigma": 0.5, "perturbations": 2},
    "seeds": [1],
    "sweep": {"betas": [0.0, 0.5]}
  })";
  const ExperimentConfig cfg = parse_experiment_config(text);
  ASSERT_EQ(cfg.sweep_betas.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.sweep_betas[1], 0.5);

  std::string no_sweep = text;
  no_sweep.erase(no_sweep.find(",\n    \"sweep\": {\"betas\": [0.0, 0.5]}"), 37);
  EXPECT_THROW(parse_experiment_config(no_sweep), ConfigError);

  std::string dup = text;
  dup.replace(dup.find("[0.0, 0.5]"), 10, "[0.5, 0.5]");
  EXPECT_THROW(parse_experiment_config(dup), ConfigError);
}

TEST(Parse, ConfigHashIsKeyOrderIndependent) {
  const std::string a = R"({"schema_version": 1, "mode": "theory-check",
                            "theory": {"d": 4, "reps": 100}})";
  const std::string b = R"({"theory": {"reps": 100, "d": 4}, "mode": "theory-check",
                            "schema_version": 1})";
  EXPECT_EQ(config_hash(parse_experiment_config(a)),
            config_hash(parse_experiment_config(b)));
  const std::string c = R"({"schema_version": 1, "mode": "theory-check",
                            "theory": {"d": 5, "reps": 100}})";
  EXPECT_NE(config_hash(parse_experiment_config(a)),
            config_hash(parse_experiment_config(c)));
}

TEST(Parse, LoadFromDiskAndMissingFile) {
  const std::string dir = temp_dir("load");
  const std::string path = dir + "/cfg.json";
  std::ofstream(path) << run_config_json("");
  const ExperimentConfig cfg = load_experiment_config(path);
  EXPECT_EQ(cfg.mode, RunMode::kRun);
  EXPECT_THROW(load_experiment_config(dir + "/absent.json"), IoError);
}

TEST(SupportMetricsTest, PinnedCases) {
  const SparsityMask truth = make_mask({0, 1}, 2, 4);
  {
    const SupportMetrics m = support_metrics(ParamVector{1.0, 0.0, 1.0, 0.0}, truth);
    EXPECT_DOUBLE_EQ(m.recall, 0.5);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
  }
  {
    const SupportMetrics m = support_metrics(zeros(4), truth);
    EXPECT_DOUBLE_EQ(m.recall, 0.0);
    EXPECT_DOUBLE_EQ(m.precision, 0.0);
  }
  {
    const SupportMetrics m = support_metrics(ParamVector{1.0, -1.0, 0.0, 0.0}, truth);
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
  }
  {
    const SupportMetrics m = support_metrics(ParamVector{1.0, 1.0, 1.0, 1.0}, truth);
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
  }
  SparsityMask empty;
  empty.k = 1;
  EXPECT_THROW(support_metrics(zeros(4), empty), std::invalid_argument);
}

TEST(Experiment, ArtifactsExistAndSummaryMatchesTrajectories) {
  const std::string out = temp_dir("artifacts");
  const ExperimentConfig cfg =
      parse_experiment_config(run_config_json(", \"ht\": {\"beta\": 0.5}"));
  RunOptions options;
  options.out_dir_override = out;
  const ExperimentResult result = run_experiment(cfg, options);
  EXPECT_TRUE(result.error.empty()) << result.error;
  ASSERT_EQ(result.rows.size(), 2u);
  ASSERT_EQ(result.trajectory_files.size(), 2u);

  for (const auto& f : result.trajectory_files) EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_TRUE(fs::exists(result.summary_file));
  EXPECT_TRUE(fs::exists(result.manifest_file));

  const CsvTable summary = read_csv(result.summary_file);
  ASSERT_EQ(summary.rows.size(), 2u);
  ASSERT_EQ(summary.header.size(), 10u);
  for (std::size_t j = 0; j < 2; ++j) {
    const CsvTable traj = read_csv(result.trajectory_files[j]);
    ASSERT_EQ(traj.rows.size(), 6u);  // one row per step
    ASSERT_EQ(traj.header.size(), 4u + 2u);  // step,score,proxy,l0 + 2 groups

    // final_score and final_proxy reproduce the last trajectory row.
    EXPECT_EQ(summary.rows[j][3], traj.rows.back()[1]);
    EXPECT_EQ(summary.rows[j][7], traj.rows.back()[2]);

    // mean_last10 equals the recomputed mean over the recorded scores.
    double s = 0.0;
    for (const auto& row : traj.rows) s += parse_double(row[1]);
    EXPECT_EQ(summary.rows[j][4], format_double(s / traj.rows.size()));

    // feasibility: l0 column bounded by k = k_from_ratio(6, 0.5) = 3
    for (const auto& row : traj.rows) EXPECT_LE(parse_double(row[3]), 3.0);
  }

  const nlohmann::json manifest = nlohmann::json::parse(read_file(result.manifest_file));
  EXPECT_EQ(manifest.at("mode").get<std::string>(), "run");
  EXPECT_EQ(manifest.at("config_hash").get<std::string>(), config_hash(cfg));
  EXPECT_EQ(manifest.at("runs").size(), 2u);
}

TEST(Experiment, RerunsAreByteIdenticalUpToWallTime) {
  const ExperimentConfig cfg =
      parse_experiment_config(run_config_json(", \"ht\": {\"beta\": 0.5}"));
  const std::string out_a = temp_dir("rerun_a");
  const std::string out_b = temp_dir("rerun_b");
  RunOptions oa, ob;
  oa.out_dir_override = out_a;
  ob.out_dir_override = out_b;
  const ExperimentResult ra = run_experiment(cfg, oa);
  const ExperimentResult rb = run_experiment(cfg, ob);
  ASSERT_EQ(ra.trajectory_files.size(), rb.trajectory_files.size());
  for (std::size_t i = 0; i < ra.trajectory_files.size(); ++i) {
    EXPECT_EQ(read_file(ra.trajectory_files[i]), read_file(rb.trajectory_files[i]));
  }
  EXPECT_EQ(summary_without_wall_time(ra.summary_file),
            summary_without_wall_time(rb.summary_file));
}

TEST(Experiment, WorkerCountDoesNotChangeBytes) {
  const ExperimentConfig cfg =
      parse_experiment_config(run_config_json(", \"ht\": {\"k\": 2}"));
  const std::string out_a = temp_dir("w1");
  const std::string out_b = temp_dir("w4");
  RunOptions oa, ob;
  oa.out_dir_override = out_a;
  oa.workers = 1;
  ob.out_dir_override = out_b;
  ob.workers = 4;
  const ExperimentResult ra = run_experiment(cfg, oa);
  const ExperimentResult rb = run_experiment(cfg, ob);
  for (std::size_t i = 0; i < ra.trajectory_files.size(); ++i) {
    EXPECT_EQ(read_file(ra.trajectory_files[i]), read_file(rb.trajectory_files[i]));
  }
  EXPECT_EQ(summary_without_wall_time(ra.summary_file),
            summary_without_wall_time(rb.summary_file));

  // Single job: the worker budget moves inside the estimator instead.
  RunOptions oc, od;
  oc.out_dir_override = temp_dir("w1s");
  oc.seed_override = 1;
  od.out_dir_override = temp_dir("w4s");
  od.seed_override = 1;
  od.workers = 4;
  const ExperimentResult rc = run_experiment(cfg, oc);
  const ExperimentResult rd = run_experiment(cfg, od);
  ASSERT_EQ(rc.trajectory_files.size(), 1u);
  EXPECT_EQ(read_file(rc.trajectory_files[0]), read_file(rd.trajectory_files[0]));
}

TEST(Experiment, SweepBetaZeroMatchesExplicitVanilla) {
  const std::string sweep_text = R"({
    "schema_version": 1,
    "mode": "sweep",
    "problem": {"name": "sparse_quadratic", "d": 6, "k_star": 2, "noise_std": 0.2,
                "problem_seed": 5},
    "optimizer": {"alpha": 0.05, "steps": 6, "sigma": 0.5, "perturbations": 4,
                  "eval_rollouts": 2},
    "seeds": [3],
    "sweep": {"betas": [0.0]}
  })";
  const std::string run_text = R"({
    "schema_version": 1,
    "mode": "run",
    "problem": {"name": "sparse_quadratic", "d": 6, "k_star": 2, "noise_std": 0.2,
                "problem_seed": 5},
    "optimizer": {"alpha": 0.05, "steps": 6, "sigma": 0.5, "perturbations": 4,
                  "eval_rollouts": 2},
    "seeds": [3]
  })";
  RunOptions oa, ob;
  oa.out_dir_override = temp_dir("sweep0");
  ob.out_dir_override = temp_dir("van");
  const ExperimentResult ra = run_experiment(parse_experiment_config(sweep_text), oa);
  const ExperimentResult rb = run_experiment(parse_experiment_config(run_text), ob);
  ASSERT_EQ(ra.trajectory_files.size(), 1u);
  ASSERT_EQ(rb.trajectory_files.size(), 1u);
  EXPECT_EQ(read_file(ra.trajectory_files[0]), read_file(rb.trajectory_files[0]));
  EXPECT_EQ(summary_without_wall_time(ra.summary_file),
            summary_without_wall_time(rb.summary_file));
}

TEST(Experiment, SeedOverrideReplacesSeedList) {
  const ExperimentConfig cfg = parse_experiment_config(run_config_json(""));
  RunOptions options;
  options.out_dir_override = temp_dir("override");
  options.seed_override = 42;
  const ExperimentResult result = run_experiment(cfg, options);
  ASSERT_EQ(result.rows.size(), 1u);
  EXPECT_EQ(result.rows[0].seed, 42u);
}

TEST(Experiment, HeatmapRoundTripsExactly) {
  const ExperimentConfig cfg = parse_experiment_config(run_config_json(""));
  RunOptions options;
  options.out_dir_override = temp_dir("heatmap");
  options.seed_override = 9;
  const ExperimentResult result = run_experiment(cfg, options);
  const std::string heat =
      (fs::path(*options.out_dir_override) / "heatmap_sparse_quadratic_beta0_seed9.csv")
          .string();
  ASSERT_TRUE(fs::exists(heat));
  const auto matrix = heatmap_import(heat);
  ASSERT_EQ(matrix.size(), 6u);
  ASSERT_EQ(matrix[0].size(), 2u);  // d=6, group_size=3

  const CsvTable traj = read_csv(result.trajectory_files[0]);
  for (std::size_t t = 0; t < matrix.size(); ++t) {
    for (std::size_t g = 0; g < matrix[t].size(); ++g) {
      EXPECT_EQ(format_double(matrix[t][g]), traj.rows[t][4 + g]);
    }
  }
}

TEST(Experiment, DivergenceWritesErrorArtifacts) {
  std::string text = run_config_json("");
  text.replace(text.find("\"alpha\": 0.05"), 13, "\"alpha\": 1e9");
  const ExperimentConfig cfg = parse_experiment_config(text);
  RunOptions options;
  options.out_dir_override = temp_dir("diverge");
  options.seed_override = 1;
  const ExperimentResult result = run_experiment(cfg, options);
  EXPECT_FALSE(result.error.empty());
  EXPECT_FALSE(result.ok);
  EXPECT_TRUE(fs::exists(fs::path(*options.out_dir_override) / "error.json"));
  // Partial trajectory still lands on disk.
  ASSERT_EQ(result.trajectory_files.size(), 1u);
  EXPECT_TRUE(fs::exists(result.trajectory_files[0]));
}

TEST(Experiment, TheoryCheckModeProducesReportAndTable) {
  const std::string text = R"({
    "schema_version": 1,
    "mode": "theory-check",
    "theory": {"d": 3, "sigma": 1.0, "reps": 300, "oracle_samples": 20000,
               "pairs": 10, "probe_samples": 2000, "seed": 1}
  })";
  RunOptions options;
  options.out_dir_override = temp_dir("theory");
  const ExperimentResult result =
      run_experiment(parse_experiment_config(text), options);
  EXPECT_TRUE(result.ok) << result.report;
  EXPECT_NE(result.report.find("unbiasedness"), std::string::npos);
  EXPECT_TRUE(fs::exists(result.summary_file));
  const CsvTable table = read_csv(result.summary_file);
  EXPECT_EQ(table.header[0], "check");
  EXPECT_GE(table.rows.size(), 7u);
}

TEST(Experiment, VarianceProbeChecksBoundedProblems) {
  const std::string text = R"({
    "schema_version": 1,
    "mode": "variance-probe",
    "problem": {"name": "multi_step_chain", "d0": 3, "k_star": 1, "horizon": 2,
                "reward_clip": 8.0, "noise_std": 0.3, "problem_seed": 4},
    "variance": {"grid_n": [1, 2], "grid_N": [1], "sigmas": [0.8], "reps": 300,
                 "theta_samples": 1, "theta_spread": 0.4,
                 "oracle_samples": 20000, "seed": 2}
  })";
  RunOptions options;
  options.out_dir_override = temp_dir("varprobe");
  const ExperimentResult result =
      run_experiment(parse_experiment_config(text), options);
  EXPECT_TRUE(result.ok) << result.report;
  const CsvTable table = read_csv(result.summary_file);
  ASSERT_EQ(table.rows.size(), 2u);
  for (const auto& row : table.rows) {
    EXPECT_EQ(row.back(), "1");  // bound available and satisfied
  }
}

}  // namespace
}  // namespace nesht
