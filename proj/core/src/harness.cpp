#include "nesht/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nesht/csv.hpp"
#include "nesht/hard_threshold.hpp"
#include "nesht/hashing.hpp"
#include "nesht/parallel.hpp"
#include "nesht/problems.hpp"
#include "nesht/theory.hpp"

namespace nesht {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- strict JSON field access ----

void require_object(const json& j, const char* where) {
  if (!j.is_object()) {
    throw ConfigError(std::string(where) + ": expected a JSON object");
  }
}

void reject_unknown_keys(const json& obj, const char* where,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
    }
  }
}

const json& require_key(const json& obj, const char* where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError(std::string(where) + ": missing required key '" + key + "'");
  }
  return *it;
}

double num_field(const json& obj, const char* where, const char* key) {
  const json& v = require_key(obj, where, key);
  if (!v.is_number()) {
    throw ConfigError(std::string(where) + ": '" + key + "' must be a number");
  }
  return v.get<double>();
}

double num_field_or(const json& obj, const char* where, const char* key,
                    double fallback) {
  if (!obj.contains(key)) return fallback;
  return num_field(obj, where, key);
}

int int_field(const json& obj, const char* where, const char* key) {
  const json& v = require_key(obj, where, key);
  if (!v.is_number_integer()) {
    throw ConfigError(std::string(where) + ": '" + key + "' must be an integer");
  }
  return v.get<int>();
}

int int_field_or(const json& obj, const char* where, const char* key,
                 int fallback) {
  if (!obj.contains(key)) return fallback;
  return int_field(obj, where, key);
}

std::uint64_t seed_field_or(const json& obj, const char* where, const char* key,
                            std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
    throw ConfigError(std::string(where) + ": '" + key +
                      "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string str_field(const json& obj, const char* where, const char* key) {
  const json& v = require_key(obj, where, key);
  if (!v.is_string()) {
    throw ConfigError(std::string(where) + ": '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

// ---- mode and sections ----

ProblemSpec parse_problem(const json& obj) {
  require_object(obj, "problem");
  ProblemSpec spec;
  spec.name = str_field(obj, "problem", "name");
  if (spec.name == "sparse_quadratic") {
    reject_unknown_keys(obj, "problem",
                        {"name", "d", "k_star", "scale", "noise_std", "problem_seed"});
    spec.d = int_field(obj, "problem", "d");
    spec.k_star = int_field(obj, "problem", "k_star");
    spec.scale = num_field_or(obj, "problem", "scale", 1.0);
    spec.noise_std = num_field_or(obj, "problem", "noise_std", 0.0);
  } else if (spec.name == "noisy_linear_bandit") {
    reject_unknown_keys(
        obj, "problem",
        {"name", "d0", "k_star", "sigma_x", "noise_ratio", "problem_seed"});
    spec.d0 = int_field(obj, "problem", "d0");
    spec.k_star = int_field(obj, "problem", "k_star");
    spec.sigma_x = num_field_or(obj, "problem", "sigma_x", 1.0);
    spec.noise_ratio = int_field_or(obj, "problem", "noise_ratio", 0);
  } else if (spec.name == "bounded_step") {
    reject_unknown_keys(obj, "problem", {"name", "d", "radius"});
    spec.d = int_field(obj, "problem", "d");
    spec.radius = num_field_or(obj, "problem", "radius", 1.0);
  } else if (spec.name == "multi_step_chain") {
    reject_unknown_keys(obj, "problem",
                        {"name", "d0", "k_star", "horizon", "sigma_x", "reward_clip",
                         "noise_std", "noise_ratio", "reward_mask_p", "problem_seed"});
    spec.d0 = int_field(obj, "problem", "d0");
    spec.k_star = int_field(obj, "problem", "k_star");
    spec.horizon = int_field(obj, "problem", "horizon");
    spec.sigma_x = num_field_or(obj, "problem", "sigma_x", 1.0);
    spec.reward_clip = num_field_or(obj, "problem", "reward_clip", 25.0);
    spec.noise_std = num_field_or(obj, "problem", "noise_std", 0.0);
    spec.noise_ratio = int_field_or(obj, "problem", "noise_ratio", 0);
    spec.reward_mask_p = num_field_or(obj, "problem", "reward_mask_p", 0.0);
  } else {
    throw ConfigError("problem: unknown problem '" + spec.name + "'");
  }
  spec.problem_seed = seed_field_or(obj, "problem", "problem_seed", 0);
  return spec;
}

void parse_optimizer(const json& obj, ExperimentConfig& cfg) {
  require_object(obj, "optimizer");
  reject_unknown_keys(obj, "optimizer",
                      {"alpha", "steps", "sigma", "perturbations",
                       "rollouts_per_perturbation", "eval_rollouts",
                       "checkpoint_every"});
  cfg.alpha = num_field(obj, "optimizer", "alpha");
  cfg.steps = int_field(obj, "optimizer", "steps");
  cfg.sigma = num_field(obj, "optimizer", "sigma");
  cfg.perturbations = int_field(obj, "optimizer", "perturbations");
  cfg.rollouts_per_perturbation =
      int_field_or(obj, "optimizer", "rollouts_per_perturbation", 1);
  cfg.eval_rollouts = int_field_or(obj, "optimizer", "eval_rollouts", 8);
  cfg.checkpoint_every = int_field_or(obj, "optimizer", "checkpoint_every", 0);
  if (!(cfg.alpha > 0.0)) throw ConfigError("optimizer: alpha must be > 0");
  if (cfg.steps < 1) throw ConfigError("optimizer: steps must be >= 1");
  if (!(cfg.sigma > 0.0)) throw ConfigError("optimizer: sigma must be > 0");
  if (cfg.perturbations < 1) {
    throw ConfigError("optimizer: perturbations must be >= 1");
  }
  if (cfg.rollouts_per_perturbation < 1) {
    throw ConfigError("optimizer: rollouts_per_perturbation must be >= 1");
  }
  if (cfg.eval_rollouts < 1) {
    throw ConfigError("optimizer: eval_rollouts must be >= 1");
  }
  if (cfg.checkpoint_every < 0) {
    throw ConfigError("optimizer: checkpoint_every must be >= 0");
  }
}

void parse_seeds(const json& arr, ExperimentConfig& cfg) {
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("seeds: expected a non-empty array");
  }
  std::set<std::uint64_t> seen;
  for (const auto& s : arr) {
    if (!s.is_number_integer() || s.get<long long>() < 0) {
      throw ConfigError("seeds: entries must be non-negative integers");
    }
    const auto seed = s.get<std::uint64_t>();
    if (!seen.insert(seed).second) {
      throw ConfigError("seeds: duplicate seed " + std::to_string(seed));
    }
    cfg.seeds.push_back(seed);
  }
}

void parse_theory(const json& obj, TheorySection& t) {
  require_object(obj, "theory");
  reject_unknown_keys(obj, "theory",
                      {"d", "sigma", "reps", "oracle_samples", "pairs",
                       "probe_samples", "seed"});
  t.d = int_field_or(obj, "theory", "d", t.d);
  t.sigma = num_field_or(obj, "theory", "sigma", t.sigma);
  t.reps = int_field_or(obj, "theory", "reps", t.reps);
  t.oracle_samples = seed_field_or(obj, "theory", "oracle_samples", t.oracle_samples);
  t.pairs = int_field_or(obj, "theory", "pairs", t.pairs);
  t.probe_samples = seed_field_or(obj, "theory", "probe_samples", t.probe_samples);
  t.seed = seed_field_or(obj, "theory", "seed", t.seed);
  if (t.d < 1 || !(t.sigma > 0.0) || t.reps < 16 || t.pairs < 2) {
    throw ConfigError("theory: invalid section values");
  }
}

void parse_variance(const json& obj, VarianceSection& v) {
  require_object(obj, "variance");
  reject_unknown_keys(obj, "variance",
                      {"grid_n", "grid_N", "sigmas", "reps", "theta_samples",
                       "theta_spread", "oracle_samples", "seed"});
  const auto parse_int_array = [&](const char* key, std::vector<int>& out) {
    if (!obj.contains(key)) return;
    const json& arr = obj.at(key);
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError(std::string("variance: '") + key + "' must be a non-empty array");
    }
    out.clear();
    for (const auto& x : arr) {
      if (!x.is_number_integer() || x.get<int>() < 1) {
        throw ConfigError(std::string("variance: '") + key + "' entries must be >= 1");
      }
      out.push_back(x.get<int>());
    }
  };
  parse_int_array("grid_n", v.grid_n);
  parse_int_array("grid_N", v.grid_N);
  if (obj.contains("sigmas")) {
    const json& arr = obj.at("sigmas");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("variance: 'sigmas' must be a non-empty array");
    }
    v.sigmas.clear();
    for (const auto& x : arr) {
      if (!x.is_number() || !(x.get<double>() > 0.0)) {
        throw ConfigError("variance: 'sigmas' entries must be > 0");
      }
      v.sigmas.push_back(x.get<double>());
    }
  }
  v.reps = int_field_or(obj, "variance", "reps", v.reps);
  v.theta_samples = int_field_or(obj, "variance", "theta_samples", v.theta_samples);
  v.theta_spread = num_field_or(obj, "variance", "theta_spread", v.theta_spread);
  v.oracle_samples = seed_field_or(obj, "variance", "oracle_samples", v.oracle_samples);
  v.seed = seed_field_or(obj, "variance", "seed", v.seed);
  if (v.reps < 16 || v.theta_samples < 1 || !(v.theta_spread > 0.0)) {
    throw ConfigError("variance: invalid section values");
  }
}

std::string beta_tag(double beta) { return format_double(beta); }

std::string opt_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::string iso_time_utc() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct Job {
  double beta = 0.0;
  std::optional<int> k;
  std::uint64_t seed = 0;
  std::string tag;
};

struct TheoryRow {
  std::string check;
  double measured = 0.0;
  double bound = 0.0;
  double se = 0.0;
  bool pass = false;
};

void write_check_table(const std::string& path, const std::vector<TheoryRow>& rows) {
  CsvTable table;
  table.header = {"check", "measured", "bound", "se", "pass"};
  for (const auto& r : rows) {
    table.rows.push_back({r.check, format_double(r.measured), format_double(r.bound),
                          format_double(r.se), r.pass ? "1" : "0"});
  }
  write_csv_atomic(path, table);
}

std::string render_report(const std::vector<TheoryRow>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    out << (r.pass ? "PASS " : "FAIL ") << r.check
        << "  measured=" << format_double(r.measured)
        << "  bound=" << format_double(r.bound) << "  se=" << format_double(r.se)
        << "\n";
  }
  return out.str();
}

void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                    const RunOptions& options, const json& runs,
                    double total_wall_s) {
  json m;
  m["schema_version"] = 1;
  m["tool"] = "nesht";
  m["version"] = kVersion;
  m["mode"] = to_string(cfg.mode);
  m["config_hash"] = config_hash(cfg);
  m["config"] = json::parse(cfg.canonical_json);
  m["workers"] = options.workers;
  m["runs"] = runs;
  m["total_wall_time_s"] = total_wall_s;
  m["created"] = iso_time_utc();
  write_file_atomic(path, m.dump(2) + "\n");
}

void write_error_json(const std::string& out_dir, const std::string& kind,
                      const std::vector<std::string>& messages) {
  json e;
  e["error"] = kind;
  e["messages"] = messages;
  write_file_atomic((fs::path(out_dir) / "error.json").string(), e.dump(2) + "\n");
}

// ---- theory-check mode ----

ExperimentResult theory_check_experiment(const ExperimentConfig& cfg,
                                         const std::string& out_dir) {
  const TheorySection& T = cfg.theory;
  const auto t_start = std::chrono::steady_clock::now();
  std::vector<TheoryRow> rows;

  const int d = T.d;
  BoundedStep step_problem(zeros(d), std::sqrt(static_cast<double>(d)));
  SparseQuadratic quad(d, std::max(1, d / 4), 1.0, 0.5, 3);
  RngStream root(T.seed);

  // Unbiasedness: per-coordinate z-scores of the mean estimate against the
  // exact smoothed gradient of the quadratic.
  {
    double max_z = 0.0;
    for (int which = 0; which < 3; ++which) {
      RngStream theta_stream = root.child(10 + which);
      ParamVector theta(d);
      for (auto& x : theta) x = 0.5 * theta_stream.next_normal();
      const auto exact = quad.exact_smoothed(theta, T.sigma);

      std::vector<double> mean(d, 0.0), m2(d, 0.0);
      EstimatorConfig ecfg;
      ecfg.sigma = T.sigma;
      for (int r = 0; r < T.reps; ++r) {
        const GradientEstimate est =
            averaged_estimate(quad, theta, ecfg, theta_stream.child(r));
        for (int c = 0; c < d; ++c) {
          const double delta = est.g[c] - mean[c];
          mean[c] += delta / (r + 1);
          m2[c] += delta * (est.g[c] - mean[c]);
        }
      }
      for (int c = 0; c < d; ++c) {
        const double se = std::sqrt(m2[c] / (T.reps - 1) / T.reps);
        max_z = std::max(max_z, std::abs(mean[c] - exact->grad[c]) / se);
      }
    }
    rows.push_back({"unbiasedness_max_z", max_z, 4.0, 0.0, max_z <= 4.0});
  }

  // Lemma 1: measured gradient-difference ratios against (d+1)B/sigma^2.
  {
    LipschitzProbeConfig pc;
    pc.pairs = T.pairs;
    pc.samples = T.probe_samples;
    RngStream probe_rng = root.child(20);
    const LipschitzProbe probe = lipschitz_probe(step_problem, T.sigma, pc, probe_rng);
    const double L = smoothness_constant(1.0, d, T.sigma);
    rows.push_back({"smoothness_bounded_step", probe.max_ratio,
                    L + 5.0 * probe.se_at_max, probe.se_at_max,
                    probe.max_ratio <= L + 5.0 * probe.se_at_max});

    LipschitzProbeConfig qc;
    qc.pairs = 16;
    RngStream quad_rng = root.child(21);
    const LipschitzProbe qprobe = lipschitz_probe(quad, T.sigma, qc, quad_rng);
    const double expected = 2.0;  // 2 * scale
    rows.push_back({"smoothness_quadratic_exact", qprobe.max_ratio,
                    expected + 1e-9, 0.0,
                    std::abs(qprobe.max_ratio - expected) <= 1e-9});
  }

  // Lemma 2: estimator mean-squared error under the closed bound on the
  // deterministic step problem (C = 0, B = 1).
  {
    const ParamVector theta = zeros(d);
    RngStream oracle_rng = root.child(30);
    const SmoothingEstimate ref =
        smoothing_oracle(step_problem, theta, T.sigma, T.oracle_samples, oracle_rng);
    double oracle_err2 = 0.0;
    for (double se : ref.grad_se) oracle_err2 += se * se;

    int cell = 0;
    for (int n : {1, 4}) {
      for (int N : {1, 4}) {
        EstimatorConfig ecfg;
        ecfg.sigma = T.sigma;
        ecfg.n = n;
        ecfg.N = N;
        const VarianceProbe probe = empirical_estimator_variance(
            step_problem, theta, ecfg, root.child(40 + cell), T.reps, ref.grad);
        const double bound = variance_bound(0.0, 1.0, d, T.sigma, n, N) +
                             oracle_err2 + 3.0 * probe.se;
        std::ostringstream name;
        name << "variance_bound_n" << n << "_N" << N;
        rows.push_back({name.str(), probe.value, bound, probe.se,
                        probe.value <= bound});
        ++cell;
      }
    }
  }

  ExperimentResult result;
  result.ok = true;
  for (const auto& r : rows) result.ok = result.ok && r.pass;
  result.report = render_report(rows);

  const std::string table_path = (fs::path(out_dir) / "theory_check.csv").string();
  write_check_table(table_path, rows);
  result.summary_file = table_path;

  const auto t_end = std::chrono::steady_clock::now();
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  json runs = json::array();
  runs.push_back({{"kind", "theory-check"}, {"table", table_path}, {"ok", result.ok}});
  write_manifest(manifest_path, cfg, RunOptions{}, runs,
                 std::chrono::duration<double>(t_end - t_start).count());
  result.manifest_file = manifest_path;
  if (!result.ok) {
    write_error_json(out_dir, "theory-check", {"one or more checks failed"});
  }
  return result;
}

// ---- variance-probe mode ----

ExperimentResult variance_probe_experiment(const ExperimentConfig& cfg,
                                           const std::string& out_dir) {
  const VarianceSection& V = cfg.variance;
  const auto t_start = std::chrono::steady_clock::now();

  BuiltProblem built;
  try {
    built = make_problem(cfg.problem);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const FitnessProblem& problem = *built.problem;
  const int d = problem.dim();
  const auto B = problem.bound_B();
  const auto C = problem.var_bound_C();

  CsvTable table;
  table.header = {"theta_id", "sigma", "n", "N", "measured", "se", "bound", "pass"};
  std::vector<TheoryRow> rows;
  RngStream root(V.seed);
  bool ok = true;

  for (int ti = 0; ti < V.theta_samples; ++ti) {
    RngStream theta_rng = root.child(ti);
    ParamVector theta(d);
    for (auto& x : theta) x = V.theta_spread * theta_rng.next_normal();

    for (double sigma : V.sigmas) {
      ParamVector ref_grad;
      double oracle_err2 = 0.0;
      if (const auto exact = problem.exact_smoothed(theta, sigma)) {
        ref_grad = exact->grad;
      } else {
        RngStream oracle_rng = theta_rng.child(1000);
        const SmoothingEstimate oracle =
            smoothing_oracle(problem, theta, sigma, V.oracle_samples, oracle_rng);
        ref_grad = oracle.grad;
        for (double se : oracle.grad_se) oracle_err2 += se * se;
      }

      int cell = 0;
      for (int n : V.grid_n) {
        for (int N : V.grid_N) {
          EstimatorConfig ecfg;
          ecfg.sigma = sigma;
          ecfg.n = n;
          ecfg.N = N;
          const VarianceProbe probe = empirical_estimator_variance(
              problem, theta, ecfg, theta_rng.child(2000 + cell), V.reps, ref_grad);
          std::vector<std::string> row{
              std::to_string(ti), format_double(sigma), std::to_string(n),
              std::to_string(N),  format_double(probe.value),
              format_double(probe.se)};
          if (B && C) {
            const double bound = variance_bound(*C, *B, d, sigma, n, N) +
                                 oracle_err2 + 3.0 * probe.se;
            const bool pass = probe.value <= bound;
            ok = ok && pass;
            row.push_back(format_double(bound));
            row.push_back(pass ? "1" : "0");
            std::ostringstream name;
            name << "theta" << ti << "_sigma" << format_double(sigma) << "_n" << n
                 << "_N" << N;
            rows.push_back({name.str(), probe.value, bound, probe.se, pass});
          } else {
            row.push_back("");
            row.push_back("");
          }
          table.rows.push_back(std::move(row));
          ++cell;
        }
      }
    }
  }

  ExperimentResult result;
  result.ok = ok;
  result.report = rows.empty()
                      ? std::string("no closed-form bound available; measurements only\n")
                      : render_report(rows);
  const std::string table_path = (fs::path(out_dir) / "variance_probe.csv").string();
  write_csv_atomic(table_path, table);
  result.summary_file = table_path;

  const auto t_end = std::chrono::steady_clock::now();
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  json runs = json::array();
  runs.push_back({{"kind", "variance-probe"}, {"table", table_path}, {"ok", ok}});
  write_manifest(manifest_path, cfg, RunOptions{}, runs,
                 std::chrono::duration<double>(t_end - t_start).count());
  result.manifest_file = manifest_path;
  if (!ok) {
    write_error_json(out_dir, "variance-probe", {"bound violation in grid"});
  }
  return result;
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kRun: return "run";
    case RunMode::kSweep: return "sweep";
    case RunMode::kTheoryCheck: return "theory-check";
    case RunMode::kVarianceProbe: return "variance-probe";
  }
  return "run";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "run") return RunMode::kRun;
  if (s == "sweep") return RunMode::kSweep;
  if (s == "theory-check") return RunMode::kTheoryCheck;
  if (s == "variance-probe") return RunMode::kVarianceProbe;
  throw ConfigError("mode: expected run|sweep|theory-check|variance-probe, got '" +
                    s + "'");
}

BuiltProblem make_problem(const ProblemSpec& spec) {
  BuiltProblem built;
  if (spec.name == "sparse_quadratic") {
    auto p = std::make_shared<SparseQuadratic>(spec.d, spec.k_star, spec.scale,
                                               spec.noise_std, spec.problem_seed);
    built.theta_star = p->theta_star();
    if (spec.k_star > 0) built.true_support = p->true_support();
    built.problem = std::move(p);
  } else if (spec.name == "noisy_linear_bandit") {
    auto p = std::make_shared<NoisyLinearBandit>(
        spec.d0, spec.k_star, spec.sigma_x, spec.problem_seed, spec.noise_ratio);
    built.theta_star = p->theta_star();
    if (spec.k_star > 0) built.true_support = p->true_support();
    built.problem = std::move(p);
  } else if (spec.name == "bounded_step") {
    if (spec.d < 1) throw std::invalid_argument("bounded_step: d must be >= 1");
    built.problem = std::make_shared<BoundedStep>(zeros(spec.d), spec.radius);
  } else if (spec.name == "multi_step_chain") {
    auto chain = std::make_shared<MultiStepChain>(
        spec.d0, spec.k_star, spec.horizon, spec.sigma_x, spec.reward_clip,
        spec.noise_std, spec.problem_seed, spec.noise_ratio);
    built.theta_star = chain->theta_star();
    if (spec.k_star > 0) built.true_support = chain->true_support();
    if (spec.reward_mask_p > 0.0) {
      built.problem =
          std::make_shared<SparseRewardMask>(chain, spec.reward_mask_p);
    } else {
      built.problem = std::move(chain);
    }
  } else {
    throw std::invalid_argument("make_problem: unknown problem '" + spec.name + "'");
  }
  return built;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  require_object(root, "config");

  ExperimentConfig cfg;
  cfg.canonical_json = root.dump();

  const int schema = int_field(root, "config", "schema_version");
  if (schema != 1) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(schema));
  }
  cfg.schema_version = schema;
  cfg.mode = run_mode_from_string(str_field(root, "config", "mode"));

  switch (cfg.mode) {
    case RunMode::kRun:
      reject_unknown_keys(root, "config",
                          {"schema_version", "mode", "out_dir", "seeds", "group_size",
                           "problem", "optimizer", "ht"});
      break;
    case RunMode::kSweep:
      reject_unknown_keys(root, "config",
                          {"schema_version", "mode", "out_dir", "seeds", "group_size",
                           "problem", "optimizer", "sweep"});
      break;
    case RunMode::kTheoryCheck:
      reject_unknown_keys(root, "config",
                          {"schema_version", "mode", "out_dir", "theory"});
      break;
    case RunMode::kVarianceProbe:
      reject_unknown_keys(root, "config",
                          {"schema_version", "mode", "out_dir", "problem", "variance"});
      break;
  }

  if (root.contains("out_dir")) cfg.out_dir = str_field(root, "config", "out_dir");

  if (cfg.mode == RunMode::kRun || cfg.mode == RunMode::kSweep) {
    cfg.problem = parse_problem(require_key(root, "config", "problem"));
    parse_optimizer(require_key(root, "config", "optimizer"), cfg);
    parse_seeds(require_key(root, "config", "seeds"), cfg);
    cfg.group_size = int_field_or(root, "config", "group_size", 0);
    if (cfg.group_size < 0) throw ConfigError("config: group_size must be >= 0");
  }

  if (cfg.mode == RunMode::kRun && root.contains("ht")) {
    const json& ht = root.at("ht");
    require_object(ht, "ht");
    reject_unknown_keys(ht, "ht", {"beta", "k"});
    const bool has_beta = ht.contains("beta");
    const bool has_k = ht.contains("k");
    if (has_beta == has_k) {
      throw ConfigError("ht: exactly one of 'beta' or 'k' is required");
    }
    if (has_beta) {
      const double beta = num_field(ht, "ht", "beta");
      if (!(beta >= 0.0) || beta >= 1.0) {
        throw ConfigError("ht: beta must be in [0, 1)");
      }
      cfg.ht_beta = beta;
    } else {
      const int k = int_field(ht, "ht", "k");
      if (k < 1) throw ConfigError("ht: k must be >= 1");
      cfg.ht_k = k;
    }
  }

  if (cfg.mode == RunMode::kSweep) {
    const json& sweep = require_key(root, "config", "sweep");
    require_object(sweep, "sweep");
    reject_unknown_keys(sweep, "sweep", {"betas"});
    const json& betas = require_key(sweep, "sweep", "betas");
    if (!betas.is_array() || betas.empty()) {
      throw ConfigError("sweep: 'betas' must be a non-empty array");
    }
    std::set<double> seen;
    for (const auto& b : betas) {
      if (!b.is_number()) throw ConfigError("sweep: betas must be numbers");
      const double beta = b.get<double>();
      if (!(beta >= 0.0) || beta >= 1.0) {
        throw ConfigError("sweep: betas must lie in [0, 1)");
      }
      if (!seen.insert(beta).second) {
        throw ConfigError("sweep: duplicate beta " + format_double(beta));
      }
      cfg.sweep_betas.push_back(beta);
    }
  }

  if (cfg.mode == RunMode::kTheoryCheck && root.contains("theory")) {
    parse_theory(root.at("theory"), cfg.theory);
  }
  if (cfg.mode == RunMode::kVarianceProbe) {
    cfg.problem = parse_problem(require_key(root, "config", "problem"));
    if (root.contains("variance")) parse_variance(root.at("variance"), cfg.variance);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
  return to_hex(fnv1a64(cfg.canonical_json));
}

SupportMetrics support_metrics(const ParamVector& theta,
                               const SparsityMask& truth) {
  if (truth.support.empty()) {
    throw std::invalid_argument("support_metrics: empty reference support");
  }
  const std::vector<int> found = support_of(theta);
  std::size_t hits = 0;
  for (int idx : found) {
    if (std::binary_search(truth.support.begin(), truth.support.end(), idx)) {
      ++hits;
    }
  }
  SupportMetrics m;
  m.recall = static_cast<double>(hits) / truth.support.size();
  m.precision = static_cast<double>(hits) /
                std::max<std::size_t>(1, found.size());
  return m;
}

void heatmap_export(const RunRecord& record, int group_size,
                    const std::string& path) {
  if (record.steps.empty()) {
    throw std::invalid_argument("heatmap_export: run has no recorded steps");
  }
  if (group_size != record.group_size) {
    throw std::invalid_argument(
        "heatmap_export: group_size does not match the recorded series");
  }
  CsvTable table;
  const std::size_t groups = record.steps.front().group_norms.size();
  table.header.push_back("step");
  for (std::size_t g = 0; g < groups; ++g) {
    table.header.push_back("g" + std::to_string(g));
  }
  for (std::size_t t = 0; t < record.steps.size(); ++t) {
    std::vector<std::string> row;
    row.push_back(std::to_string(t));
    for (double v : record.steps[t].group_norms) row.push_back(format_double(v));
    table.rows.push_back(std::move(row));
  }
  write_csv_atomic(path, table);
}

std::vector<std::vector<double>> heatmap_import(const std::string& path) {
  CsvTable table;
  try {
    table = read_csv(path);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  std::vector<std::vector<double>> matrix;
  matrix.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<double> values;
    values.reserve(row.size() - 1);
    for (std::size_t c = 1; c < row.size(); ++c) {
      values.push_back(parse_double(row[c]));
    }
    matrix.push_back(std::move(values));
  }
  return matrix;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options) {
  std::string out_dir = options.out_dir_override.value_or(
      cfg.out_dir.empty() ? std::string(".") : cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  if (cfg.mode == RunMode::kTheoryCheck) {
    return theory_check_experiment(cfg, out_dir);
  }
  if (cfg.mode == RunMode::kVarianceProbe) {
    return variance_probe_experiment(cfg, out_dir);
  }

  const auto t_start = std::chrono::steady_clock::now();
  BuiltProblem built;
  try {
    built = make_problem(cfg.problem);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const FitnessProblem& problem = *built.problem;
  const int d = problem.dim();

  std::vector<std::uint64_t> seeds =
      options.seed_override ? std::vector<std::uint64_t>{*options.seed_override}
                            : cfg.seeds;

  std::vector<Job> jobs;
  if (cfg.mode == RunMode::kRun) {
    std::optional<int> k;
    double beta = 0.0;
    if (cfg.ht_beta) {
      k = k_from_ratio(d, *cfg.ht_beta);
      beta = *cfg.ht_beta;
    } else if (cfg.ht_k) {
      if (*cfg.ht_k > d) throw ConfigError("ht: k exceeds problem dimension");
      k = *cfg.ht_k;
      beta = 1.0 - static_cast<double>(*cfg.ht_k) / d;
    }
    for (std::uint64_t seed : seeds) {
      Job job;
      job.beta = beta;
      job.k = k;
      job.seed = seed;
      jobs.push_back(std::move(job));
    }
  } else {  // sweep
    for (double beta : cfg.sweep_betas) {
      for (std::uint64_t seed : seeds) {
        Job job;
        job.beta = beta;
        job.k = k_from_ratio(d, beta);
        job.seed = seed;
        jobs.push_back(std::move(job));
      }
    }
  }
  for (auto& job : jobs) {
    job.tag = cfg.problem.name + "_beta" + beta_tag(job.beta) + "_seed" +
              std::to_string(job.seed);
  }

  // Worker budget: concurrent jobs when there are several, otherwise the
  // estimator parallelizes inside the single run. Results are identical
  // either way; only the schedule differs.
  const int est_workers = jobs.size() > 1 ? 1 : std::max(1, options.workers);

  std::vector<SummaryRow> rows(jobs.size());
  std::vector<std::string> traj_files(jobs.size());
  std::vector<std::string> heat_files(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::vector<double> wall_times(jobs.size(), 0.0);
  std::vector<char> completed(jobs.size(), 0);

  parallel_for(jobs.size(), options.workers, [&](std::size_t idx) {
    const Job& job = jobs[idx];
    OptimizerConfig ocfg;
    ocfg.alpha = cfg.alpha;
    ocfg.T = cfg.steps;
    ocfg.est.sigma = cfg.sigma;
    ocfg.est.n = cfg.perturbations;
    ocfg.est.N = cfg.rollouts_per_perturbation;
    ocfg.est.workers = est_workers;
    if (job.k) ocfg.ht = HtConfig{*job.k};
    ocfg.base_seed = job.seed;
    ocfg.eval_rollouts = cfg.eval_rollouts;
    ocfg.group_size = cfg.group_size;
    ocfg.checkpoint_every = cfg.checkpoint_every;
    if (cfg.checkpoint_every > 0) {
      ocfg.checkpoint_dir = (fs::path(out_dir) / ("checkpoints_" + job.tag)).string();
    }

    const RunResult res = run(problem, ocfg);

    // Trajectory CSV, written even for partial (aborted) runs.
    CsvTable table;
    table.header = {"step", "score", "proxy", "l0"};
    const std::size_t groups =
        res.record.steps.empty() ? 0 : res.record.steps.front().group_norms.size();
    for (std::size_t g = 0; g < groups; ++g) {
      table.header.push_back("g" + std::to_string(g));
    }
    for (std::size_t t = 0; t < res.record.steps.size(); ++t) {
      const StepRow& step_row = res.record.steps[t];
      std::vector<std::string> row{std::to_string(t), format_double(step_row.score),
                                   format_double(step_row.proxy),
                                   std::to_string(step_row.l0)};
      for (double v : step_row.group_norms) row.push_back(format_double(v));
      table.rows.push_back(std::move(row));
    }
    const std::string traj_path =
        (fs::path(out_dir) / ("trajectory_" + job.tag + ".csv")).string();
    write_csv_atomic(traj_path, table);
    traj_files[idx] = traj_path;

    if (!res.record.steps.empty()) {
      const std::string heat_path =
          (fs::path(out_dir) / ("heatmap_" + job.tag + ".csv")).string();
      heatmap_export(res.record, res.record.group_size, heat_path);
      heat_files[idx] = heat_path;
    }

    SummaryRow row;
    row.problem = problem.name();
    row.beta = job.beta;
    row.seed = job.seed;
    const auto& steps = res.record.steps;
    if (!steps.empty()) {
      row.final_score = steps.back().score;
      row.final_proxy = steps.back().proxy;
      const std::size_t window = std::min<std::size_t>(10, steps.size());
      double s = 0.0;
      for (std::size_t t = steps.size() - window; t < steps.size(); ++t) {
        s += steps[t].score;
      }
      row.mean_last10 = s / window;
    }
    if (built.true_support && !built.true_support->support.empty()) {
      const SupportMetrics m =
          support_metrics(res.record.final_theta, *built.true_support);
      row.support_recall = m.recall;
      row.support_precision = m.precision;
    }
    if (built.theta_star) {
      row.dist_theta_star = l2_distance(res.record.final_theta, *built.theta_star);
    }
    row.wall_time_s = res.record.wall_time_s;
    rows[idx] = std::move(row);
    wall_times[idx] = res.record.wall_time_s;
    completed[idx] = res.completed ? 1 : 0;
    if (!res.completed) errors[idx] = res.error;
  });

  ExperimentResult result;
  result.rows = rows;
  result.trajectory_files = traj_files;

  CsvTable summary;
  summary.header = {"problem", "beta", "seed", "final_score", "mean_last10",
                    "support_recall", "support_precision", "final_proxy",
                    "dist_theta_star", "wall_time_s"};
  for (const auto& row : rows) {
    summary.rows.push_back({row.problem, format_double(row.beta),
                            std::to_string(row.seed), format_double(row.final_score),
                            format_double(row.mean_last10), opt_cell(row.support_recall),
                            opt_cell(row.support_precision),
                            format_double(row.final_proxy),
                            opt_cell(row.dist_theta_star),
                            format_double(row.wall_time_s)});
  }
  const std::string summary_path = (fs::path(out_dir) / "summary.csv").string();
  write_csv_atomic(summary_path, summary);
  result.summary_file = summary_path;

  const auto t_end = std::chrono::steady_clock::now();
  json runs = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    json r;
    r["tag"] = jobs[i].tag;
    r["beta"] = jobs[i].beta;
    r["seed"] = jobs[i].seed;
    r["trajectory"] = traj_files[i];
    if (!heat_files[i].empty()) r["heatmap"] = heat_files[i];
    r["completed"] = completed[i] != 0;
    r["wall_time_s"] = wall_times[i];
    if (!errors[i].empty()) r["error"] = errors[i];
    runs.push_back(std::move(r));
  }
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  write_manifest(manifest_path, cfg, options, runs,
                 std::chrono::duration<double>(t_end - t_start).count());
  result.manifest_file = manifest_path;

  std::vector<std::string> messages;
  for (const auto& e : errors) {
    if (!e.empty()) messages.push_back(e);
  }
  if (!messages.empty()) {
    write_error_json(out_dir, "run", messages);
    std::ostringstream agg;
    for (std::size_t i = 0; i < messages.size(); ++i) {
      if (i) agg << "; ";
      agg << messages[i];
    }
    result.error = agg.str();
    result.ok = false;
  }
  return result;
}

}  // namespace nesht
