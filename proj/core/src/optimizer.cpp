#include "nesht/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nesht/csv.hpp"
#include "nesht/hashing.hpp"
#include "nesht/sparsity.hpp"

namespace nesht {
namespace {

using nlohmann::json;

void check_config(const FitnessProblem& problem, const OptimizerConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) {
    throw std::invalid_argument("optimizer: alpha must be finite and > 0");
  }
  if (cfg.T < 1) throw std::invalid_argument("optimizer: T must be >= 1");
  if (cfg.eval_rollouts < 1) {
    throw std::invalid_argument("optimizer: eval_rollouts must be >= 1");
  }
  const int d = problem.dim();
  if (cfg.ht && (cfg.ht->k < 1 || cfg.ht->k > d)) {
    throw std::invalid_argument("optimizer: ht.k must be in [1, dim]");
  }
  if (cfg.group_size < 0 || cfg.group_size > d) {
    throw std::invalid_argument("optimizer: group_size must be in [0, dim]");
  }
  if (cfg.checkpoint_every < 0) {
    throw std::invalid_argument("optimizer: checkpoint_every must be >= 0");
  }
  if (cfg.checkpoint_every > 0 && cfg.checkpoint_dir.empty()) {
    throw std::invalid_argument(
        "optimizer: checkpoint_every > 0 requires checkpoint_dir");
  }
  if (!(cfg.divergence_linf > 0.0)) {
    throw std::invalid_argument("optimizer: divergence_linf must be > 0");
  }
  if (cfg.theta0) {
    check_finite(*cfg.theta0, "optimizer: theta0");
    check_dim(*cfg.theta0, static_cast<std::size_t>(d), "optimizer: theta0");
  }
}

struct StepOutcome {
  ParamVector half;
  ParamVector next;
};

StepOutcome raw_step(const FitnessProblem& problem, const ParamVector& theta,
                     int t, const OptimizerConfig& cfg) {
  const RngStream step_stream =
      derive_stream(cfg.base_seed, {static_cast<std::uint64_t>(t)});
  const GradientEstimate est =
      averaged_estimate(problem, theta, cfg.est, step_stream);
  StepOutcome out;
  out.half = add_scaled(theta, cfg.alpha, est.g);
  out.next = cfg.ht ? trunc(out.half, cfg.ht->k) : out.half;
  return out;
}

// First non-finite or divergent coordinate, or -1 if the iterate is fine.
int divergence_index(const ParamVector& v, double linf_cap) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || std::abs(v[i]) > linf_cap) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

double evaluate(const FitnessProblem& problem, const ParamVector& theta, int t,
                const OptimizerConfig& cfg) {
  const RngStream eval_base =
      derive_stream(cfg.base_seed, {static_cast<std::uint64_t>(t),
                                    static_cast<std::uint64_t>(cfg.est.n)});
  std::vector<double> scores(cfg.eval_rollouts);
  for (int j = 1; j <= cfg.eval_rollouts; ++j) {
    RngStream s = eval_base.child(static_cast<std::uint64_t>(j));
    scores[j - 1] = problem.rollout(theta, s);
  }
  return pairwise_sum(scores) / cfg.eval_rollouts;
}

json theta_to_json(const ParamVector& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

ParamVector theta_from_json(const json& arr, const char* what) {
  if (!arr.is_array() || arr.empty()) {
    throw std::invalid_argument(std::string(what) + ": expected non-empty array");
  }
  ParamVector v;
  v.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) {
      throw std::invalid_argument(std::string(what) + ": non-numeric entry");
    }
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

double stationarity_proxy(const ParamVector& before, const ParamVector& after,
                          double alpha) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("stationarity_proxy: alpha must be > 0");
  }
  if (before.size() != after.size()) {
    throw std::invalid_argument("stationarity_proxy: dimension mismatch");
  }
  return l2_distance(before, after) / alpha;
}

OptimizerState step(const FitnessProblem& problem, const OptimizerState& state,
                    const OptimizerConfig& cfg) {
  check_config(problem, cfg);
  check_finite(state.theta, "step: theta");
  check_dim(state.theta, static_cast<std::size_t>(problem.dim()), "step: theta");
  StepOutcome out = raw_step(problem, state.theta, state.t, cfg);
  OptimizerState next;
  next.theta = std::move(out.next);
  next.t = state.t + 1;
  next.last_half_step = std::move(out.half);
  return next;
}

RunResult run(const FitnessProblem& problem, const OptimizerConfig& cfg,
              std::optional<OptimizerState> resume) {
  check_config(problem, cfg);
  const int d = problem.dim();
  const int group_size = cfg.group_size == 0 ? d : cfg.group_size;

  RunResult result;
  result.record.config = cfg;
  result.record.group_size = group_size;

  ParamVector theta;
  int t0 = 0;
  if (resume) {
    check_finite(resume->theta, "run: resume theta");
    check_dim(resume->theta, static_cast<std::size_t>(d), "run: resume theta");
    if (resume->t < 0 || resume->t > cfg.T) {
      throw std::invalid_argument("run: resume step out of range");
    }
    theta = resume->theta;
    t0 = resume->t;
  } else {
    theta = cfg.theta0 ? *cfg.theta0 : zeros(static_cast<std::size_t>(d));
    if (cfg.ht) theta = trunc(theta, cfg.ht->k);
  }

  const auto start = std::chrono::steady_clock::now();
  result.completed = true;
  for (int t = t0; t < cfg.T; ++t) {
    StepOutcome out = raw_step(problem, theta, t, cfg);

    const int bad = divergence_index(out.next, cfg.divergence_linf);
    if (bad >= 0) {
      std::ostringstream msg;
      msg << "run aborted at step " << t << ": iterate diverged at coordinate "
          << bad << " (value " << out.next[bad] << ", |theta|_inf cap "
          << cfg.divergence_linf << "); alpha=" << cfg.alpha
          << " sigma=" << cfg.est.sigma << " n=" << cfg.est.n
          << " N=" << cfg.est.N << " seed=" << cfg.base_seed;
      result.error = msg.str();
      result.completed = false;
      break;
    }

    StepRow row;
    row.score = evaluate(problem, out.next, t, cfg);
    row.proxy = stationarity_proxy(theta, out.next, cfg.alpha);
    row.l0 = l0_norm(out.next);
    row.group_norms = feature_group_norms(out.next, group_size);
    result.record.steps.push_back(std::move(row));

    theta = std::move(out.next);

    if (cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0) {
      OptimizerState snap;
      snap.theta = theta;
      snap.t = t + 1;
      snap.last_half_step = out.half;
      namespace fs = std::filesystem;
      fs::create_directories(cfg.checkpoint_dir);
      const std::string path = (fs::path(cfg.checkpoint_dir) /
                                ("checkpoint_" + std::to_string(t + 1) + ".json"))
                                   .string();
      save_checkpoint(path, snap, optimizer_config_hash(cfg));
    }
  }
  const auto end = std::chrono::steady_clock::now();
  result.record.wall_time_s =
      std::chrono::duration<double>(end - start).count();
  result.record.final_theta = std::move(theta);
  return result;
}

std::uint64_t optimizer_config_hash(const OptimizerConfig& cfg) {
  // Everything that shapes the trajectory. Execution details (workers,
  // checkpoint cadence) are deliberately excluded so a resumed run with a
  // different schedule still matches.
  std::ostringstream s;
  s << "alpha=" << format_double(cfg.alpha) << ";T=" << cfg.T
    << ";sigma=" << format_double(cfg.est.sigma) << ";n=" << cfg.est.n
    << ";N=" << cfg.est.N << ";ht=" << (cfg.ht ? cfg.ht->k : -1)
    << ";seed=" << cfg.base_seed << ";eval=" << cfg.eval_rollouts
    << ";groups=" << cfg.group_size
    << ";cap=" << format_double(cfg.divergence_linf) << ";theta0=";
  if (cfg.theta0) {
    for (double x : *cfg.theta0) s << format_double(x) << ',';
  }
  return fnv1a64(s.str());
}

void save_checkpoint(const std::string& path, const OptimizerState& state,
                     std::uint64_t config_hash) {
  json j;
  j["schema_version"] = 1;
  j["config_hash"] = to_hex(config_hash);
  j["t"] = state.t;
  j["theta"] = theta_to_json(state.theta);
  j["last_half_step"] =
      state.last_half_step ? theta_to_json(*state.last_half_step) : json();
  write_file_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: bad JSON in " + path + ": " +
                             e.what());
  }
  if (!j.is_object() || !j.contains("schema_version") ||
      j["schema_version"] != 1 || !j.contains("config_hash") ||
      !j.contains("t") || !j.contains("theta")) {
    throw std::runtime_error("load_checkpoint: malformed checkpoint " + path);
  }
  Checkpoint cp;
  cp.config_hash = from_hex(j["config_hash"].get<std::string>());
  cp.state.t = j["t"].get<int>();
  cp.state.theta = theta_from_json(j["theta"], "load_checkpoint: theta");
  if (j.contains("last_half_step") && !j["last_half_step"].is_null()) {
    cp.state.last_half_step =
        theta_from_json(j["last_half_step"], "load_checkpoint: last_half_step");
  }
  return cp;
}

}  // namespace nesht
