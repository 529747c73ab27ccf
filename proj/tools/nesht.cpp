// nesht: run, sweep, and diagnostic entry points over JSON experiment configs.
//
// Exit codes: 0 success, 2 config error, 3 runtime or I/O failure (e.g.
// divergence), 4 theory-check or variance-probe verdict failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nesht/harness.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
  std::string out_dir;  // empty = use config / cwd
};

void add_common(CLI::App* sub, CliArgs& args) {
  sub->add_option("config", args.config_path, "experiment config (JSON)")
      ->required();
  sub->add_option("--workers", args.workers, "worker threads")
      ->check(CLI::Range(1, 256));
  sub->add_option("--seed-override", args.seed_override,
                  "replace the config seed list with a single seed");
  sub->add_option("--out", args.out_dir, "output directory")
      ->envname("NESHT_OUT");
}

void print_error(const char* kind, const std::string& message) {
  nlohmann::json e;
  e["error"] = kind;
  e["message"] = message;
  std::fprintf(stderr, "%s\n", e.dump().c_str());
}

int run_mode(const CliArgs& args, nesht::RunMode expected) {
  const nesht::ExperimentConfig cfg = nesht::load_experiment_config(args.config_path);
  if (cfg.mode != expected) {
    throw nesht::ConfigError("config mode '" + nesht::to_string(cfg.mode) +
                             "' does not match subcommand '" +
                             nesht::to_string(expected) + "'");
  }
  nesht::RunOptions options;
  options.workers = args.workers;
  options.seed_override = args.seed_override;
  if (!args.out_dir.empty()) options.out_dir_override = args.out_dir;

  const nesht::ExperimentResult result = nesht::run_experiment(cfg, options);
  if (!result.report.empty()) std::fputs(result.report.c_str(), stdout);
  if (!result.summary_file.empty()) {
    std::printf("wrote %s\n", result.summary_file.c_str());
  }
  if (!result.error.empty()) {
    print_error("runtime", result.error);
    return 3;
  }
  if (!result.ok) return 4;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroth-order sparse optimization toolkit"};
  app.require_subcommand(1);

  CliArgs args;
  CLI::App* cmd_run = app.add_subcommand("run", "single configuration, one or more seeds");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "beta grid x seeds");
  CLI::App* cmd_theory =
      app.add_subcommand("theory-check", "estimator and budget diagnostics");
  CLI::App* cmd_var =
      app.add_subcommand("variance-probe", "empirical estimator variance grid");
  add_common(cmd_run, args);
  add_common(cmd_sweep, args);
  add_common(cmd_theory, args);
  add_common(cmd_var, args);

  CLI11_PARSE(app, argc, argv);

  nesht::RunMode expected = nesht::RunMode::kRun;
  if (cmd_sweep->parsed()) expected = nesht::RunMode::kSweep;
  if (cmd_theory->parsed()) expected = nesht::RunMode::kTheoryCheck;
  if (cmd_var->parsed()) expected = nesht::RunMode::kVarianceProbe;

  try {
    return run_mode(args, expected);
  } catch (const nesht::ConfigError& e) {
    print_error("config", e.what());
    return 2;
  } catch (const nesht::IoError& e) {
    print_error("io", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 3;
  }
}
