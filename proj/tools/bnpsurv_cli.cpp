// Command-line front end: simulate / fit / evaluate / curves / compare.
// A config file (--config, flat key = value with optional [stage] sections)
// supplies defaults; explicit flags override it.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnpsurv/pipeline.hpp"

namespace {

using bnpsurv::PipelineArgs;

// First bare argument = subcommand; --config may appear anywhere.
struct Prescan {
  std::string command;
  std::string config_path;
};

Prescan prescan_argv(int argc, char** argv) {
  Prescan out;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      out.config_path = argv[i + 1];
      ++i;
    } else if (arg.rfind("--config=", 0) == 0) {
      out.config_path = arg.substr(9);
    } else if (out.command.empty() && !arg.empty() && arg[0] != '-') {
      out.command = arg;
    }
  }
  return out;
}

class ConfigValues {
 public:
  ConfigValues(std::map<std::string, std::string> values, std::string section)
      : values_(std::move(values)), section_(std::move(section)) {}

  std::optional<std::string> get(const std::string& key) const {
    if (const auto it = values_.find(section_ + "." + key); it != values_.end())
      return it->second;
    if (const auto it = values_.find(key); it != values_.end()) return it->second;
    return std::nullopt;
  }

  void str(const std::string& key, std::string& dst) const {
    if (const auto v = get(key)) dst = *v;
  }
  void integer(const std::string& key, int& dst) const {
    if (const auto v = get(key))
      dst = static_cast<int>(bnpsurv::detail::parse_long(*v, "config " + key));
  }
  void real(const std::string& key, double& dst) const {
    if (const auto v = get(key)) dst = bnpsurv::detail::parse_double(*v, "config " + key);
  }
  bool seed(std::uint64_t& dst) const {
    if (const auto v = get("seed")) {
      dst = static_cast<std::uint64_t>(bnpsurv::detail::parse_long(*v, "config seed"));
      return true;
    }
    return false;
  }

 private:
  std::map<std::string, std::string> values_;
  std::string section_;
};

void apply_config(const ConfigValues& cfg, const std::string& command, PipelineArgs& args) {
  cfg.str("model", args.model);
  cfg.str("data", args.data_path);
  cfg.str("trace", args.trace_path);
  cfg.str("truth", args.truth_path);
  cfg.str("holdout", args.holdout_path);
  cfg.str("out", args.out_dir);
  cfg.str("scenario", args.scenario_label);
  cfg.integer("replicate", args.replicate);
  cfg.integer("iterations", args.mcmc.iterations);
  cfg.integer("burn_in", args.mcmc.burn_in);
  cfg.integer("thin", args.mcmc.thin);
  cfg.integer("truncation_l", args.mcmc.truncation_l);
  cfg.integer("truncation_k", args.mcmc.truncation_k);
  cfg.integer("grid_points", args.grid_points);
  cfg.real("level", args.level);
  cfg.integer("groups", args.groups);
  cfg.integer("group_size", args.group_size);
  cfg.real("censoring", args.censoring);
  cfg.integer("replicates", args.compare_replicates);
  if (cfg.seed(args.mcmc.seed)) args.seed_set = true;
  (void)command;
}

}  // namespace

int main(int argc, char** argv) {
  const Prescan pre = prescan_argv(argc, argv);

  PipelineArgs args;
  if (!pre.config_path.empty()) {
    const auto text = bnpsurv::read_text_file(pre.config_path);
    if (!text) {
      std::fprintf(stderr, "error: cannot read config %s\n", pre.config_path.c_str());
      return bnpsurv::kExitUnreadableInput;
    }
    try {
      apply_config(ConfigValues(bnpsurv::parse_config_text(*text), pre.command), pre.command,
                   args);
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return bnpsurv::kExitInvalidConfig;
    }
  }

  CLI::App app{"Bayesian nonparametric mixtures for grouped right-censored survival data"};
  app.require_subcommand(1);
  std::string config_path;  // consumed by the prescan; registered so parsing accepts it
  app.add_option("--config", config_path, "config file with key = value defaults");

  bool cli_seed = false;
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          args.mcmc.seed = v;
          cli_seed = true;
        },
        "random seed (mandatory wherever sampling happens)");
  };
  const auto add_mcmc = [&](CLI::App* cmd) {
    cmd->add_option("--iterations", args.mcmc.iterations, "total Gibbs sweeps");
    cmd->add_option("--burn-in", args.mcmc.burn_in, "sweeps discarded before recording");
    cmd->add_option("--thin", args.mcmc.thin, "record every thin-th sweep");
    cmd->add_option("--truncation-l", args.mcmc.truncation_l, "atoms per mixture");
    cmd->add_option("--truncation-k", args.mcmc.truncation_k, "top-level clusters (ndp)");
  };
  const auto add_grid = [&](CLI::App* cmd) {
    cmd->add_option("--grid-points", args.grid_points, "evaluation grid size");
    cmd->add_option("--level", args.level, "credible level");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "draw a grouped survival dataset");
  add_seed(simulate);
  simulate->add_option("--out", args.out_dir, "output directory");
  simulate->add_option("--groups", args.groups, "number of groups J");
  simulate->add_option("--group-size", args.group_size, "observations per group");
  simulate->add_option("--censoring", args.censoring, "target censored fraction in [0,1)");

  CLI::App* fit = app.add_subcommand("fit", "fit one model to a dataset");
  add_seed(fit);
  fit->add_option("--model", args.model, "dp | hdp | ndp | gfm");
  fit->add_option("--data", args.data_path, "dataset CSV");
  fit->add_option("--out", args.out_dir, "output directory");
  add_mcmc(fit);
  add_grid(fit);

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a saved fit");
  evaluate->add_option("--data", args.data_path, "dataset CSV the model was fitted to");
  evaluate->add_option("--trace", args.trace_path, "trace or gfm fit file");
  evaluate->add_option("--truth", args.truth_path, "truth sidecar (enables coverage)");
  evaluate->add_option("--holdout", args.holdout_path, "held-out dataset for lppd");
  evaluate->add_option("--out", args.out_dir, "output directory");
  evaluate->add_option("--scenario", args.scenario_label, "scenario label for the metrics row");
  evaluate->add_option("--replicate", args.replicate, "replicate index for the metrics row");
  add_grid(evaluate);

  CLI::App* curves = app.add_subcommand("curves", "re-emit per-group curve tables");
  curves->add_option("--data", args.data_path, "dataset CSV the model was fitted to");
  curves->add_option("--trace", args.trace_path, "trace or gfm fit file");
  curves->add_option("--out", args.out_dir, "output directory");
  add_grid(curves);

  CLI::App* compare = app.add_subcommand("compare", "scenario-grid sweep over all four models");
  add_seed(compare);
  compare->add_option("--out", args.out_dir, "output directory");
  compare->add_option("--replicates", args.compare_replicates, "replicates per scenario");
  compare->add_option("--censoring", args.censoring, "target censored fraction in [0,1)");
  add_mcmc(compare);
  add_grid(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bnpsurv::kExitInvalidConfig;
  }
  if (cli_seed) args.seed_set = true;

  const auto require_paths = [&](std::initializer_list<std::pair<const char*, const std::string*>>
                                     paths) -> std::optional<int> {
    for (const auto& [flag, value] : paths) {
      if (value->empty()) {
        std::fprintf(stderr, "error: %s is required\n", flag);
        return bnpsurv::kExitInvalidConfig;
      }
    }
    return std::nullopt;
  };

  if (simulate->parsed()) return bnpsurv::run_simulate(args);
  if (fit->parsed()) {
    if (const auto rc = require_paths({{"--data", &args.data_path}})) return *rc;
    return bnpsurv::run_fit(args);
  }
  if (evaluate->parsed()) {
    if (const auto rc =
            require_paths({{"--data", &args.data_path}, {"--trace", &args.trace_path}}))
      return *rc;
    return bnpsurv::run_evaluate(args);
  }
  if (curves->parsed()) {
    if (const auto rc =
            require_paths({{"--data", &args.data_path}, {"--trace", &args.trace_path}}))
      return *rc;
    return bnpsurv::run_curves(args);
  }
  if (compare->parsed()) return bnpsurv::run_compare(args);
  return bnpsurv::kExitInvalidConfig;
}
