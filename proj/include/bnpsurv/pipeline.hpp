#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/evaluation.hpp"
#include "bnpsurv/frailty.hpp"
#include "bnpsurv/io.hpp"
#include "bnpsurv/samplers.hpp"
#include "bnpsurv/simgen.hpp"

namespace bnpsurv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitUnreadableInput = 2;
inline constexpr int kExitUnwritableOutput = 3;
inline constexpr int kExitInvalidConfig = 4;

// One argument bag for every stage; the CLI fills it from flags and the
// optional config file.
struct PipelineArgs {
  std::string model = "dp";  // dp | hdp | ndp | gfm
  std::string data_path;
  std::string trace_path;
  std::string truth_path;
  std::string holdout_path;
  std::string out_dir = ".";
  std::string scenario_label = "custom";
  int replicate = 0;
  McmcConfig mcmc;
  bool seed_set = false;
  int grid_points = 100;
  double level = 0.95;
  int groups = 30;
  int group_size = 20;
  double censoring = 0.5;
  int compare_replicates = 3;
};

// ---------------------------------------------------------------------------
// GFM fit file
// ---------------------------------------------------------------------------

inline constexpr std::string_view kGfmMagic = "gfm v1";

inline std::string serialize_gfm_fit(const GfmFit& fit) {
  std::string out(kGfmMagic);
  out += '\n';
  out += "shape " + detail::fmt_g17(fit.params.shape) + '\n';
  out += "scale " + detail::fmt_g17(fit.params.scale) + '\n';
  out += "frailty_var " + detail::fmt_g17(fit.params.frailty_var) + '\n';
  out += "neg_loglik " + detail::fmt_g17(fit.neg_loglik_at_mle) + '\n';
  out += "covariance_ok ";
  out += fit.covariance_ok ? '1' : '0';
  out += '\n';
  out += "covariance";
  detail::append_doubles(out, fit.covariance);
  return out;
}

inline GfmFit parse_gfm_fit(const std::string& text) {
  detail::LineReader reader{text};
  const auto magic = reader.next();
  if (!magic || detail::trim(*magic) != kGfmMagic)
    throw std::invalid_argument("gfm fit: bad or missing magic line");
  const auto next_value = [&](std::string_view key) {
    const auto line = reader.next();
    if (!line) throw std::invalid_argument("gfm fit: truncated file");
    return detail::expect_key(*line, key, "gfm fit");
  };
  GfmFit fit;
  fit.params.shape = detail::parse_double(next_value("shape"), "gfm shape");
  fit.params.scale = detail::parse_double(next_value("scale"), "gfm scale");
  fit.params.frailty_var = detail::parse_double(next_value("frailty_var"), "gfm frailty_var");
  fit.neg_loglik_at_mle = detail::parse_double(next_value("neg_loglik"), "gfm neg_loglik");
  fit.covariance_ok = detail::parse_long(next_value("covariance_ok"), "gfm flag") != 0;
  const auto cov = detail::read_doubles(next_value("covariance"), 9, "gfm covariance");
  for (std::size_t i = 0; i < 9; ++i) fit.covariance[i] = cov[i];
  check_gfm_params(fit.params);
  return fit;
}

// Log score of one observation under the fitted marginal model: events get
// the marginal density, censored records the marginal survival.
inline double gfm_log_score(const GfmParams& p, const Observation& obs) {
  const double lr = std::log(obs.time) - std::log(p.scale);
  const double cum_hazard = std::exp(p.shape * lr);
  const double log_hazard = std::log(p.shape) - std::log(p.scale) + (p.shape - 1.0) * lr;
  if (p.frailty_var < 1e-8)
    return obs.event ? log_hazard - cum_hazard : -cum_hazard;
  const double log_surv = -std::log1p(p.frailty_var * cum_hazard) / p.frailty_var;
  if (!obs.event) return log_surv;
  return log_hazard - (1.0 / p.frailty_var + 1.0) * std::log1p(p.frailty_var * cum_hazard);
}

// Delta-method band for the marginal survival curve: variance of S(t) from
// the covariance of the log-parameters via central-difference gradients.
// Without a usable covariance the band collapses onto the curve.
inline CredibleBand gfm_band(const GfmFit& fit, std::span<const double> grid, double level) {
  check_grid(grid);
  CredibleBand band;
  band.grid.assign(grid.begin(), grid.end());
  band.level = level;
  band.lower.resize(grid.size());
  band.upper.resize(grid.size());
  const double z = normal_quantile(0.5 * (1.0 + level));
  const std::array<double, 3> x0 = {std::log(fit.params.shape), std::log(fit.params.scale),
                                    std::log(fit.params.frailty_var)};
  const double h = 1e-5;
  double width = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid[g];
    const double s = gfm_marginal_survival(fit.params, t);
    double sd = 0.0;
    if (fit.covariance_ok) {
      std::array<double, 3> gradient{};
      for (int a = 0; a < 3; ++a) {
        std::array<double, 3> x = x0;
        x[static_cast<std::size_t>(a)] += h;
        const double up = gfm_marginal_survival(
            {std::exp(x[0]), std::exp(x[1]), std::exp(x[2])}, t);
        x[static_cast<std::size_t>(a)] -= 2 * h;
        const double dn = gfm_marginal_survival(
            {std::exp(x[0]), std::exp(x[1]), std::exp(x[2])}, t);
        gradient[static_cast<std::size_t>(a)] = (up - dn) / (2 * h);
      }
      double var = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          var += gradient[static_cast<std::size_t>(a)] *
                 fit.covariance[static_cast<std::size_t>(3 * a + b)] *
                 gradient[static_cast<std::size_t>(b)];
      sd = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    band.lower[g] = std::max(0.0, s - z * sd);
    band.upper[g] = std::min(1.0, s + z * sd);
    width += band.upper[g] - band.lower[g];
  }
  band.mean_width = width / static_cast<double>(grid.size());
  return band;
}

// ---------------------------------------------------------------------------
// Posterior curve workspace: atom survivals are evaluated once per draw and
// reused across groups, which keeps the J=100 scenarios cheap.
// ---------------------------------------------------------------------------

namespace detail {

template <class State>
std::vector<double> atom_survival_table(const State& s, std::span<const double> grid);

template <>
inline std::vector<double> atom_survival_table(const DpState& s, std::span<const double> grid) {
  std::vector<double> table(s.atoms.size() * grid.size());
  for (std::size_t l = 0; l < s.atoms.size(); ++l)
    for (std::size_t g = 0; g < grid.size(); ++g)
      table[l * grid.size() + g] = kernel_survival(s.atoms[l], grid[g]);
  return table;
}

template <>
inline std::vector<double> atom_survival_table(const HdpState& s, std::span<const double> grid) {
  std::vector<double> table(s.atoms.size() * grid.size());
  for (std::size_t l = 0; l < s.atoms.size(); ++l)
    for (std::size_t g = 0; g < grid.size(); ++g)
      table[l * grid.size() + g] = kernel_survival(s.atoms[l], grid[g]);
  return table;
}

template <>
inline std::vector<double> atom_survival_table(const NdpState& s, std::span<const double> grid) {
  const std::size_t K = s.cluster_atoms.size();
  const std::size_t L = K == 0 ? 0 : s.cluster_atoms[0].size();
  std::vector<double> table(K * L * grid.size());
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t g = 0; g < grid.size(); ++g)
        table[(k * L + l) * grid.size() + g] = kernel_survival(s.cluster_atoms[k][l], grid[g]);
  return table;
}

inline void accumulate_group_curve(const DpState& s, const std::vector<double>& table, int,
                                   std::span<const double> grid, double* out) {
  for (std::size_t g = 0; g < grid.size(); ++g) out[g] = 0.0;
  for (std::size_t l = 0; l < s.sticks.w.size(); ++l) {
    const double w = s.sticks.w[l];
    if (w <= 0.0) continue;
    const double* row = table.data() + l * grid.size();
    for (std::size_t g = 0; g < grid.size(); ++g) out[g] += w * row[g];
  }
}

inline void accumulate_group_curve(const HdpState& s, const std::vector<double>& table, int group,
                                   std::span<const double> grid, double* out) {
  const auto& w = s.group_weights[static_cast<std::size_t>(group)];
  for (std::size_t g = 0; g < grid.size(); ++g) out[g] = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l] <= 0.0) continue;
    const double* row = table.data() + l * grid.size();
    for (std::size_t g = 0; g < grid.size(); ++g) out[g] += w[l] * row[g];
  }
}

inline void accumulate_group_curve(const NdpState& s, const std::vector<double>& table, int group,
                                   std::span<const double> grid, double* out) {
  const std::size_t k =
      static_cast<std::size_t>(s.group_assign[static_cast<std::size_t>(group)]);
  const auto& w = s.cluster_sticks[k].w;
  const std::size_t L = w.size();
  for (std::size_t g = 0; g < grid.size(); ++g) out[g] = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    if (w[l] <= 0.0) continue;
    const double* row = table.data() + (k * L + l) * grid.size();
    for (std::size_t g = 0; g < grid.size(); ++g) out[g] += w[l] * row[g];
  }
}

}  // namespace detail

// draws x groups x grid curves for every group at once.
template <class State>
std::vector<std::vector<std::vector<double>>> all_group_curves(const Trace<State>& trace,
                                                               int group_count,
                                                               std::span<const double> grid) {
  check_grid(grid);
  std::vector<std::vector<std::vector<double>>> per_group(
      static_cast<std::size_t>(group_count),
      std::vector<std::vector<double>>(trace.states.size(), std::vector<double>(grid.size())));
  for (std::size_t d = 0; d < trace.states.size(); ++d) {
    const State& s = trace.states[d];
    const std::vector<double> table = detail::atom_survival_table(s, grid);
    for (int j = 0; j < group_count; ++j)
      detail::accumulate_group_curve(s, table, j, grid, per_group[static_cast<std::size_t>(j)][d].data());
  }
  return per_group;
}

// ---------------------------------------------------------------------------
// Stage helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void log_error(const std::string& msg) { std::fprintf(stderr, "error: %s\n", msg.c_str()); }

inline bool ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  return !ec && std::filesystem::is_directory(dir);
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline bool write_output(const std::string& dir, const std::string& name,
                         const std::string& content) {
  const std::string path = join_path(dir, name);
  if (!atomic_write_text(path, content)) {
    log_error("cannot write " + path);
    return false;
  }
  return true;
}

inline std::string effective_config_text(
    const std::string& stage, std::span<const std::pair<std::string, std::string>> entries) {
  std::string out = "[" + stage + "]\n";
  for (const auto& [k, v] : entries) out += k + " = " + v + '\n';
  return out;
}

inline std::string curves_csv(std::span<const std::string> labels,
                              const std::vector<std::vector<std::vector<double>>>& per_group_draws,
                              std::span<const double> grid, double level) {
  std::string out(kCurvesHeader);
  out += '\n';
  for (std::size_t j = 0; j < per_group_draws.size(); ++j) {
    const CredibleBand band = credible_band(grid, per_group_draws[j], level);
    const std::vector<double> mean = mean_curve(per_group_draws[j]);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      out += labels[j];
      out += ',';
      out += fmt_g17(grid[g]);
      out += ',';
      out += fmt_g17(mean[g]);
      out += ',';
      out += fmt_g17(band.lower[g]);
      out += ',';
      out += fmt_g17(band.upper[g]);
      out += '\n';
    }
  }
  return out;
}

inline std::string gfm_curves_csv(std::span<const std::string> labels, const GfmFit& fit,
                                  std::span<const double> grid, double level) {
  const CredibleBand band = gfm_band(fit, grid, level);
  std::string out(kCurvesHeader);
  out += '\n';
  for (const std::string& label : labels) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      out += label;
      out += ',';
      out += fmt_g17(grid[g]);
      out += ',';
      out += fmt_g17(gfm_marginal_survival(fit.params, grid[g]));
      out += ',';
      out += fmt_g17(band.lower[g]);
      out += ',';
      out += fmt_g17(band.upper[g]);
      out += '\n';
    }
  }
  return out;
}

}  // namespace detail

// Metrics for one fitted model on one dataset. Truth (mixtures plus the
// per-group mixture index) is optional; without it coverage is NaN.
struct TruthRef {
  std::span<const MixtureSpec> mixtures;
  std::span<const int> mixture_per_group;
};

// Either a posterior trace or a GFM fit.
using FittedModel = std::variant<AnyTrace, GfmFit>;

inline MetricsRow compute_metrics(const std::string& model_name, const FittedModel& fitted,
                                  const Dataset& fit_data, const Dataset& lppd_data,
                                  std::span<const double> grid, double level,
                                  const std::optional<TruthRef>& truth,
                                  const std::string& scenario_label, int replicate) {
  MetricsRow row;
  row.model = model_name;
  row.scenario = scenario_label;
  row.replicate = replicate;
  row.coverage = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> percentiles = default_percentiles();
  const int J = fit_data.group_count;

  if (const auto* gfm = std::get_if<GfmFit>(&fitted)) {
    double total = 0.0;
    for (const Observation& obs : lppd_data.observations)
      total += gfm_log_score(gfm->params, obs);
    row.mean_lppd = total / static_cast<double>(lppd_data.observations.size());
    const CredibleBand band = gfm_band(*gfm, grid, level);
    row.mean_width = band.mean_width;
    if (truth) {
      double cov = 0.0;
      for (int j = 0; j < J; ++j) {
        const MixtureSpec& mix =
            truth->mixtures[static_cast<std::size_t>(truth->mixture_per_group[static_cast<std::size_t>(j)])];
        cov += coverage_at_percentiles(
            band, [&](double t) { return mixture_survival(mix, t); },
            [&](double p) { return mixture_quantile(mix, p); }, percentiles);
      }
      row.coverage = cov / static_cast<double>(J);
    }
    return row;
  }

  const AnyTrace& trace = std::get<AnyTrace>(fitted);
  row.mean_lppd = std::visit([&](const auto& t) { return mean_lppd(t, lppd_data); }, trace);
  const auto per_group =
      std::visit([&](const auto& t) { return all_group_curves(t, J, grid); }, trace);
  double width = 0.0;
  double cov = 0.0;
  for (int j = 0; j < J; ++j) {
    const CredibleBand band = credible_band(grid, per_group[static_cast<std::size_t>(j)], level);
    width += band.mean_width;
    if (truth) {
      const MixtureSpec& mix =
          truth->mixtures[static_cast<std::size_t>(truth->mixture_per_group[static_cast<std::size_t>(j)])];
      cov += coverage_at_percentiles(
          band, [&](double t) { return mixture_survival(mix, t); },
          [&](double p) { return mixture_quantile(mix, p); }, percentiles);
    }
  }
  row.mean_width = width / static_cast<double>(J);
  if (truth) row.coverage = cov / static_cast<double>(J);
  return row;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline int run_simulate(const PipelineArgs& args) {
  if (!args.seed_set) {
    detail::log_error("simulate requires --seed");
    return kExitInvalidConfig;
  }
  ScenarioConfig scenario;
  scenario.group_count = args.groups;
  scenario.group_size = args.group_size;
  scenario.target_censoring = args.censoring;
  scenario.seed = args.mcmc.seed;
  const std::vector<MixtureSpec> mixtures = default_mixtures();
  scenario.mixture_assignment = cycle_assignment(args.groups, static_cast<int>(mixtures.size()));
  SimulatedDataset sim;
  try {
    check_scenario(scenario, mixtures.size());
    Rng rng(scenario.seed);
    sim = generate_dataset(scenario, mixtures, rng);
  } catch (const std::invalid_argument& e) {
    detail::log_error(e.what());
    return kExitInvalidConfig;
  }
  if (!detail::ensure_out_dir(args.out_dir)) {
    detail::log_error("cannot create output directory " + args.out_dir);
    return kExitUnwritableOutput;
  }
  const std::vector<std::string> labels = numeric_labels(scenario.group_count);
  const std::vector<std::pair<std::string, std::string>> cfg = {
      {"groups", std::to_string(scenario.group_count)},
      {"group_size", std::to_string(scenario.group_size)},
      {"censoring", detail::fmt_g17(scenario.target_censoring)},
      {"frailty_shape", detail::fmt_g17(scenario.frailty.shape)},
      {"frailty_rate", detail::fmt_g17(scenario.frailty.rate)},
      {"censoring_rate", detail::fmt_g17(sim.censoring_rate)},
      {"seed", std::to_string(scenario.seed)},
      {"out", args.out_dir},
  };
  if (!detail::write_output(args.out_dir, "dataset.csv",
                            serialize_dataset(sim.dataset, labels)) ||
      !detail::write_output(args.out_dir, "truth.csv", serialize_truth(sim, labels)) ||
      !detail::write_output(args.out_dir, "effective_config_simulate.txt",
                            detail::effective_config_text("simulate", cfg)))
    return kExitUnwritableOutput;
  return kExitOk;
}

inline int run_fit(const PipelineArgs& args) {
  const bool is_gfm = args.model == "gfm";
  if (!is_gfm && !parse_model(args.model)) {
    detail::log_error("unknown model '" + args.model + "'");
    return kExitInvalidConfig;
  }
  if (!args.seed_set && !is_gfm) {
    detail::log_error("fit requires --seed");
    return kExitInvalidConfig;
  }
  try {
    check_config(args.mcmc);
  } catch (const std::invalid_argument& e) {
    detail::log_error(e.what());
    return kExitInvalidConfig;
  }
  const auto text = read_text_file(args.data_path);
  if (!text) {
    detail::log_error("cannot read " + args.data_path);
    return kExitUnreadableInput;
  }
  ParsedDataset parsed;
  try {
    parsed = parse_dataset(*text);
  } catch (const std::invalid_argument& e) {
    detail::log_error(e.what());
    return kExitUnreadableInput;
  }
  if (!detail::ensure_out_dir(args.out_dir)) {
    detail::log_error("cannot create output directory " + args.out_dir);
    return kExitUnwritableOutput;
  }

  std::vector<double> grid;
  std::string curves;
  std::string fit_file_name;
  std::string fit_file_content;
  try {
    grid = default_grid(parsed.dataset, args.grid_points);
    if (is_gfm) {
      const GfmFit fit = fit_gfm(parsed.dataset);
      fit_file_name = "gfm_fit.txt";
      fit_file_content = serialize_gfm_fit(fit);
      curves = detail::gfm_curves_csv(parsed.group_labels, fit, grid, args.level);
    } else {
      const BaseMeasure base = default_base_measure(parsed.dataset);
      const AnyTrace trace = run_chain(*parse_model(args.model), parsed.dataset, args.mcmc, base);
      fit_file_name = "trace.txt";
      fit_file_content = serialize_trace(trace, parsed.dataset.group_count);
      const auto per_group = std::visit(
          [&](const auto& t) { return all_group_curves(t, parsed.dataset.group_count, grid); },
          trace);
      curves = detail::curves_csv(parsed.group_labels, per_group, grid, args.level);
    }
  } catch (const std::exception& e) {
    detail::log_error(e.what());
    return kExitOther;
  }

  const std::vector<std::pair<std::string, std::string>> cfg = {
      {"model", args.model},
      {"data", args.data_path},
      {"iterations", std::to_string(args.mcmc.iterations)},
      {"burn_in", std::to_string(args.mcmc.burn_in)},
      {"thin", std::to_string(args.mcmc.thin)},
      {"truncation_l", std::to_string(args.mcmc.truncation_l)},
      {"truncation_k", std::to_string(args.mcmc.truncation_k)},
      {"seed", std::to_string(args.mcmc.seed)},
      {"grid_points", std::to_string(args.grid_points)},
      {"level", detail::fmt_g17(args.level)},
      {"out", args.out_dir},
  };
  if (!detail::write_output(args.out_dir, fit_file_name, fit_file_content) ||
      !detail::write_output(args.out_dir, "curves.csv", curves) ||
      !detail::write_output(args.out_dir, "effective_config_fit.txt",
                            detail::effective_config_text("fit", cfg)))
    return kExitUnwritableOutput;
  return kExitOk;
}

namespace detail {

// Load either kind of fitted model by sniffing the magic line.
inline std::optional<FittedModel> load_fitted(const std::string& path, std::string* model_name) {
  const auto text = read_text_file(path);
  if (!text) {
    log_error("cannot read " + path);
    return std::nullopt;
  }
  try {
    if (text->rfind(kGfmMagic, 0) == 0) {
      if (model_name) *model_name = "gfm";
      return FittedModel(parse_gfm_fit(*text));
    }
    AnyTrace trace = parse_trace(*text);
    if (model_name) {
      if (std::holds_alternative<Trace<DpState>>(trace)) *model_name = "dp";
      else if (std::holds_alternative<Trace<HdpState>>(trace)) *model_name = "hdp";
      else *model_name = "ndp";
    }
    return FittedModel(std::move(trace));
  } catch (const std::invalid_argument& e) {
    log_error(e.what());
    return std::nullopt;
  }
}

// Remap a held-out dataset onto the fit dataset's dense group indices.
inline std::optional<Dataset> remap_holdout(const ParsedDataset& holdout,
                                            const std::vector<std::string>& labels) {
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < labels.size(); ++j) index[labels[j]] = static_cast<int>(j);
  std::vector<Observation> obs;
  obs.reserve(holdout.dataset.observations.size());
  for (const Observation& o : holdout.dataset.observations) {
    const auto it = index.find(holdout.group_labels[static_cast<std::size_t>(o.group)]);
    if (it == index.end()) {
      log_error("holdout group '" + holdout.group_labels[static_cast<std::size_t>(o.group)] +
                "' not present in the fit dataset");
      return std::nullopt;
    }
    obs.push_back({o.time, o.event, it->second});
  }
  try {
    return validate(dataset_from(std::move(obs)));
  } catch (const std::invalid_argument& e) {
    log_error(std::string("holdout: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace detail

inline int run_evaluate(const PipelineArgs& args) {
  const auto text = read_text_file(args.data_path);
  if (!text) {
    detail::log_error("cannot read " + args.data_path);
    return kExitUnreadableInput;
  }
  ParsedDataset parsed;
  try {
    parsed = parse_dataset(*text);
  } catch (const std::invalid_argument& e) {
    detail::log_error(e.what());
    return kExitUnreadableInput;
  }
  std::string model_name;
  auto fitted = detail::load_fitted(args.trace_path, &model_name);
  if (!fitted) return kExitUnreadableInput;

  Dataset lppd_data = parsed.dataset;
  if (!args.holdout_path.empty()) {
    const auto holdout_text = read_text_file(args.holdout_path);
    if (!holdout_text) {
      detail::log_error("cannot read " + args.holdout_path);
      return kExitUnreadableInput;
    }
    try {
      const ParsedDataset holdout = parse_dataset(*holdout_text);
      const auto remapped = detail::remap_holdout(holdout, parsed.group_labels);
      if (!remapped) return kExitUnreadableInput;
      lppd_data = *remapped;
    } catch (const std::invalid_argument& e) {
      detail::log_error(e.what());
      return kExitUnreadableInput;
    }
  }

  std::vector<MixtureSpec> mixtures;
  std::vector<int> mixture_per_group;
  std::optional<TruthRef> truth;
  if (!args.truth_path.empty()) {
    const auto truth_text = read_text_file(args.truth_path);
    if (!truth_text) {
      detail::log_error("cannot read " + args.truth_path);
      return kExitUnreadableInput;
    }
    try {
      const TruthSidecar aligned = align_truth(parse_truth(*truth_text), parsed.group_labels);
      mixtures = default_mixtures();
      mixture_per_group = aligned.mixture;
      for (int m : mixture_per_group)
        if (static_cast<std::size_t>(m) >= mixtures.size())
          throw std::invalid_argument("truth: mixture index out of range for the default design");
      truth = TruthRef{mixtures, mixture_per_group};
    } catch (const std::invalid_argument& e) {
      detail::log_error(e.what());
      return kExitUnreadableInput;
    }
  }

  MetricsRow row;
  try {
    const std::vector<double> grid = default_grid(parsed.dataset, args.grid_points);
    row = compute_metrics(model_name, *fitted, parsed.dataset, lppd_data, grid, args.level, truth,
                          args.scenario_label, args.replicate);
  } catch (const std::exception& e) {
    detail::log_error(e.what());
    return kExitOther;
  }
  if (!detail::ensure_out_dir(args.out_dir)) {
    detail::log_error("cannot create output directory " + args.out_dir);
    return kExitUnwritableOutput;
  }
  const std::vector<std::pair<std::string, std::string>> cfg = {
      {"data", args.data_path},
      {"trace", args.trace_path},
      {"truth", args.truth_path.empty() ? "(none)" : args.truth_path},
      {"holdout", args.holdout_path.empty() ? "(none)" : args.holdout_path},
      {"grid_points", std::to_string(args.grid_points)},
      {"level", detail::fmt_g17(args.level)},
      {"scenario", args.scenario_label},
      {"replicate", std::to_string(args.replicate)},
      {"out", args.out_dir},
  };
  if (!detail::write_output(args.out_dir, "metrics.csv",
                            serialize_metrics(std::span<const MetricsRow>(&row, 1))) ||
      !detail::write_output(args.out_dir, "effective_config_evaluate.txt",
                            detail::effective_config_text("evaluate", cfg)))
    return kExitUnwritableOutput;
  return kExitOk;
}

inline int run_curves(const PipelineArgs& args) {
  const auto text = read_text_file(args.data_path);
  if (!text) {
    detail::log_error("cannot read " + args.data_path);
    return kExitUnreadableInput;
  }
  ParsedDataset parsed;
  try {
    parsed = parse_dataset(*text);
  } catch (const std::invalid_argument& e) {
    detail::log_error(e.what());
    return kExitUnreadableInput;
  }
  auto fitted = detail::load_fitted(args.trace_path, nullptr);
  if (!fitted) return kExitUnreadableInput;
  if (!detail::ensure_out_dir(args.out_dir)) {
    detail::log_error("cannot create output directory " + args.out_dir);
    return kExitUnwritableOutput;
  }
  std::string curves;
  try {
    const std::vector<double> grid = default_grid(parsed.dataset, args.grid_points);
    if (const auto* gfm = std::get_if<GfmFit>(&*fitted)) {
      curves = detail::gfm_curves_csv(parsed.group_labels, *gfm, grid, args.level);
    } else {
      const auto& trace = std::get<AnyTrace>(*fitted);
      const auto per_group = std::visit(
          [&](const auto& t) { return all_group_curves(t, parsed.dataset.group_count, grid); },
          trace);
      curves = detail::curves_csv(parsed.group_labels, per_group, grid, args.level);
    }
  } catch (const std::exception& e) {
    detail::log_error(e.what());
    return kExitOther;
  }
  const std::vector<std::pair<std::string, std::string>> cfg = {
      {"data", args.data_path},
      {"trace", args.trace_path},
      {"grid_points", std::to_string(args.grid_points)},
      {"level", detail::fmt_g17(args.level)},
      {"out", args.out_dir},
  };
  if (!detail::write_output(args.out_dir, "curves.csv", curves) ||
      !detail::write_output(args.out_dir, "effective_config_curves.txt",
                            detail::effective_config_text("curves", cfg)))
    return kExitUnwritableOutput;
  return kExitOk;
}

// The scenario sweep mirroring the simulation study: every (J, n_j) cell is
// generated fresh per replicate and fitted by all four models; one combined
// metrics table comes out.
inline int run_compare(const PipelineArgs& args) {
  if (!args.seed_set) {
    detail::log_error("compare requires --seed");
    return kExitInvalidConfig;
  }
  try {
    check_config(args.mcmc);
  } catch (const std::invalid_argument& e) {
    detail::log_error(e.what());
    return kExitInvalidConfig;
  }
  if (args.compare_replicates < 1) {
    detail::log_error("compare needs at least 1 replicate");
    return kExitInvalidConfig;
  }
  if (!detail::ensure_out_dir(args.out_dir)) {
    detail::log_error("cannot create output directory " + args.out_dir);
    return kExitUnwritableOutput;
  }

  const std::array<std::pair<int, int>, 5> scenarios{
      {{10, 60}, {20, 30}, {30, 20}, {60, 10}, {100, 6}}};
  const std::array<std::string, 4> models{"dp", "hdp", "ndp", "gfm"};
  const std::vector<MixtureSpec> mixtures = default_mixtures();
  std::vector<MetricsRow> rows;

  try {
    for (std::size_t sc = 0; sc < scenarios.size(); ++sc) {
      const auto [J, nj] = scenarios[sc];
      const std::string label = "J" + std::to_string(J) + "_n" + std::to_string(nj);
      for (int rep = 0; rep < args.compare_replicates; ++rep) {
        ScenarioConfig scenario;
        scenario.group_count = J;
        scenario.group_size = nj;
        scenario.target_censoring = args.censoring;
        scenario.mixture_assignment = cycle_assignment(J, static_cast<int>(mixtures.size()));
        scenario.seed = substream_seed(args.mcmc.seed, sc * 16 + static_cast<std::size_t>(rep));
        Rng rng(scenario.seed);
        const SimulatedDataset sim = generate_dataset(scenario, mixtures, rng);
        const std::vector<double> grid = default_grid(sim.dataset, args.grid_points);
        const TruthRef truth{mixtures, sim.true_mixture_per_group};
        for (std::size_t m = 0; m < models.size(); ++m) {
          FittedModel fitted;
          if (models[m] == "gfm") {
            fitted = fit_gfm(sim.dataset);
          } else {
            McmcConfig mc = args.mcmc;
            mc.seed = substream_seed(scenario.seed, 1000 + m);
            fitted = run_chain(*parse_model(models[m]), sim.dataset, mc,
                               default_base_measure(sim.dataset));
          }
          rows.push_back(compute_metrics(models[m], fitted, sim.dataset, sim.dataset, grid,
                                         args.level, truth, label, rep));
          std::fprintf(stderr, "compare: %s %s replicate %d done\n", label.c_str(),
                       models[m].c_str(), rep);
        }
      }
    }
  } catch (const std::exception& e) {
    detail::log_error(e.what());
    return kExitOther;
  }

  const std::vector<std::pair<std::string, std::string>> cfg = {
      {"iterations", std::to_string(args.mcmc.iterations)},
      {"burn_in", std::to_string(args.mcmc.burn_in)},
      {"thin", std::to_string(args.mcmc.thin)},
      {"truncation_l", std::to_string(args.mcmc.truncation_l)},
      {"truncation_k", std::to_string(args.mcmc.truncation_k)},
      {"seed", std::to_string(args.mcmc.seed)},
      {"replicates", std::to_string(args.compare_replicates)},
      {"censoring", detail::fmt_g17(args.censoring)},
      {"grid_points", std::to_string(args.grid_points)},
      {"level", detail::fmt_g17(args.level)},
      {"out", args.out_dir},
  };
  if (!detail::write_output(args.out_dir, "metrics.csv", serialize_metrics(rows)) ||
      !detail::write_output(args.out_dir, "effective_config_compare.txt",
                            detail::effective_config_text("compare", cfg)))
    return kExitUnwritableOutput;
  return kExitOk;
}

}  // namespace bnpsurv
