#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/kernels.hpp"
#include "bnpsurv/rng.hpp"

namespace bnpsurv {

// ---------------------------------------------------------------------------
// Mixture specifications
// ---------------------------------------------------------------------------

struct MixtureComponent {
  double weight = 1.0;
  KernelParams params;

  friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  friend bool operator==(const MixtureSpec&, const MixtureSpec&) = default;
};

inline void check_mixture(const MixtureSpec& mix) {
  if (mix.components.empty()) throw std::invalid_argument("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : mix.components) {
    if (!(c.weight >= 0.0)) throw std::invalid_argument("mixture weights must be nonnegative");
    check_params(c.params);
    total += c.weight;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("mixture weights must sum to 1");
}

inline double mixture_density(const MixtureSpec& mix, double t) {
  double f = 0.0;
  for (const auto& c : mix.components)
    if (c.weight > 0.0) f += c.weight * kernel_density(c.params, t);
  return f;
}

inline double mixture_survival(const MixtureSpec& mix, double t) {
  double s = 0.0;
  for (const auto& c : mix.components)
    if (c.weight > 0.0) s += c.weight * kernel_survival(c.params, t);
  return s;
}

inline double mixture_mean(const MixtureSpec& mix) {
  double m = 0.0;
  for (const auto& c : mix.components) {
    if (c.weight <= 0.0) continue;
    if (const auto* ln = std::get_if<LogNormalParams>(&c.params))
      m += c.weight * std::exp(ln->mu + 0.5 * ln->sigma * ln->sigma);
    else {
      const auto& wb = std::get<WeibullParams>(c.params);
      m += c.weight * wb.scale * std::tgamma(1.0 + 1.0 / wb.shape);
    }
  }
  return m;
}

// Quantile of the mixture by bisection on the survival function; the upper
// bracket is the largest component quantile, where mixture survival is
// already <= 1 - p.
inline double mixture_quantile(const MixtureSpec& mix, double p) {
  if (!(p > 0.0) && p != 0.0) throw std::invalid_argument("mixture_quantile: p must be in [0,1)");
  if (!(p < 1.0) || p < 0.0) throw std::invalid_argument("mixture_quantile: p must be in [0,1)");
  if (p == 0.0) return 0.0;
  double hi = 0.0;
  for (const auto& c : mix.components)
    if (c.weight > 0.0) hi = std::max(hi, kernel_quantile(c.params, p));
  double lo = 0.0;
  const double target = 1.0 - p;
  for (int iter = 0; iter < 200 && hi - lo > 1e-13 * (1.0 + hi); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_survival(mix, mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// The three default generating mixtures: 1 and 2 share their shape but differ
// in location (+0.8 on the log scale); 3 matches 1's mean with a different
// shape (heavy-tailed Weibull). The Weibull scale is solved from the mean
// relation E[T] = scale * Gamma(1 + 1/shape).
inline std::vector<MixtureSpec> default_mixtures() {
  MixtureSpec m1{{{0.6, LogNormalParams{0.0, 0.5}}, {0.4, LogNormalParams{1.2, 0.4}}}};
  MixtureSpec m2{{{0.6, LogNormalParams{0.8, 0.5}}, {0.4, LogNormalParams{2.0, 0.4}}}};
  const double shape3 = 0.8;
  const double scale3 = mixture_mean(m1) / std::tgamma(1.0 + 1.0 / shape3);
  MixtureSpec m3{{{1.0, WeibullParams{shape3, scale3}}}};
  return {m1, m2, m3};
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct FrailtyLaw {
  double shape = 1.0;
  double rate = 1.0;

  friend bool operator==(const FrailtyLaw&, const FrailtyLaw&) = default;
};

struct ScenarioConfig {
  int group_count = 30;
  int group_size = 20;
  std::vector<int> mixture_assignment;  // mixture index per group
  double target_censoring = 0.5;
  FrailtyLaw frailty{};
  std::uint64_t seed = 0;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

inline std::vector<int> cycle_assignment(int group_count, int n_mixtures) {
  std::vector<int> out(static_cast<std::size_t>(group_count));
  for (int j = 0; j < group_count; ++j) out[static_cast<std::size_t>(j)] = j % n_mixtures;
  return out;
}

inline void check_scenario(const ScenarioConfig& config, std::size_t n_mixtures) {
  if (config.group_count < 1 || config.group_size < 1)
    throw std::invalid_argument("scenario: need group_count >= 1 and group_size >= 1");
  if (config.mixture_assignment.size() != static_cast<std::size_t>(config.group_count))
    throw std::invalid_argument("scenario: one mixture index per group required");
  for (int m : config.mixture_assignment)
    if (m < 0 || static_cast<std::size_t>(m) >= n_mixtures)
      throw std::invalid_argument("scenario: mixture index out of range");
  if (!(config.target_censoring >= 0.0) || config.target_censoring >= 1.0)
    throw std::invalid_argument("scenario: target_censoring must be in [0,1)");
  if (!(config.frailty.shape > 0.0) || !(config.frailty.rate > 0.0))
    throw std::invalid_argument("scenario: frailty law must be strictly positive");
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

// Event time under a group frailty u acting on the hazard of the drawn
// component: pick the component by weight, then solve S_c(t)^u = U.
inline double draw_event_time(const MixtureSpec& mix, double u, Rng& rng) {
  if (!(u > 0.0)) throw std::invalid_argument("draw_event_time: frailty must be positive");
  std::vector<double> weights;
  weights.reserve(mix.components.size());
  for (const auto& c : mix.components) weights.push_back(c.weight);
  const int comp = rng.categorical(weights);
  double s = std::exp(std::log(rng.uniform()) / u);
  s = std::min(std::max(s, 1e-300), 1.0 - 1e-16);
  return kernel_quantile_from_survival(mix.components[static_cast<std::size_t>(comp)].params, s);
}

// Rate of the independent exponential censoring law hitting the target
// censored fraction, by bisection over a fixed set of Monte-Carlo pairs.
// With pre-drawn event times T_i and unit exponentials E_i, the censored
// fraction mean(E_i < rate * T_i) is monotone in the rate, so bisection is
// exact on this sample. Target 0 returns the no-censoring sentinel rate 0.
inline double calibrate_censoring_rate(std::span<const MixtureSpec> mixtures,
                                       std::span<const int> mixture_assignment,
                                       const FrailtyLaw& frailty, double target, Rng& rng,
                                       int n_samples = 100000) {
  if (!(target >= 0.0) || target >= 1.0)
    throw std::invalid_argument("calibrate_censoring_rate: target must be in [0,1)");
  if (target == 0.0) return 0.0;
  if (mixtures.empty() || mixture_assignment.empty())
    throw std::invalid_argument("calibrate_censoring_rate: empty design");
  std::vector<double> event_times(static_cast<std::size_t>(n_samples));
  std::vector<double> unit_exp(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const int m = mixture_assignment[static_cast<std::size_t>(i) % mixture_assignment.size()];
    const double u = std::max(rng.gamma(frailty.shape, frailty.rate), 1e-12);
    event_times[static_cast<std::size_t>(i)] =
        draw_event_time(mixtures[static_cast<std::size_t>(m)], u, rng);
    unit_exp[static_cast<std::size_t>(i)] = rng.exponential(1.0);
  }
  const auto censored_fraction = [&](double rate) {
    int c = 0;
    for (int i = 0; i < n_samples; ++i)
      if (unit_exp[static_cast<std::size_t>(i)] < rate * event_times[static_cast<std::size_t>(i)])
        ++c;
    return static_cast<double>(c) / n_samples;
  };
  double hi = 1.0;
  int guard = 0;
  while (censored_fraction(hi) < target && guard++ < 60) hi *= 2.0;
  double lo = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (censored_fraction(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct SimulatedDataset {
  Dataset dataset;
  std::vector<int> true_mixture_per_group;
  std::vector<double> true_frailty_per_group;
  std::vector<MixtureSpec> mixtures;
  double censoring_rate = 0.0;  // calibrated exponential rate; 0 = uncensored

  // Frailty-free survival of the mixture that generated the group.
  double true_survival(int group, double t) const {
    const int m = true_mixture_per_group[static_cast<std::size_t>(group)];
    return mixture_survival(mixtures[static_cast<std::size_t>(m)], t);
  }

  friend bool operator==(const SimulatedDataset&, const SimulatedDataset&) = default;
};

// Draws the whole scenario from one stream: censoring calibration first
// (fixed sample count), then per-group frailties and observations. Same
// config and rng state give the identical dataset.
inline SimulatedDataset generate_dataset(const ScenarioConfig& config,
                                         std::span<const MixtureSpec> mixtures, Rng& rng) {
  check_scenario(config, mixtures.size());
  for (const auto& mix : mixtures) check_mixture(mix);

  SimulatedDataset out;
  out.mixtures.assign(mixtures.begin(), mixtures.end());
  out.true_mixture_per_group = config.mixture_assignment;
  out.censoring_rate = calibrate_censoring_rate(mixtures, config.mixture_assignment,
                                                config.frailty, config.target_censoring, rng);

  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(config.group_count) *
              static_cast<std::size_t>(config.group_size));
  out.true_frailty_per_group.resize(static_cast<std::size_t>(config.group_count));
  for (int j = 0; j < config.group_count; ++j) {
    const double u = std::max(rng.gamma(config.frailty.shape, config.frailty.rate), 1e-12);
    out.true_frailty_per_group[static_cast<std::size_t>(j)] = u;
    const auto& mix =
        mixtures[static_cast<std::size_t>(config.mixture_assignment[static_cast<std::size_t>(j)])];
    for (int i = 0; i < config.group_size; ++i) {
      const double t = draw_event_time(mix, u, rng);
      if (out.censoring_rate > 0.0) {
        const double c = rng.exponential(out.censoring_rate);
        obs.push_back({std::min(t, c), t <= c, j});
      } else {
        obs.push_back({t, true, j});
      }
    }
  }
  out.dataset = validate(dataset_from(std::move(obs)));
  return out;
}

// Paired replicate for held-out scoring: identical truth (mixture
// assignments, frailties, censoring rate) with fresh observation noise.
inline SimulatedDataset holdout_replicate(const SimulatedDataset& sim, int group_size, Rng& rng) {
  SimulatedDataset out;
  out.mixtures = sim.mixtures;
  out.true_mixture_per_group = sim.true_mixture_per_group;
  out.true_frailty_per_group = sim.true_frailty_per_group;
  out.censoring_rate = sim.censoring_rate;
  std::vector<Observation> obs;
  const int J = static_cast<int>(sim.true_mixture_per_group.size());
  obs.reserve(static_cast<std::size_t>(J) * static_cast<std::size_t>(group_size));
  for (int j = 0; j < J; ++j) {
    const double u = sim.true_frailty_per_group[static_cast<std::size_t>(j)];
    const auto& mix = sim.mixtures[static_cast<std::size_t>(
        sim.true_mixture_per_group[static_cast<std::size_t>(j)])];
    for (int i = 0; i < group_size; ++i) {
      const double t = draw_event_time(mix, u, rng);
      if (sim.censoring_rate > 0.0) {
        const double c = rng.exponential(sim.censoring_rate);
        obs.push_back({std::min(t, c), t <= c, j});
      } else {
        obs.push_back({t, true, j});
      }
    }
  }
  out.dataset = validate(dataset_from(std::move(obs)));
  return out;
}

}  // namespace bnpsurv
