#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/kernels.hpp"
#include "bnpsurv/math.hpp"
#include "bnpsurv/rng.hpp"
#include "bnpsurv/sticks.hpp"

namespace bnpsurv {

// ---------------------------------------------------------------------------
// Censoring-aware component likelihood
// ---------------------------------------------------------------------------

// Events contribute the density, censored records the survival probability:
// gamma * f(y|theta) + (1 - gamma) * S(y|theta).
inline double censored_component_log_score(const Observation& obs, const KernelParams& atom) {
  return obs.event ? kernel_log_density(atom, obs.time) : kernel_log_survival(atom, obs.time);
}

inline double censored_component_score(const Observation& obs, const KernelParams& atom) {
  return obs.event ? kernel_density(atom, obs.time) : kernel_survival(atom, obs.time);
}

// Normalized assignment probabilities p(l) ∝ w_l * score, computed through
// log-scores with max subtraction.
inline std::vector<double> assignment_probs(const Observation& obs,
                                            std::span<const double> weights,
                                            std::span<const KernelParams> atoms) {
  if (weights.size() != atoms.size())
    throw std::invalid_argument("assignment_probs: weights/atoms length mismatch");
  std::vector<double> logp(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l)
    logp[l] = std::log(weights[l]) + censored_component_log_score(obs, atoms[l]);
  const double lse = log_sum_exp(logp);
  std::vector<double> out(weights.size(), 0.0);
  if (!std::isfinite(lse)) return out;
  for (std::size_t l = 0; l < weights.size(); ++l) out[l] = std::exp(logp[l] - lse);
  return out;
}

// Categorical draw of the component for one observation. When every score
// underflows, falls back to the prior weights so the chain stays mobile.
inline int assign_observation(const Observation& obs, const Sticks& weights,
                              std::span<const KernelParams> atoms, Rng& rng) {
  if (weights.w.size() != atoms.size())
    throw std::invalid_argument("assign_observation: weights/atoms length mismatch");
  std::vector<double> logp(atoms.size());
  for (std::size_t l = 0; l < atoms.size(); ++l)
    logp[l] = std::log(weights.w[l]) + censored_component_log_score(obs, atoms[l]);
  int idx = rng.categorical_log(logp);
  if (idx < 0) idx = rng.categorical(weights.w);
  return idx;
}

// Draw what the censored observation could have been: the assigned kernel
// conditioned on exceeding the censoring time. Empty when no numerical mass
// remains beyond it.
inline std::optional<double> augment_censored(const Observation& obs, const KernelParams& atom,
                                              Rng& rng) {
  if (obs.event) throw std::invalid_argument("augment_censored: observation is not censored");
  return sample_truncated(atom, obs.time, rng);
}

// ---------------------------------------------------------------------------
// Chain configuration and traces
// ---------------------------------------------------------------------------

enum class ModelKind { dp, hdp, ndp };

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::dp: return "dp";
    case ModelKind::hdp: return "hdp";
    default: return "ndp";
  }
}

inline std::optional<ModelKind> parse_model(const std::string& s) {
  if (s == "dp") return ModelKind::dp;
  if (s == "hdp") return ModelKind::hdp;
  if (s == "ndp") return ModelKind::ndp;
  return std::nullopt;
}

struct McmcConfig {
  int iterations = 4000;
  int burn_in = 2000;
  int thin = 2;
  std::uint64_t seed = 0;
  int truncation_l = 40;   // atoms per mixture
  int truncation_k = 15;   // top-level clusters (ndp only)
  GammaPrior concentration_prior{};

  friend bool operator==(const McmcConfig&, const McmcConfig&) = default;
};

inline void check_config(const McmcConfig& c) {
  if (c.burn_in < 0 || c.iterations <= c.burn_in)
    throw std::invalid_argument("config: need iterations > burn_in >= 0");
  if (c.thin < 1) throw std::invalid_argument("config: thin must be >= 1");
  if (c.truncation_l < 1 || c.truncation_k < 1)
    throw std::invalid_argument("config: truncation levels must be >= 1");
}

inline int trace_length(const McmcConfig& c) { return (c.iterations - c.burn_in) / c.thin; }

template <class State>
struct Trace {
  McmcConfig config;
  std::vector<State> states;

  friend bool operator==(const Trace&, const Trace&) = default;
};

// ---------------------------------------------------------------------------
// Model states
// ---------------------------------------------------------------------------

// Pooled Dirichlet process mixture: one weight vector and atom table shared by
// every observation, group labels ignored.
struct DpState {
  std::vector<int> assignments;
  std::vector<KernelParams> atoms;
  Sticks sticks;
  // Working response per observation: the recorded time for events, the
  // augmented draw for censored records (NaN when truncation had no support
  // this sweep, which drops the value from atom updates).
  std::vector<double> augmented;

  friend bool operator==(const DpState&, const DpState&) = default;
};

// Hierarchical DP, truncated direct assignment: shared atoms and global
// sticks beta, per-group weights pi_j | beta drawn from a Dirichlet, beta
// updated through auxiliary table counts.
struct HdpState {
  Sticks beta;  // beta.alpha holds the top-level concentration
  double alpha0 = 1.0;
  std::vector<std::vector<double>> group_weights;  // J x L
  std::vector<KernelParams> atoms;
  std::vector<int> assignments;
  std::vector<double> augmented;
  std::vector<std::vector<int>> table_counts;  // J x L occupancy of the auxiliary restaurant

  friend bool operator==(const HdpState&, const HdpState&) = default;
};

// Nested DP: groups are assigned to K cluster-level mixtures, each with its
// own sticks and atom table.
struct NdpState {
  std::vector<int> group_assign;  // zeta_j
  Sticks top;                     // top.alpha holds the top-level concentration
  std::vector<Sticks> cluster_sticks;
  double within_alpha = 1.0;
  std::vector<std::vector<KernelParams>> cluster_atoms;  // K x L
  std::vector<int> assignments;  // atom index inside the group's cluster
  std::vector<double> augmented;

  friend bool operator==(const NdpState&, const NdpState&) = default;
};

// ---------------------------------------------------------------------------
// Shared sweep machinery
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::vector<double> log_times(const Dataset& data) {
  std::vector<double> lt(data.observations.size());
  for (std::size_t i = 0; i < lt.size(); ++i) lt[i] = std::log(data.observations[i].time);
  return lt;
}

// Row-major log-score matrix: entry (i, a) is the censoring-aware log score
// of observation i under atoms[a]. The variant is resolved once per atom.
inline void fill_log_scores(const Dataset& data, std::span<const double> lt,
                            std::span<const KernelParams> atoms, double* out) {
  const std::size_t n = data.observations.size();
  const std::size_t stride = atoms.size();
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (const auto* ln = std::get_if<LogNormalParams>(&atoms[a])) {
      const double inv_sigma = 1.0 / ln->sigma;
      const double log_sigma = std::log(ln->sigma);
      for (std::size_t i = 0; i < n; ++i) {
        const double z = (lt[i] - ln->mu) * inv_sigma;
        out[i * stride + a] = data.observations[i].event
                                  ? -lt[i] - log_sigma - kLogSqrt2Pi - 0.5 * z * z
                                  : log_normal_sf(z);
      }
    } else {
      const auto& wb = std::get<WeibullParams>(atoms[a]);
      const double log_scale = std::log(wb.scale);
      const double log_shape = std::log(wb.shape);
      for (std::size_t i = 0; i < n; ++i) {
        const double lr = lt[i] - log_scale;
        const double cum_hazard = std::exp(wb.shape * lr);
        out[i * stride + a] = data.observations[i].event
                                  ? log_shape - log_scale + (wb.shape - 1.0) * lr - cum_hazard
                                  : -cum_hazard;
      }
    }
  }
}

// Augment every censored observation from its currently assigned atom.
// `atom_of` maps an observation index to its atom.
template <class AtomOf>
inline void augment_all(const Dataset& data, std::vector<double>& augmented, AtomOf&& atom_of,
                        Rng& rng) {
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const Observation& obs = data.observations[i];
    if (obs.event) {
      augmented[i] = obs.time;
    } else {
      const auto draw = sample_truncated(atom_of(i), obs.time, rng);
      augmented[i] = draw ? *draw : kNaN;
    }
  }
}

// Resample the atom table from the values currently assigned to each atom.
inline void resample_atoms(std::span<const int> assignments, std::span<const double> augmented,
                           const BaseMeasure& base, std::vector<KernelParams>& atoms, Rng& rng,
                           int offset = 0, int table_width = -1) {
  const int L = static_cast<int>(atoms.size());
  if (table_width < 0) table_width = L;
  std::vector<std::vector<double>> values(static_cast<std::size_t>(L));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int a = assignments[i] - offset;
    if (a < 0 || a >= table_width) continue;
    if (std::isfinite(augmented[i])) values[static_cast<std::size_t>(a)].push_back(augmented[i]);
  }
  for (int l = 0; l < L; ++l)
    atoms[static_cast<std::size_t>(l)] =
        draw_atom_posterior(base, values[static_cast<std::size_t>(l)], rng);
}

inline int uniform_index(int n, Rng& rng) {
  const int idx = static_cast<int>(rng.uniform() * n);
  return std::min(idx, n - 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DP sampler
// ---------------------------------------------------------------------------

inline DpState init_dp(const Dataset& data, const BaseMeasure& base, const McmcConfig& config,
                       Rng& rng) {
  const int L = config.truncation_l;
  DpState s;
  s.sticks = prior_sticks(static_cast<std::size_t>(L), 1.0, rng);
  s.atoms.resize(static_cast<std::size_t>(L));
  for (auto& atom : s.atoms) atom = draw_atom_posterior(base, {}, rng);
  s.assignments.resize(data.observations.size());
  for (int& a : s.assignments) a = detail::uniform_index(L, rng);
  s.augmented.resize(data.observations.size());
  detail::augment_all(data, s.augmented, [&](std::size_t i) -> const KernelParams& {
    return s.atoms[static_cast<std::size_t>(s.assignments[i])];
  }, rng);
  return s;
}

inline void gibbs_sweep(DpState& s, const Dataset& data, const BaseMeasure& base,
                        const GammaPrior& prior, Rng& rng) {
  const std::size_t n = data.observations.size();
  const std::size_t L = s.atoms.size();
  const std::vector<double> lt = detail::log_times(data);

  // (1) augmentation given current assignments and atoms
  detail::augment_all(data, s.augmented, [&](std::size_t i) -> const KernelParams& {
    return s.atoms[static_cast<std::size_t>(s.assignments[i])];
  }, rng);

  // (2) component assignments
  std::vector<double> scores(n * L);
  detail::fill_log_scores(data, lt, s.atoms, scores.data());
  std::vector<double> log_w(L);
  for (std::size_t l = 0; l < L; ++l) log_w[l] = std::log(s.sticks.w[l]);
  std::vector<double> logp(L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < L; ++l) logp[l] = log_w[l] + scores[i * L + l];
    int idx = rng.categorical_log(logp);
    if (idx < 0) idx = rng.categorical(s.sticks.w);
    s.assignments[i] = idx;
  }

  // (3) stick weights from occupancy
  std::vector<int> counts(L, 0);
  for (int a : s.assignments) ++counts[static_cast<std::size_t>(a)];
  s.sticks.v = update_sticks(counts, s.sticks.alpha, rng);
  s.sticks.w = break_sticks(s.sticks.v);

  // (4) atoms from assigned event times plus augmented values
  detail::resample_atoms(s.assignments, s.augmented, base, s.atoms, rng);

  // (5) concentration
  s.sticks.alpha = update_concentration(s.sticks.v, prior, rng);
}

// ---------------------------------------------------------------------------
// HDP sampler
// ---------------------------------------------------------------------------

inline HdpState init_hdp(const Dataset& data, const BaseMeasure& base, const McmcConfig& config,
                         Rng& rng) {
  const int L = config.truncation_l;
  const int J = data.group_count;
  HdpState s;
  s.beta = prior_sticks(static_cast<std::size_t>(L), 1.0, rng);
  s.alpha0 = 1.0;
  s.atoms.resize(static_cast<std::size_t>(L));
  for (auto& atom : s.atoms) atom = draw_atom_posterior(base, {}, rng);
  s.group_weights.resize(static_cast<std::size_t>(J));
  std::vector<double> shapes(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l)
    shapes[static_cast<std::size_t>(l)] = s.alpha0 * s.beta.w[static_cast<std::size_t>(l)];
  for (int j = 0; j < J; ++j) s.group_weights[static_cast<std::size_t>(j)] = rng.dirichlet(shapes);
  s.assignments.resize(data.observations.size());
  for (int& a : s.assignments) a = detail::uniform_index(L, rng);
  s.augmented.resize(data.observations.size());
  detail::augment_all(data, s.augmented, [&](std::size_t i) -> const KernelParams& {
    return s.atoms[static_cast<std::size_t>(s.assignments[i])];
  }, rng);
  s.table_counts.assign(static_cast<std::size_t>(J),
                        std::vector<int>(static_cast<std::size_t>(L), 0));
  return s;
}

inline void gibbs_sweep(HdpState& s, const Dataset& data, const BaseMeasure& base,
                        const GammaPrior& prior, Rng& rng) {
  const std::size_t n = data.observations.size();
  const std::size_t L = s.atoms.size();
  const std::size_t J = static_cast<std::size_t>(data.group_count);
  const std::vector<double> lt = detail::log_times(data);

  // (1) augmentation
  detail::augment_all(data, s.augmented, [&](std::size_t i) -> const KernelParams& {
    return s.atoms[static_cast<std::size_t>(s.assignments[i])];
  }, rng);

  // (2) assignments under the group's weights
  std::vector<double> scores(n * L);
  detail::fill_log_scores(data, lt, s.atoms, scores.data());
  std::vector<double> log_pi(J * L);
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t l = 0; l < L; ++l) log_pi[j * L + l] = std::log(s.group_weights[j][l]);
  std::vector<double> logp(L);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = static_cast<std::size_t>(data.observations[i].group);
    for (std::size_t l = 0; l < L; ++l) logp[l] = log_pi[g * L + l] + scores[i * L + l];
    int idx = rng.categorical_log(logp);
    if (idx < 0) idx = rng.categorical(s.group_weights[g]);
    s.assignments[i] = idx;
  }

  // (3) sticks: auxiliary table counts, then beta, then the group weights
  std::vector<std::vector<int>> occupancy(J, std::vector<int>(L, 0));
  for (std::size_t i = 0; i < n; ++i)
    ++occupancy[static_cast<std::size_t>(data.observations[i].group)]
               [static_cast<std::size_t>(s.assignments[i])];
  std::vector<int> tables_per_atom(L, 0);
  int total_tables = 0;
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t l = 0; l < L; ++l) {
      const int cnt = occupancy[j][l];
      int m = 0;
      if (cnt > 0) {
        const double a = s.alpha0 * s.beta.w[l];
        if (a <= 0.0) {
          m = 1;
        } else {
          for (int c = 0; c < cnt; ++c)
            if (rng.uniform() < a / (a + c)) ++m;
        }
      }
      s.table_counts[j][l] = m;
      tables_per_atom[l] += m;
      total_tables += m;
    }
  }
  s.beta.v = update_sticks(tables_per_atom, s.beta.alpha, rng);
  s.beta.w = break_sticks(s.beta.v);
  std::vector<double> shapes(L);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t l = 0; l < L; ++l) shapes[l] = s.alpha0 * s.beta.w[l] + occupancy[j][l];
    s.group_weights[j] = rng.dirichlet(shapes);
  }

  // (4) shared atoms pooled over all groups
  detail::resample_atoms(s.assignments, s.augmented, base, s.atoms, rng);

  // (5) concentrations: top level is conjugate; the group level uses the
  // auxiliary-variable update given total table count.
  s.beta.alpha = update_concentration(s.beta.v, prior, rng);
  double sum_log_w = 0.0;
  double sum_s = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double nj = static_cast<double>(data.group_sizes[j]);
    if (nj <= 0.0) continue;
    sum_log_w += std::log(rng.beta(s.alpha0 + 1.0, nj));
    if (rng.uniform() < nj / (nj + s.alpha0)) sum_s += 1.0;
  }
  s.alpha0 = rng.gamma(prior.shape + total_tables - sum_s, prior.rate - sum_log_w);
}

// ---------------------------------------------------------------------------
// NDP sampler
// ---------------------------------------------------------------------------

// Log posterior weights of each cluster for one group:
// log pi_k + sum_i log( sum_l w_lk * score(y_i | theta_lk) ).
inline std::vector<double> group_cluster_log_probs(
    std::span<const Observation> group_obs, const Sticks& top,
    std::span<const Sticks> cluster_sticks,
    std::span<const std::vector<KernelParams>> cluster_atoms) {
  const std::size_t K = top.w.size();
  if (cluster_sticks.size() != K || cluster_atoms.size() != K)
    throw std::invalid_argument("group_cluster_log_probs: cluster count mismatch");
  std::vector<double> logp(K);
  std::vector<double> inner;
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t L = cluster_atoms[k].size();
    inner.resize(L);
    double acc = std::log(top.w[k]);
    for (const Observation& obs : group_obs) {
      for (std::size_t l = 0; l < L; ++l)
        inner[l] = std::log(cluster_sticks[k].w[l]) +
                   censored_component_log_score(obs, cluster_atoms[k][l]);
      acc += log_sum_exp(inner);
    }
    logp[k] = acc;
  }
  return logp;
}

// Categorical draw of the cluster for one group (max-subtracted softmax over
// the log probs above).
inline int assign_group_ndp(std::span<const Observation> group_obs, const Sticks& top,
                            std::span<const Sticks> cluster_sticks,
                            std::span<const std::vector<KernelParams>> cluster_atoms, Rng& rng) {
  const std::vector<double> logp =
      group_cluster_log_probs(group_obs, top, cluster_sticks, cluster_atoms);
  int idx = rng.categorical_log(logp);
  if (idx < 0) idx = rng.categorical(top.w);
  return idx;
}

inline NdpState init_ndp(const Dataset& data, const BaseMeasure& base, const McmcConfig& config,
                         Rng& rng) {
  const int L = config.truncation_l;
  const int K = config.truncation_k;
  NdpState s;
  s.top = prior_sticks(static_cast<std::size_t>(K), 1.0, rng);
  s.within_alpha = 1.0;
  s.cluster_sticks.reserve(static_cast<std::size_t>(K));
  s.cluster_atoms.assign(static_cast<std::size_t>(K),
                         std::vector<KernelParams>(static_cast<std::size_t>(L)));
  for (int k = 0; k < K; ++k) {
    s.cluster_sticks.push_back(prior_sticks(static_cast<std::size_t>(L), s.within_alpha, rng));
    for (auto& atom : s.cluster_atoms[static_cast<std::size_t>(k)])
      atom = draw_atom_posterior(base, {}, rng);
  }
  s.group_assign.resize(static_cast<std::size_t>(data.group_count));
  for (int& z : s.group_assign) z = detail::uniform_index(K, rng);
  s.assignments.resize(data.observations.size());
  for (int& a : s.assignments) a = detail::uniform_index(L, rng);
  s.augmented.resize(data.observations.size());
  detail::augment_all(data, s.augmented, [&](std::size_t i) -> const KernelParams& {
    const auto k = static_cast<std::size_t>(
        s.group_assign[static_cast<std::size_t>(data.observations[i].group)]);
    return s.cluster_atoms[k][static_cast<std::size_t>(s.assignments[i])];
  }, rng);
  return s;
}

inline void gibbs_sweep(NdpState& s, const Dataset& data, const BaseMeasure& base,
                        const GammaPrior& prior, Rng& rng) {
  const std::size_t n = data.observations.size();
  const std::size_t K = s.cluster_atoms.size();
  const std::size_t L = s.cluster_atoms.empty() ? 0 : s.cluster_atoms[0].size();
  const std::size_t J = static_cast<std::size_t>(data.group_count);
  const std::vector<double> lt = detail::log_times(data);
  const std::vector<std::vector<int>> groups = indices_by_group(data);

  // (1) augmentation
  detail::augment_all(data, s.augmented, [&](std::size_t i) -> const KernelParams& {
    const auto k = static_cast<std::size_t>(
        s.group_assign[static_cast<std::size_t>(data.observations[i].group)]);
    return s.cluster_atoms[k][static_cast<std::size_t>(s.assignments[i])];
  }, rng);

  // One flat atom table of size K*L so scores are computed in a single pass.
  std::vector<KernelParams> flat_atoms;
  flat_atoms.reserve(K * L);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l) flat_atoms.push_back(s.cluster_atoms[k][l]);
  std::vector<double> scores(n * K * L);
  detail::fill_log_scores(data, lt, flat_atoms, scores.data());
  std::vector<double> log_w(K * L);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l) log_w[k * L + l] = std::log(s.cluster_sticks[k].w[l]);

  // (2a) cluster assignment per group, marginalizing the atom indicators
  std::vector<double> cluster_logp(K);
  std::vector<double> inner(L);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      double acc = std::log(s.top.w[k]);
      for (const int i : groups[j]) {
        const double* row = scores.data() + static_cast<std::size_t>(i) * K * L + k * L;
        for (std::size_t l = 0; l < L; ++l) inner[l] = log_w[k * L + l] + row[l];
        acc += log_sum_exp(inner);
      }
      cluster_logp[k] = acc;
    }
    int zk = rng.categorical_log(cluster_logp);
    if (zk < 0) zk = rng.categorical(s.top.w);
    s.group_assign[j] = zk;
  }

  // (2b) atom assignments inside each group's cluster
  std::vector<double> logp(L);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(
        s.group_assign[static_cast<std::size_t>(data.observations[i].group)]);
    const double* row = scores.data() + i * K * L + k * L;
    for (std::size_t l = 0; l < L; ++l) logp[l] = log_w[k * L + l] + row[l];
    int idx = rng.categorical_log(logp);
    if (idx < 0) idx = rng.categorical(s.cluster_sticks[k].w);
    s.assignments[i] = idx;
  }

  // (3) sticks: top level from group occupancy, then each cluster's weights
  std::vector<int> cluster_counts(K, 0);
  for (int z : s.group_assign) ++cluster_counts[static_cast<std::size_t>(z)];
  s.top.v = update_sticks(cluster_counts, s.top.alpha, rng);
  s.top.w = break_sticks(s.top.v);
  std::vector<std::vector<int>> atom_counts(K, std::vector<int>(L, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(
        s.group_assign[static_cast<std::size_t>(data.observations[i].group)]);
    ++atom_counts[k][static_cast<std::size_t>(s.assignments[i])];
  }
  for (std::size_t k = 0; k < K; ++k) {
    s.cluster_sticks[k].v = update_sticks(atom_counts[k], s.within_alpha, rng);
    s.cluster_sticks[k].w = break_sticks(s.cluster_sticks[k].v);
  }

  // (4) atoms per cluster from the values of its member groups
  std::vector<std::vector<double>> values(K * L);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(s.augmented[i])) continue;
    const std::size_t k = static_cast<std::size_t>(
        s.group_assign[static_cast<std::size_t>(data.observations[i].group)]);
    values[k * L + static_cast<std::size_t>(s.assignments[i])].push_back(s.augmented[i]);
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l)
      s.cluster_atoms[k][l] = draw_atom_posterior(base, values[k * L + l], rng);

  // (5) concentrations: top level conjugate, within-cluster pooled across
  // the K stick sets
  s.top.alpha = update_concentration(s.top.v, prior, rng);
  double sum_log1mv = 0.0;
  std::size_t n_sticks = 0;
  for (const Sticks& st : s.cluster_sticks) {
    for (double x : st.v) sum_log1mv += std::log1p(-x);
    n_sticks += st.v.size();
  }
  const GammaPrior post = concentration_posterior(n_sticks, sum_log1mv, prior);
  s.within_alpha = rng.gamma(post.shape, post.rate);
  for (Sticks& st : s.cluster_sticks) st.alpha = s.within_alpha;
}

// ---------------------------------------------------------------------------
// Chain runner
// ---------------------------------------------------------------------------

namespace detail {

template <class State, class Init>
Trace<State> run_chain_impl(const Dataset& data, const McmcConfig& config, const BaseMeasure& base,
                            Init&& init) {
  check_config(config);
  validate(data);
  check_base(base);
  Rng rng(config.seed);
  State state = init(rng);
  Trace<State> trace;
  trace.config = config;
  trace.states.reserve(static_cast<std::size_t>(trace_length(config)));
  for (int sweep = 1; sweep <= config.iterations; ++sweep) {
    gibbs_sweep(state, data, base, config.concentration_prior, rng);
    if (sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0)
      trace.states.push_back(state);
  }
  return trace;
}

}  // namespace detail

inline Trace<DpState> run_dp_chain(const Dataset& data, const McmcConfig& config,
                                   const BaseMeasure& base) {
  return detail::run_chain_impl<DpState>(data, config, base,
                                         [&](Rng& rng) { return init_dp(data, base, config, rng); });
}

inline Trace<HdpState> run_hdp_chain(const Dataset& data, const McmcConfig& config,
                                     const BaseMeasure& base) {
  return detail::run_chain_impl<HdpState>(
      data, config, base, [&](Rng& rng) { return init_hdp(data, base, config, rng); });
}

inline Trace<NdpState> run_ndp_chain(const Dataset& data, const McmcConfig& config,
                                     const BaseMeasure& base) {
  return detail::run_chain_impl<NdpState>(
      data, config, base, [&](Rng& rng) { return init_ndp(data, base, config, rng); });
}

using AnyTrace = std::variant<Trace<DpState>, Trace<HdpState>, Trace<NdpState>>;

inline AnyTrace run_chain(ModelKind model, const Dataset& data, const McmcConfig& config,
                          const BaseMeasure& base) {
  switch (model) {
    case ModelKind::dp: return run_dp_chain(data, config, base);
    case ModelKind::hdp: return run_hdp_chain(data, config, base);
    default: return run_ndp_chain(data, config, base);
  }
}

// ---------------------------------------------------------------------------
// Posterior survival curves
// ---------------------------------------------------------------------------

// View of the mixture that models one group under one retained state.
struct MixtureRef {
  std::span<const double> weights;
  std::span<const KernelParams> atoms;
};

inline MixtureRef group_mixture(const DpState& s, int) { return {s.sticks.w, s.atoms}; }

inline MixtureRef group_mixture(const HdpState& s, int group) {
  return {s.group_weights[static_cast<std::size_t>(group)], s.atoms};
}

inline MixtureRef group_mixture(const NdpState& s, int group) {
  const auto k = static_cast<std::size_t>(s.group_assign[static_cast<std::size_t>(group)]);
  return {s.cluster_sticks[k].w, s.cluster_atoms[k]};
}

inline double mixture_ref_survival(const MixtureRef& mix, double t) {
  double s = 0.0;
  for (std::size_t l = 0; l < mix.weights.size(); ++l)
    if (mix.weights[l] > 0.0) s += mix.weights[l] * kernel_survival(mix.atoms[l], t);
  return s;
}

inline void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("grid must be nonempty");
  if (grid[0] < 0.0) throw std::invalid_argument("grid must be nonnegative");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
}

// One row per retained draw: S_group(t) = sum_l w_l S(t | theta_l) under the
// draw's group-specific mixture.
template <class State>
std::vector<std::vector<double>> posterior_survival_draws(const Trace<State>& trace, int group,
                                                          std::span<const double> grid) {
  check_grid(grid);
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.states.size());
  for (const State& s : trace.states) {
    const MixtureRef mix = group_mixture(s, group);
    std::vector<double> row(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) row[g] = mixture_ref_survival(mix, grid[g]);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Partition summaries (NDP)
// ---------------------------------------------------------------------------

// Relabel clusters by order of first appearance so partitions compare across
// draws regardless of label identity.
inline std::vector<int> canonical_partition(std::span<const int> labels) {
  std::vector<int> out(labels.size());
  std::map<int, int> relabel;
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = relabel.try_emplace(labels[i], next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

// Most frequent canonical group partition across retained draws.
inline std::vector<int> modal_partition(const Trace<NdpState>& trace) {
  if (trace.states.empty()) throw std::invalid_argument("modal_partition: empty trace");
  std::map<std::vector<int>, int> counts;
  for (const NdpState& s : trace.states) ++counts[canonical_partition(s.group_assign)];
  const std::vector<int>* best = nullptr;
  int best_count = -1;
  for (const auto& [part, cnt] : counts) {
    if (cnt > best_count) {
      best = &part;
      best_count = cnt;
    }
  }
  return *best;
}

}  // namespace bnpsurv
