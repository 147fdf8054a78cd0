#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/math.hpp"
#include "bnpsurv/samplers.hpp"

namespace bnpsurv {

// ---------------------------------------------------------------------------
// Curves and bands
// ---------------------------------------------------------------------------

struct SurvivalCurve {
  std::vector<double> grid;
  std::vector<double> values;

  friend bool operator==(const SurvivalCurve&, const SurvivalCurve&) = default;
};

struct CredibleBand {
  std::vector<double> grid;
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
  double mean_width = 0.0;

  friend bool operator==(const CredibleBand&, const CredibleBand&) = default;
};

// Equally spaced grid from 0 to the empirical 99th percentile of observed
// times (the default evaluation window).
inline std::vector<double> default_grid(const Dataset& data, int points = 100) {
  if (points < 2) throw std::invalid_argument("default_grid: need at least 2 points");
  std::vector<double> times;
  times.reserve(data.observations.size());
  for (const auto& obs : data.observations) times.push_back(obs.time);
  std::sort(times.begin(), times.end());
  const double h = (static_cast<double>(times.size()) - 1.0) * 0.99;
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, times.size() - 1);
  const double q99 = times[lo] + (h - static_cast<double>(lo)) * (times[hi] - times[lo]);
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = q99 * static_cast<double>(i) / (points - 1);
  return grid;
}

inline std::vector<double> default_percentiles() {
  std::vector<double> p;
  for (int i = 1; i <= 19; ++i) p.push_back(0.05 * i);
  return p;
}

namespace detail {

// Linear-interpolation quantile of a sorted sample (the common "type 7").
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Pointwise credible band over curve draws (rows = retained draws).
inline CredibleBand credible_band(std::span<const double> grid,
                                  const std::vector<std::vector<double>>& curve_draws,
                                  double level = 0.95) {
  check_grid(grid);
  if (curve_draws.size() < 2) throw std::invalid_argument("credible_band: need at least 2 draws");
  if (!(level > 0.0) || !(level < 1.0))
    throw std::invalid_argument("credible_band: level must be in (0,1)");
  for (const auto& row : curve_draws)
    if (row.size() != grid.size())
      throw std::invalid_argument("credible_band: draw length does not match grid");
  CredibleBand band;
  band.grid.assign(grid.begin(), grid.end());
  band.level = level;
  band.lower.resize(grid.size());
  band.upper.resize(grid.size());
  const double p_lo = 0.5 * (1.0 - level);
  std::vector<double> column(curve_draws.size());
  double width = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t d = 0; d < curve_draws.size(); ++d) column[d] = curve_draws[d][g];
    std::sort(column.begin(), column.end());
    band.lower[g] = detail::sorted_quantile(column, p_lo);
    band.upper[g] = detail::sorted_quantile(column, 1.0 - p_lo);
    width += band.upper[g] - band.lower[g];
  }
  band.mean_width = width / static_cast<double>(grid.size());
  return band;
}

inline std::vector<double> mean_curve(const std::vector<std::vector<double>>& curve_draws) {
  if (curve_draws.empty()) throw std::invalid_argument("mean_curve: no draws");
  std::vector<double> m(curve_draws[0].size(), 0.0);
  for (const auto& row : curve_draws)
    for (std::size_t g = 0; g < m.size(); ++g) m[g] += row[g];
  for (double& x : m) x /= static_cast<double>(curve_draws.size());
  return m;
}

// ---------------------------------------------------------------------------
// Mean log pointwise predictive density
// ---------------------------------------------------------------------------

// Core on a draws x observations matrix of log scores (row-major).
inline double mean_lppd_from_log_scores(std::span<const double> log_scores, std::size_t n_draws,
                                        std::size_t n_obs) {
  if (n_draws == 0 || n_obs == 0) throw std::invalid_argument("mean_lppd: empty input");
  if (log_scores.size() != n_draws * n_obs)
    throw std::invalid_argument("mean_lppd: matrix size mismatch");
  const double log_n = std::log(static_cast<double>(n_draws));
  std::vector<double> column(n_draws);
  double total = 0.0;
  for (std::size_t i = 0; i < n_obs; ++i) {
    for (std::size_t d = 0; d < n_draws; ++d) column[d] = log_scores[d * n_obs + i];
    total += log_sum_exp(column) - log_n;
  }
  return total / static_cast<double>(n_obs);
}

// Mean over observations of log( mean over draws of the censoring-aware
// score under the draw's group-specific mixture ).
template <class State>
double mean_lppd(const Trace<State>& trace, const Dataset& data) {
  if (trace.states.empty()) throw std::invalid_argument("mean_lppd: empty trace");
  validate(data);
  const std::size_t n_obs = data.observations.size();
  const std::size_t n_draws = trace.states.size();
  std::vector<double> log_scores(n_draws * n_obs);
  std::vector<double> terms;
  for (std::size_t d = 0; d < n_draws; ++d) {
    const State& s = trace.states[d];
    for (std::size_t i = 0; i < n_obs; ++i) {
      const Observation& obs = data.observations[i];
      const MixtureRef mix = group_mixture(s, obs.group);
      terms.resize(mix.weights.size());
      for (std::size_t l = 0; l < mix.weights.size(); ++l)
        terms[l] = std::log(mix.weights[l]) + censored_component_log_score(obs, mix.atoms[l]);
      log_scores[d * n_obs + i] = log_sum_exp(terms);
    }
  }
  return mean_lppd_from_log_scores(log_scores, n_draws, n_obs);
}

// ---------------------------------------------------------------------------
// Coverage at percentiles
// ---------------------------------------------------------------------------

namespace detail {

// Piecewise-linear evaluation with endpoint clamping outside the grid.
inline double interpolate(std::span<const double> grid, std::span<const double> values, double t) {
  if (t <= grid.front()) return values.front();
  if (t >= grid.back()) return values.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

}  // namespace detail

// Fraction of percentile evaluation points where the band captures the true
// curve. Evaluation points are the truth's quantiles at the requested
// percentiles; the band is interpolated linearly between grid nodes.
inline double coverage_at_percentiles(const CredibleBand& band,
                                      const std::function<double(double)>& true_survival,
                                      const std::function<double(double)>& true_quantile,
                                      std::span<const double> percentiles) {
  if (percentiles.empty()) throw std::invalid_argument("coverage: empty percentile list");
  for (double p : percentiles)
    if (!(p > 0.0) || !(p < 1.0))
      throw std::invalid_argument("coverage: percentiles must lie in (0,1)");
  int hits = 0;
  for (double p : percentiles) {
    const double t = true_quantile(p);
    const double s = true_survival(t);
    const double lo = detail::interpolate(band.grid, band.lower, t);
    const double hi = detail::interpolate(band.grid, band.upper, t);
    if (lo <= s && s <= hi) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(percentiles.size());
}

// ---------------------------------------------------------------------------
// Kaplan-Meier
// ---------------------------------------------------------------------------

// Product-limit estimator; the curve steps at distinct event times. With no
// events the curve is the constant 1.
inline SurvivalCurve kaplan_meier(std::span<const Observation> group_obs) {
  if (group_obs.empty()) throw std::invalid_argument("kaplan_meier: empty input");
  std::vector<std::pair<double, bool>> pts;
  pts.reserve(group_obs.size());
  for (const auto& obs : group_obs) pts.emplace_back(obs.time, obs.event);
  std::sort(pts.begin(), pts.end());
  SurvivalCurve curve;
  double s = 1.0;
  std::size_t i = 0;
  std::size_t at_risk = pts.size();
  while (i < pts.size()) {
    const double t = pts[i].first;
    std::size_t deaths = 0;
    std::size_t leaving = 0;
    while (i < pts.size() && pts[i].first == t) {
      if (pts[i].second) ++deaths;
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.grid.push_back(t);
      curve.values.push_back(s);
    }
    at_risk -= leaving;
  }
  if (curve.grid.empty()) {
    curve.grid.push_back(0.0);
    curve.values.push_back(1.0);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Adjusted Rand index
// ---------------------------------------------------------------------------

inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("adjusted_rand_index: label vectors must match and be nonempty");
  const auto ca = canonical_partition(a);
  const auto cb = canonical_partition(b);
  const int ka = ca.empty() ? 0 : *std::max_element(ca.begin(), ca.end()) + 1;
  const int kb = cb.empty() ? 0 : *std::max_element(cb.begin(), cb.end()) + 1;
  std::vector<long long> table(static_cast<std::size_t>(ka) * static_cast<std::size_t>(kb), 0);
  std::vector<long long> rows(static_cast<std::size_t>(ka), 0);
  std::vector<long long> cols(static_cast<std::size_t>(kb), 0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    ++table[static_cast<std::size_t>(ca[i]) * static_cast<std::size_t>(kb) +
            static_cast<std::size_t>(cb[i])];
    ++rows[static_cast<std::size_t>(ca[i])];
    ++cols[static_cast<std::size_t>(cb[i])];
  }
  const auto choose2 = [](long long n) { return 0.5 * static_cast<double>(n) * (n - 1); };
  double sum_cells = 0.0;
  for (long long n : table) sum_cells += choose2(n);
  double sum_rows = 0.0;
  for (long long n : rows) sum_rows += choose2(n);
  double sum_cols = 0.0;
  for (long long n : cols) sum_cols += choose2(n);
  const double total = choose2(static_cast<long long>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;
  return (sum_cells - expected) / (maximum - expected);
}

}  // namespace bnpsurv
