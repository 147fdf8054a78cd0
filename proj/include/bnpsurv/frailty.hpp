#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/math.hpp"

namespace bnpsurv {

// Weibull proportional-hazards model with a mean-one gamma frailty shared
// inside each group; the frailty is integrated out analytically, so the fit
// only ever sees three parameters.

struct GfmParams {
  double shape = 1.0;        // Weibull k
  double scale = 1.0;        // Weibull lambda
  double frailty_var = 1.0;  // variance of the Gamma(1/theta, 1/theta) frailty

  friend bool operator==(const GfmParams&, const GfmParams&) = default;
};

struct GfmFit {
  GfmParams params;
  // Covariance of (log k, log lambda, log theta), row-major; meaningful only
  // when covariance_ok.
  std::array<double, 9> covariance{};
  bool covariance_ok = false;
  double neg_loglik_at_mle = 0.0;

  friend bool operator==(const GfmFit&, const GfmFit&) = default;
};

inline void check_gfm_params(const GfmParams& p) {
  if (!(p.shape > 0.0) || !(p.scale > 0.0) || !(p.frailty_var > 0.0))
    throw std::invalid_argument("gfm params must be strictly positive");
}

// Marginal negative log-likelihood with the group frailties integrated out.
// Writing H(t) = (t/lambda)^k and h(t) = k t^{k-1} / lambda^k, each group
// contributes
//   sum_events log h(y) + (1/th) log(1/th) + lgamma(1/th + d_j)
//   - lgamma(1/th) - (1/th + d_j) log(1/th + H_j).
// Below th = 1e-8 the frailty is numerically degenerate and the plain
// Weibull likelihood (its th -> 0 limit) is used instead.
inline double gfm_neg_loglik(const GfmParams& p, const Dataset& data) {
  check_gfm_params(p);
  const double k = p.shape;
  const double log_scale = std::log(p.scale);
  const double log_shape = std::log(k);
  const std::size_t J = static_cast<std::size_t>(data.group_count);
  std::vector<double> cum_hazard(J, 0.0);
  std::vector<int> events(J, 0);
  double loglik = 0.0;
  for (const Observation& obs : data.observations) {
    const double lr = std::log(obs.time) - log_scale;
    const std::size_t j = static_cast<std::size_t>(obs.group);
    cum_hazard[j] += std::exp(k * lr);
    if (obs.event) {
      ++events[j];
      loglik += log_shape - log_scale + (k - 1.0) * lr;  // log h(y)
    }
  }
  if (p.frailty_var < 1e-8) {
    for (std::size_t j = 0; j < J; ++j) loglik -= cum_hazard[j];
  } else {
    const double inv_th = 1.0 / p.frailty_var;
    const double base = inv_th * std::log(inv_th) - std::lgamma(inv_th);
    for (std::size_t j = 0; j < J; ++j) {
      const double d = static_cast<double>(events[j]);
      loglik += base + std::lgamma(inv_th + d) - (inv_th + d) * std::log(inv_th + cum_hazard[j]);
    }
  }
  return -loglik;
}

// Population-marginal survival curve, E_u[ S(t)^u ] = (1 + th H(t))^(-1/th).
inline double gfm_marginal_survival(const GfmParams& p, double t) {
  check_gfm_params(p);
  if (t < 0.0) throw std::invalid_argument("gfm_marginal_survival: t must be >= 0");
  if (t == 0.0) return 1.0;
  const double cum_hazard = std::exp(p.shape * (std::log(t) - std::log(p.scale)));
  if (p.frailty_var < 1e-8) return std::exp(-cum_hazard);
  return std::exp(-std::log1p(p.frailty_var * cum_hazard) / p.frailty_var);
}

namespace detail {

inline double gfm_objective(std::span<const double> x, const Dataset& data) {
  GfmParams p{std::exp(x[0]), std::exp(x[1]), std::exp(x[2])};
  if (!std::isfinite(p.shape) || !std::isfinite(p.scale) || !std::isfinite(p.frailty_var))
    return std::numeric_limits<double>::infinity();
  const double nll = gfm_neg_loglik(p, data);
  return std::isfinite(nll) ? nll : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Maximum-likelihood fit on the log-parameter scale: simplex search from
// three fixed starts (keep the best), then a central finite-difference
// hessian whose inverse approximates the covariance of the log-parameters.
inline GfmFit fit_gfm(const Dataset& data) {
  validate(data);
  int n_events = 0;
  std::vector<double> times;
  times.reserve(data.observations.size());
  for (const Observation& obs : data.observations) {
    if (obs.event) ++n_events;
    times.push_back(obs.time);
  }
  if (n_events == 0) throw std::invalid_argument("fit_gfm: dataset has no events");
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  const double log_median = std::log(times[times.size() / 2]);

  const auto objective = [&](std::span<const double> x) { return detail::gfm_objective(x, data); };
  const std::array<std::array<double, 3>, 3> offsets = {
      {{0.0, 0.0, 0.0}, {0.5, -0.5, -1.0}, {-0.5, 0.5, 1.0}}};
  SimplexResult best;
  best.fmin = std::numeric_limits<double>::infinity();
  for (const auto& off : offsets) {
    const std::array<double, 3> start = {off[0], log_median + off[1], off[2]};
    SimplexResult r = nelder_mead(objective, start);
    if (r.fmin < best.fmin) best = std::move(r);
  }

  GfmFit fit;
  fit.params = {std::exp(best.x[0]), std::exp(best.x[1]), std::exp(best.x[2])};
  fit.neg_loglik_at_mle = best.fmin;

  const double h = 1e-4;
  std::array<double, 9> hess{};
  std::vector<double> x(best.x);
  const double f0 = best.fmin;
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      double second;
      if (a == b) {
        x[a] += h;
        const double fp = objective(x);
        x[a] -= 2 * h;
        const double fm = objective(x);
        x[a] += h;
        second = (fp - 2 * f0 + fm) / (h * h);
      } else {
        x[a] += h; x[b] += h;
        const double fpp = objective(x);
        x[b] -= 2 * h;
        const double fpm = objective(x);
        x[a] -= 2 * h;
        const double fmm = objective(x);
        x[b] += 2 * h;
        const double fmp = objective(x);
        x[a] += h; x[b] -= h;
        second = (fpp - fpm - fmp + fmm) / (4 * h * h);
      }
      hess[static_cast<std::size_t>(3 * a + b)] = second;
      hess[static_cast<std::size_t>(3 * b + a)] = second;
    }
  }
  if (const auto inv = invert_3x3(hess)) {
    fit.covariance = *inv;
    fit.covariance_ok = true;
    for (int d = 0; d < 3; ++d)
      if (fit.covariance[static_cast<std::size_t>(4 * d)] < 0.0) fit.covariance_ok = false;
  }
  return fit;
}

}  // namespace bnpsurv
