#pragma once

// Shared oracles for the test suite: KS machinery, log-space quadrature, a
// rejection sampler for truncated kernels, and an independent numerical
// evaluation of the gamma-frailty marginal likelihood.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/kernels.hpp"
#include "bnpsurv/math.hpp"
#include "bnpsurv/rng.hpp"

namespace testutil {

// Sup-distance of the empirical CDF of `sample` from the model CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i + 1) / n));
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
  }
  return d;
}

// Two-sample version.
inline double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    const double fa = static_cast<double>(i) / static_cast<double>(a.size());
    const double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
inline double ks_p_value(double d, double n_eff) {
  const double sq = std::sqrt(n_eff);
  const double t = (sq + 0.12 + 0.11 / sq) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
    p += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, p));
}

inline double ks_p_one_sample(const std::vector<double>& sample,
                              const std::function<double(double)>& cdf) {
  return ks_p_value(ks_statistic(sample, cdf), static_cast<double>(sample.size()));
}

inline double ks_p_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  const double n_eff = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                       static_cast<double>(a.size() + b.size());
  return ks_p_value(ks_statistic_two_sample(a, b), n_eff);
}

// log of the integral of exp(log_f) over [a, b] by composite Simpson with n
// panels (n even), summed through log-sum-exp so huge exponents survive.
inline double log_simpson(const std::function<double(double)>& log_f, double a, double b, int n) {
  const double h = (b - a) / n;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    terms.push_back(std::log(w) + log_f(a + i * h));
  }
  return bnpsurv::log_sum_exp(terms) + std::log(h / 3.0);
}

// Rejection sampler from a kernel conditioned on exceeding `lower`; the proposal
// is the unconditioned kernel itself, so acceptance uses nothing but raw draws.
inline double rejection_truncated(const bnpsurv::KernelParams& p, double lower,
                                  bnpsurv::Rng& rng) {
  for (;;) {
    const double t = bnpsurv::kernel_quantile_from_survival(p, rng.uniform());
    if (t > lower) return t;
  }
}

// Marginal Weibull gamma-frailty negative log-likelihood via explicit
// integration over each group's frailty (substituting u = e^z), entirely
// independent of the closed form under test.
inline double gfm_nll_quadrature(double shape, double scale, double theta,
                                 const bnpsurv::Dataset& data) {
  const std::size_t J = static_cast<std::size_t>(data.group_count);
  std::vector<double> cum_hazard(J, 0.0);
  std::vector<int> events(J, 0);
  double sum_log_hazard = 0.0;
  for (const bnpsurv::Observation& obs : data.observations) {
    const double lr = std::log(obs.time) - std::log(scale);
    const std::size_t j = static_cast<std::size_t>(obs.group);
    cum_hazard[j] += std::exp(shape * lr);
    if (obs.event) {
      ++events[j];
      sum_log_hazard += std::log(shape) - std::log(scale) + (shape - 1.0) * lr;
    }
  }
  const double inv_th = 1.0 / theta;
  const double log_gamma_const = inv_th * std::log(inv_th) - std::lgamma(inv_th);
  double loglik = sum_log_hazard;
  for (std::size_t j = 0; j < J; ++j) {
    const double d = static_cast<double>(events[j]);
    const double hj = cum_hazard[j];
    const auto log_f = [&](double z) {
      const double u = std::exp(z);
      return log_gamma_const + (d + inv_th) * z - u * (hj + inv_th);
    };
    loglik += log_simpson(log_f, -60.0, 30.0, 4000);
  }
  return -loglik;
}

// Grouped draws from the Weibull gamma-frailty model itself, for recovery
// tests of the fitter.
inline bnpsurv::Dataset simulate_gfm(double shape, double scale, double theta, int groups,
                                     int group_size, double censor_rate, bnpsurv::Rng& rng) {
  std::vector<bnpsurv::Observation> obs;
  obs.reserve(static_cast<std::size_t>(groups) * static_cast<std::size_t>(group_size));
  for (int j = 0; j < groups; ++j) {
    const double u = rng.gamma(1.0 / theta, 1.0 / theta);
    for (int i = 0; i < group_size; ++i) {
      // S(t|u) = exp(-u (t/scale)^shape) inverted at a uniform draw
      const double t = scale * std::pow(-std::log(rng.uniform()) / u, 1.0 / shape);
      if (censor_rate > 0.0) {
        const double c = rng.exponential(censor_rate);
        obs.push_back({std::min(t, c), t <= c, j});
      } else {
        obs.push_back({t, true, j});
      }
    }
  }
  return bnpsurv::validate(bnpsurv::dataset_from(std::move(obs)));
}

}  // namespace testutil
