#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/math.hpp"
#include "bnpsurv/rng.hpp"

namespace bnpsurv {

// Mixture component families. LogNormal is the sampler kernel (conjugate
// normal-inverse-gamma base measure); Weibull serves data generation and the
// frailty baseline.
struct LogNormalParams {
  double mu = 0.0;
  double sigma = 1.0;
  friend bool operator==(const LogNormalParams&, const LogNormalParams&) = default;
};

struct WeibullParams {
  double shape = 1.0;
  double scale = 1.0;
  friend bool operator==(const WeibullParams&, const WeibullParams&) = default;
};

using KernelParams = std::variant<LogNormalParams, WeibullParams>;

inline void check_params(const KernelParams& p) {
  if (const auto* ln = std::get_if<LogNormalParams>(&p)) {
    if (!(ln->sigma > 0.0)) throw std::invalid_argument("lognormal sigma must be positive");
  } else {
    const auto& wb = std::get<WeibullParams>(p);
    if (!(wb.shape > 0.0) || !(wb.scale > 0.0))
      throw std::invalid_argument("weibull shape and scale must be positive");
  }
}

inline double kernel_log_density(const KernelParams& p, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("kernel_log_density: t must be positive");
  const double lt = std::log(t);
  if (const auto* ln = std::get_if<LogNormalParams>(&p)) {
    const double z = (lt - ln->mu) / ln->sigma;
    return -lt - std::log(ln->sigma) - kLogSqrt2Pi - 0.5 * z * z;
  }
  const auto& wb = std::get<WeibullParams>(p);
  const double lr = lt - std::log(wb.scale);
  return std::log(wb.shape) - std::log(wb.scale) + (wb.shape - 1.0) * lr - std::exp(wb.shape * lr);
}

inline double kernel_density(const KernelParams& p, double t) {
  return std::exp(kernel_log_density(p, t));
}

inline double kernel_log_survival(const KernelParams& p, double t) {
  if (t < 0.0) throw std::invalid_argument("kernel_log_survival: t must be nonnegative");
  if (t == 0.0) return 0.0;
  if (const auto* ln = std::get_if<LogNormalParams>(&p)) {
    const double z = (std::log(t) - ln->mu) / ln->sigma;
    return log_normal_sf(z);
  }
  const auto& wb = std::get<WeibullParams>(p);
  return -std::exp(wb.shape * (std::log(t) - std::log(wb.scale)));
}

inline double kernel_survival(const KernelParams& p, double t) {
  return std::exp(kernel_log_survival(p, t));
}

// Time with survival probability s, s in (0,1]. Exact inverse of
// kernel_survival, stable deep in the tail.
inline double kernel_quantile_from_survival(const KernelParams& p, double s) {
  if (!(s > 0.0 && s <= 1.0))
    throw std::invalid_argument("kernel_quantile_from_survival: s outside (0,1]");
  if (s == 1.0) return 0.0;
  if (const auto* ln = std::get_if<LogNormalParams>(&p))
    return std::exp(ln->mu - ln->sigma * normal_quantile(s));
  const auto& wb = std::get<WeibullParams>(p);
  return wb.scale * std::exp(std::log(-std::log(s)) / wb.shape);
}

inline double kernel_quantile(const KernelParams& p, double prob) {
  if (!(prob >= 0.0 && prob < 1.0)) throw std::invalid_argument("kernel_quantile: p outside [0,1)");
  if (prob == 0.0) return 0.0;
  if (const auto* ln = std::get_if<LogNormalParams>(&p))
    return std::exp(ln->mu + ln->sigma * normal_quantile(prob));
  const auto& wb = std::get<WeibullParams>(p);
  return wb.scale * std::exp(std::log(-std::log1p(-prob)) / wb.shape);
}

// Inverse-CDF draw conditioned on exceeding `lower`. Empty when the kernel
// has no numerical mass left beyond the truncation point; callers then treat
// the censored record as survival-only for this sweep.
inline std::optional<double> sample_truncated(const KernelParams& p, double lower, Rng& rng) {
  if (lower < 0.0) throw std::invalid_argument("sample_truncated: lower must be nonnegative");
  if (lower == 0.0) return kernel_quantile_from_survival(p, rng.uniform());
  const double log_s_low = kernel_log_survival(p, lower);
  if (log_s_low < -690.0) return std::nullopt;  // survival below ~1e-300
  const double s_low = std::exp(log_s_low);
  double t = kernel_quantile_from_survival(p, s_low * rng.uniform());
  if (t <= lower) t = std::nextafter(lower, std::numeric_limits<double>::infinity());
  return t;
}

// Normal-inverse-gamma prior on (mu, sigma^2) of log-time for the LogNormal
// kernel: sigma^2 ~ InvGamma(a0,b0), mu | sigma^2 ~ N(m0, sigma^2/kappa0).
struct BaseMeasure {
  double m0 = 0.0;
  double kappa0 = 0.1;
  double a0 = 2.0;
  double b0 = 1.0;
  friend bool operator==(const BaseMeasure&, const BaseMeasure&) = default;
};

inline void check_base(const BaseMeasure& b) {
  if (!(b.kappa0 > 0.0 && b.a0 > 0.0 && b.b0 > 0.0))
    throw std::invalid_argument("base measure hyperparameters must be positive");
}

// Conjugate update from positive values (event times plus augmented values).
inline BaseMeasure nig_posterior(const BaseMeasure& base, std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  if (values.empty()) return base;
  double sum = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("nig_posterior: values must be positive");
    sum += std::log(v);
  }
  const double xbar = sum / n;
  double ss = 0.0;
  for (double v : values) {
    const double d = std::log(v) - xbar;
    ss += d * d;
  }
  BaseMeasure post;
  post.kappa0 = base.kappa0 + n;
  post.m0 = (base.kappa0 * base.m0 + n * xbar) / post.kappa0;
  post.a0 = base.a0 + 0.5 * n;
  post.b0 = base.b0 + 0.5 * ss +
            0.5 * base.kappa0 * n * (xbar - base.m0) * (xbar - base.m0) / post.kappa0;
  return post;
}

// Draw atom parameters from the posterior given assigned values; the prior
// itself when values is empty.
inline KernelParams draw_atom_posterior(const BaseMeasure& base, std::span<const double> values,
                                        Rng& rng) {
  const BaseMeasure post = nig_posterior(base, values);
  const double sigma2 = post.b0 / rng.gamma(post.a0);
  const double mu = post.m0 + rng.normal() * std::sqrt(sigma2 / post.kappa0);
  return LogNormalParams{mu, std::sqrt(sigma2)};
}

// Empirical-Bayes centering on the log observed times, so defaults track the
// dataset's time unit.
inline BaseMeasure default_base_measure(const Dataset& data) {
  std::vector<double> logs;
  logs.reserve(data.observations.size());
  for (const auto& o : data.observations) logs.push_back(std::log(o.time));
  BaseMeasure b;
  b.m0 = logs.empty() ? 0.0 : mean(logs);
  b.kappa0 = 0.1;
  b.a0 = 2.0;
  const double v = sample_variance(logs);
  b.b0 = v > 1e-12 ? v : 1.0;
  return b;
}

}  // namespace bnpsurv
