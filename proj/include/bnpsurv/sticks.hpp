#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnpsurv/rng.hpp"

namespace bnpsurv {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  friend bool operator==(const GammaPrior&, const GammaPrior&) = default;
};

// Truncated stick-breaking weights. v holds L-1 proportions in (0,1); the
// final weight absorbs the remainder so the L weights sum to exactly 1.
struct Sticks {
  std::vector<double> v;
  std::vector<double> w;
  double alpha = 1.0;

  friend bool operator==(const Sticks&, const Sticks&) = default;
};

inline std::vector<double> break_sticks(std::span<const double> v) {
  std::vector<double> w(v.size() + 1);
  double remaining = 1.0;
  for (std::size_t l = 0; l < v.size(); ++l) {
    if (!(v[l] > 0.0 && v[l] < 1.0))
      throw std::invalid_argument("break_sticks: proportion outside (0,1)");
    w[l] = v[l] * remaining;
    remaining *= 1.0 - v[l];
  }
  w[v.size()] = remaining;
  return w;
}

inline Sticks make_sticks(std::vector<double> v, double alpha) {
  Sticks s;
  s.w = break_sticks(v);
  s.v = std::move(v);
  s.alpha = alpha;
  return s;
}

// Blocked-Gibbs conditional: v_l ~ Beta(1 + n_l, alpha + sum_{m>l} n_m).
inline std::vector<double> update_sticks(std::span<const int> counts, double alpha, Rng& rng) {
  if (counts.empty()) throw std::invalid_argument("update_sticks: empty counts");
  for (int c : counts)
    if (c < 0) throw std::invalid_argument("update_sticks: negative count");
  const std::size_t L = counts.size();
  std::vector<double> tail(L + 1, 0.0);
  for (std::size_t l = L; l-- > 0;) tail[l] = tail[l + 1] + counts[l];
  std::vector<double> v(L - 1);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    double draw = rng.beta(1.0 + counts[l], alpha + tail[l + 1]);
    // keep proportions strictly inside (0,1) for downstream logs
    draw = std::min(std::max(draw, 1e-300), 1.0 - 1e-16);
    v[l] = draw;
  }
  return v;
}

// Conjugate posterior of the concentration given stick proportions:
// alpha | v ~ Gamma(a + #v, b - sum log(1 - v_l)).
inline GammaPrior concentration_posterior(std::size_t n_sticks, double sum_log1mv,
                                          const GammaPrior& prior) {
  return {prior.shape + static_cast<double>(n_sticks), prior.rate - sum_log1mv};
}

inline double update_concentration(std::span<const double> v, const GammaPrior& prior, Rng& rng) {
  double sum_log1mv = 0.0;
  for (double x : v) {
    if (!(x > 0.0 && x < 1.0))
      throw std::invalid_argument("update_concentration: proportion outside (0,1)");
    sum_log1mv += std::log1p(-x);
  }
  const GammaPrior post = concentration_posterior(v.size(), sum_log1mv, prior);
  return rng.gamma(post.shape, post.rate);
}

// Fresh sticks from the prior: v_l ~ Beta(1, alpha).
inline Sticks prior_sticks(std::size_t L, double alpha, Rng& rng) {
  if (L == 0) throw std::invalid_argument("prior_sticks: L must be positive");
  std::vector<double> v(L - 1);
  for (double& x : v) {
    double draw = rng.beta(1.0, alpha);
    x = std::min(std::max(draw, 1e-300), 1.0 - 1e-16);
  }
  return make_sticks(std::move(v), alpha);
}

}  // namespace bnpsurv
