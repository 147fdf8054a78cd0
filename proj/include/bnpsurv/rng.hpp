#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bnpsurv {

// Derive the seed for an independent substream (chain, replicate, worker).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Random stream with explicitly coded variate algorithms, so that a fixed
// seed replays bit-identically regardless of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0,1).
  double uniform() {
    const std::uint64_t bits = engine_() >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1p-52;
  }

  std::uint64_t raw() { return engine_(); }

  // Box-Muller, two uniforms per variate.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log(uniform()) / rate;
  }

  // Marsaglia-Tsang squeeze; the shape<1 case is boosted through shape+1.
  // gamma(0, rate) returns 0, the weak limit.
  double gamma(double shape, double rate = 1.0) {
    if (shape < 0.0 || !(rate > 0.0)) throw std::invalid_argument("gamma: invalid shape or rate");
    if (shape == 0.0) return 0.0;
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0, 1.0);
      return g * std::exp(std::log(uniform()) / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    if (x + y == 0.0) return a / (a + b);
    return x / (x + y);
  }

  // Normalized Gamma draws; zero shapes give zero mass.
  std::vector<double> dirichlet(std::span<const double> shapes) {
    std::vector<double> out(shapes.size());
    double total = 0.0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      out[i] = gamma(shapes[i]);
      total += out[i];
    }
    if (total <= 0.0) throw std::runtime_error("dirichlet: all draws underflowed");
    for (double& x : out) x /= total;
    return out;
  }

  // Index draw from unnormalized log weights (max-subtracted softmax).
  // Returns -1 when every weight is -inf, so callers can apply a fallback.
  int categorical_log(std::span<const double> log_weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) m = std::max(m, lw);
    if (!std::isfinite(m)) return -1;
    double total = 0.0;
    for (double lw : log_weights) total += std::exp(lw - m);
    double u = uniform() * total;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
      u -= std::exp(log_weights[i] - m);
      if (u <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(log_weights.size()) - 1;
  }

  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bnpsurv
