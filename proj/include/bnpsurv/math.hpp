#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace bnpsurv {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

// log(P(Z > z)) for standard normal Z, stable over the whole line.
inline double log_normal_sf(double z) {
  if (z < 30.0) return std::log(0.5 * std::erfc(z * M_SQRT1_2));
  // Continued-fraction-style tail expansion; relative error < 1e-12 for z >= 30.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - kLogSqrt2Pi - std::log(z) + std::log(series);
}

// Wichura's AS241 (PPND16). Accurate to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return kNegInf;
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

inline double log_sum_exp(std::span<const double> x) {
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double total = 0.0;
  for (double v : x) total += std::exp(v - m);
  return m + std::log(total);
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Inverse of a symmetric 3x3 (row-major) via the adjugate. Empty when singular
// or non-finite.
inline std::optional<std::array<double, 9>> invert_3x3(const std::array<double, 9>& a) {
  const double c00 = a[4] * a[8] - a[5] * a[7];
  const double c01 = a[5] * a[6] - a[3] * a[8];
  const double c02 = a[3] * a[7] - a[4] * a[6];
  const double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
  if (!std::isfinite(det) || std::fabs(det) < 1e-300) return std::nullopt;
  std::array<double, 9> inv{};
  inv[0] = c00 / det;
  inv[1] = (a[2] * a[7] - a[1] * a[8]) / det;
  inv[2] = (a[1] * a[5] - a[2] * a[4]) / det;
  inv[3] = c01 / det;
  inv[4] = (a[0] * a[8] - a[2] * a[6]) / det;
  inv[5] = (a[2] * a[3] - a[0] * a[5]) / det;
  inv[6] = c02 / det;
  inv[7] = (a[1] * a[6] - a[0] * a[7]) / det;
  inv[8] = (a[0] * a[4] - a[1] * a[3]) / det;
  for (double v : inv)
    if (!std::isfinite(v)) return std::nullopt;
  return inv;
}

struct SimplexResult {
  std::vector<double> x;
  double fmin = 0.0;
  int evaluations = 0;
};

// Nelder-Mead downhill simplex; deterministic given the start point.
inline SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> start, double step = 0.5,
                                 int max_iter = 2000, double ftol = 1e-10) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> pts(n + 1, std::vector<double>(start.begin(), start.end()));
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  int evals = 0;
  for (std::size_t i = 0; i <= n; ++i) fv[i] = (++evals, f(pts[i]));

  auto order = [&] {
    for (std::size_t i = 1; i <= n; ++i) {
      std::vector<double> px = std::move(pts[i]);
      double pf = fv[i];
      std::size_t j = i;
      while (j > 0 && fv[j - 1] > pf) {
        pts[j] = std::move(pts[j - 1]);
        fv[j] = fv[j - 1];
        --j;
      }
      pts[j] = std::move(px);
      fv[j] = pf;
    }
  };
  order();

  std::vector<double> centroid(n), trial(n);
  for (int it = 0; it < max_iter; ++it) {
    if (std::fabs(fv[n] - fv[0]) <= ftol * (std::fabs(fv[0]) + std::fabs(fv[n]) + 1e-30)) break;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += pts[i][j];
      centroid[j] = s / static_cast<double>(n);
    }
    auto move_from_worst = [&](double coef) {
      for (std::size_t j = 0; j < n; ++j)
        trial[j] = centroid[j] + coef * (pts[n][j] - centroid[j]);
      ++evals;
      return f(trial);
    };
    const double fr = move_from_worst(-1.0);  // reflection
    if (fr < fv[0]) {
      std::vector<double> refl = trial;
      const double fe = move_from_worst(-2.0);  // expansion
      if (fe < fr) {
        pts[n] = trial;
        fv[n] = fe;
      } else {
        pts[n] = std::move(refl);
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = trial;
      fv[n] = fr;
    } else {
      const double fc = move_from_worst(fr < fv[n] ? -0.5 : 0.5);  // contraction
      if (fc < std::min(fr, fv[n])) {
        pts[n] = trial;
        fv[n] = fc;
      } else {  // shrink toward the best point
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
          fv[i] = (++evals, f(pts[i]));
        }
      }
    }
    order();
  }
  return {pts[0], fv[0], evals};
}

}  // namespace bnpsurv
