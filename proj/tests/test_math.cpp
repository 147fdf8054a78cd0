#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "bnpsurv/math.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("normal quantile hits tabulated points") {
  REQUIRE_THAT(bnpsurv::normal_quantile(0.5), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(bnpsurv::normal_quantile(0.975), WithinAbs(1.959963984540054, 1e-12));
  REQUIRE_THAT(bnpsurv::normal_quantile(0.05), WithinAbs(-1.6448536269514722, 1e-12));
  REQUIRE_THAT(bnpsurv::normal_quantile(1e-10), WithinRel(-6.361340902404056, 1e-10));
  REQUIRE_THROWS_AS(bnpsurv::normal_quantile(-0.1), std::invalid_argument);
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9}) {
    const double z = bnpsurv::normal_quantile(p);
    REQUIRE_THAT(bnpsurv::normal_cdf(z), WithinAbs(p, 1e-12));
  }
}

TEST_CASE("log survival of the standard normal") {
  // moderate z agrees with the direct erfc evaluation
  for (double z : {-3.0, -1.0, 0.0, 1.0, 5.0, 20.0}) {
    REQUIRE_THAT(bnpsurv::log_normal_sf(z),
                 WithinAbs(std::log(0.5 * std::erfc(z * M_SQRT1_2)), 1e-12));
  }
  REQUIRE_THAT(bnpsurv::log_normal_sf(0.0), WithinAbs(std::log(0.5), 1e-15));
  // deep tail stays finite and tracks the asymptotic expansion's leading term
  const double tail = bnpsurv::log_normal_sf(40.0);
  REQUIRE(std::isfinite(tail));
  REQUIRE_THAT(tail, WithinRel(-0.5 * 1600.0 - bnpsurv::kLogSqrt2Pi - std::log(40.0), 1e-3));
  // continuity across the switch at z = 30
  const double below = bnpsurv::log_normal_sf(std::nextafter(30.0, 0.0));
  const double above = bnpsurv::log_normal_sf(30.0);
  REQUIRE_THAT(below, WithinRel(above, 1e-9));
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> x{std::log(1.0), std::log(2.0), std::log(3.0)};
  REQUIRE_THAT(bnpsurv::log_sum_exp(x), WithinAbs(std::log(6.0), 1e-14));
  const std::vector<double> shifted{1000.0 + std::log(1.0), 1000.0 + std::log(2.0),
                                    1000.0 + std::log(3.0)};
  REQUIRE_THAT(bnpsurv::log_sum_exp(shifted), WithinAbs(1000.0 + std::log(6.0), 1e-11));
  const std::vector<double> empty_like{bnpsurv::kNegInf, bnpsurv::kNegInf};
  REQUIRE(bnpsurv::log_sum_exp(empty_like) == bnpsurv::kNegInf);
}

TEST_CASE("mean and sample variance") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  REQUIRE_THAT(bnpsurv::mean(x), WithinAbs(2.5, 1e-15));
  REQUIRE_THAT(bnpsurv::sample_variance(x), WithinAbs(5.0 / 3.0, 1e-14));
  const std::vector<double> single{7.0};
  REQUIRE(bnpsurv::sample_variance(single) == 0.0);
}

TEST_CASE("3x3 inverse via the adjugate") {
  const std::array<double, 9> a{4, 1, 0, 1, 3, 1, 0, 1, 2};
  const auto inv = bnpsurv::invert_3x3(a);
  REQUIRE(inv.has_value());
  // multiply back to the identity
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += a[static_cast<std::size_t>(3 * r + k)] * (*inv)[static_cast<std::size_t>(3 * k + c)];
      REQUIRE_THAT(s, WithinAbs(r == c ? 1.0 : 0.0, 1e-12));
    }
  }
  const std::array<double, 9> singular{1, 2, 3, 2, 4, 6, 0, 0, 1};
  REQUIRE_FALSE(bnpsurv::invert_3x3(singular).has_value());
}

TEST_CASE("nelder-mead minimizes a shifted quadratic") {
  const auto f = [](std::span<const double> x) {
    const double a = x[0] - 1.0, b = x[1] + 2.0;
    return a * a + 3.0 * b * b + 0.5;
  };
  const std::vector<double> start{0.0, 0.0};
  const auto r = bnpsurv::nelder_mead(f, start);
  REQUIRE_THAT(r.x[0], WithinAbs(1.0, 1e-4));
  REQUIRE_THAT(r.x[1], WithinAbs(-2.0, 1e-4));
  REQUIRE_THAT(r.fmin, WithinAbs(0.5, 1e-8));
  // identical start gives the identical trajectory
  const auto r2 = bnpsurv::nelder_mead(f, start);
  REQUIRE(r.x == r2.x);
  REQUIRE(r.fmin == r2.fmin);
}

TEST_CASE("nelder-mead handles the rosenbrock valley") {
  const auto f = [](std::span<const double> x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  const std::vector<double> start{-1.2, 1.0};
  const auto r = bnpsurv::nelder_mead(f, start, 0.5, 5000, 1e-12);
  REQUIRE_THAT(r.x[0], WithinAbs(1.0, 1e-3));
  REQUIRE_THAT(r.x[1], WithinAbs(1.0, 1e-3));
}
