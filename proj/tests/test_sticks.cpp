#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bnpsurv/sticks.hpp"

using Catch::Matchers::WithinAbs;
using bnpsurv::GammaPrior;
using bnpsurv::Rng;

TEST_CASE("break_sticks worked examples") {
  const std::vector<double> a{0.5, 0.5};
  const auto wa = bnpsurv::break_sticks(a);
  REQUIRE_THAT(wa[0], WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(wa[1], WithinAbs(0.25, 1e-15));
  REQUIRE_THAT(wa[2], WithinAbs(0.25, 1e-15));

  const std::vector<double> b{0.2, 0.5};
  const auto wb = bnpsurv::break_sticks(b);
  REQUIRE_THAT(wb[0], WithinAbs(0.2, 1e-15));
  REQUIRE_THAT(wb[1], WithinAbs(0.4, 1e-15));
  REQUIRE_THAT(wb[2], WithinAbs(0.4, 1e-15));

  const std::vector<double> bad{0.5, 1.0};
  REQUIRE_THROWS_AS(bnpsurv::break_sticks(bad), std::invalid_argument);
  const std::vector<double> bad2{0.0};
  REQUIRE_THROWS_AS(bnpsurv::break_sticks(bad2), std::invalid_argument);
}

TEST_CASE("stick weights always sum to one") {
  Rng rng(301);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(1 + static_cast<std::size_t>(rng.uniform() * 30));
    for (double& x : v) x = rng.beta(1.0, 2.0);
    for (double& x : v) x = std::min(std::max(x, 1e-12), 1.0 - 1e-12);
    const auto w = bnpsurv::break_sticks(v);
    double s = 0.0;
    for (double x : w) {
      REQUIRE(x >= 0.0);
      s += x;
    }
    REQUIRE_THAT(s, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("stick update targets the right beta conditional") {
  Rng rng(302);
  const int n = 10000;

  // counts [3,1,0]: first proportion ~ Beta(4, alpha + 1) with alpha = 1
  {
    const std::vector<int> counts{3, 1, 0};
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += bnpsurv::update_sticks(counts, 1.0, rng)[0];
    const double var = 4.0 * 2.0 / (36.0 * 7.0);
    REQUIRE_THAT(s / n, WithinAbs(2.0 / 3.0, 3.0 * std::sqrt(var / n)));
  }

  // counts [0,5,0]: everything sits past the first stick, Beta(1, 1 + 5)
  {
    const std::vector<int> counts{0, 5, 0};
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += bnpsurv::update_sticks(counts, 1.0, rng)[0];
    const double var = 6.0 / (49.0 * 8.0);
    REQUIRE_THAT(s / n, WithinAbs(1.0 / 7.0, 3.0 * std::sqrt(var / n)));
  }

  // no data: prior Beta(1, alpha) with mean 1/(1+alpha)
  {
    const std::vector<int> counts{0, 0, 0, 0};
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += bnpsurv::update_sticks(counts, 2.0, rng)[0];
    const double var = 2.0 / (9.0 * 4.0);
    REQUIRE_THAT(s / n, WithinAbs(1.0 / 3.0, 3.0 * std::sqrt(var / n)));
  }

  const std::vector<int> empty;
  REQUIRE_THROWS_AS(bnpsurv::update_sticks(empty, 1.0, rng), std::invalid_argument);
  const std::vector<int> negative{2, -1};
  REQUIRE_THROWS_AS(bnpsurv::update_sticks(negative, 1.0, rng), std::invalid_argument);
}

TEST_CASE("concentration posterior parameters") {
  const GammaPrior prior{1.0, 1.0};
  const auto p = bnpsurv::concentration_posterior(1, std::log(0.5), prior);
  REQUIRE_THAT(p.shape, WithinAbs(2.0, 1e-15));
  REQUIRE_THAT(p.rate, WithinAbs(1.0 + std::log(2.0), 1e-15));
}

TEST_CASE("concentration update from near-degenerate sticks") {
  Rng rng(303);
  const GammaPrior prior{1.0, 1.0};
  const int n = 10000;

  // ten proportions at ~0 contribute nothing to the rate: Gamma(11, 1), mean 11
  {
    const std::vector<double> v(10, 1e-300);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += bnpsurv::update_concentration(v, prior, rng);
    REQUIRE_THAT(s / n, WithinAbs(11.0, 3.0 * std::sqrt(11.0 / n)));
  }

  // one proportion of 1/2: Gamma(2, 1 + log 2), mean 2/(1 + log 2)
  {
    const std::vector<double> v{0.5};
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += bnpsurv::update_concentration(v, prior, rng);
    const double rate = 1.0 + std::log(2.0);
    REQUIRE_THAT(s / n, WithinAbs(2.0 / rate, 3.0 * std::sqrt(2.0 / (rate * rate) / n)));
  }

  // a single-component truncation has no proportions: the update is a prior draw
  {
    const std::vector<double> v;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += bnpsurv::update_concentration(v, prior, rng);
    REQUIRE_THAT(s / n, WithinAbs(1.0, 3.0 * std::sqrt(1.0 / n)));
  }

  const std::vector<double> bad{0.5, 1.5};
  REQUIRE_THROWS_AS(bnpsurv::update_concentration(bad, prior, rng), std::invalid_argument);
}

TEST_CASE("larger concentration pushes mass off the first stick") {
  Rng rng(304);
  const int n = 10000;
  std::vector<double> small, large;
  for (int i = 0; i < n; ++i) {
    small.push_back(bnpsurv::prior_sticks(10, 0.5, rng).w[0]);
    large.push_back(bnpsurv::prior_sticks(10, 5.0, rng).w[0]);
  }
  // first-weight CDF under alpha = 5 dominates the one under alpha = 0.5
  for (double x : {0.05, 0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto below = [x](const std::vector<double>& s) {
      return static_cast<double>(std::count_if(s.begin(), s.end(),
                                               [x](double w) { return w < x; }));
    };
    REQUIRE(below(large) > below(small));
  }
}

TEST_CASE("prior sticks are well formed") {
  Rng rng(305);
  const auto s = bnpsurv::prior_sticks(7, 1.5, rng);
  REQUIRE(s.v.size() == 6);
  REQUIRE(s.w.size() == 7);
  REQUIRE(s.alpha == 1.5);
  for (double x : s.v) REQUIRE((x > 0.0 && x < 1.0));
  double total = 0.0;
  for (double x : s.w) total += x;
  REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));

  const auto one = bnpsurv::prior_sticks(1, 2.0, rng);
  REQUIRE(one.v.empty());
  REQUIRE(one.w == std::vector<double>{1.0});
  REQUIRE_THROWS_AS(bnpsurv::prior_sticks(0, 1.0, rng), std::invalid_argument);

  const auto made = bnpsurv::make_sticks({0.5, 0.5}, 2.0);
  REQUIRE(made.v.size() == 2);
  REQUIRE(made.w.size() == 3);
  REQUIRE(made.alpha == 2.0);
}
