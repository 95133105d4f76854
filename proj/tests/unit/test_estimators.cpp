#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "sfm/estimators.hpp"
#include "sfm/rng.hpp"

using namespace sfm;

namespace {

struct Sample {
  std::vector<double> t;
  std::vector<int> y;
};

/// Integer-valued times so ties occur often.
Sample random_sample(Rng& rng, std::size_t max_n = 50) {
  Sample s;
  const std::size_t n = 1 + rng.below(max_n);
  for (std::size_t i = 0; i < n; ++i) {
    s.t.push_back(static_cast<double>(1 + rng.below(15)));
    s.y.push_back(rng.uniform() < 0.6 ? 1 : 0);
  }
  return s;
}

void check_survival_shape(const SurvivalCurve& c) {
  double prev = 1.0;
  for (double v : c.survival) {
    CHECK(v >= 0.0);
    CHECK(v <= prev);
    prev = v;
  }
}

/// Step CDF rows putting all mass at each subject's time.
Matrix point_mass_cdf(std::span<const double> t, std::span<const double> grid) {
  Matrix F(t.size(), grid.size());
  for (std::size_t n = 0; n < t.size(); ++n)
    for (std::size_t i = 0; i < grid.size(); ++i) F(n, i) = t[n] <= grid[i] ? 1.0 : 0.0;
  return F;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("km without events stays at one") {
    const std::vector<double> t{2, 5, 9};
    const std::vector<int> y{0, 0, 0};
    const SurvivalCurve c = km(t, y);
    CHECK(c.grid == std::vector<double>{2, 5, 9});
    CHECK(c.survival == std::vector<double>{1, 1, 1});
  }

  TEST_CASE("km with a censored middle subject") {
    const std::vector<double> t{1, 2, 3};
    const std::vector<int> y{1, 0, 1};
    const SurvivalCurve c = km(t, y);
    CHECK(c.survival[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(c.survival[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(c.survival[2] == 0.0);
  }

  TEST_CASE("km at a tied event and censoring processes the event first") {
    const std::vector<double> t{6, 6, 7, 10};
    const std::vector<int> y{1, 0, 1, 1};
    const SurvivalCurve c = km(t, y);
    CHECK(c.grid == std::vector<double>{6, 7, 10});
    CHECK(std::abs(c.survival[0] - 0.75) < 1e-12);
    CHECK(std::abs(c.survival[1] - 0.375) < 1e-12);
    CHECK(c.survival[2] == 0.0);
    CHECK(c.at_risk == std::vector<double>{4, 2, 1});
    CHECK(c.events == std::vector<double>{1, 1, 1});
  }

  TEST_CASE("km rejects empty or malformed input") {
    CHECK_THROWS_AS(km({}, {}), std::invalid_argument);
    const std::vector<double> t{1, 2};
    const std::vector<int> y{1, 2};
    CHECK_THROWS_AS(km(t, y), std::invalid_argument);
  }

  TEST_CASE("km matches the product-limit oracle and is permutation invariant") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
      Sample s = random_sample(rng);
      const SurvivalCurve c = km(s.t, s.y);
      const std::vector<double> expected = oracle::product_limit(s.t, s.y);
      REQUIRE(c.size() == expected.size());
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c.survival[i] - expected[i]) < 1e-12);
      check_survival_shape(c);

      std::vector<std::size_t> order(s.t.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      Sample p;
      for (std::size_t i : order) {
        p.t.push_back(s.t[i]);
        p.y.push_back(s.y[i]);
      }
      CHECK(km(p.t, p.y).survival == c.survival);
    }
  }

  TEST_CASE("greenwood bands follow the exponential form") {
    const std::vector<double> t{1, 2, 3};
    const std::vector<int> y{1, 0, 1};
    const SurvivalCurve c = greenwood_bands(km(t, y), 0.05);
    const double s = 2.0 / 3.0;
    const double v = (1.0 / (3.0 * 2.0)) / std::pow(std::log(s), 2);
    const double z = 1.959963984540054;
    CHECK(c.lower[0] == doctest::Approx(std::pow(s, std::exp(z * std::sqrt(v)))).epsilon(1e-12));
    CHECK(c.upper[0] == doctest::Approx(std::pow(s, std::exp(-z * std::sqrt(v)))).epsilon(1e-12));
    CHECK(c.lower[0] < s);
    CHECK(c.upper[0] > s);
    // S = 0 at the last time: degenerate band.
    CHECK(c.lower[2] == 0.0);
    CHECK(c.upper[2] == 0.0);
  }

  TEST_CASE("greenwood bands are degenerate at S = 1 and need counts") {
    const std::vector<double> t{2, 5};
    const std::vector<int> y{0, 0};
    const SurvivalCurve c = greenwood_bands(km(t, y), 0.05);
    CHECK(c.lower == std::vector<double>{1, 1});
    CHECK(c.upper == std::vector<double>{1, 1});
    SurvivalCurve bare;
    bare.grid = {1.0};
    bare.survival = {0.5};
    CHECK_THROWS_AS(greenwood_bands(bare, 0.05), std::invalid_argument);
  }

  TEST_CASE("pkm on observed data is km, bitwise") {
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
      const Sample s = random_sample(rng);
      const std::vector<double> grid = distinct_times(s.t);
      const SurvivalCurve a = pkm(s.t, s.y, grid);
      const SurvivalCurve b = km(s.t, s.y);
      CHECK(a.grid == b.grid);
      CHECK(a.survival == b.survival);
    }
  }

  TEST_CASE("pkm small cases") {
    const std::vector<double> one{5.0};
    const std::vector<int> event{1};
    CHECK(pkm(one, event, one).survival == std::vector<double>{0.0});

    const std::vector<double> t{1, 4, 2};
    const std::vector<int> censored{0, 0, 0};
    const std::vector<double> grid{1, 2, 3, 4};
    CHECK(pkm(t, censored, grid).survival == std::vector<double>{1, 1, 1, 1});
    CHECK_THROWS_AS(pkm(t, censored, {}), std::invalid_argument);
    const std::vector<double> bad{2, 1};
    CHECK_THROWS_AS(pkm(t, censored, bad), std::invalid_argument);
  }

  TEST_CASE("dkm with point-mass rows equals pkm and km") {
    Rng rng(21);
    for (int k = 0; k < 50; ++k) {
      const Sample s = random_sample(rng);
      const std::vector<double> grid = distinct_times(s.t);
      const SurvivalCurve d = dkm(point_mass_cdf(s.t, grid), s.y, grid);
      const SurvivalCurve p = pkm(s.t, s.y, grid);
      for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(d.survival[i] - p.survival[i]) < 1e-12);
    }
  }

  TEST_CASE("dkm with all mass beyond the horizon stays at one") {
    const std::vector<int> y{1, 0, 1};
    const std::vector<double> grid{1, 2, 3};
    CHECK(dkm(Matrix(3, 3, 0.0), y, grid).survival == std::vector<double>{1, 1, 1});
  }

  TEST_CASE("dkm matches the average pkm over sampled draws") {
    Rng rng(99);
    for (int c = 0; c < 20; ++c) {
      const std::size_t n = 10 + rng.below(20);
      const std::size_t draws = 1000;
      std::vector<int> y(n);
      std::vector<double> rate(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = rng.uniform() < 0.7 ? 1 : 0;
        rate[i] = rng.uniform(0.5, 2.0);
      }
      Matrix draw(n, draws);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < draws; ++s) draw(i, s) = -std::log(rng.uniform()) / rate[i];
      const std::vector<double> grid{0.2, 0.5, 0.8, 1.2, 2.0, 3.0};
      Matrix F(n, grid.size());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t g = 0; g < grid.size(); ++g) {
          double cnt = 0;
          for (std::size_t s = 0; s < draws; ++s) cnt += draw(i, s) <= grid[g] ? 1.0 : 0.0;
          F(i, g) = cnt / draws;
        }
      std::vector<double> avg(grid.size(), 0.0);
      for (std::size_t s = 0; s < draws; ++s) {
        std::vector<double> th(n);
        for (std::size_t i = 0; i < n; ++i) th[i] = draw(i, s);
        const SurvivalCurve p = pkm(th, y, grid);
        for (std::size_t g = 0; g < grid.size(); ++g) avg[g] += p.survival[g] / draws;
      }
      const SurvivalCurve d = dkm(F, y, grid);
      double gap = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) gap = std::max(gap, std::abs(d.survival[g] - avg[g]));
      CHECK(gap < 0.02);
      check_survival_shape(d);
    }
  }

  TEST_CASE("dkm is symmetric under joint relabeling") {
    const std::vector<double> grid{1, 2, 3};
    Matrix F{{0.1, 0.5, 0.9}, {0.0, 0.2, 0.3}, {0.3, 0.3, 0.8}};
    const std::vector<int> y{1, 0, 1};
    Matrix G{{0.0, 0.2, 0.3}, {0.1, 0.5, 0.9}, {0.3, 0.3, 0.8}};
    const std::vector<int> y2{0, 1, 1};
    const SurvivalCurve a = dkm(F, y, grid), b = dkm(G, y2, grid);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.survival[i] == doctest::Approx(b.survival[i]).epsilon(1e-14));
  }

  TEST_CASE("dkm validates its CDF rows") {
    const std::vector<double> grid{1, 2};
    const std::vector<int> y{1};
    CHECK_THROWS_AS(dkm(Matrix{{0.6, 0.4}}, y, grid), std::invalid_argument);
    CHECK_THROWS_AS(dkm(Matrix{{0.6, 1.4}}, y, grid), std::invalid_argument);
    CHECK_THROWS_AS(dkm(Matrix{{0.6, 0.7, 0.8}}, y, grid), std::invalid_argument);
  }

  TEST_CASE("surrogate sits at one half at zero and rejects bad tau") {
    CHECK(heaviside_surrogate(0.0, 1.0) == 0.5);
    CHECK(heaviside_surrogate(0.0, 1e-9) == 0.5);
    CHECK(heaviside_surrogate(1.0, 1e-3) == doctest::Approx(1.0));
    CHECK(heaviside_surrogate(-1.0, 1e-3) == doctest::Approx(0.0));
    CHECK_THROWS_AS(heaviside_surrogate(1.0, 0.0), std::invalid_argument);
  }

  TEST_CASE("smooth pkm approaches pkm as tau shrinks") {
    Rng rng(17);
    for (int k = 0; k < 50; ++k) {
      Sample s = random_sample(rng);
      const std::vector<double> grid = distinct_times(s.t);
      std::vector<double> th(s.t.size());
      for (std::size_t i = 0; i < th.size(); ++i) th[i] = s.t[i] + rng.uniform(-0.4, 0.4);
      ad::Tape tape;
      const ad::Var curve = smooth_pkm(tape.constant(Matrix::column(th)), s.y, grid, 1e-9);
      const SurvivalCurve exact = pkm(th, s.y, grid);
      double gap = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) gap = std::max(gap, std::abs(curve.value()[i] - exact.survival[i]));
      CHECK(gap < 1e-6);
    }
  }

  TEST_CASE("smooth pkm carries gradient at finite tau") {
    const std::vector<double> th{1.0, 2.5, 2.0};
    const std::vector<int> y{1, 1, 0};
    const std::vector<double> grid{1.0, 2.0, 3.0};
    ad::Tape tape;
    const ad::Var x = tape.variable(Matrix::column(th));
    tape.backward(ad::sum(smooth_pkm(x, y, grid, 0.5)));
    double mag = 0.0;
    for (double g : x.grad().values()) mag += std::abs(g);
    CHECK(mag > 0.0);
    ad::Tape t2;
    CHECK_THROWS_AS(smooth_pkm(t2.constant(Matrix::column(th)), y, grid, 0.0), std::invalid_argument);
  }

  TEST_CASE("every estimator yields a non-increasing curve in [0, 1]") {
    Rng rng(5);
    for (int k = 0; k < 30; ++k) {
      const Sample s = random_sample(rng);
      const std::vector<double> grid = distinct_times(s.t);
      check_survival_shape(km(s.t, s.y));
      std::vector<double> th(s.t.size());
      for (double& v : th) v = rng.uniform(0.0, 16.0);
      check_survival_shape(pkm(th, s.y, grid));
      ad::Tape tape;
      const ad::Var sm = smooth_pkm(tape.constant(Matrix::column(th)), s.y, grid, 0.3);
      double prev = 1.0;
      for (double v : sm.value().values()) {
        CHECK(v >= 0.0);
        CHECK(v <= prev + 1e-15);
        prev = v;
      }
    }
  }
}
