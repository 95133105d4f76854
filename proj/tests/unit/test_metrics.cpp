#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "sfm/estimators.hpp"
#include "sfm/metrics.hpp"
#include "sfm/rng.hpp"

using namespace sfm;

namespace {

TimeSamples samples_of(std::initializer_list<std::initializer_list<double>> rows) {
  return TimeSamples{Matrix(rows)};
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("c-index on the three reference cases") {
    const std::vector<double> t{1, 2, 3};
    const std::vector<int> all{1, 1, 1};
    const std::vector<double> up{1, 2, 3}, down{3, 2, 1};
    CHECK(std::abs(c_index(up, t, all) - 1.0) < 1e-12);
    CHECK(std::abs(c_index(down, t, all) - 0.0) < 1e-12);
    const std::vector<double> t2{2, 4, 6};
    const std::vector<int> y2{1, 0, 1};
    const std::vector<double> p2{3, 5, 1};
    CHECK(std::abs(c_index(p2, t2, y2) - 0.5) < 1e-12);
  }

  TEST_CASE("c-index credits prediction ties with one half and needs pairs") {
    const std::vector<double> t{1, 2};
    const std::vector<int> y{1, 1};
    const std::vector<double> tied{4, 4};
    CHECK(c_index(tied, t, y) == 0.5);
    const std::vector<int> none{0, 0};
    CHECK_THROWS_AS(c_index(tied, t, none), std::invalid_argument);
  }

  TEST_CASE("c-index agrees with pair enumeration and depends only on ranks") {
    Rng rng(12);
    for (int k = 0; k < 100; ++k) {
      const std::size_t n = 2 + rng.below(40);
      std::vector<double> t(n), p(n), q(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<double>(rng.below(10));
        y[i] = rng.uniform() < 0.6 ? 1 : 0;
        p[i] = static_cast<double>(rng.below(8));
        q[i] = std::exp(0.3 * p[i]) + 5.0;
      }
      y[0] = 1;
      t[0] = -1.0;
      CHECK(c_index(p, t, y) == doctest::Approx(oracle::harrell(p, t, y)).epsilon(1e-12));
      CHECK(c_index(q, t, y) == c_index(p, t, y));
    }
  }

  TEST_CASE("cov uses the population standard deviation") {
    CHECK(std::abs(cov_stats(samples_of({{1.0, 3.0}})).mean - 0.5) < 1e-12);
    CHECK(cov_stats(samples_of({{2.0, 2.0, 2.0}})).mean == 0.0);
    const CovStats two = cov_stats(samples_of({{2.0, 2.0}, {1.0, 3.0}}));
    CHECK(two.per_subject == std::vector<double>{0.0, 0.5});
    CHECK(std::abs(two.mean - 0.25) < 1e-12);
    CHECK_THROWS_AS(cov_stats(samples_of({{0.0, 0.0}})), std::invalid_argument);
    CHECK_THROWS_AS(cov_stats(samples_of({{1.0}})), std::invalid_argument);
  }

  TEST_CASE("coverage counts uncensored subjects inside the central interval") {
    Matrix spread(2, 101);
    for (std::size_t s = 0; s <= 100; ++s) {
      spread(0, s) = 0.1 * static_cast<double>(s);
      spread(1, s) = 0.1 * static_cast<double>(s);
    }
    const TimeSamples samples{spread};
    const std::vector<double> t{5.0, 50.0};
    const std::vector<int> y{1, 1};
    CHECK(coverage95(samples, t, y) == 0.5);
    const std::vector<int> only_first{1, 0};
    CHECK(coverage95(samples, t, only_first) == 1.0);
    const std::vector<int> none{0, 0};
    CHECK_THROWS_AS(coverage95(samples, t, none), std::invalid_argument);
  }

  TEST_CASE("coverage of oracle-matched draws is near nominal") {
    Rng rng(40);
    const std::size_t n = 2000, draws = 200;
    Matrix m(n, draws);
    std::vector<double> t(n);
    std::vector<int> y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = std::exp(rng.normal() * 0.5);
      for (std::size_t s = 0; s < draws; ++s) m(i, s) = -std::log(rng.uniform()) / rate;
      t[i] = -std::log(rng.uniform()) / rate;
    }
    const double cov = coverage95(TimeSamples{m}, t, y);
    CHECK(cov >= 0.90);
    CHECK(cov <= 0.99);
  }

  TEST_CASE("type-7 quantile") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({5}, 0.3) == 5.0);
    CHECK(quantile({0, 10}, 0.25) == 2.5);
  }

  TEST_CASE("kde cdf reference values") {
    const std::vector<double> at_zero{0.0};
    const std::vector<double> grid{0.0, 10.0};
    const KdeCdf k = kde_cdf(at_zero, grid, 1.0);
    CHECK(k.values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(k.values[1] - 1.0) < 1e-8);
  }

  TEST_CASE("kde cdf matches quadrature of its density") {
    Rng rng(6);
    std::vector<double> s(40);
    for (double& v : s) v = rng.normal() * 2.0 + 3.0;
    const double h = silverman_bandwidth(s);
    std::vector<double> grid;
    for (double g = -5.0; g <= 11.0; g += 0.5) grid.push_back(g);
    const KdeCdf k = kde_cdf(s, grid);
    CHECK(k.bandwidth == doctest::Approx(h));
    // Composite Simpson on the mixture density from far in the left tail.
    const auto density = [&](double x) {
      double d = 0.0;
      for (double v : s) d += std::exp(-0.5 * std::pow((x - v) / h, 2));
      return d / (s.size() * h * std::sqrt(2.0 * std::numbers::pi));
    };
    double gap = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double a = -40.0, b = grid[i];
      const int m = 20000;
      const double step = (b - a) / m;
      double acc = density(a) + density(b);
      for (int j = 1; j < m; ++j) acc += density(a + j * step) * (j % 2 ? 4.0 : 2.0);
      gap = std::max(gap, std::abs(acc * step / 3.0 - k.values[i]));
    }
    CHECK(gap < 1e-6);
  }

  TEST_CASE("kde cdf is monotone and bounded; identical samples degrade to a step") {
    Rng rng(10);
    std::vector<double> s(25);
    for (double& v : s) v = rng.uniform(0.0, 4.0);
    std::vector<double> grid;
    for (double g = -1.0; g <= 5.0; g += 0.01) grid.push_back(g);
    const KdeCdf k = kde_cdf(s, grid);
    double prev = 0.0;
    for (double v : k.values) {
      CHECK(v >= prev);
      CHECK(v <= 1.0);
      prev = v;
    }
    const std::vector<double> same{2.0, 2.0, 2.0};
    const std::vector<double> g2{1.0, 2.0, 3.0};
    const KdeCdf d = kde_cdf(same, g2);
    CHECK(d.degenerate);
    CHECK(d.values == std::vector<double>{0.0, 1.0, 1.0});
  }

  TEST_CASE("calibration curve readings") {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> y{1, 1, 0, 1};
    const SurvivalCurve ref = km(t, y);
    const auto same = calibration_curve(ref, ref);
    for (const auto& p : same) CHECK(p.observed == p.predicted);

    SurvivalCurve flat = ref;
    for (double& v : flat.survival) v = 1.0;
    for (const auto& p : calibration_curve(flat, ref)) CHECK(p.predicted == 0.0);

    Matrix F(t.size(), ref.grid.size());
    for (std::size_t n = 0; n < t.size(); ++n)
      for (std::size_t i = 0; i < ref.grid.size(); ++i) F(n, i) = t[n] <= ref.grid[i] ? 1.0 : 0.0;
    for (const auto& p : calibration_curve(dkm(F, y, ref.grid), ref))
      CHECK(p.predicted == doctest::Approx(p.observed).epsilon(1e-12));

    SurvivalCurve other = ref;
    other.grid.back() += 1.0;
    CHECK_THROWS_AS(calibration_curve(other, ref), std::invalid_argument);
  }

  TEST_CASE("calibration slope reference values") {
    const std::vector<CalibrationPoint> diag{{0.0, 0.0}, {0.3, 0.3}, {0.7, 0.7}, {1.0, 1.0}};
    CHECK(std::abs(calibration_slope(diag) - 1.0) < 1e-12);
    const std::vector<CalibrationPoint> steep{{0.0, 0.0}, {0.5, 1.0}, {1.0, 2.0}};
    CHECK(std::abs(calibration_slope(steep) - 2.0) < 1e-12);
    const std::vector<CalibrationPoint> flat{{0.1, 0.4}, {0.5, 0.4}, {0.9, 0.4}};
    CHECK(calibration_slope(flat) == 0.0);
    const std::vector<CalibrationPoint> constant_x{{0.5, 0.1}, {0.5, 0.9}};
    CHECK_THROWS_AS(calibration_slope(constant_x), std::invalid_argument);
  }

  TEST_CASE("calibration slope depends only on the point set") {
    const std::vector<CalibrationPoint> a{{0.1, 0.2}, {0.4, 0.3}, {0.8, 0.9}};
    const std::vector<CalibrationPoint> b{{0.8, 0.9}, {0.1, 0.2}, {0.4, 0.3}};
    CHECK(calibration_slope(a) == doctest::Approx(calibration_slope(b)).epsilon(1e-14));
  }

  TEST_CASE("wasserstein distance") {
    const std::vector<double> a{0, 2}, b{1, 3};
    CHECK(std::abs(wasserstein1(a, b) - 1.0) < 1e-12);
    CHECK(wasserstein1(a, a) == 0.0);
    CHECK(wasserstein1(b, a) == wasserstein1(a, b));
    const std::vector<double> c{1};
    CHECK_THROWS_AS(wasserstein1(a, c), std::invalid_argument);
  }

  TEST_CASE("wasserstein distance matches the CDF integral and the triangle inequality") {
    Rng rng(8);
    for (int k = 0; k < 200; ++k) {
      const std::size_t n = 1 + rng.below(20);
      std::vector<double> a(n), b(n), c(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal() * 2.0;
        c[i] = rng.uniform(-1.0, 3.0);
      }
      CHECK(wasserstein1(a, b) == doctest::Approx(oracle::w1_by_cdf(a, b)).epsilon(1e-10));
      CHECK(wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12);
    }
  }

  TEST_CASE("evaluation of a model that reproduces observed times") {
    Rng rng(2);
    const std::size_t n = 200, draws = 50;
    std::vector<double> t(n);
    std::vector<int> y(n);
    Matrix m(n, draws);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = -std::log(rng.uniform());
      y[i] = rng.uniform() < 0.8 ? 1 : 0;
      for (std::size_t s = 0; s < draws; ++s) m(i, s) = t[i];
    }
    const EvalReport r = evaluate_samples(TimeSamples{m}, t, y);
    CHECK(r.c_index == 1.0);
    CHECK(r.calibration_slope == doctest::Approx(1.0).epsilon(0.05));
    CHECK(r.mean_cov < 1e-12);
    for (std::size_t i = 0; i < r.km_curve.size(); ++i)
      CHECK(r.dkm_curve.survival[i] == doctest::Approx(r.km_curve.survival[i]).epsilon(1e-12));
    double prev = -1.0;
    for (const auto& p : r.calibration_points) {
      CHECK(p.observed >= prev);
      prev = p.observed;
    }
    CHECK(r.coverage95 == 1.0);
  }

  TEST_CASE("report JSON carries every field") {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> y{1, 1, 0, 1};
    Matrix m{{1, 1.5}, {2, 2.5}, {3, 3.5}, {4, 4.5}};
    const std::string json = to_json_string(evaluate_samples(TimeSamples{m}, t, y));
    for (const char* key : {"c_index", "calibration_slope", "calibration_intercept", "mean_cov", "coverage95",
                            "calibration_points", "medians", "cov", "km_curve", "dkm_curve"}) {
      CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
    }
  }
}
