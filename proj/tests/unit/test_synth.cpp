#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "sfm/estimators.hpp"
#include "sfm/synth.hpp"

using namespace sfm;

namespace {

OracleSpec exponential(std::vector<double> w, CensoringScheme c = CensoringScheme::none) {
  OracleSpec spec;
  spec.weights = std::move(w);
  spec.censoring = c;
  spec.seed = 3;
  return spec;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("inverse cdf at a known draw") {
    const OracleSpec spec = exponential({0.0});
    CHECK(inverse_survival_time(spec, 1.0, std::exp(-2.0)) == doctest::Approx(2.0).epsilon(1e-14));
    OracleSpec wb = spec;
    wb.family = Family::weibull;
    wb.shape = 2.0;
    CHECK(inverse_survival_time(wb, 1.0, std::exp(-4.0)) == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("uncensored unit-rate sample has mean near one") {
    const SyntheticData d = generate(100000, exponential({0.0}));
    double mean = 0.0;
    for (double v : d.data.t) mean += v;
    mean /= d.data.size();
    CHECK(mean >= 0.98);
    CHECK(mean <= 1.02);
    CHECK(d.data.event_fraction() == 1.0);
  }

  TEST_CASE("censoring fraction lands near the target") {
    for (CensoringScheme c : {CensoringScheme::uniform_administrative, CensoringScheme::exponential_independent}) {
      OracleSpec spec = exponential({0.5, -0.5}, c);
      spec.censoring_fraction = 0.3;
      const SyntheticData d = generate(10000, spec);
      const double censored = 1.0 - d.data.event_fraction();
      CHECK(censored >= 0.25);
      CHECK(censored <= 0.35);
      CHECK(d.spec.censoring_scale > 0.0);
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        CHECK(d.data.y[i] == (d.event_times[i] <= d.censor_times[i] ? 1 : 0));
        CHECK(d.data.t[i] == std::min(d.event_times[i], d.censor_times[i]));
      }
    }
  }

  TEST_CASE("oracle survival values") {
    const OracleSpec spec = exponential({0.0});
    const std::vector<double> x{0.7};
    CHECK(oracle_survival(spec, x, 0.0) == 1.0);
    CHECK(oracle_survival(spec, x, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-14));
    OracleSpec wb = spec;
    wb.family = Family::weibull;
    wb.shape = 2.0;
    CHECK(oracle_survival(wb, x, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(oracle_survival(spec, x, -1.0), std::invalid_argument);
  }

  TEST_CASE("oracle c-index without signal is one half") {
    const SyntheticData d = generate(10000, exponential({0.0, 0.0}, CensoringScheme::uniform_administrative));
    CHECK(std::abs(oracle_cindex(d.spec, d.data) - 0.5) < 0.03);
  }

  TEST_CASE("oracle c-index on noiseless monotone data is one") {
    OracleSpec spec = exponential({1.0});
    SurvDataset ds;
    ds.X = Matrix{{2.0}, {1.0}, {0.0}, {-1.0}};
    ds.t = {1.0, 2.0, 3.0, 4.0};
    ds.y = {1, 1, 1, 1};
    CHECK(oracle_cindex(spec, ds) == 1.0);
    SurvDataset one;
    one.X = Matrix{{0.0}};
    one.t = {1.0};
    one.y = {1};
    CHECK_THROWS_AS(oracle_cindex(spec, one), std::invalid_argument);
  }

  TEST_CASE("oracle c-index agrees with pair enumeration on true rates") {
    OracleSpec spec = exponential({0.8, -0.6, 0.3}, CensoringScheme::uniform_administrative);
    const SyntheticData d = generate(400, spec);
    std::vector<double> neg_rate(d.data.size());
    for (std::size_t i = 0; i < d.data.size(); ++i) {
      const auto row = d.data.X.row_span(i);
      double lin = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) lin += spec.weights[k] * row[k];
      neg_rate[i] = -std::exp(lin);
    }
    CHECK(oracle_cindex(d.spec, d.data) == doctest::Approx(oracle::harrell(neg_rate, d.data.t, d.data.y)).epsilon(1e-12));
  }

  TEST_CASE("km of an uncensored unit exponential sample tracks exp(-t)") {
    const SyntheticData d = generate(10000, exponential({0.0}));
    const SurvivalCurve c = km(d.data.t, d.data.y);
    double gap = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) gap = std::max(gap, std::abs(c.survival[i] - std::exp(-c.grid[i])));
    CHECK(gap < 0.03);
  }

  TEST_CASE("generation is deterministic in the seed") {
    OracleSpec spec = exponential({0.3, 0.1}, CensoringScheme::uniform_administrative);
    const SyntheticData a = generate(500, spec), b = generate(500, spec);
    CHECK(a.data.X == b.data.X);
    CHECK(a.data.t == b.data.t);
    CHECK(a.data.y == b.data.y);
    spec.seed += 1;
    CHECK(generate(500, spec).data.t != a.data.t);
  }

  TEST_CASE("spec validation") {
    OracleSpec spec;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.weights = {std::nan("")};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.weights = {1.0};
    spec.censoring_fraction = 1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK_THROWS_AS(generate(0, exponential({1.0})), std::invalid_argument);
  }

  TEST_CASE("names round-trip") {
    for (Family f : {Family::exponential, Family::weibull}) CHECK(parse_family(to_string(f)) == f);
    for (CensoringScheme c : {CensoringScheme::none, CensoringScheme::uniform_administrative,
                              CensoringScheme::exponential_independent})
      CHECK(parse_censoring(to_string(c)) == c);
    CHECK_THROWS_AS(parse_family("gompertz"), std::invalid_argument);
  }
}
