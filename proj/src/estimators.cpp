#include "sfm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace sfm {

namespace {

void check_inputs(std::span<const double> t, std::span<const int> y, const char* who) {
  if (t.empty()) throw std::invalid_argument(std::string(who) + ": empty input");
  if (t.size() != y.size()) {
    throw std::invalid_argument(std::string(who) + ": times and indicators differ in length");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument(std::string(who) + ": indicator not in {0,1}");
  }
}

void check_grid(std::span<const double> grid, const char* who) {
  if (grid.empty()) throw std::invalid_argument(std::string(who) + ": empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw std::invalid_argument(std::string(who) + ": grid must be strictly increasing");
    }
  }
}

// Number of sorted values <= x.
std::size_t count_at_or_below(const std::vector<double>& sorted, double x) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), x) -
                                  sorted.begin());
}

}  // namespace

double SurvivalCurve::at(double t) const {
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  if (it == grid.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - grid.begin()) - 1];
}

std::vector<double> distinct_times(std::span<const double> t) {
  std::vector<double> out(t.begin(), t.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SurvivalCurve km(std::span<const double> t, std::span<const int> y) {
  check_inputs(t, y, "km");
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

  SurvivalCurve curve;
  const std::size_t n = t.size();
  double s = 1.0;
  std::size_t i = 0;
  while (i < n) {
    const double time = t[order[i]];
    const std::size_t at_risk = n - i;
    std::size_t deaths = 0;
    std::size_t j = i;
    for (; j < n && t[order[j]] == time; ++j) deaths += static_cast<std::size_t>(y[order[j]]);
    s = (1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk)) * s;
    curve.grid.push_back(time);
    curve.survival.push_back(s);
    curve.at_risk.push_back(static_cast<double>(at_risk));
    curve.events.push_back(static_cast<double>(deaths));
    i = j;
  }
  return curve;
}

SurvivalCurve greenwood_bands(SurvivalCurve curve, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("greenwood_bands: alpha must lie in (0,1)");
  if (!curve.has_counts() || curve.at_risk.size() != curve.size()) {
    throw std::invalid_argument("greenwood_bands: curve carries no risk-set counts");
  }
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  curve.lower.assign(curve.size(), 0.0);
  curve.upper.assign(curve.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double n = curve.at_risk[i], d = curve.events[i], s = curve.survival[i];
    if (n > d) acc += d / (n * (n - d));
    if (s <= 0.0 || s >= 1.0) {
      curve.lower[i] = curve.upper[i] = s;
      continue;
    }
    const double log_s = std::log(s);
    const double se = std::sqrt(acc / (log_s * log_s));
    curve.lower[i] = std::pow(s, std::exp(z * se));
    curve.upper[i] = std::pow(s, std::exp(-z * se));
  }
  return curve;
}

SurvivalCurve pkm(std::span<const double> t_hat, std::span<const int> y,
                  std::span<const double> grid) {
  check_inputs(t_hat, y, "pkm");
  check_grid(grid, "pkm");
  std::vector<double> all(t_hat.begin(), t_hat.end());
  std::vector<double> uncensored;
  for (std::size_t k = 0; k < t_hat.size(); ++k)
    if (y[k] == 1) uncensored.push_back(t_hat[k]);
  std::sort(all.begin(), all.end());
  std::sort(uncensored.begin(), uncensored.end());

  SurvivalCurve curve;
  curve.grid.assign(grid.begin(), grid.end());
  curve.survival.resize(grid.size());
  const std::size_t n = t_hat.size();
  double s = 1.0;
  std::size_t events_before = 0;  // uncensored predictions <= t_{i-1}
  std::size_t gone_before = 0;    // all predictions <= t_{i-1}
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t events_upto = count_at_or_below(uncensored, grid[i]);
    const std::size_t deaths = events_upto - events_before;
    const std::size_t at_risk = n - gone_before;
    if (at_risk > 0) {
      s = (1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk)) * s;
    }
    curve.survival[i] = s;
    events_before = events_upto;
    gone_before = count_at_or_below(all, grid[i]);
  }
  return curve;
}

SurvivalCurve dkm(const Matrix& cdf, std::span<const int> y, std::span<const double> grid) {
  check_grid(grid, "dkm");
  if (cdf.rows() != y.size() || cdf.cols() != grid.size()) {
    throw std::invalid_argument("dkm: CDF matrix " + cdf.shape_string() + " does not match " +
                                std::to_string(y.size()) + " subjects x " +
                                std::to_string(grid.size()) + " grid points");
  }
  if (y.empty()) throw std::invalid_argument("dkm: empty input");
  for (std::size_t r = 0; r < cdf.rows(); ++r) {
    double prev = 0.0;
    for (std::size_t i = 0; i < cdf.cols(); ++i) {
      const double f = cdf(r, i);
      if (!(f >= 0.0 && f <= 1.0)) {
        throw std::invalid_argument("dkm: CDF value outside [0,1] in row " + std::to_string(r));
      }
      if (f < prev - 1e-12) {
        throw std::invalid_argument("dkm: non-monotone CDF row " + std::to_string(r));
      }
      prev = f;
    }
  }

  SurvivalCurve curve;
  curve.grid.assign(grid.begin(), grid.end());
  curve.survival.resize(grid.size());
  const double n = static_cast<double>(cdf.rows());
  double s = 1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double mass = 0.0, spent = 0.0;
    for (std::size_t r = 0; r < cdf.rows(); ++r) {
      const double before = i == 0 ? 0.0 : cdf(r, i - 1);
      if (y[r] == 1) mass += cdf(r, i) - before;
      spent += before;
    }
    const double at_risk = n - spent;
    if (at_risk >= 1e-12) s = std::clamp((1.0 - mass / at_risk) * s, 0.0, 1.0);
    curve.survival[i] = s;
  }
  return curve;
}

double heaviside_surrogate(double b, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("heaviside_surrogate: tau must be positive");
  return ad::sigmoid(b / tau);
}

ad::Var smooth_pkm(ad::Var t_hat, std::span<const int> y, std::span<const double> grid,
                   double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("smooth_pkm: tau must be positive");
  check_grid(grid, "smooth_pkm");
  const std::size_t n = t_hat.rows();
  if (t_hat.cols() != 1 || n != y.size()) {
    throw std::invalid_argument("smooth_pkm: predictions " + t_hat.value().shape_string() +
                                " do not match " + std::to_string(y.size()) + " indicators");
  }
  ad::Tape& tape = t_hat.tape();
  const std::size_t m = grid.size();
  Matrix yrow(1, n), ones_row(1, n, 1.0);
  for (std::size_t k = 0; k < n; ++k) yrow[k] = static_cast<double>(y[k]);

  // beyond(n, i) ~ H(t_hat_n - t_i)
  ad::Var beyond = ad::sigmoid((t_hat - tape.constant(Matrix::row(grid))) * (1.0 / tau));
  // beyond_prev(n, i) ~ H(t_hat_n - t_{i-1}), identically 1 for i = 1.
  std::vector<ad::Var> parts{tape.constant(Matrix(n, 1, 1.0))};
  if (m > 1) parts.push_back(ad::slice_cols(beyond, 0, m - 1));
  ad::Var beyond_prev = ad::concat_cols(parts);

  ad::Var deaths = ad::matmul(tape.constant(std::move(yrow)), beyond_prev - beyond);
  ad::Var at_risk = ad::matmul(tape.constant(std::move(ones_row)), beyond_prev);
  ad::Var factor = 1.0 - deaths / ad::clamp_min(at_risk, 1e-12);
  return ad::cumprod_cols(factor);
}

}  // namespace sfm
