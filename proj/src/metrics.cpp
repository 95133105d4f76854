#include "sfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace sfm {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

}  // namespace

double c_index(std::span<const double> pred, std::span<const double> t, std::span<const int> y) {
  if (pred.size() != t.size() || t.size() != y.size()) {
    throw std::invalid_argument("c_index: input lengths differ");
  }
  const std::size_t n = t.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

  double concordant = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = order[i];
    if (y[a] != 1) continue;
    // Skip later subjects tied with a in time.
    std::size_t j = i + 1;
    while (j < n && t[order[j]] == t[a]) ++j;
    for (; j < n; ++j) {
      const std::size_t b = order[j];
      ++comparable;
      if (pred[a] < pred[b]) {
        concordant += 1.0;
      } else if (pred[a] == pred[b]) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0) throw std::invalid_argument("c_index: no comparable pairs");
  return concordant / static_cast<double>(comparable);
}

CovStats cov_stats(const TimeSamples& samples) {
  if (samples.draws() < 2) throw std::invalid_argument("cov_stats: need at least two draws per subject");
  CovStats out;
  out.per_subject.reserve(samples.subjects());
  for (std::size_t n = 0; n < samples.subjects(); ++n) {
    const auto row = samples.row(n);
    const double mu = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    if (mu == 0.0) throw std::invalid_argument("cov_stats: zero mean for subject " + std::to_string(n));
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(row.size());
    out.per_subject.push_back(std::sqrt(var) / mu);
  }
  if (!out.per_subject.empty()) {
    out.mean = std::accumulate(out.per_subject.begin(), out.per_subject.end(), 0.0) /
               static_cast<double>(out.per_subject.size());
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double coverage95(const TimeSamples& samples, std::span<const double> t, std::span<const int> y) {
  if (samples.subjects() != t.size() || t.size() != y.size()) {
    throw std::invalid_argument("coverage95: input lengths differ");
  }
  std::size_t events = 0, covered = 0;
  for (std::size_t n = 0; n < t.size(); ++n) {
    if (y[n] != 1) continue;
    ++events;
    const auto row = samples.row(n);
    std::vector<double> v(row.begin(), row.end());
    std::sort(v.begin(), v.end());
    const double lo = quantile(v, 0.025);
    const double hi = quantile(std::move(v), 0.975);
    if (t[n] >= lo && t[n] <= hi) ++covered;
  }
  if (events == 0) throw std::invalid_argument("coverage95: no uncensored subjects");
  return static_cast<double>(covered) / static_cast<double>(events);
}

double silverman_bandwidth(std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  if (samples.size() < 2) return 0.0;
  const double mu = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0.0;
  for (double v : samples) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / (n - 1.0));
  return 1.06 * sd * std::pow(n, -0.2);
}

KdeCdf kde_cdf(std::span<const double> samples, std::span<const double> grid,
               std::optional<double> bandwidth) {
  if (samples.empty()) throw std::invalid_argument("kde_cdf: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  KdeCdf out;
  out.values.resize(grid.size());
  const double count = static_cast<double>(sorted.size());

  if (!bandwidth && sorted.front() == sorted.back()) {
    out.degenerate = true;
    for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] = grid[i] >= sorted.front() ? 1.0 : 0.0;
    return out;
  }
  double h = 0.0;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw std::invalid_argument("kde_cdf: bandwidth must be positive");
    h = *bandwidth;
  } else {
    double range = sorted.back() - sorted.front();
    if (!grid.empty()) {
      const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
      range = std::max(range, *gmax - *gmin);
    }
    h = std::max(silverman_bandwidth(sorted), 1e-6 * range);
  }
  out.bandwidth = h;

  // Kernels further than this many bandwidths away contribute exactly 0 or 1
  // at double precision.
  constexpr double kReach = 9.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double g = grid[i];
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), g - kReach * h);
    const auto last = std::upper_bound(first, sorted.end(), g + kReach * h);
    double acc = static_cast<double>(first - sorted.begin());
    for (auto it = first; it != last; ++it) acc += std_normal_cdf((g - *it) / h);
    out.values[i] = std::min(1.0, acc / count);
  }
  // Guard against rounding breaking monotonicity.
  for (std::size_t i = 1; i < out.values.size(); ++i)
    out.values[i] = std::max(out.values[i], out.values[i - 1]);
  return out;
}

std::vector<CalibrationPoint> calibration_curve(const SurvivalCurve& model_curve,
                                                const SurvivalCurve& reference) {
  if (model_curve.grid != reference.grid) throw std::invalid_argument("calibration_curve: grids differ");
  std::vector<CalibrationPoint> points(reference.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i] = {1.0 - reference.survival[i], 1.0 - model_curve.survival[i]};
  }
  return points;
}

LinearFit calibration_fit(std::span<const CalibrationPoint> points) {
  if (points.size() < 2) throw std::invalid_argument("calibration_slope: need at least two points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.observed;
    my += p.predicted;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.observed - mx) * (p.observed - mx);
    sxy += (p.observed - mx) * (p.predicted - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("calibration_slope: observed risk is constant");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double calibration_slope(std::span<const CalibrationPoint> points) {
  return calibration_fit(points).slope;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1: empty sample");
  if (a.size() != b.size()) throw std::invalid_argument("wasserstein1: sample sizes differ");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
  return acc / static_cast<double>(sa.size());
}

Matrix empirical_cdf(const TimeSamples& samples, std::span<const double> grid) {
  Matrix out(samples.subjects(), grid.size());
  const double count = static_cast<double>(samples.draws());
  for (std::size_t n = 0; n < samples.subjects(); ++n) {
    const auto row = samples.row(n);
    std::vector<double> sorted(row.begin(), row.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto k = std::upper_bound(sorted.begin(), sorted.end(), grid[i]) - sorted.begin();
      out(n, i) = static_cast<double>(k) / count;
    }
  }
  return out;
}

Matrix kde_cdf_matrix(const TimeSamples& samples, std::span<const double> grid) {
  Matrix out(samples.subjects(), grid.size());
  for (std::size_t n = 0; n < samples.subjects(); ++n) {
    const KdeCdf row = kde_cdf(samples.row(n), grid);
    std::copy(row.values.begin(), row.values.end(), out.row_span(n).begin());
  }
  return out;
}

EvalReport evaluate_samples(const TimeSamples& samples, std::span<const double> t,
                            std::span<const int> y, const Matrix* analytic_cdf) {
  if (samples.subjects() != t.size() || t.size() != y.size()) {
    throw std::invalid_argument("evaluate: sample rows do not match the test set");
  }
  EvalReport report;
  report.draws = samples.draws();
  report.km_curve = greenwood_bands(km(t, y), 0.05);
  const std::vector<double>& grid = report.km_curve.grid;

  report.dkm_curve = dkm(empirical_cdf(samples, grid), y, grid);
  const Matrix smooth = analytic_cdf != nullptr ? *analytic_cdf : kde_cdf_matrix(samples, grid);
  const SurvivalCurve calibration_dkm = dkm(smooth, y, grid);
  report.calibration_points = calibration_curve(calibration_dkm, report.km_curve);
  const LinearFit fit = calibration_fit(report.calibration_points);
  report.calibration_slope = fit.slope;
  report.calibration_intercept = fit.intercept;

  report.medians.resize(samples.subjects());
  for (std::size_t n = 0; n < samples.subjects(); ++n) {
    const auto row = samples.row(n);
    report.medians[n] = quantile(std::vector<double>(row.begin(), row.end()), 0.5);
  }
  report.c_index = c_index(report.medians, t, y);
  CovStats cov = cov_stats(samples);
  report.mean_cov = cov.mean;
  report.cov = std::move(cov.per_subject);
  report.coverage95 = coverage95(samples, t, y);
  return report;
}

std::string to_json_string(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["c_index"] = report.c_index;
  j["calibration_slope"] = report.calibration_slope;
  j["calibration_intercept"] = report.calibration_intercept;
  j["mean_cov"] = report.mean_cov;
  j["coverage95"] = report.coverage95;
  j["draws"] = report.draws;
  j["n_test"] = report.medians.size();
  auto& pts = j["calibration_points"] = nlohmann::ordered_json::array();
  for (const auto& p : report.calibration_points) pts.push_back({p.observed, p.predicted});
  j["medians"] = report.medians;
  j["cov"] = report.cov;
  const auto curve_json = [](const SurvivalCurve& c) {
    nlohmann::ordered_json o;
    o["time"] = c.grid;
    o["survival"] = c.survival;
    if (c.has_bands()) {
      o["lower"] = c.lower;
      o["upper"] = c.upper;
    }
    return o;
  };
  j["km_curve"] = curve_json(report.km_curve);
  j["dkm_curve"] = curve_json(report.dkm_curve);
  return j.dump(2);
}

}  // namespace sfm
