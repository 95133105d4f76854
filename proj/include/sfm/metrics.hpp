#pragma once

#include <optional>
#include <span>
#include <vector>

#include <string>
#include "sfm/estimators.hpp"
#include "sfm/time_samples.hpp"

namespace sfm {

/// Harrell's C-index. A pair (a, b) is comparable when t_a < t_b and
/// y_a = 1; it is concordant when pred_a < pred_b and earns 0.5 on a
/// prediction tie. `pred` is a predicted time (larger = later).
/// Throws std::invalid_argument when no pair is comparable.
double c_index(std::span<const double> pred, std::span<const double> t, std::span<const int> y);

struct CovStats {
  std::vector<double> per_subject;
  double mean = 0.0;
};

/// Per-subject coefficient of variation (population std / mean) and its average.
CovStats cov_stats(const TimeSamples& samples);

/// Fraction of uncensored subjects whose observed time lies inside the
/// central 95% interval of their draws (linear-interpolated quantiles).
double coverage95(const TimeSamples& samples, std::span<const double> t, std::span<const int> y);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

/// Silverman's rule 1.06 * sd * n^(-1/5) (sample sd).
double silverman_bandwidth(std::span<const double> samples);

struct KdeCdf {
  std::vector<double> values;
  double bandwidth = 0.0;
  /// All draws identical and no bandwidth given: a step CDF was returned.
  bool degenerate = false;
};

/// CDF of the Gaussian-kernel mixture centred on `samples`, evaluated on
/// `grid`. The default bandwidth is Silverman's rule floored at
/// 1e-6 times the time range.
KdeCdf kde_cdf(std::span<const double> samples, std::span<const double> grid,
               std::optional<double> bandwidth = std::nullopt);

struct CalibrationPoint {
  double observed;   // 1 - S_KM(t_i)
  double predicted;  // 1 - S_model(t_i)
};

/// Pairs cumulative risk of the reference curve with the model curve at
/// each shared grid point.
std::vector<CalibrationPoint> calibration_curve(const SurvivalCurve& model_curve,
                                                const SurvivalCurve& reference);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of predicted on observed, intercept free.
LinearFit calibration_fit(std::span<const CalibrationPoint> points);
double calibration_slope(std::span<const CalibrationPoint> points);

/// 1-D earth mover's distance between equal-size samples: mean absolute
/// difference of the sorted values.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Empirical step CDF of each sample row on `grid`.
Matrix empirical_cdf(const TimeSamples& samples, std::span<const double> grid);
Matrix kde_cdf_matrix(const TimeSamples& samples, std::span<const double> grid);

struct EvalReport {
  double c_index = 0.0;
  double calibration_slope = 0.0;
  double calibration_intercept = 0.0;
  std::vector<CalibrationPoint> calibration_points;
  double mean_cov = 0.0;
  double coverage95 = 0.0;
  std::vector<double> medians;
  std::vector<double> cov;
  std::size_t draws = 0;
  /// Reference and model survival curves on the test grid.
  SurvivalCurve km_curve;
  SurvivalCurve dkm_curve;
};

/// Scores sampled predictions against observed test outcomes.
///
/// The model survival curve uses empirical CDFs of the draws; the
/// calibration curve and slope use `analytic_cdf` when supplied (N x |grid|
/// on the distinct test times) and Gaussian-KDE CDFs otherwise. The
/// C-index ranks subjects by the median draw.
EvalReport evaluate_samples(const TimeSamples& samples, std::span<const double> t,
                            std::span<const int> y, const Matrix* analytic_cdf = nullptr);

/// Pretty-printed JSON document with round-trip double precision.
std::string to_json_string(const EvalReport& report);

}  // namespace sfm
