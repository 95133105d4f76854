#pragma once

#include <span>
#include <vector>

#include "sfm/autodiff.hpp"
#include "sfm/matrix.hpp"

namespace sfm {

/// Step survival function on a strictly increasing time grid. An implicit
/// origin t_0 precedes the first grid point with S(t_0) = 1.
struct SurvivalCurve {
  std::vector<double> grid;
  std::vector<double> survival;
  /// Pointwise confidence band; empty unless greenwood_bands was applied.
  std::vector<double> lower;
  std::vector<double> upper;
  /// Risk-set sizes and event counts per grid point (km only).
  std::vector<double> at_risk;
  std::vector<double> events;

  std::size_t size() const { return grid.size(); }
  bool has_bands() const { return !lower.empty(); }
  bool has_counts() const { return !at_risk.empty(); }
  /// Right-continuous step evaluation; 1 before the first grid point.
  double at(double t) const;
};

/// Distinct sorted values of `t`.
std::vector<double> distinct_times(std::span<const double> t);

/// Kaplan-Meier product-limit estimate over the distinct observed times
/// (censored and uncensored). Events at a time are processed before
/// censorings at that time.
SurvivalCurve km(std::span<const double> t, std::span<const int> y);

/// Adds exponential-Greenwood (log-log) pointwise bands at level 1 - alpha.
/// Points with S in {0, 1} receive degenerate bands equal to S.
SurvivalCurve greenwood_bands(SurvivalCurve curve, double alpha);

/// Kaplan-Meier recursion driven by point predictions. Interval i counts
/// uncensored predictions in (t_{i-1}, t_i] against everyone whose
/// prediction is not at or before t_{i-1}; t_0 is -infinity. Fed observed
/// times and the distinct observed grid it reproduces km bit for bit.
SurvivalCurve pkm(std::span<const double> t_hat, std::span<const int> y,
                  std::span<const double> grid);

/// Distribution-based estimator: the pkm recursion with interval counts
/// replaced by per-subject CDF masses. `cdf` is N x |grid| with
/// cdf(n, i) = F_n(t_i); F_n(t_0) = 0.
SurvivalCurve dkm(const Matrix& cdf, std::span<const int> y, std::span<const double> grid);

/// Logistic surrogate sigmoid(b / tau) for the Heaviside step.
double heaviside_surrogate(double b, double tau);

/// Differentiable pkm: every interval indicator is replaced with the
/// logistic surrogate. `t_hat` is N x 1; returns a 1 x |grid| node of
/// survival values.
ad::Var smooth_pkm(ad::Var t_hat, std::span<const int> y, std::span<const double> grid,
                   double tau);

}  // namespace sfm
