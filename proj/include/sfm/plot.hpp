#pragma once

#include <span>
#include <string>

#include "sfm/estimators.hpp"
#include "sfm/metrics.hpp"

namespace sfm {

struct LabeledCurve {
  std::string label;
  const SurvivalCurve* curve = nullptr;
};

/// Step-function survival plot; curves with bands get dashed band lines.
std::string survival_svg(std::span<const LabeledCurve> curves);

/// Predicted against observed cumulative risk with the unit diagonal.
std::string calibration_svg(std::span<const CalibrationPoint> points, double slope);

}  // namespace sfm
