#pragma once

#include <span>

#include "sfm/matrix.hpp"

namespace sfm {

/// Sampled event times: values(n, s) is draw s for subject n.
struct TimeSamples {
  Matrix values;

  std::size_t subjects() const { return values.rows(); }
  std::size_t draws() const { return values.cols(); }
  std::span<const double> row(std::size_t n) const { return values.row_span(n); }
};

}  // namespace sfm
