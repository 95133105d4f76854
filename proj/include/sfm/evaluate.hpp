#pragma once

#include <cstdint>

#include "sfm/dataset.hpp"
#include "sfm/metrics.hpp"
#include "sfm/model.hpp"

namespace sfm {

/// Draws `draws` samples per test subject in inference mode and scores them.
EvalReport evaluate(const SfmModel& model, const SurvDataset& test, std::size_t draws,
                    std::uint64_t seed);

/// The baseline's calibration curve uses its closed-form CDF.
EvalReport evaluate(const LognormalModel& model, const SurvDataset& test, std::size_t draws,
                    std::uint64_t seed);

}  // namespace sfm
