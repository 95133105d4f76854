#include "sfm/evaluate.hpp"

#include "sfm/estimators.hpp"

namespace sfm {

EvalReport evaluate(const SfmModel& model, const SurvDataset& test, std::size_t draws,
                    std::uint64_t seed) {
  Rng rng(seed);
  const TimeSamples samples = model.sample(test.X, draws, rng);
  return evaluate_samples(samples, test.t, test.y);
}

EvalReport evaluate(const LognormalModel& model, const SurvDataset& test, std::size_t draws,
                    std::uint64_t seed) {
  Rng rng(seed);
  const TimeSamples samples = model.sample(test.X, draws, rng);
  const Matrix cdf = model.cdf(test.X, distinct_times(test.t));
  return evaluate_samples(samples, test.t, test.y, &cdf);
}

}  // namespace sfm
