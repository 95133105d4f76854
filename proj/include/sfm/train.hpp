#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "sfm/autodiff.hpp"
#include "sfm/dataset.hpp"
#include "sfm/losses.hpp"
#include "sfm/model.hpp"

namespace sfm {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<Matrix> first;
  std::vector<Matrix> second;
};

/// One bias-corrected Adam update of every parameter from its `grad`.
void adam_step(std::span<ad::Parameter* const> params, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
  std::size_t batch_size = 350;
  AdamConfig adam;
  std::size_t max_epochs = 300;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  /// Multiplier applied to the Heaviside temperature after every epoch;
  /// 1 keeps it constant.
  double tau_decay = 1.0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

/// Epoch 0 holds the losses of the initial model before any update.
struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

/// Tracks the best validation loss and fires after `patience` epochs
/// without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  /// Returns true when `valid_loss` is a new best.
  bool update(std::size_t epoch, double valid_loss);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Model>
struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Minibatch Adam on loss_total with early stopping on the validation
/// loss (inference mode, one frozen noise draw per validation subject).
/// Returns the parameters from the best validation epoch.
TrainResult<SfmModel> train(SfmModel model, const SurvDataset& train_set,
                            const SurvDataset& valid_set, const LossConfig& loss_cfg,
                            const TrainConfig& cfg);

/// Same loop for the log-normal baseline on its censored likelihood.
TrainResult<LognormalModel> train(LognormalModel model, const SurvDataset& train_set,
                                  const SurvDataset& valid_set, const TrainConfig& cfg);

}  // namespace sfm
