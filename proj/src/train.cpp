#include "sfm/train.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace sfm {

void adam_step(std::span<ad::Parameter* const> params, AdamState& state, const AdamConfig& cfg) {
  if (state.first.empty()) {
    for (const ad::Parameter* p : params) {
      state.first.emplace_back(p->value.rows(), p->value.cols());
      state.second.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.first.size() != params.size()) throw std::invalid_argument("adam: parameter count changed");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    Matrix& m = state.first[k];
    Matrix& v = state.second[k];
    if (!p.grad.same_shape(p.value) || !m.same_shape(p.value)) {
      throw std::invalid_argument("adam: shape mismatch for parameter " + std::to_string(k) + " " +
                                  p.value.shape_string() + " vs " + p.grad.shape_string());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("train: batch_size must be at least 2");
  if (patience < 1) throw std::invalid_argument("train: patience must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (!(tau_decay > 0.0)) throw std::invalid_argument("train: tau_decay must be positive");
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {}

bool EarlyStopping::update(std::size_t epoch, double valid_loss) {
  if (valid_loss < best_) {
    best_ = valid_loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

struct Batch {
  Matrix X;
  std::vector<double> t;
  std::vector<int> y;
};

Batch gather(const SurvDataset& ds, std::span<const std::size_t> rows) {
  Batch b{ds.X.select_rows(rows), {}, {}};
  for (std::size_t r : rows) {
    b.t.push_back(ds.t[r]);
    b.y.push_back(ds.y[r]);
  }
  return b;
}

// Generic epoch loop. `step_loss` records the loss of one batch on a tape in
// train mode; `valid_loss` scores the validation set for the current model.
template <typename Model>
using StepLoss = std::function<ad::Var(Model&, ad::Tape&, const Batch&, Rng&, std::size_t)>;

template <typename Model>
TrainResult<Model> run(Model model, const SurvDataset& train_set, const TrainConfig& cfg,
                       const StepLoss<Model>& step_loss,
                       const std::function<double(const Model&, std::size_t)>& valid_loss) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (train_set.width() != model.input_dim()) {
    throw std::invalid_argument("train: dataset width " + std::to_string(train_set.width()) +
                                " does not match model input " + std::to_string(model.input_dim()));
  }
  TrainResult<Model> result{model, {}};
  if (cfg.max_epochs == 0) return result;

  Rng root(cfg.seed);
  Rng shuffle_rng = root.split(1);
  Rng step_rng = root.split(2);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  AdamState adam;

  // Epoch 0 passes over the data without updating parameters.
  auto pass = [&](std::size_t epoch) {
    const bool update = epoch > 0;
    shuffle_rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const Batch batch = gather(train_set, std::span<const std::size_t>(order).subspan(start, len));
      const auto params = model.parameters();
      for (ad::Parameter* p : params) p->zero_grad();
      ad::Tape tape;
      ad::Var loss = step_loss(model, tape, batch, step_rng, epoch);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch at offset " + std::to_string(start));
      }
      total += value;
      ++batches;
      if (update) {
        tape.backward(loss);
        adam_step(params, adam, cfg.adam);
      }
    }
    return total / static_cast<double>(batches);
  };

  EarlyStopping stopper(cfg.patience);
  TrainHistory& history = result.history;
  for (std::size_t epoch = 0; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = pass(epoch);
    rec.valid_loss = valid_loss(model, epoch);
    if (!std::isfinite(rec.valid_loss)) {
      throw TrainingDiverged("train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back(rec);
    if (stopper.update(epoch, rec.valid_loss)) result.model = model;
    if (stopper.should_stop()) {
      history.stopped_early = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  history.best_valid = stopper.best();
  return result;
}

double tau_for_epoch(const LossConfig& cfg, std::span<const double> t, double decay, std::size_t epoch) {
  const double base = cfg.resolve_tau(t);
  return epoch == 0 ? base : base * std::pow(decay, static_cast<double>(epoch - 1));
}

}  // namespace

TrainResult<SfmModel> train(SfmModel model, const SurvDataset& train_set,
                            const SurvDataset& valid_set, const LossConfig& loss_cfg,
                            const TrainConfig& cfg) {
  loss_cfg.validate();
  if (valid_set.size() == 0) throw std::invalid_argument("train: empty validation set");
  Rng valid_rng = Rng(cfg.seed).split(3);
  const Matrix valid_noise = model.draw_noise(valid_set.size(), valid_rng);

  auto step = [&](SfmModel& m, ad::Tape& tape, const Batch& b, Rng& rng, std::size_t epoch) {
    const Matrix eps = m.draw_noise(b.t.size(), rng);
    ad::Var t_hat = m.forward(tape, b.X, eps, ad::Mode::train, rng);
    LossConfig lc = loss_cfg;
    lc.tau = tau_for_epoch(loss_cfg, b.t, cfg.tau_decay, epoch);
    return loss_total(t_hat, b.t, b.y, lc);
  };
  auto valid = [&](const SfmModel& m, std::size_t epoch) {
    const std::vector<double> pred = m.predict(valid_set.X, valid_noise);
    ad::Tape tape;
    LossConfig lc = loss_cfg;
    lc.tau = tau_for_epoch(loss_cfg, valid_set.t, cfg.tau_decay, epoch);
    return loss_total(tape.constant(Matrix::column(pred)), valid_set.t, valid_set.y, lc).value().item();
  };
  return run<SfmModel>(std::move(model), train_set, cfg, step, valid);
}

TrainResult<LognormalModel> train(LognormalModel model, const SurvDataset& train_set,
                                  const SurvDataset& valid_set, const TrainConfig& cfg) {
  if (valid_set.size() == 0) throw std::invalid_argument("train: empty validation set");
  auto step = [](LognormalModel& m, ad::Tape& tape, const Batch& b, Rng& rng, std::size_t) {
    const auto out = m.forward(tape, b.X, ad::Mode::train, rng);
    return loss_lognormal_nll(out.mu, out.log_sigma, b.t, b.y);
  };
  auto valid = [&](const LognormalModel& m, std::size_t) {
    const LognormalPrediction p = m.predict(valid_set.X);
    ad::Tape tape;
    return loss_lognormal_nll(tape.constant(Matrix::column(p.mu)),
                              tape.constant(Matrix::column(p.log_sigma)), valid_set.t, valid_set.y)
        .value()
        .item();
  };
  return run<LognormalModel>(std::move(model), train_set, cfg, step, valid);
}

}  // namespace sfm
