#include "sfm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sfm/estimators.hpp"

namespace sfm {

namespace {

void check_batch(const ad::Var& pred, std::span<const double> t, std::span<const int> y,
                 const char* who) {
  if (t.empty()) throw std::invalid_argument(std::string(who) + ": empty minibatch");
  if (t.size() != y.size() || pred.rows() != t.size() || pred.cols() != 1) {
    throw std::invalid_argument(std::string(who) + ": prediction shape " +
                                pred.value().shape_string() + " does not match " +
                                std::to_string(t.size()) + " subjects");
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("loss: lambda must be positive");
  if (tau && !(*tau > 0.0)) throw std::invalid_argument("loss: tau must be positive");
  if (!(tau_fraction > 0.0)) throw std::invalid_argument("loss: tau_fraction must be positive");
}

double LossConfig::resolve_tau(std::span<const double> t) const {
  if (tau) return *tau;
  const double t_max = t.empty() ? 0.0 : *std::max_element(t.begin(), t.end());
  return t_max > 0.0 ? tau_fraction * t_max : tau_fraction;
}

ad::Var loss_cal(ad::Var t_hat, std::span<const double> t, std::span<const int> y,
                 const LossConfig& cfg) {
  check_batch(t_hat, t, y, "loss_cal");
  const std::vector<double> grid = distinct_times(t);
  const SurvivalCurve observed = pkm(t, y, grid);
  ad::Var model = smooth_pkm(t_hat, y, grid, cfg.resolve_tau(t));
  ad::Var target = t_hat.tape().constant(Matrix::row(observed.survival));
  return ad::mean(ad::abs(model - target));
}

ad::Var loss_acc(ad::Var t_hat, std::span<const double> t, std::span<const int> y) {
  check_batch(t_hat, t, y, "loss_acc");
  ad::Tape& tape = t_hat.tape();
  const std::size_t n = t.size();
  Matrix censored(n, 1), uncensored(n, 1);
  std::size_t n_events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] == 1) {
      uncensored[i] = 1.0;
      ++n_events;
    } else {
      censored[i] = 1.0;
    }
  }
  const std::size_t n_censored = n - n_events;
  ad::Var gap = tape.constant(Matrix::column(t)) - t_hat;
  ad::Var loss = tape.constant(0.0);
  if (n_censored > 0) {
    loss = loss + ad::sum(ad::max0(gap) * tape.constant(std::move(censored))) *
                      (1.0 / static_cast<double>(n_censored));
  }
  if (n_events > 0) {
    loss = loss + ad::sum(ad::abs(gap) * tape.constant(std::move(uncensored))) *
                      (1.0 / static_cast<double>(n_events));
  }
  return loss;
}

ad::Var loss_total(ad::Var t_hat, std::span<const double> t, std::span<const int> y,
                   const LossConfig& cfg) {
  return loss_cal(t_hat, t, y, cfg) + loss_acc(t_hat, t, y) * cfg.lambda;
}

ad::Var loss_lognormal_nll(ad::Var mu, ad::Var log_sigma, std::span<const double> t,
                           std::span<const int> y) {
  check_batch(mu, t, y, "loss_lognormal_nll");
  if (!log_sigma.value().same_shape(mu.value())) {
    throw std::invalid_argument("loss_lognormal_nll: mu and log_sigma shapes differ");
  }
  ad::Tape& tape = mu.tape();
  const std::size_t n = t.size();
  Matrix log_t(n, 1), event(n, 1), censored(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(t[i] > 0.0)) throw std::invalid_argument("loss_lognormal_nll: times must be positive");
    log_t[i] = std::log(t[i]);
    event[i] = y[i] == 1 ? 1.0 : 0.0;
    censored[i] = 1.0 - event[i];
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  ad::Var lt = tape.constant(log_t);
  ad::Var z = (lt - mu) / ad::exp(log_sigma);
  // -log f(t) = log t + log sigma + log sqrt(2 pi) + z^2 / 2
  ad::Var event_nll = (lt + log_sigma + ad::square(z) * 0.5) + half_log_2pi;
  ad::Var censored_nll = ad::rsub(0.0, ad::normal_log_sf(z));
  ad::Var total = ad::sum(event_nll * tape.constant(std::move(event))) +
                  ad::sum(censored_nll * tape.constant(std::move(censored)));
  return total * (1.0 / static_cast<double>(n));
}

}  // namespace sfm
