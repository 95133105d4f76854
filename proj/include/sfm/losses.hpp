#pragma once

#include <optional>
#include <span>

#include "sfm/autodiff.hpp"

namespace sfm {

struct LossConfig {
  /// Weight of the accuracy term.
  double lambda = 1.0;
  /// Fixed Heaviside temperature; when unset, tau_fraction * max(t) of
  /// each minibatch.
  std::optional<double> tau;
  double tau_fraction = 0.01;

  void validate() const;
  double resolve_tau(std::span<const double> t) const;
};

/// Mean absolute gap between the observed-data pkm curve and the smoothed
/// pkm curve of `t_hat`, over the distinct observed times of the batch.
ad::Var loss_cal(ad::Var t_hat, std::span<const double> t, std::span<const int> y,
                 const LossConfig& cfg);

/// Mean hinge max(0, t - t_hat) over censored subjects plus mean |t - t_hat|
/// over uncensored subjects; an empty group contributes 0.
ad::Var loss_acc(ad::Var t_hat, std::span<const double> t, std::span<const int> y);

/// loss_cal + lambda * loss_acc.
ad::Var loss_total(ad::Var t_hat, std::span<const double> t, std::span<const int> y,
                   const LossConfig& cfg);

/// Mean negative log-likelihood of right-censored log-normal times:
/// events contribute -log f, censored subjects -log S.
ad::Var loss_lognormal_nll(ad::Var mu, ad::Var log_sigma, std::span<const double> t,
                           std::span<const int> y);

}  // namespace sfm
