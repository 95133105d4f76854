#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfm/autodiff.hpp"
#include "sfm/matrix.hpp"
#include "sfm/rng.hpp"
#include "sfm/time_samples.hpp"

namespace sfm {

enum class NoiseKind { uniform, normal };

std::string to_string(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

struct SfmConfig {
  std::size_t hidden_units = 50;
  std::size_t layers = 2;
  double dropout_p = 0.2;
  std::size_t noise_dim = 10;
  NoiseKind noise_kind = NoiseKind::uniform;
  bool batchnorm = true;

  void validate() const;
};

/// Linear -> (batchnorm) -> ReLU -> dropout.
struct HiddenLayer {
  ad::Parameter weight;
  ad::Parameter bias;
  ad::Parameter gamma;
  ad::Parameter beta;
  ad::BatchNormState bn;
};

/// Xavier-uniform fan_in x fan_out matrix.
Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Noise-injected generator of event times. The same noise vector is
/// appended to the input and to every hidden activation; a softplus output
/// keeps draws positive.
class SfmModel {
 public:
  SfmModel() = default;
  SfmModel(const SfmConfig& config, std::size_t input_dim, std::uint64_t seed);

  const SfmConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }
  std::uint64_t seed() const { return seed_; }

  /// N x noise_dim draws from the configured noise law.
  Matrix draw_noise(std::size_t n, Rng& rng) const;

  /// Records one forward pass and returns N x 1 predicted times. Train mode
  /// uses batch statistics (updating the running ones) and dropout.
  ad::Var forward(ad::Tape& tape, const Matrix& X, const Matrix& noise, ad::Mode mode, Rng& rng);

  /// Inference-mode times for fixed noise; no state changes.
  std::vector<double> predict(const Matrix& X, const Matrix& noise) const;

  /// `draws` fresh noise draws per subject in the given mode.
  TimeSamples sample(const Matrix& X, std::size_t draws, ad::Mode mode, Rng& rng);
  /// Inference-mode sampling without touching model state.
  TimeSamples sample(const Matrix& X, std::size_t draws, Rng& rng) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<HiddenLayer>& hidden() { return hidden_; }
  const std::vector<HiddenLayer>& hidden() const { return hidden_; }
  ad::Parameter& out_weight() { return out_weight_; }
  ad::Parameter& out_bias() { return out_bias_; }
  const ad::Parameter& out_weight() const { return out_weight_; }
  const ad::Parameter& out_bias() const { return out_bias_; }

 private:
  void check_input(const Matrix& X) const;

  SfmConfig config_;
  std::size_t input_dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<HiddenLayer> hidden_;
  ad::Parameter out_weight_;
  ad::Parameter out_bias_;
};

/// Abramowitz-Stegun 7.1.26 rational approximation (|error| < 1.5e-7).
double erf_approx(double x);
double lognormal_cdf(double t, double mu, double sigma);

struct LognormalPrediction {
  std::vector<double> mu;
  std::vector<double> log_sigma;
};

/// Log-normal accelerated-failure-time baseline: an MLP trunk with
/// location and log-scale heads for log T.
class LognormalModel {
 public:
  struct Output {
    ad::Var mu;
    ad::Var log_sigma;
  };

  LognormalModel() = default;
  LognormalModel(const SfmConfig& trunk, std::size_t input_dim, std::uint64_t seed);

  const SfmConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }
  std::uint64_t seed() const { return seed_; }

  Output forward(ad::Tape& tape, const Matrix& X, ad::Mode mode, Rng& rng);
  LognormalPrediction predict(const Matrix& X) const;
  TimeSamples sample(const Matrix& X, std::size_t draws, Rng& rng) const;
  /// N x |grid| CDF matrix.
  Matrix cdf(const Matrix& X, std::span<const double> grid) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<HiddenLayer>& hidden() { return hidden_; }
  const std::vector<HiddenLayer>& hidden() const { return hidden_; }
  ad::Parameter& mu_weight() { return mu_weight_; }
  ad::Parameter& mu_bias() { return mu_bias_; }
  ad::Parameter& sigma_weight() { return sigma_weight_; }
  ad::Parameter& sigma_bias() { return sigma_bias_; }
  const ad::Parameter& mu_weight() const { return mu_weight_; }
  const ad::Parameter& mu_bias() const { return mu_bias_; }
  const ad::Parameter& sigma_weight() const { return sigma_weight_; }
  const ad::Parameter& sigma_bias() const { return sigma_bias_; }

 private:
  SfmConfig config_;
  std::size_t input_dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<HiddenLayer> hidden_;
  ad::Parameter mu_weight_, mu_bias_, sigma_weight_, sigma_bias_;
};

}  // namespace sfm
