#include "sfm/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfm {

namespace {

std::vector<HiddenLayer> make_hidden(const SfmConfig& config, std::size_t first_in,
                                     std::size_t extra_in, Rng& rng) {
  std::vector<HiddenLayer> layers;
  std::size_t in = first_in;
  for (std::size_t l = 0; l < config.layers; ++l) {
    HiddenLayer h;
    h.weight = ad::Parameter(xavier_uniform(in + extra_in, config.hidden_units, rng));
    h.bias = ad::Parameter(Matrix(1, config.hidden_units, 0.0));
    h.gamma = ad::Parameter(Matrix(1, config.hidden_units, 1.0));
    h.beta = ad::Parameter(Matrix(1, config.hidden_units, 0.0));
    h.bn = ad::BatchNormState(config.hidden_units);
    layers.push_back(std::move(h));
    in = config.hidden_units;
  }
  return layers;
}

// Runs the hidden stack; `noise` (possibly empty) is appended before every layer.
ad::Var hidden_forward(std::vector<HiddenLayer>& layers, const SfmConfig& config, ad::Tape& tape,
                       ad::Var h, const ad::Var* noise, ad::Mode mode, Rng& rng) {
  for (HiddenLayer& layer : layers) {
    if (noise != nullptr) {
      const ad::Var parts[] = {h, *noise};
      h = ad::concat_cols(parts);
    }
    ad::Var z = ad::matmul(h, tape.parameter(layer.weight)) + tape.parameter(layer.bias);
    if (config.batchnorm) {
      z = ad::batchnorm(z, tape.parameter(layer.gamma), tape.parameter(layer.beta), layer.bn, mode);
    }
    h = ad::dropout(ad::relu(z), config.dropout_p, mode, rng);
  }
  return h;
}

void append_hidden_params(std::vector<HiddenLayer>& layers, bool batchnorm,
                          std::vector<ad::Parameter*>& out) {
  for (HiddenLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (batchnorm) {
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  }
}

}  // namespace

std::string to_string(NoiseKind k) { return k == NoiseKind::uniform ? "uniform" : "normal"; }

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "uniform") return NoiseKind::uniform;
  if (s == "normal" || s == "gaussian") return NoiseKind::normal;
  throw std::invalid_argument("unknown noise kind '" + s + "'");
}

void SfmConfig::validate() const {
  if (hidden_units < 1) throw std::invalid_argument("model: hidden_units must be at least 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("model: dropout_p must lie in [0, 1)");
}

Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

SfmModel::SfmModel(const SfmConfig& config, std::size_t input_dim, std::uint64_t seed)
    : config_(config), input_dim_(input_dim), seed_(seed) {
  config_.validate();
  if (input_dim == 0) throw std::invalid_argument("model: input width must be at least 1");
  Rng rng(seed);
  hidden_ = make_hidden(config_, input_dim, config_.noise_dim, rng);
  const std::size_t last = config_.layers == 0 ? input_dim : config_.hidden_units;
  out_weight_ = ad::Parameter(xavier_uniform(last + config_.noise_dim, 1, rng));
  out_bias_ = ad::Parameter(Matrix(1, 1, 0.0));
}

void SfmModel::check_input(const Matrix& X) const {
  if (X.cols() != input_dim_) {
    throw std::invalid_argument("model: input has " + std::to_string(X.cols()) +
                                " columns, model expects " + std::to_string(input_dim_));
  }
}

Matrix SfmModel::draw_noise(std::size_t n, Rng& rng) const {
  Matrix eps(n, config_.noise_dim);
  for (double& v : eps.values()) {
    v = config_.noise_kind == NoiseKind::uniform ? rng.uniform(-1.0, 1.0) : rng.normal();
  }
  return eps;
}

ad::Var SfmModel::forward(ad::Tape& tape, const Matrix& X, const Matrix& noise, ad::Mode mode,
                          Rng& rng) {
  check_input(X);
  if (noise.rows() != X.rows() || noise.cols() != config_.noise_dim) {
    throw std::invalid_argument("model: noise shape " + noise.shape_string() + " does not match");
  }
  const bool inject = config_.noise_dim > 0;
  ad::Var eps = tape.constant(noise);
  ad::Var h = hidden_forward(hidden_, config_, tape, tape.constant(X), inject ? &eps : nullptr,
                             mode, rng);
  if (inject) {
    const ad::Var parts[] = {h, eps};
    h = ad::concat_cols(parts);
  }
  return ad::softplus(ad::matmul(h, tape.parameter(out_weight_)) + tape.parameter(out_bias_));
}

std::vector<double> SfmModel::predict(const Matrix& X, const Matrix& noise) const {
  SfmModel snapshot = *this;
  ad::Tape tape;
  Rng unused(0);
  const Matrix& out = snapshot.forward(tape, X, noise, ad::Mode::infer, unused).value();
  return std::vector<double>(out.values().begin(), out.values().end());
}

TimeSamples SfmModel::sample(const Matrix& X, std::size_t draws, ad::Mode mode, Rng& rng) {
  check_input(X);
  TimeSamples out{Matrix(X.rows(), draws)};
  for (std::size_t s = 0; s < draws; ++s) {
    const Matrix eps = draw_noise(X.rows(), rng);
    ad::Tape tape;
    const Matrix& t = forward(tape, X, eps, mode, rng).value();
    for (std::size_t n = 0; n < X.rows(); ++n) out.values(n, s) = t[n];
  }
  return out;
}

TimeSamples SfmModel::sample(const Matrix& X, std::size_t draws, Rng& rng) const {
  SfmModel snapshot = *this;
  return snapshot.sample(X, draws, ad::Mode::infer, rng);
}

std::vector<ad::Parameter*> SfmModel::parameters() {
  std::vector<ad::Parameter*> out;
  append_hidden_params(hidden_, config_.batchnorm, out);
  out.push_back(&out_weight_);
  out.push_back(&out_bias_);
  return out;
}

double erf_approx(double x) {
  constexpr double p = 0.3275911;
  constexpr double a1 = 0.254829592, a2 = -0.284496736, a3 = 1.421413741, a4 = -1.453152027,
                   a5 = 1.061405429;
  const double sign = x < 0.0 ? -1.0 : 1.0;
  const double ax = std::abs(x);
  const double t = 1.0 / (1.0 + p * ax);
  const double poly = ((((a5 * t + a4) * t + a3) * t + a2) * t + a1) * t;
  return sign * (1.0 - poly * std::exp(-ax * ax));
}

double lognormal_cdf(double t, double mu, double sigma) {
  if (t <= 0.0) return 0.0;
  return 0.5 * (1.0 + erf_approx((std::log(t) - mu) / (sigma * std::sqrt(2.0))));
}

LognormalModel::LognormalModel(const SfmConfig& trunk, std::size_t input_dim, std::uint64_t seed)
    : config_(trunk), input_dim_(input_dim), seed_(seed) {
  config_.validate();
  config_.noise_dim = 0;
  if (input_dim == 0) throw std::invalid_argument("model: input width must be at least 1");
  Rng rng(seed);
  hidden_ = make_hidden(config_, input_dim, 0, rng);
  const std::size_t last = config_.layers == 0 ? input_dim : config_.hidden_units;
  mu_weight_ = ad::Parameter(xavier_uniform(last, 1, rng));
  mu_bias_ = ad::Parameter(Matrix(1, 1, 0.0));
  sigma_weight_ = ad::Parameter(Matrix(last, 1, 0.0));
  sigma_bias_ = ad::Parameter(Matrix(1, 1, 0.0));
}

LognormalModel::Output LognormalModel::forward(ad::Tape& tape, const Matrix& X, ad::Mode mode,
                                               Rng& rng) {
  if (X.cols() != input_dim_) {
    throw std::invalid_argument("model: input has " + std::to_string(X.cols()) +
                                " columns, model expects " + std::to_string(input_dim_));
  }
  ad::Var h = hidden_forward(hidden_, config_, tape, tape.constant(X), nullptr, mode, rng);
  return {ad::matmul(h, tape.parameter(mu_weight_)) + tape.parameter(mu_bias_),
          ad::matmul(h, tape.parameter(sigma_weight_)) + tape.parameter(sigma_bias_)};
}

LognormalPrediction LognormalModel::predict(const Matrix& X) const {
  LognormalModel snapshot = *this;
  ad::Tape tape;
  Rng unused(0);
  const Output out = snapshot.forward(tape, X, ad::Mode::infer, unused);
  const auto mu = out.mu.value().values();
  const auto ls = out.log_sigma.value().values();
  return {std::vector<double>(mu.begin(), mu.end()), std::vector<double>(ls.begin(), ls.end())};
}

TimeSamples LognormalModel::sample(const Matrix& X, std::size_t draws, Rng& rng) const {
  const LognormalPrediction p = predict(X);
  TimeSamples out{Matrix(X.rows(), draws)};
  for (std::size_t n = 0; n < X.rows(); ++n) {
    const double sigma = std::exp(p.log_sigma[n]);
    for (std::size_t s = 0; s < draws; ++s) out.values(n, s) = std::exp(p.mu[n] + sigma * rng.normal());
  }
  return out;
}

Matrix LognormalModel::cdf(const Matrix& X, std::span<const double> grid) const {
  const LognormalPrediction p = predict(X);
  Matrix out(X.rows(), grid.size());
  for (std::size_t n = 0; n < X.rows(); ++n) {
    const double sigma = std::exp(p.log_sigma[n]);
    double prev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      // The rational approximation can wobble by ~1e-7; keep rows monotone.
      prev = std::max(prev, lognormal_cdf(grid[i], p.mu[n], sigma));
      out(n, i) = prev;
    }
  }
  return out;
}

std::vector<ad::Parameter*> LognormalModel::parameters() {
  std::vector<ad::Parameter*> out;
  append_hidden_params(hidden_, config_.batchnorm, out);
  out.push_back(&mu_weight_);
  out.push_back(&mu_bias_);
  out.push_back(&sigma_weight_);
  out.push_back(&sigma_bias_);
  return out;
}

}  // namespace sfm
