#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sfm/matrix.hpp"
#include "sfm/rng.hpp"

namespace sfm::ad {

/// Trainable tensor owned by a model. The tape reads `value` and
/// accumulates into `grad` during backward.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

enum class Mode { train, infer };

/// Running statistics for a batch-normalization layer.
struct BatchNormState {
  Matrix running_mean;  // 1 x C
  Matrix running_var;   // 1 x C
  double momentum = 0.9;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(1, channels, 0.0), running_var(1, channels, 1.0) {}
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient of the last backward root with respect to this node.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// What a backward rule sees: its output, the incoming gradient, the
/// input values, and the input gradient accumulators. An accumulator is
/// null when that input does not need a gradient.
struct OpContext {
  const Matrix& out;
  const Matrix& out_grad;
  std::span<const Matrix* const> in;
  std::span<Matrix* const> in_grad;
};

using BackwardFn = std::function<void(const OpContext&)>;

/// Records one forward pass in topological order and replays it in
/// reverse. Single-threaded; use one tape per pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value) { return constant(Matrix::scalar(value)); }
  /// Leaf that receives a gradient (readable through Var::grad).
  Var variable(Matrix value);
  /// Leaf bound to a model parameter; backward adds into p.grad.
  Var parameter(Parameter& p);

  /// Record an operation. The result needs a gradient iff any input does.
  Var record(Matrix value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse sweep from a 1x1 root. Throws std::invalid_argument otherwise.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad_of(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  Matrix empty_;
};

// Arithmetic with rank-2 broadcasting: each dimension must match or be 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var add(Var a, double b);
Var mul(Var a, double b);
/// b - a
Var rsub(double b, Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator+(Var a, double b) { return add(a, b); }
inline Var operator-(Var a, double b) { return add(a, -b); }
inline Var operator*(Var a, double b) { return mul(a, b); }
inline Var operator*(double b, Var a) { return mul(a, b); }
inline Var operator/(Var a, double b) { return mul(a, 1.0 / b); }
inline Var operator-(double b, Var a) { return rsub(b, a); }

Var matmul(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);

Var relu(Var a);
/// Elementwise max(0, a); subgradient 0 at 0.
Var max0(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
/// Elementwise |a|; subgradient sign(0) = 0.
Var abs(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// max(a, lo) elementwise; gradient passes only where a > lo.
Var clamp_min(Var a, double lo);
/// log(1 - Phi(z)) for the standard normal CDF Phi, stable in both tails.
Var normal_log_sf(Var z);

Var sum(Var a);
Var mean(Var a);
/// Running product along each row.
Var cumprod_cols(Var a);

Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode);
/// Inverted dropout: train mode keeps units with probability 1-p and
/// scales them by 1/(1-p); infer mode is the identity.
Var dropout(Var x, double p, Mode mode, Rng& rng);

/// Numerically stable scalar helpers shared with non-differentiable code.
double sigmoid(double x);
double softplus(double x);
double normal_log_sf(double z);

/// Compares autodiff gradients of `f` with central differences of step h
/// over every coordinate of `params`. Returns the largest
/// |g_ad - g_fd| / max(1, |g_fd|).
double grad_check(const std::function<Var(Tape&)>& f, std::span<Parameter* const> params,
                  double h = 1e-5);

}  // namespace sfm::ad
