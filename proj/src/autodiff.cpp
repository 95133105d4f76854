#include "sfm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sfm::ad {

const Matrix& Var::value() const { return tape_->value_of(id_); }
const Matrix& Var::grad() const { return tape_->grad_of(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw std::logic_error("Tape::record: input from another tape");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::grad_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.grad.same_shape(n.value) ? n.grad : empty_;
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw std::logic_error("Tape::backward: root from another tape");
  const Node& r = nodes_[root.id()];
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " +
                                r.value.shape_string());
  }
  for (std::size_t i = 0; i <= root.id(); ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  if (!r.requires_grad) return;
  nodes_[root.id()].grad[0] = 1.0;

  std::vector<const Matrix*> in;
  std::vector<Matrix*> in_grad;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    if (n.param != nullptr) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    if (!n.backward) continue;
    in.clear();
    in_grad.clear();
    for (std::size_t id : n.inputs) {
      in.push_back(&nodes_[id].value);
      in_grad.push_back(nodes_[id].requires_grad ? &nodes_[id].grad : nullptr);
    }
    n.backward(OpContext{n.value, n.grad, in, in_grad});
  }
}

namespace {

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* op, const Matrix& ma,
                          const Matrix& mb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + ma.shape_string() +
                              " vs " + mb.shape_string());
}

inline std::size_t bidx(const Matrix& m, std::size_t r, std::size_t c) {
  return (m.rows() == 1 ? 0 : r) * m.cols() + (m.cols() == 1 ? 0 : c);
}

// f(x, y) -> z; da(x, y, z) = dz/dx; db(x, y, z) = dz/dy.
template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, const char* name, F f, DA da, DB db) {
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  const std::size_t rows = broadcast_dim(va.rows(), vb.rows(), name, va, vb);
  const std::size_t cols = broadcast_dim(va.cols(), vb.cols(), name, va, vb);
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = f(va[bidx(va, r, c)], vb[bidx(vb, r, c)]);
  return a.tape().record(std::move(out), {a, b}, [da, db](const OpContext& ctx) {
    const Matrix& x = *ctx.in[0];
    const Matrix& y = *ctx.in[1];
    for (std::size_t r = 0; r < ctx.out.rows(); ++r) {
      for (std::size_t c = 0; c < ctx.out.cols(); ++c) {
        const double g = ctx.out_grad(r, c);
        if (g == 0.0) continue;
        const std::size_t ix = bidx(x, r, c), iy = bidx(y, r, c);
        const double z = ctx.out(r, c);
        if (ctx.in_grad[0]) (*ctx.in_grad[0])[ix] += g * da(x[ix], y[iy], z);
        if (ctx.in_grad[1]) (*ctx.in_grad[1])[iy] += g * db(x[ix], y[iy], z);
      }
    }
  });
}

// f(x) -> z; d(x, z) = dz/dx.
template <typename F, typename D>
Var unary(Var a, F f, D d) {
  Matrix out = a.value();
  for (double& v : out.values()) v = f(v);
  return a.tape().record(std::move(out), {a}, [d](const OpContext& ctx) {
    auto gx = ctx.in_grad[0]->values();
    const auto x = ctx.in[0]->values();
    const auto z = ctx.out.values();
    const auto g = ctx.out_grad.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * d(x[i], z[i]);
  });
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double normal_log_sf(double z) {
  if (z < 30.0) return std::log(0.5 * std::erfc(z * kInvSqrt2));
  // Mills-ratio asymptotic series; erfc underflows beyond this point.
  const double z2 = z * z;
  return -0.5 * z2 - kLogSqrt2Pi - std::log(z) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

namespace {

// d/dz log(1 - Phi(z)) = -phi(z) / (1 - Phi(z)).
double normal_log_sf_grad(double z) {
  const double log_pdf = -0.5 * z * z - kLogSqrt2Pi;
  return -std::exp(log_pdf - normal_log_sf(z));
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "subtract", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "multiply", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "divide", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Var add(Var a, double b) {
  return unary(a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}

Var mul(Var a, double b) {
  return unary(a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}

Var rsub(double b, Var a) {
  return unary(a, [b](double x) { return b - x; }, [](double, double) { return -1.0; });
}

Var matmul(Var a, Var b) {
  Matrix out = sfm::matmul(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [](const OpContext& ctx) {
    const Matrix& x = *ctx.in[0];
    const Matrix& y = *ctx.in[1];
    const Matrix& g = ctx.out_grad;
    const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
    if (ctx.in_grad[0]) {
      Matrix& gx = *ctx.in_grad[0];  // g * y^T
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g(i, j) * y(p, j);
          gx(i, p) += acc;
        }
    }
    if (ctx.in_grad[1]) {
      Matrix& gy = *ctx.in_grad[1];  // x^T * g
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x(i, p);
          for (std::size_t j = 0; j < m; ++j) gy(p, j) += xv * g(i, j);
        }
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw std::invalid_argument("concat: shape mismatch " + parts[0].value().shape_string() +
                                  " vs " + p.value().shape_string());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return parts[0].tape().record(std::move(out), {parts.begin(), parts.end()},
                                [](const OpContext& ctx) {
                                  std::size_t off = 0;
                                  for (std::size_t i = 0; i < ctx.in.size(); ++i) {
                                    const std::size_t w = ctx.in[i]->cols();
                                    if (Matrix* gi = ctx.in_grad[i]) {
                                      for (std::size_t r = 0; r < gi->rows(); ++r)
                                        for (std::size_t c = 0; c < w; ++c)
                                          (*gi)(r, c) += ctx.out_grad(r, off + c);
                                    }
                                    off += w;
                                  }
                                });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& v = a.value();
  if (begin + count > v.cols()) {
    throw std::invalid_argument("slice: columns [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") out of range for " +
                                v.shape_string());
  }
  Matrix out(v.rows(), count);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
  return a.tape().record(std::move(out), {a}, [begin](const OpContext& ctx) {
    Matrix& g = *ctx.in_grad[0];
    for (std::size_t r = 0; r < ctx.out.rows(); ++r)
      for (std::size_t c = 0; c < ctx.out.cols(); ++c) g(r, begin + c) += ctx.out_grad(r, c);
  });
}

Var max0(Var a) {
  return unary(
      // NaN passes through so divergence stays visible downstream.
      a, [](double x) { return x < 0.0 ? 0.0 : x; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var relu(Var a) { return max0(a); }

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return sigmoid(x); }, [](double, double z) { return z * (1.0 - z); });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return softplus(x); }, [](double x, double) { return sigmoid(x); });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double z) { return z; });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp_min(Var a, double lo) {
  return unary(
      a, [lo](double x) { return x < lo ? lo : x; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var normal_log_sf(Var z) {
  return unary(
      z, [](double x) { return normal_log_sf(x); },
      [](double x, double) { return normal_log_sf_grad(x); });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Matrix::scalar(s), {a}, [](const OpContext& ctx) {
    const double g = ctx.out_grad[0];
    for (double& v : ctx.in_grad[0]->values()) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw std::invalid_argument("mean: empty input");
  return sum(a) * (1.0 / static_cast<double>(n));
}

Var cumprod_cols(Var a) {
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 1; c < out.cols(); ++c) out(r, c) *= out(r, c - 1);
  return a.tape().record(std::move(out), {a}, [](const OpContext& ctx) {
    // With P_j = prod_{k<=j} f_k and A_j = g_j + f_{j+1} A_{j+1},
    // dL/df_j = P_{j-1} A_j. Zero factors need no special casing.
    const Matrix& f = *ctx.in[0];
    Matrix& gf = *ctx.in_grad[0];
    const std::size_t n = f.cols();
    for (std::size_t r = 0; r < f.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t j = n; j-- > 0;) {
        acc = ctx.out_grad(r, j) + (j + 1 < n ? f(r, j + 1) * acc : 0.0);
        const double prefix = j == 0 ? 1.0 : ctx.out(r, j - 1);
        gf(r, j) += prefix * acc;
      }
    }
  });
}

Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode) {
  const Matrix& v = x.value();
  const std::size_t n = v.rows(), c = v.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c ||
      state.running_mean.cols() != c) {
    throw std::invalid_argument("batchnorm: shape mismatch " + v.shape_string() + " vs " +
                                gamma.value().shape_string());
  }
  if (n == 0) throw std::invalid_argument("batchnorm: empty batch");
  Matrix mu(1, c), inv_std(1, c);
  if (mode == Mode::train) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < c; ++k) mu[k] += v(r, k);
    for (std::size_t k = 0; k < c; ++k) mu[k] /= static_cast<double>(n);
    Matrix var(1, c);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = v(r, k) - mu[k];
        var[k] += d * d;
      }
    for (std::size_t k = 0; k < c; ++k) {
      var[k] /= static_cast<double>(n);
      inv_std[k] = 1.0 / std::sqrt(var[k] + state.eps);
      state.running_mean[k] = state.momentum * state.running_mean[k] + (1.0 - state.momentum) * mu[k];
      state.running_var[k] = state.momentum * state.running_var[k] + (1.0 - state.momentum) * var[k];
    }
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      mu[k] = state.running_mean[k];
      inv_std[k] = 1.0 / std::sqrt(state.running_var[k] + state.eps);
    }
  }
  Matrix xhat(n, c), out(n, c);
  const Matrix& g = gamma.value();
  const Matrix& b = beta.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      xhat(r, k) = (v(r, k) - mu[k]) * inv_std[k];
      out(r, k) = g[k] * xhat(r, k) + b[k];
    }
  const bool batch_stats = mode == Mode::train;
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std, batch_stats](const OpContext& ctx) {
        const Matrix& dy = ctx.out_grad;
        const Matrix& gam = *ctx.in[1];
        const std::size_t rows = dy.rows(), cols = dy.cols();
        Matrix sum_dy(1, cols), sum_dy_xhat(1, cols);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t k = 0; k < cols; ++k) {
            sum_dy[k] += dy(r, k);
            sum_dy_xhat[k] += dy(r, k) * xhat(r, k);
          }
        if (Matrix* gg = ctx.in_grad[1])
          for (std::size_t k = 0; k < cols; ++k) (*gg)[k] += sum_dy_xhat[k];
        if (Matrix* gb = ctx.in_grad[2])
          for (std::size_t k = 0; k < cols; ++k) (*gb)[k] += sum_dy[k];
        if (Matrix* gx = ctx.in_grad[0]) {
          const double nn = static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < cols; ++k) {
              const double scale = gam[k] * inv_std[k];
              if (batch_stats) {
                (*gx)(r, k) += scale * (dy(r, k) - sum_dy[k] / nn -
                                        xhat(r, k) * sum_dy_xhat[k] / nn);
              } else {
                (*gx)(r, k) += scale * dy(r, k);
              }
            }
        }
      });
}

Var dropout(Var x, double p, Mode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (mode == Mode::infer || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (double& m : mask.values()) m = rng.uniform() >= p ? keep_scale : 0.0;
  Matrix out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return x.tape().record(std::move(out), {x}, [mask = std::move(mask)](const OpContext& ctx) {
    auto gx = ctx.in_grad[0]->values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.out_grad[i] * mask[i];
  });
}

double grad_check(const std::function<Var(Tape&)>& f, std::span<Parameter* const> params,
                  double h) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var root = f(tape);
    tape.backward(root);
  }
  auto evaluate = [&f] {
    Tape tape;
    return f(tape).value().item();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = evaluate();
      p->value[i] = saved - h;
      const double down = evaluate();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(p->grad[i] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace sfm::ad
