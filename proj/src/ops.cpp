#include "gcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gcn {

Tensor glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out,
                      std::vector<std::size_t> shape) {
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("glorot_uniform: fan_in and fan_out must be >= 1");
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = rng.uniform(-limit, limit);
  }
  return out;
}

namespace {

struct ConvDims {
  std::size_t n, d, f, h, pad_top;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require_shape(input.rank() == 2, "conv1d_same: input must be [N x d]");
  require_shape(kernels.rank() == 3, "conv1d_same: kernels must be [F x h x d]");
  require_shape(bias.rank() == 1, "conv1d_same: bias must be [F]");
  ConvDims dm{input.dim(0), input.dim(1), kernels.dim(0), kernels.dim(1), 0};
  require_shape(kernels.dim(2) == dm.d, "conv1d_same: kernel depth != input depth");
  require_shape(bias.dim(0) == dm.f, "conv1d_same: bias length != filter count");
  dm.pad_top = (dm.h - 1) / 2;  // remaining h-1-pad_top rows pad below
  return dm;
}

}  // namespace

Tensor conv1d_same(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const ConvDims dm = conv_dims(input, kernels, bias);
  Tensor out({dm.n, dm.f});
  const double* in = input.data();
  const double* ker = kernels.data();
  for (std::size_t i = 0; i < dm.n; ++i) {
    // rows of the virtual padded window that fall inside the input
    const std::size_t j_lo = dm.pad_top > i ? dm.pad_top - i : 0;
    const std::size_t j_hi = std::min(dm.h, dm.n + dm.pad_top - i);
    const std::size_t base_row = i + j_lo - dm.pad_top;
    for (std::size_t k = 0; k < dm.f; ++k) {
      double acc = 0.0;
      const double* krow = ker + (k * dm.h + j_lo) * dm.d;
      const double* xrow = in + base_row * dm.d;
      for (std::size_t j = j_lo; j < j_hi; ++j) {
        for (std::size_t c = 0; c < dm.d; ++c) acc += xrow[c] * krow[c];
        krow += dm.d;
        xrow += dm.d;
      }
      out.at(i, k) = acc + bias[k];
    }
  }
  return out;
}

void conv1d_same_dual(const Tensor& input, const Tensor& kernels_a, const Tensor& bias_a,
                      const Tensor& kernels_b, const Tensor& bias_b, Tensor& out_a,
                      Tensor& out_b) {
  const ConvDims dm = conv_dims(input, kernels_a, bias_a);
  require_shape(kernels_b.same_shape(kernels_a) && bias_b.same_shape(bias_a),
                "conv1d_same_dual: branch shapes differ");
  out_a = Tensor({dm.n, dm.f});
  out_b = Tensor({dm.n, dm.f});
  const double* in = input.data();
  const double* ka = kernels_a.data();
  const double* kb = kernels_b.data();
  for (std::size_t i = 0; i < dm.n; ++i) {
    const std::size_t j_lo = dm.pad_top > i ? dm.pad_top - i : 0;
    const std::size_t j_hi = std::min(dm.h, dm.n + dm.pad_top - i);
    const std::size_t base_row = i + j_lo - dm.pad_top;
    for (std::size_t k = 0; k < dm.f; ++k) {
      double acc_a = 0.0;
      double acc_b = 0.0;
      const double* krow_a = ka + (k * dm.h + j_lo) * dm.d;
      const double* krow_b = kb + (k * dm.h + j_lo) * dm.d;
      const double* xrow = in + base_row * dm.d;
      for (std::size_t j = j_lo; j < j_hi; ++j) {
        for (std::size_t c = 0; c < dm.d; ++c) {
          acc_a += xrow[c] * krow_a[c];
          acc_b += xrow[c] * krow_b[c];
        }
        krow_a += dm.d;
        krow_b += dm.d;
        xrow += dm.d;
      }
      out_a.at(i, k) = acc_a + bias_a[k];
      out_b.at(i, k) = acc_b + bias_b[k];
    }
  }
}

Conv1dGrads conv1d_same_backward(const Tensor& input, const Tensor& kernels,
                                 const Tensor& upstream) {
  require_shape(kernels.rank() == 3, "conv1d_same_backward: kernels must be [F x h x d]");
  Tensor bias({kernels.dim(0)});
  const ConvDims dm = conv_dims(input, kernels, bias);
  require_shape(upstream.rank() == 2 && upstream.dim(0) == dm.n && upstream.dim(1) == dm.f,
                "conv1d_same_backward: upstream must be [N x F]");

  Conv1dGrads g{Tensor({dm.n, dm.d}), Tensor({dm.f, dm.h, dm.d}), Tensor({dm.f})};
  const double* in = input.data();
  const double* ker = kernels.data();
  double* gin = g.input.data();
  double* gker = g.kernels.data();
  for (std::size_t i = 0; i < dm.n; ++i) {
    const std::size_t j_lo = dm.pad_top > i ? dm.pad_top - i : 0;
    const std::size_t j_hi = std::min(dm.h, dm.n + dm.pad_top - i);
    const std::size_t base_row = i + j_lo - dm.pad_top;
    for (std::size_t k = 0; k < dm.f; ++k) {
      const double u = upstream.at(i, k);
      g.bias[k] += u;
      if (u == 0.0) continue;
      const double* krow = ker + (k * dm.h + j_lo) * dm.d;
      double* gkrow = gker + (k * dm.h + j_lo) * dm.d;
      const double* xrow = in + base_row * dm.d;
      double* gxrow = gin + base_row * dm.d;
      for (std::size_t j = j_lo; j < j_hi; ++j) {
        for (std::size_t c = 0; c < dm.d; ++c) {
          gkrow[c] += u * xrow[c];
          gxrow[c] += u * krow[c];
        }
        krow += dm.d;
        gkrow += dm.d;
        xrow += dm.d;
        gxrow += dm.d;
      }
    }
  }
  return g;
}

void conv1d_same_backward_pulses(const Tensor& input, const Tensor& kernels,
                                 const std::vector<ConvPulse>& pulses, Tensor* grad_input,
                                 Tensor& grad_kernels, Tensor& grad_bias) {
  Tensor bias({kernels.dim(0)});
  const ConvDims dm = conv_dims(input, kernels, bias);
  const double* in = input.data();
  const double* ker = kernels.data();
  double* gin = grad_input ? grad_input->data() : nullptr;
  double* gker = grad_kernels.data();
  for (const ConvPulse& p : pulses) {
    const std::size_t i = p.row;
    const std::size_t k = p.filter;
    const double u = p.value;
    grad_bias[k] += u;
    if (u == 0.0) continue;
    const std::size_t j_lo = dm.pad_top > i ? dm.pad_top - i : 0;
    const std::size_t j_hi = std::min(dm.h, dm.n + dm.pad_top - i);
    const std::size_t base_row = i + j_lo - dm.pad_top;
    const double* krow = ker + (k * dm.h + j_lo) * dm.d;
    double* gkrow = gker + (k * dm.h + j_lo) * dm.d;
    const double* xrow = in + base_row * dm.d;
    double* gxrow = gin ? gin + base_row * dm.d : nullptr;
    for (std::size_t j = j_lo; j < j_hi; ++j) {
      if (gxrow) {
        for (std::size_t c = 0; c < dm.d; ++c) {
          gkrow[c] += u * xrow[c];
          gxrow[c] += u * krow[c];
        }
        gxrow += dm.d;
      } else {
        for (std::size_t c = 0; c < dm.d; ++c) gkrow[c] += u * xrow[c];
      }
      krow += dm.d;
      gkrow += dm.d;
      xrow += dm.d;
    }
  }
}

double apply_activation(Activation kind, double x) {
  switch (kind) {
    case Activation::Identity: return x;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

double activation_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::Identity: return 1.0;
    case Activation::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

Tensor activate(Activation kind, const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = apply_activation(kind, x[i]);
  return out;
}

Tensor activate_backward(Activation kind, const Tensor& x, const Tensor& upstream) {
  require_shape(x.same_shape(upstream), "activate_backward: shape mismatch");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    out[i] = upstream[i] * activation_derivative(kind, x[i]);
  }
  return out;
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  require_shape(a.same_shape(b), "elementwise_mul: shape mismatch");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

std::pair<Tensor, Tensor> elementwise_mul_backward(const Tensor& a, const Tensor& b,
                                                   const Tensor& upstream) {
  require_shape(a.same_shape(b) && a.same_shape(upstream),
                "elementwise_mul_backward: shape mismatch");
  Tensor ga(a.shape());
  Tensor gb(b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    ga[i] = upstream[i] * b[i];
    gb[i] = upstream[i] * a[i];
  }
  return {std::move(ga), std::move(gb)};
}

MaxPool maxpool_time(const Tensor& input) {
  require_shape(input.rank() == 2, "maxpool_time: input must be [N x F]");
  const std::size_t n = input.dim(0);
  const std::size_t f = input.dim(1);
  if (n == 0) throw std::invalid_argument("maxpool_time: empty time axis");
  MaxPool pool{Tensor({f}), std::vector<std::size_t>(f, 0)};
  for (std::size_t k = 0; k < f; ++k) pool.values[k] = input.at(0, k);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < f; ++k) {
      const double v = input.at(i, k);
      if (v > pool.values[k]) {  // strict: ties keep the earliest row
        pool.values[k] = v;
        pool.argmax[k] = i;
      }
    }
  }
  return pool;
}

Tensor maxpool_time_backward(const MaxPool& pool, std::size_t n_rows, const Tensor& upstream) {
  const std::size_t f = pool.argmax.size();
  require_shape(upstream.rank() == 1 && upstream.dim(0) == f,
                "maxpool_time_backward: upstream must be [F]");
  Tensor grad({n_rows, f});
  for (std::size_t k = 0; k < f; ++k) grad.at(pool.argmax[k], k) = upstream[k];
  return grad;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_shape(x.rank() == 1 && w.rank() == 2 && b.rank() == 1, "dense: x[m], W[m x n], b[n]");
  const std::size_t m = x.dim(0);
  const std::size_t n = w.dim(1);
  require_shape(w.dim(0) == m && b.dim(0) == n, "dense: dimension mismatch");
  Tensor y({n});
  for (std::size_t j = 0; j < n; ++j) y[j] = b[j];
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < n; ++j) y[j] += xi * w.at(i, j);
  }
  return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& upstream) {
  const std::size_t m = x.dim(0);
  const std::size_t n = w.dim(1);
  require_shape(w.dim(0) == m, "dense_backward: W rows != x length");
  require_shape(upstream.rank() == 1 && upstream.dim(0) == n,
                "dense_backward: upstream length != output length");
  DenseGrads g{Tensor({m}), Tensor({m, n}), Tensor({n})};
  for (std::size_t j = 0; j < n; ++j) g.b[j] = upstream[j];
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = upstream[j];
      acc += u * w.at(i, j);
      g.w.at(i, j) = x[i] * u;
    }
    g.x[i] = acc;
  }
  return g;
}

Dropout dropout(const Tensor& x, double keep_prob, Rng& rng, bool training) {
  if (!(keep_prob > 0.0) || keep_prob > 1.0) {
    throw std::invalid_argument("dropout: keep_prob must be in (0, 1]");
  }
  Dropout out{Tensor(x.shape()), Tensor(x.shape())};
  if (!training || keep_prob == 1.0) {
    out.y = x;
    out.mask.fill(1.0);
    return out;
  }
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const bool keep = rng.bernoulli(keep_prob);
    out.mask[i] = keep ? 1.0 : 0.0;
    out.y[i] = keep ? x[i] * scale : 0.0;
  }
  return out;
}

Tensor dropout_backward(const Tensor& mask, double keep_prob, const Tensor& upstream) {
  require_shape(mask.same_shape(upstream), "dropout_backward: shape mismatch");
  Tensor grad(mask.shape());
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < mask.numel(); ++i) grad[i] = upstream[i] * mask[i] * scale;
  return grad;
}

namespace {
constexpr double kBceClamp = 1e-7;

double clamp_prob(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

void check_label(int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
}
}  // namespace

double bce_loss(double p, int y) {
  check_label(y);
  const double pc = clamp_prob(p);
  return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

double bce_loss_grad(double p, int y) {
  check_label(y);
  const double pc = clamp_prob(p);
  return y == 1 ? -1.0 / pc : 1.0 / (1.0 - pc);
}

}  // namespace gcn
