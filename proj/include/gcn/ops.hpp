#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "gcn/rng.hpp"
#include "gcn/tensor.hpp"

namespace gcn {

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// Glorot/Xavier uniform: i.i.d. samples in [-L, L], L = sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out,
                      std::vector<std::size_t> shape);

// ---------------------------------------------------------------------------
// 1-D convolution with same padding
// ---------------------------------------------------------------------------
//
// input [N x d], kernels [F x h x d], bias [F] -> output [N x F].
// The input is zero-padded with floor((h-1)/2) rows above and ceil((h-1)/2)
// below, so the output keeps the input length. No activation is applied.

Tensor conv1d_same(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv1dGrads {
  Tensor input;    // [N x d]
  Tensor kernels;  // [F x h x d]
  Tensor bias;     // [F]
};

Conv1dGrads conv1d_same_backward(const Tensor& input, const Tensor& kernels,
                                 const Tensor& upstream);

// Fused pass computing two convolutions of the same input (the main and gate
// branches share every input window). Produces exactly the same values, in
// the same accumulation order, as two conv1d_same calls.
void conv1d_same_dual(const Tensor& input, const Tensor& kernels_a, const Tensor& bias_a,
                      const Tensor& kernels_b, const Tensor& bias_b, Tensor& out_a,
                      Tensor& out_b);

// Sparse upstream for conv backward: one (row, filter, value) pulse per
// entry. This is the shape of the gradient max-over-time pooling routes back.
struct ConvPulse {
  std::size_t row;
  std::size_t filter;
  double value;
};

// Accumulates the gradients of the pulses into grad_input / grad_kernels /
// grad_bias (all pre-zeroed by the caller or reused across branches).
// grad_input may be null when the input gradient is not needed (static
// embeddings).
void conv1d_same_backward_pulses(const Tensor& input, const Tensor& kernels,
                                 const std::vector<ConvPulse>& pulses, Tensor* grad_input,
                                 Tensor& grad_kernels, Tensor& grad_bias);

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

enum class Activation { Identity, Sigmoid, Tanh, Relu };

double apply_activation(Activation kind, double x);
// Derivative as a function of the pre-activation x. relu'(0) is taken as 0.
double activation_derivative(Activation kind, double x);

Tensor activate(Activation kind, const Tensor& x);
// upstream * derivative(x), elementwise; x is the pre-activation tensor.
Tensor activate_backward(Activation kind, const Tensor& x, const Tensor& upstream);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Elementwise product (the gating step)
// ---------------------------------------------------------------------------

Tensor elementwise_mul(const Tensor& a, const Tensor& b);
// Returns (grad_a, grad_b) = (upstream * b, upstream * a).
std::pair<Tensor, Tensor> elementwise_mul_backward(const Tensor& a, const Tensor& b,
                                                   const Tensor& upstream);

// ---------------------------------------------------------------------------
// Max-over-time pooling
// ---------------------------------------------------------------------------

struct MaxPool {
  Tensor values;                   // [F]
  std::vector<std::size_t> argmax; // [F]; ties resolve to the smallest row
};

MaxPool maxpool_time(const Tensor& input);  // input [N x F]

// Scatters upstream[k] to row argmax[k] of an [n_rows x F] gradient.
Tensor maxpool_time_backward(const MaxPool& pool, std::size_t n_rows, const Tensor& upstream);

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

// y = x^T W + b with x [m], W [m x n], b [n].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
  Tensor x;  // [m]
  Tensor w;  // [m x n]
  Tensor b;  // [n]
};

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& upstream);

// ---------------------------------------------------------------------------
// Dropout (inverted: kept activations scale by 1/keep_prob at train time)
// ---------------------------------------------------------------------------

struct Dropout {
  Tensor y;
  Tensor mask;  // 1.0 kept / 0.0 dropped; all ones outside training
};

Dropout dropout(const Tensor& x, double keep_prob, Rng& rng, bool training);
Tensor dropout_backward(const Tensor& mask, double keep_prob, const Tensor& upstream);

// ---------------------------------------------------------------------------
// Binary cross-entropy on a single probability
// ---------------------------------------------------------------------------

// p is clamped to [1e-7, 1 - 1e-7] before the logs. y must be 0 or 1.
double bce_loss(double p, int y);
// dL/dp at the clamped probability.
double bce_loss_grad(double p, int y);

}  // namespace gcn
