#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gcn/ops.hpp"
#include "gcn/rng.hpp"
#include "gcn/tensor.hpp"
#include "gcn/text.hpp"

namespace gcn {

// Gate variant; None is the plain (non-gated) CNN ablation.
enum class GateKind { Glu, Gtu, Gtru, None };

const char* to_string(GateKind gate);
GateKind gate_from_string(const std::string& name);

// (main, gate) activation pair per variant: GLU (identity, sigmoid),
// GTU (tanh, sigmoid), GTRU (tanh, relu), None (relu, unused).
struct GatePair {
  Activation main;
  Activation gate;
};
GatePair gate_activations_for(GateKind gate);

struct ModelDims {
  std::size_t filters = 100;
  std::size_t embed_dim = 300;
  std::size_t max_len = 100;
  std::vector<std::size_t> kernel_sizes{3, 4, 5};
};

// One parallel convolution branch: the main kernels and, for gated variants,
// the gate kernels convolved with the same embedded input.
struct ConvBranchParams {
  std::size_t h = 0;
  Tensor kernels_main;  // [F x h x d]
  Tensor bias_main;     // [F]
  Tensor kernels_gate;  // [F x h x d]; empty for the non-gated model
  Tensor bias_gate;     // [F]; empty for the non-gated model
  bool gated = true;
};

struct GcnParams {
  GateKind gate = GateKind::Glu;
  ModelDims dims;
  std::vector<ConvBranchParams> branches;
  Tensor dense_w;  // [sum(F per branch) x 1]
  Tensor dense_b;  // [1]
  EmbeddingMatrix embedding;
  std::uint64_t vocab_hash = 0;
  std::uint64_t seed = 0;

  // Trainable scalars excluding the embedding table.
  std::size_t param_count() const;
  std::size_t concat_len() const { return branches.size() * dims.filters; }
};

// Glorot-uniform kernels and dense weights, zero biases, embedding rows
// copied as given. Same seed, bitwise-identical parameters.
GcnParams init_model(GateKind gate, const ModelDims& dims, const Vocabulary& vocab,
                     EmbeddingMatrix embedding, Rng& rng);

struct BranchCache {
  Tensor pre_main;  // [N x F]
  Tensor pre_gate;  // [N x F]; empty for the non-gated model
  MaxPool pool;
};

struct ExampleCache {
  std::vector<int> indices;
  Tensor embedded;        // [N x d] after embedding dropout
  Tensor embed_mask;      // [N x d]
  std::vector<BranchCache> branches;
  Tensor concat_dropped;  // [3F] input to the dense layer
  Tensor dense_mask;      // [3F]
  double prob = 0.0;
};

struct ForwardCache {
  std::vector<ExampleCache> examples;
  bool training = false;
  double keep_embed = 1.0;
  double keep_dense = 1.0;
};

struct ForwardResult {
  std::vector<double> probs;
  ForwardCache cache;
};

// Training-mode batch forward. rng is used only as a fork root; example e
// draws its dropout masks from rng.fork(e), so results do not depend on
// evaluation order. Pass a freshly forked Rng per batch.
ForwardResult forward(const GcnParams& params, std::span<const EncodedExample> batch,
                      bool training, Rng& rng, double keep_embed = 0.5,
                      double keep_dense = 0.8);

// Inference: pre-sigmoid output for one example (no dropout, no cache).
double example_logit(const GcnParams& params, const EncodedExample& ex);
std::vector<double> predict_probs(const GcnParams& params,
                                  std::span<const EncodedExample> examples);
// Label 1 iff prob >= 0.5 (equivalently logit >= 0).
std::vector<int> predict(const GcnParams& params, std::span<const EncodedExample> examples);

struct BranchGrads {
  Tensor kernels_main;
  Tensor bias_main;
  Tensor kernels_gate;
  Tensor bias_gate;
};

struct GcnGrads {
  std::vector<BranchGrads> branches;
  Tensor dense_w;
  Tensor dense_b;
  // row index -> summed row gradient; filled only when the embedding is
  // trainable. Row 0 (pad/unknown) is never included.
  std::map<int, std::vector<double>> embedding_rows;
};

// Exact gradient of the mean BCE over the batch w.r.t. every trainable
// tensor, accumulated in example-index order.
GcnGrads backward(const GcnParams& params, const ForwardCache& cache,
                  const std::vector<int>& labels);

// Inference-mode gate outputs g(conv_gate(P)) for one example, one entry per
// branch, plus the per-position mean over filters.
struct GateActivationMap {
  std::size_t h = 0;
  Tensor activations;        // [N x F]
  std::vector<double> mean;  // [N]
};
std::vector<GateActivationMap> gate_activations(const GcnParams& params,
                                                const EncodedExample& ex);

// Binary checkpoint: "GCNC" magic, version byte, length-prefixed JSON header
// (dims, gate, seed, vocab hash), then every tensor in declared field order
// as little-endian doubles. Round-trips bitwise.
void save_checkpoint(const GcnParams& params, const std::string& path);
GcnParams load_checkpoint(const std::string& path);

}  // namespace gcn
