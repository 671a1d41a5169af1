#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gcn/model.hpp"

namespace gcn {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::size_t patience = 10;  // 0 disables early stopping
  double min_delta = 1e-6;    // val loss must beat best by this much to count
  double rho = 0.95;          // Adadelta decay
  double eps = 1e-6;          // Adadelta epsilon
  double keep_embed = 0.5;    // 1 - dropout prob on the embedding layer
  double keep_dense = 0.8;    // 1 - dropout prob on the dense layer
  std::uint64_t seed = 0;
};

// Elementwise Adadelta update:
//   Eg2  <- rho*Eg2 + (1-rho)*g^2
//   dx    = -sqrt((Edx2+eps)/(Eg2+eps)) * g
//   Edx2 <- rho*Edx2 + (1-rho)*dx^2
//   param += dx
void adadelta_step(Tensor& param, const Tensor& grad, Tensor& eg2, Tensor& edx2, double rho,
                   double eps);

// Accumulator pair per trainable tensor, in the declared parameter order
// (per branch: main kernels, main bias, gate kernels, gate bias; then dense
// weights and bias). Embedding accumulators exist only when the embedding is
// trainable and are updated lazily, row by touched row.
struct AdadeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  std::vector<Tensor> eg2;
  std::vector<Tensor> edx2;
  Tensor embed_eg2;
  Tensor embed_edx2;
};

AdadeltaState make_adadelta_state(const GcnParams& params, double rho, double eps);
void apply_gradients(GcnParams& params, const GcnGrads& grads, AdadeltaState& state);

// Tracks best validation loss; an epoch improves iff loss < best - min_delta.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {}

  bool observe(double val_loss);
  bool should_stop() const { return patience_ > 0 && stale_ >= patience_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;  // training pass only, excluding validation
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t stopped_epoch = 0;  // 1-based
  std::size_t best_epoch = 0;     // 1-based

  std::string to_json() const;
  std::string to_csv() const;
};

struct EpochResult {
  double mean_loss = 0.0;
  std::size_t batches = 0;
};

// One pass over the training split: shuffle indices with Rng(seed ^ epoch_no),
// then full batches plus one ragged tail batch. Returns the example-weighted
// mean loss. epoch_no is 1-based.
EpochResult train_epoch(GcnParams& params, AdadeltaState& state,
                        const std::vector<EncodedExample>& train, const TrainConfig& config,
                        std::size_t epoch_no);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalResult evaluate(const GcnParams& params, const std::vector<EncodedExample>& split);

// Up to config.epochs epochs with early stopping on validation loss; leaves
// params at the best-validation-loss snapshot.
TrainReport fit(GcnParams& params, const std::vector<EncodedExample>& train,
                const std::vector<EncodedExample>& val, const TrainConfig& config);

}  // namespace gcn
