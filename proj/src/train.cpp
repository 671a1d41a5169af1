#include "gcn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gcn {

void adadelta_step(Tensor& param, const Tensor& grad, Tensor& eg2, Tensor& edx2, double rho,
                   double eps) {
  require_shape(param.same_shape(grad) && param.same_shape(eg2) && param.same_shape(edx2),
                "adadelta_step: shape mismatch");
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i];
    eg2[i] = rho * eg2[i] + (1.0 - rho) * g * g;
    const double dx = -std::sqrt((edx2[i] + eps) / (eg2[i] + eps)) * g;
    edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
    param[i] += dx;
  }
}

AdadeltaState make_adadelta_state(const GcnParams& params, double rho, double eps) {
  AdadeltaState state;
  state.rho = rho;
  state.eps = eps;
  auto add = [&state](const Tensor& t) {
    state.eg2.emplace_back(t.shape());
    state.edx2.emplace_back(t.shape());
  };
  for (const ConvBranchParams& br : params.branches) {
    add(br.kernels_main);
    add(br.bias_main);
    if (br.gated) {
      add(br.kernels_gate);
      add(br.bias_gate);
    }
  }
  add(params.dense_w);
  add(params.dense_b);
  if (params.embedding.trainable) {
    state.embed_eg2 = Tensor(params.embedding.matrix.shape());
    state.embed_edx2 = Tensor(params.embedding.matrix.shape());
  }
  return state;
}

void apply_gradients(GcnParams& params, const GcnGrads& grads, AdadeltaState& state) {
  std::size_t slot = 0;
  auto step = [&](Tensor& param, const Tensor& grad) {
    adadelta_step(param, grad, state.eg2[slot], state.edx2[slot], state.rho, state.eps);
    ++slot;
  };
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    ConvBranchParams& br = params.branches[b];
    const BranchGrads& bg = grads.branches[b];
    step(br.kernels_main, bg.kernels_main);
    step(br.bias_main, bg.bias_main);
    if (br.gated) {
      step(br.kernels_gate, bg.kernels_gate);
      step(br.bias_gate, bg.bias_gate);
    }
  }
  step(params.dense_w, grads.dense_w);
  step(params.dense_b, grads.dense_b);

  if (params.embedding.trainable) {
    const std::size_t d = params.dims.embed_dim;
    const double rho = state.rho;
    const double eps = state.eps;
    for (const auto& [idx, row_grad] : grads.embedding_rows) {
      const auto row = static_cast<std::size_t>(idx);
      for (std::size_t c = 0; c < d; ++c) {
        const double g = row_grad[c];
        double& eg2 = state.embed_eg2.at(row, c);
        double& edx2 = state.embed_edx2.at(row, c);
        eg2 = rho * eg2 + (1.0 - rho) * g * g;
        const double dx = -std::sqrt((edx2 + eps) / (eg2 + eps)) * g;
        edx2 = rho * edx2 + (1.0 - rho) * dx * dx;
        params.embedding.matrix.at(row, c) += dx;
      }
    }
  }
}

bool EarlyStopper::observe(double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

EpochResult train_epoch(GcnParams& params, AdadeltaState& state,
                        const std::vector<EncodedExample>& train, const TrainConfig& config,
                        std::size_t epoch_no) {
  if (train.empty()) throw std::invalid_argument("train_epoch: empty training split");
  if (config.batch_size == 0) throw std::invalid_argument("train_epoch: batch_size must be >= 1");

  Rng epoch_rng(config.seed ^ static_cast<std::uint64_t>(epoch_no));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[epoch_rng.below(i)]);
  }

  EpochResult result;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    std::vector<EncodedExample> batch;
    std::vector<int> labels;
    batch.reserve(end - start);
    labels.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(train[order[i]]);
      labels.push_back(train[order[i]].label);
    }
    Rng batch_rng = epoch_rng.fork(result.batches);
    ForwardResult fwd =
        forward(params, batch, true, batch_rng, config.keep_embed, config.keep_dense);
    double batch_loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch_loss += bce_loss(fwd.probs[i], labels[i]);
    }
    batch_loss /= static_cast<double>(batch.size());
    if (!std::isfinite(batch_loss)) {
      throw TrainingDiverged(epoch_no, result.batches,
                             "non-finite loss at epoch " + std::to_string(epoch_no) + ", batch " +
                                 std::to_string(result.batches));
    }
    GcnGrads grads = backward(params, fwd.cache, labels);
    apply_gradients(params, grads, state);
    loss_sum += batch_loss * static_cast<double>(batch.size());
    ++result.batches;
  }
  result.mean_loss = loss_sum / static_cast<double>(train.size());
  return result;
}

EvalResult evaluate(const GcnParams& params, const std::vector<EncodedExample>& split) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  EvalResult result;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const EncodedExample& ex : split) {
    const double logit = example_logit(params, ex);
    loss_sum += bce_loss(sigmoid(logit), ex.label);
    const int pred = logit >= 0.0 ? 1 : 0;
    if (pred == ex.label) ++correct;
  }
  result.mean_loss = loss_sum / static_cast<double>(split.size());
  result.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
  return result;
}

TrainReport fit(GcnParams& params, const std::vector<EncodedExample>& train,
                const std::vector<EncodedExample>& val, const TrainConfig& config) {
  if (train.empty() || val.empty()) {
    throw std::invalid_argument("fit: train and val splits must be non-empty");
  }
  AdadeltaState state = make_adadelta_state(params, config.rho, config.eps);
  EarlyStopper stopper(config.patience, config.min_delta);
  TrainReport report;
  GcnParams best = params;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochResult train_result = train_epoch(params, state, train, config, epoch);
    const auto t1 = std::chrono::steady_clock::now();
    const EvalResult val_result = evaluate(params, val);

    EpochStats stats;
    stats.train_loss = train_result.mean_loss;
    stats.val_loss = val_result.mean_loss;
    stats.val_accuracy = val_result.accuracy;
    stats.seconds = std::chrono::duration<double>(t1 - t0).count();
    report.epochs.push_back(stats);
    report.stopped_epoch = epoch;

    if (stopper.observe(val_result.mean_loss)) {
      best = params;
      report.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  params = std::move(best);
  return report;
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["stopped_epoch"] = stopped_epoch;
  j["epochs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    nlohmann::json e;
    e["epoch"] = i + 1;
    e["train_loss"] = epochs[i].train_loss;
    e["val_loss"] = epochs[i].val_loss;
    e["val_accuracy"] = epochs[i].val_accuracy;
    e["seconds"] = epochs[i].seconds;
    j["epochs"].push_back(e);
  }
  return j.dump(2);
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_accuracy,seconds\n";
  char line[256];
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.4f,%.3f\n", i + 1, epochs[i].train_loss,
                  epochs[i].val_loss, epochs[i].val_accuracy, epochs[i].seconds);
    out << line;
  }
  return out.str();
}

}  // namespace gcn
