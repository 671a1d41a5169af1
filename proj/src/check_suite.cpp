#include "gcn/check_suite.hpp"

#include <cmath>

#include "gcn/grad_check.hpp"
#include "gcn/model.hpp"
#include "gcn/ops.hpp"

namespace gcn {

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double limit = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) sum += t[i] * w[i];
  return sum;
}

CheckItem check_conv(Rng& rng) {
  const std::size_t n = 7, d = 2, h = 3, f = 2;
  Tensor input = random_tensor(rng, {n, d});
  Tensor kernels = random_tensor(rng, {f, h, d});
  Tensor bias = random_tensor(rng, {f});
  const Tensor w = random_tensor(rng, {n, f});

  auto loss = [&]() { return weighted_sum(conv1d_same(input, kernels, bias), w); };
  const Conv1dGrads grads = conv1d_same_backward(input, kernels, w);
  const double err = grad_check(loss, {&input, &kernels, &bias},
                                {&grads.input, &grads.kernels, &grads.bias});
  return {"conv1d_same", err};
}

CheckItem check_dense(Rng& rng) {
  const std::size_t m = 4, n = 3;
  Tensor x = random_tensor(rng, {m});
  Tensor w = random_tensor(rng, {m, n});
  Tensor b = random_tensor(rng, {n});
  const Tensor up = random_tensor(rng, {n});

  auto loss = [&]() { return weighted_sum(dense(x, w, b), up); };
  const DenseGrads grads = dense_backward(x, w, up);
  const double err = grad_check(loss, {&x, &w, &b}, {&grads.x, &grads.w, &grads.b});
  return {"dense", err};
}

CheckItem check_activation(Rng& rng, Activation kind, const char* name) {
  Tensor x = random_tensor(rng, {12});
  if (kind == Activation::Relu) {
    // keep inputs away from the kink
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (std::fabs(x[i]) < 1e-3) x[i] = x[i] < 0 ? -1e-3 : 1e-3;
    }
  }
  const Tensor w = random_tensor(rng, {12});
  auto loss = [&]() { return weighted_sum(activate(kind, x), w); };
  const Tensor grad = activate_backward(kind, x, w);
  return {std::string("activation_") + name, grad_check(loss, {&x}, {&grad})};
}

CheckItem check_mul(Rng& rng) {
  Tensor a = random_tensor(rng, {9});
  Tensor b = random_tensor(rng, {9});
  const Tensor w = random_tensor(rng, {9});
  auto loss = [&]() { return weighted_sum(elementwise_mul(a, b), w); };
  const auto [ga, gb] = elementwise_mul_backward(a, b, w);
  return {"elementwise_mul", grad_check(loss, {&a, &b}, {&ga, &gb})};
}

CheckItem check_maxpool(Rng& rng) {
  const std::size_t n = 6, f = 3;
  Tensor input = random_tensor(rng, {n, f});
  // enforce a clear argmax margin per column so central differences never
  // cross the max boundary
  for (std::size_t k = 0; k < f; ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (input.at(i, k) > input.at(best, k)) best = i;
    }
    input.at(best, k) += 0.1;
  }
  const Tensor w = random_tensor(rng, {f});
  auto loss = [&]() { return weighted_sum(maxpool_time(input).values, w); };
  const MaxPool pool = maxpool_time(input);
  const Tensor grad = maxpool_time_backward(pool, n, w);
  return {"maxpool_time", grad_check(loss, {&input}, {&grad})};
}

CheckItem check_dropout(Rng& rng) {
  Tensor x = random_tensor(rng, {16});
  const Tensor w = random_tensor(rng, {16});
  const double keep = 0.7;
  const std::uint64_t mask_seed = rng.next_u64();
  auto loss = [&]() {
    Rng mask_rng(mask_seed);  // replay the same mask for every evaluation
    return weighted_sum(dropout(x, keep, mask_rng, true).y, w);
  };
  Rng mask_rng(mask_seed);
  const Dropout drop = dropout(x, keep, mask_rng, true);
  const Tensor grad = dropout_backward(drop.mask, keep, w);
  return {"dropout", grad_check(loss, {&x}, {&grad})};
}

CheckItem check_bce(Rng& rng) {
  double worst = 0.0;
  for (int y : {0, 1}) {
    Tensor p({1}, {rng.uniform(0.05, 0.95)});
    auto loss = [&]() { return bce_loss(p[0], y); };
    Tensor grad({1}, {bce_loss_grad(p[0], y)});
    worst = std::max(worst, grad_check(loss, {&p}, {&grad}));
  }
  return {"bce_loss", worst};
}

// True when the batch sits safely away from every non-smooth point (relu
// kinks, pooling argmax ties, the BCE clamp), so central differences see a
// locally linear loss.
bool model_point_is_smooth(const GcnParams& params, const ForwardCache& cache) {
  const GatePair acts = gate_activations_for(params.gate);
  const double margin = 1e-3;
  for (const ExampleCache& ex : cache.examples) {
    const double p = ex.prob;
    if (p < 0.02 || p > 0.98) return false;
    for (std::size_t b = 0; b < params.branches.size(); ++b) {
      const BranchCache& bc = ex.branches[b];
      const std::size_t n = bc.pre_main.dim(0);
      const std::size_t f = bc.pre_main.dim(1);
      Tensor g({n, f});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < f; ++k) {
          const double pm = bc.pre_main.at(i, k);
          if (acts.main == Activation::Relu && std::fabs(pm) < margin) return false;
          double value = apply_activation(acts.main, pm);
          if (params.branches[b].gated) {
            const double pg = bc.pre_gate.at(i, k);
            if (acts.gate == Activation::Relu && std::fabs(pg) < margin) return false;
            value *= apply_activation(acts.gate, pg);
          }
          g.at(i, k) = value;
        }
      }
      for (std::size_t k = 0; k < f; ++k) {
        double best = g.at(0, k), second = -1e300;
        for (std::size_t i = 1; i < n; ++i) {
          const double v = g.at(i, k);
          if (v > best) {
            second = best;
            best = v;
          } else if (v > second) {
            second = v;
          }
        }
        if (n > 1 && best - second < margin) return false;
      }
    }
  }
  return true;
}

// Tiny end-to-end model: mean BCE of a 3-example batch against every
// trainable tensor, embedding included when trainable. Instances whose loss
// is not smooth at the sampled point are re-rolled deterministically.
CheckItem check_model(Rng& rng, GateKind gate, bool train_embedding, bool with_padding) {
  ModelDims dims;
  dims.filters = 2;
  dims.embed_dim = 3;
  dims.max_len = 6;
  dims.kernel_sizes = {2, 3};

  Vocabulary vocab;
  const std::size_t n_words = 5;
  for (std::size_t i = 1; i <= n_words; ++i) {
    vocab.insert("w" + std::to_string(i), static_cast<int>(i));
  }

  GcnParams params;
  std::vector<EncodedExample> batch(3);
  std::vector<int> labels(3);
  ForwardResult out;
  Rng fwd_rng(123);
  for (int attempt = 0; attempt < 32; ++attempt) {
    Rng roll = rng.fork(100 + attempt);
    EmbeddingMatrix embedding{random_tensor(roll, {vocab.table_size(), dims.embed_dim}),
                              train_embedding};
    for (std::size_t c = 0; c < dims.embed_dim; ++c) embedding.matrix.at(0, c) = 0.0;

    Rng init_rng = roll.fork(7);
    params = init_model(gate, dims, vocab, std::move(embedding), init_rng);

    for (std::size_t e = 0; e < batch.size(); ++e) {
      batch[e].indices.assign(dims.max_len, 0);
      // padded variant leaves the tail at index 0; that path must not produce
      // embedding gradients, so it runs with a static table
      const std::size_t fill = with_padding ? 4 : dims.max_len;
      for (std::size_t i = 0; i < fill; ++i) {
        batch[e].indices[i] = 1 + static_cast<int>(roll.below(n_words));
      }
      labels[e] = static_cast<int>(roll.below(2));
      batch[e].label = labels[e];
    }

    Rng r = fwd_rng;
    out = forward(params, batch, true, r, 1.0, 1.0);
    if (model_point_is_smooth(params, out.cache)) break;
  }

  auto loss = [&]() {
    Rng r = fwd_rng;  // keep probs are 1, rng is never consulted
    ForwardResult eval = forward(params, batch, true, r, 1.0, 1.0);
    double sum = 0.0;
    for (std::size_t e = 0; e < labels.size(); ++e) sum += bce_loss(eval.probs[e], labels[e]);
    return sum / static_cast<double>(labels.size());
  };

  GcnGrads grads = backward(params, out.cache, labels);

  std::vector<Tensor*> tensors;
  std::vector<const Tensor*> analytic;
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    tensors.push_back(&params.branches[b].kernels_main);
    analytic.push_back(&grads.branches[b].kernels_main);
    tensors.push_back(&params.branches[b].bias_main);
    analytic.push_back(&grads.branches[b].bias_main);
    if (params.branches[b].gated) {
      tensors.push_back(&params.branches[b].kernels_gate);
      analytic.push_back(&grads.branches[b].kernels_gate);
      tensors.push_back(&params.branches[b].bias_gate);
      analytic.push_back(&grads.branches[b].bias_gate);
    }
  }
  tensors.push_back(&params.dense_w);
  analytic.push_back(&grads.dense_w);
  tensors.push_back(&params.dense_b);
  analytic.push_back(&grads.dense_b);

  Tensor embed_grad;
  if (train_embedding) {
    embed_grad = Tensor(params.embedding.matrix.shape());
    for (const auto& [idx, row] : grads.embedding_rows) {
      for (std::size_t c = 0; c < dims.embed_dim; ++c) {
        embed_grad.at(static_cast<std::size_t>(idx), c) = row[c];
      }
    }
    tensors.push_back(&params.embedding.matrix);
    analytic.push_back(&embed_grad);
  }

  const double err = grad_check(loss, tensors, analytic);
  std::string name = std::string("model_") + to_string(gate);
  if (train_embedding) name += "_embed";
  if (with_padding) name += "_padded";
  return {name, err};
}

}  // namespace

std::vector<CheckItem> run_grad_check_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckItem> items;
  items.push_back(check_conv(rng));
  items.push_back(check_dense(rng));
  items.push_back(check_activation(rng, Activation::Identity, "identity"));
  items.push_back(check_activation(rng, Activation::Sigmoid, "sigmoid"));
  items.push_back(check_activation(rng, Activation::Tanh, "tanh"));
  items.push_back(check_activation(rng, Activation::Relu, "relu"));
  items.push_back(check_mul(rng));
  items.push_back(check_maxpool(rng));
  items.push_back(check_dropout(rng));
  items.push_back(check_bce(rng));
  for (GateKind gate : {GateKind::Glu, GateKind::Gtu, GateKind::Gtru, GateKind::None}) {
    items.push_back(check_model(rng, gate, true, false));
    items.push_back(check_model(rng, gate, false, true));
  }
  return items;
}

double suite_max_error(const std::vector<CheckItem>& items) {
  double worst = 0.0;
  for (const CheckItem& item : items) worst = std::max(worst, item.max_rel_error);
  return worst;
}

}  // namespace gcn
