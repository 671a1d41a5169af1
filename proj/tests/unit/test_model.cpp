#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gcn/check_suite.hpp"
#include "gcn/model.hpp"

using namespace gcn;
namespace fs = std::filesystem;

namespace {

Vocabulary small_vocab(std::size_t n_words) {
  Vocabulary vocab;
  for (std::size_t i = 1; i <= n_words; ++i) {
    vocab.insert("w" + std::to_string(i), static_cast<int>(i));
  }
  return vocab;
}

GcnParams make_model(GateKind gate, const ModelDims& dims, std::size_t n_words,
                     std::uint64_t seed, bool trainable = false) {
  const Vocabulary vocab = small_vocab(n_words);
  Rng embed_rng(seed + 1);
  EmbeddingMatrix embedding = random_embeddings(vocab, dims.embed_dim, embed_rng);
  embedding.trainable = trainable;
  Rng init_rng(seed);
  return init_model(gate, dims, vocab, std::move(embedding), init_rng);
}

std::vector<EncodedExample> random_batch(const ModelDims& dims, std::size_t n_words,
                                         std::size_t count, Rng& rng,
                                         std::size_t fill_to = 0) {
  std::vector<EncodedExample> batch(count);
  const std::size_t fill = fill_to == 0 ? dims.max_len : fill_to;
  for (auto& ex : batch) {
    ex.indices.assign(dims.max_len, 0);
    for (std::size_t i = 0; i < fill; ++i) {
      ex.indices[i] = 1 + static_cast<int>(rng.below(n_words));
    }
    ex.label = static_cast<int>(rng.below(2));
  }
  return batch;
}

ModelDims tiny_dims() {
  ModelDims dims;
  dims.filters = 3;
  dims.embed_dim = 4;
  dims.max_len = 7;
  dims.kernel_sizes = {2, 3};
  return dims;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gate variants map to the published activation pairs") {
  CHECK(gate_activations_for(GateKind::Glu).main == Activation::Identity);
  CHECK(gate_activations_for(GateKind::Glu).gate == Activation::Sigmoid);
  CHECK(gate_activations_for(GateKind::Gtu).main == Activation::Tanh);
  CHECK(gate_activations_for(GateKind::Gtu).gate == Activation::Sigmoid);
  CHECK(gate_activations_for(GateKind::Gtru).main == Activation::Tanh);
  CHECK(gate_activations_for(GateKind::Gtru).gate == Activation::Relu);
  CHECK(gate_activations_for(GateKind::None).main == Activation::Relu);
  CHECK(gate_from_string("gtru") == GateKind::Gtru);
  CHECK_THROWS_AS(gate_from_string("gru"), std::invalid_argument);
}

TEST_CASE("parameter counts match the closed form at published dims") {
  ModelDims dims;  // defaults: F=100, d=300, h={3,4,5}
  const GcnParams gated = make_model(GateKind::Glu, dims, 10, 1);
  CHECK(gated.param_count() == 720901);
  const GcnParams plain = make_model(GateKind::None, dims, 10, 1);
  CHECK(plain.param_count() == 360601);
}

TEST_CASE("parameter count formula holds for arbitrary dims") {
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    ModelDims dims;
    dims.filters = 1 + rng.below(8);
    dims.embed_dim = 1 + rng.below(12);
    dims.max_len = 6;
    dims.kernel_sizes = {1 + rng.below(4), 2 + rng.below(4)};
    const GcnParams params = make_model(GateKind::Gtu, dims, 5, trial);
    std::size_t expected = 0;
    for (std::size_t h : dims.kernel_sizes) {
      expected += 2 * (h * dims.embed_dim * dims.filters + dims.filters);
    }
    expected += dims.kernel_sizes.size() * dims.filters + 1;
    CHECK(params.param_count() == expected);
  }
}

TEST_CASE("same seed twice gives bitwise-identical parameters") {
  const ModelDims dims = tiny_dims();
  const GcnParams a = make_model(GateKind::Gtu, dims, 6, 7);
  const GcnParams b = make_model(GateKind::Gtu, dims, 6, 7);
  for (std::size_t i = 0; i < a.branches.size(); ++i) {
    CHECK(tensors_equal(a.branches[i].kernels_main, b.branches[i].kernels_main));
    CHECK(tensors_equal(a.branches[i].kernels_gate, b.branches[i].kernels_gate));
  }
  CHECK(tensors_equal(a.dense_w, b.dense_w));
  CHECK(tensors_equal(a.embedding.matrix, b.embedding.matrix));
}

TEST_CASE("all-zero parameters give probability one half everywhere") {
  const ModelDims dims = tiny_dims();
  GcnParams params = make_model(GateKind::Glu, dims, 6, 3);
  for (ConvBranchParams& br : params.branches) {
    br.kernels_main.fill(0.0);
    br.bias_main.fill(0.0);
    br.kernels_gate.fill(0.0);
    br.bias_gate.fill(0.0);
  }
  params.dense_w.fill(0.0);
  params.dense_b.fill(0.0);
  Rng rng(8);
  const auto batch = random_batch(dims, 6, 4, rng);
  const std::vector<double> probs = predict_probs(params, batch);
  for (double p : probs) CHECK(p == 0.5);
  // boundary rule: 0.5 goes to the positive class
  for (int label : predict(params, batch)) CHECK(label == 1);
}

TEST_CASE("probabilities stay inside (0,1)") {
  const ModelDims dims = tiny_dims();
  const GcnParams params = make_model(GateKind::Gtru, dims, 6, 4);
  Rng rng(9);
  const auto batch = random_batch(dims, 6, 8, rng);
  for (double p : predict_probs(params, batch)) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("forward caches expose gate bounds") {
  const ModelDims dims = tiny_dims();
  Rng rng(10);
  const auto batch = random_batch(dims, 6, 3, rng);

  // GTU: |G| = |tanh * sigmoid| < 1
  {
    const GcnParams params = make_model(GateKind::Gtu, dims, 6, 5);
    Rng fwd(1);
    const ForwardResult out = forward(params, batch, false, fwd);
    for (const ExampleCache& ex : out.cache.examples) {
      for (const BranchCache& bc : ex.branches) {
        for (std::size_t i = 0; i < bc.pre_main.numel(); ++i) {
          const double g = std::tanh(bc.pre_main[i]) * sigmoid(bc.pre_gate[i]);
          CHECK(std::fabs(g) < 1.0);
        }
      }
    }
  }

  // GTRU: G == 0 wherever the relu gate pre-activation is <= 0
  {
    const GcnParams params = make_model(GateKind::Gtru, dims, 6, 6);
    Rng fwd(1);
    const ForwardResult out = forward(params, batch, false, fwd);
    for (const ExampleCache& ex : out.cache.examples) {
      for (const BranchCache& bc : ex.branches) {
        for (std::size_t i = 0; i < bc.pre_main.numel(); ++i) {
          if (bc.pre_gate[i] <= 0.0) {
            const double g = std::tanh(bc.pre_main[i]) *
                             apply_activation(Activation::Relu, bc.pre_gate[i]);
            CHECK(g == 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("GTU zero pre-activations give a zero gate output") {
  CHECK(std::tanh(0.0) * sigmoid(0.0) == 0.0);
}

TEST_CASE("predict equals the sign rule on the logit") {
  const ModelDims dims = tiny_dims();
  const GcnParams params = make_model(GateKind::Glu, dims, 6, 11);
  Rng rng(12);
  const auto batch = random_batch(dims, 6, 10, rng);
  const std::vector<int> labels = predict(params, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(labels[i] == (example_logit(params, batch[i]) >= 0.0 ? 1 : 0));
  }
}

TEST_CASE("permuting filters together with dense rows leaves outputs unchanged") {
  const ModelDims dims = tiny_dims();
  GcnParams params = make_model(GateKind::Glu, dims, 6, 13);
  Rng rng(14);
  const auto batch = random_batch(dims, 6, 5, rng);
  const std::vector<double> before = predict_probs(params, batch);

  const std::size_t f = dims.filters;
  std::vector<std::size_t> perm(f);
  for (std::size_t k = 0; k < f; ++k) perm[k] = (k + 1) % f;  // rotate filters

  GcnParams shuffled = params;
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    const ConvBranchParams& src = params.branches[b];
    ConvBranchParams& dst = shuffled.branches[b];
    const std::size_t h = src.h;
    for (std::size_t k = 0; k < f; ++k) {
      for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t c = 0; c < dims.embed_dim; ++c) {
          dst.kernels_main.at(perm[k], j, c) = src.kernels_main.at(k, j, c);
          dst.kernels_gate.at(perm[k], j, c) = src.kernels_gate.at(k, j, c);
        }
      }
      dst.bias_main[perm[k]] = src.bias_main[k];
      dst.bias_gate[perm[k]] = src.bias_gate[k];
      shuffled.dense_w.at(b * f + perm[k], 0) = params.dense_w.at(b * f + k, 0);
    }
  }
  const std::vector<double> after = predict_probs(shuffled, batch);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward is zero when predictions are exact") {
  const ModelDims dims = tiny_dims();
  GcnParams params = make_model(GateKind::Glu, dims, 6, 15);
  for (ConvBranchParams& br : params.branches) {
    br.kernels_main.fill(0.0);
    br.bias_main.fill(0.0);
    br.kernels_gate.fill(0.0);
    br.bias_gate.fill(0.0);
  }
  params.dense_w.fill(0.0);
  params.dense_b[0] = 40.0;  // sigmoid(40) rounds to exactly 1.0
  Rng rng(16);
  const auto batch = random_batch(dims, 6, 3, rng);
  std::vector<int> labels(batch.size(), 1);

  Rng fwd(1);
  const ForwardResult out = forward(params, batch, true, fwd, 1.0, 1.0);
  for (double p : out.probs) CHECK(p == 1.0);
  const GcnGrads grads = backward(params, out.cache, labels);
  for (const BranchGrads& bg : grads.branches) {
    for (std::size_t i = 0; i < bg.kernels_main.numel(); ++i) CHECK(bg.kernels_main[i] == 0.0);
    for (std::size_t i = 0; i < bg.kernels_gate.numel(); ++i) CHECK(bg.kernels_gate[i] == 0.0);
  }
  for (std::size_t i = 0; i < grads.dense_w.numel(); ++i) CHECK(grads.dense_w[i] == 0.0);
  CHECK(grads.dense_b[0] == 0.0);
}

TEST_CASE("inactive relu gate blocks gradients into the gate branch") {
  const ModelDims dims = tiny_dims();
  GcnParams params = make_model(GateKind::Gtru, dims, 6, 17);
  for (ConvBranchParams& br : params.branches) {
    br.bias_gate.fill(-100.0);  // relu gate shut everywhere
  }
  Rng rng(18);
  const auto batch = random_batch(dims, 6, 4, rng);
  std::vector<int> labels;
  for (const auto& ex : batch) labels.push_back(ex.label);

  Rng fwd(1);
  const ForwardResult out = forward(params, batch, true, fwd, 1.0, 1.0);
  const GcnGrads grads = backward(params, out.cache, labels);
  for (const BranchGrads& bg : grads.branches) {
    for (std::size_t i = 0; i < bg.kernels_gate.numel(); ++i) CHECK(bg.kernels_gate[i] == 0.0);
    for (std::size_t i = 0; i < bg.bias_gate.numel(); ++i) CHECK(bg.bias_gate[i] == 0.0);
  }
}

TEST_CASE("backward validates its inputs") {
  const ModelDims dims = tiny_dims();
  const GcnParams params = make_model(GateKind::Glu, dims, 6, 19);
  Rng rng(20);
  const auto batch = random_batch(dims, 6, 3, rng);
  std::vector<int> labels(batch.size(), 1);

  Rng fwd(1);
  const ForwardResult inference = forward(params, batch, false, fwd);
  CHECK_THROWS_AS(backward(params, inference.cache, labels), std::invalid_argument);

  Rng fwd2(1);
  const ForwardResult training = forward(params, batch, true, fwd2);
  std::vector<int> wrong_labels(batch.size() + 1, 1);
  CHECK_THROWS_AS(backward(params, training.cache, wrong_labels), std::invalid_argument);
}

TEST_CASE("forward rejects wrong example lengths") {
  const ModelDims dims = tiny_dims();
  const GcnParams params = make_model(GateKind::Glu, dims, 6, 21);
  EncodedExample bad;
  bad.indices.assign(dims.max_len + 1, 1);
  std::vector<EncodedExample> batch{bad};
  Rng fwd(1);
  CHECK_THROWS_AS(forward(params, batch, false, fwd), ShapeError);
}

TEST_CASE("full-model gradient check passes for every gate kind") {
  const std::vector<CheckItem> items = run_grad_check_suite(2026);
  CHECK(suite_max_error(items) <= 1e-5);
}

TEST_CASE("gate activation maps have the right shape and range") {
  const ModelDims dims = tiny_dims();
  Rng rng(22);
  const auto batch = random_batch(dims, 6, 1, rng, 4);  // 4 real tokens, rest pad

  // GLU: sigmoid gate in (0,1)
  const GcnParams glu = make_model(GateKind::Glu, dims, 6, 23);
  const auto maps = gate_activations(glu, batch[0]);
  REQUIRE(maps.size() == dims.kernel_sizes.size());
  for (const GateActivationMap& map : maps) {
    CHECK(map.activations.dim(0) == dims.max_len);
    CHECK(map.activations.dim(1) == dims.filters);
    for (std::size_t i = 0; i < map.activations.numel(); ++i) {
      CHECK(map.activations[i] > 0.0);
      CHECK(map.activations[i] < 1.0);
    }
    // mean column equals the row mean of the filter columns
    for (std::size_t i = 0; i < dims.max_len; ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < dims.filters; ++k) sum += map.activations.at(i, k);
      CHECK(map.mean[i] ==
            doctest::Approx(sum / static_cast<double>(dims.filters)).epsilon(1e-12));
    }
  }

  // GTRU: relu gate >= 0
  const GcnParams gtru = make_model(GateKind::Gtru, dims, 6, 24);
  for (const GateActivationMap& map : gate_activations(gtru, batch[0])) {
    for (std::size_t i = 0; i < map.activations.numel(); ++i) {
      CHECK(map.activations[i] >= 0.0);
    }
  }

  const GcnParams none = make_model(GateKind::None, dims, 6, 25);
  CHECK_THROWS_AS(gate_activations(none, batch[0]), UnsupportedOperation);
}

TEST_CASE("checkpoints round-trip bitwise and carry their metadata") {
  const fs::path dir =
      fs::temp_directory_path() / ("gcn_model_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string path = (dir / "model.gcnc").string();

  const ModelDims dims = tiny_dims();
  const GcnParams params = make_model(GateKind::Gtu, dims, 6, 26);
  save_checkpoint(params, path);
  const GcnParams back = load_checkpoint(path);

  CHECK(back.gate == params.gate);
  CHECK(back.dims.kernel_sizes == params.dims.kernel_sizes);
  CHECK(back.vocab_hash == params.vocab_hash);
  CHECK(back.seed == params.seed);
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    CHECK(tensors_equal(back.branches[b].kernels_main, params.branches[b].kernels_main));
    CHECK(tensors_equal(back.branches[b].bias_main, params.branches[b].bias_main));
    CHECK(tensors_equal(back.branches[b].kernels_gate, params.branches[b].kernels_gate));
    CHECK(tensors_equal(back.branches[b].bias_gate, params.branches[b].bias_gate));
  }
  CHECK(tensors_equal(back.dense_w, params.dense_w));
  CHECK(tensors_equal(back.embedding.matrix, params.embedding.matrix));

  // identical outputs on a fixed batch
  Rng rng(27);
  const auto batch = random_batch(dims, 6, 4, rng);
  const auto before = predict_probs(params, batch);
  const auto after = predict_probs(back, batch);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

  // payload size arithmetic: header + doubles
  std::ifstream in(path, std::ios::binary);
  in.seekg(5);
  unsigned char len_bytes[4];
  in.read(reinterpret_cast<char*>(len_bytes), 4);
  std::uint32_t header_len = 0;
  for (int i = 0; i < 4; ++i) header_len |= static_cast<std::uint32_t>(len_bytes[i]) << (8 * i);
  const std::size_t expected_size =
      4 + 1 + 4 + header_len +
      8 * (params.param_count() + params.embedding.matrix.numel());
  CHECK(fs::file_size(path) == expected_size);

  fs::remove_all(dir);
}

TEST_CASE("checkpoint loader distinguishes its failure modes") {
  const fs::path dir =
      fs::temp_directory_path() / ("gcn_ckpt_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string path = (dir / "model.gcnc").string();
  const GcnParams params = make_model(GateKind::Glu, tiny_dims(), 6, 28);
  save_checkpoint(params, path);

  auto corrupt = [&](std::size_t offset, char value, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes[offset] = value;
    const std::string out_path = (dir / name).string();
    std::ofstream out(out_path, std::ios::binary);
    out << bytes;
    return out_path;
  };

  try {
    load_checkpoint(corrupt(0, 'X', "magic.gcnc"));
    FAIL("expected BadMagic");
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::BadMagic);
  }

  try {
    load_checkpoint(corrupt(4, 9, "version.gcnc"));
    FAIL("expected BadVersion");
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::BadVersion);
  }

  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string trunc_path = (dir / "trunc.gcnc").string();
    std::ofstream out(trunc_path, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
    out.close();
    try {
      load_checkpoint(trunc_path);
      FAIL("expected Truncated");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::Truncated);
    }
  }

  fs::remove_all(dir);
}
