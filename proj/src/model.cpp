#include "gcn/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gcn {

const char* to_string(GateKind gate) {
  switch (gate) {
    case GateKind::Glu: return "glu";
    case GateKind::Gtu: return "gtu";
    case GateKind::Gtru: return "gtru";
    case GateKind::None: return "none";
  }
  return "glu";
}

GateKind gate_from_string(const std::string& name) {
  if (name == "glu") return GateKind::Glu;
  if (name == "gtu") return GateKind::Gtu;
  if (name == "gtru") return GateKind::Gtru;
  if (name == "none") return GateKind::None;
  throw std::invalid_argument("unknown gate kind: " + name);
}

GatePair gate_activations_for(GateKind gate) {
  switch (gate) {
    case GateKind::Glu: return {Activation::Identity, Activation::Sigmoid};
    case GateKind::Gtu: return {Activation::Tanh, Activation::Sigmoid};
    case GateKind::Gtru: return {Activation::Tanh, Activation::Relu};
    case GateKind::None: return {Activation::Relu, Activation::Relu};
  }
  return {Activation::Identity, Activation::Sigmoid};
}

std::size_t GcnParams::param_count() const {
  std::size_t count = 0;
  for (const ConvBranchParams& br : branches) {
    const std::size_t one = br.h * dims.embed_dim * dims.filters + dims.filters;
    count += br.gated ? 2 * one : one;
  }
  count += concat_len() * 1 + 1;  // dense W + bias
  return count;
}

GcnParams init_model(GateKind gate, const ModelDims& dims, const Vocabulary& vocab,
                     EmbeddingMatrix embedding, Rng& rng) {
  require_shape(embedding.matrix.rank() == 2 && embedding.matrix.dim(0) == vocab.table_size() &&
                    embedding.matrix.dim(1) == dims.embed_dim,
                "init_model: embedding matrix does not match vocab/dims");
  GcnParams params;
  params.gate = gate;
  params.dims = dims;
  params.embedding = std::move(embedding);
  params.vocab_hash = vocab.content_hash();
  params.seed = rng.seed();
  const bool gated = gate != GateKind::None;
  const std::size_t f = dims.filters;
  const std::size_t d = dims.embed_dim;
  for (std::size_t h : dims.kernel_sizes) {
    ConvBranchParams br;
    br.h = h;
    br.gated = gated;
    br.kernels_main = glorot_uniform(rng, h * d, f, {f, h, d});
    br.bias_main = Tensor({f});
    if (gated) {
      br.kernels_gate = glorot_uniform(rng, h * d, f, {f, h, d});
      br.bias_gate = Tensor({f});
    }
    params.branches.push_back(std::move(br));
  }
  const std::size_t m = params.concat_len();
  params.dense_w = glorot_uniform(rng, m, 1, {m, 1});
  params.dense_b = Tensor({1});
  return params;
}

namespace {

Tensor embed_rows(const GcnParams& params, const std::vector<int>& indices) {
  const std::size_t n = params.dims.max_len;
  const std::size_t d = params.dims.embed_dim;
  if (indices.size() != n) {
    throw ShapeError("forward: example length does not match model max_len");
  }
  Tensor p({n, d});
  const Tensor& table = params.embedding.matrix;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(indices[i]);
    if (row >= table.dim(0)) throw ShapeError("forward: token index outside embedding table");
    std::memcpy(&p.at(i, 0), &table.at(row, 0), d * sizeof(double));
  }
  return p;
}

// Feature map + pooling for one branch. Fills cache rows when given.
MaxPool branch_pool(const GcnParams& params, const ConvBranchParams& br, const Tensor& embedded,
                    BranchCache* cache) {
  const GatePair acts = gate_activations_for(params.gate);
  Tensor pre_main;
  Tensor g;
  if (br.gated) {
    Tensor pre_gate;
    conv1d_same_dual(embedded, br.kernels_main, br.bias_main, br.kernels_gate, br.bias_gate,
                     pre_main, pre_gate);
    g = elementwise_mul(activate(acts.main, pre_main), activate(acts.gate, pre_gate));
    if (cache) cache->pre_gate = std::move(pre_gate);
  } else {
    pre_main = conv1d_same(embedded, br.kernels_main, br.bias_main);
    g = activate(acts.main, pre_main);
  }
  MaxPool pool = maxpool_time(g);
  if (cache) {
    cache->pre_main = std::move(pre_main);
    cache->pool = pool;
  }
  return pool;
}

double dense_logit(const GcnParams& params, const Tensor& concat) {
  return dense(concat, params.dense_w, params.dense_b)[0];
}

}  // namespace

ForwardResult forward(const GcnParams& params, std::span<const EncodedExample> batch,
                      bool training, Rng& rng, double keep_embed, double keep_dense) {
  ForwardResult result;
  result.cache.training = training;
  result.cache.keep_embed = keep_embed;
  result.cache.keep_dense = keep_dense;
  result.probs.reserve(batch.size());
  result.cache.examples.reserve(batch.size());
  for (std::size_t e = 0; e < batch.size(); ++e) {
    Rng ex_rng = rng.fork(e);
    ExampleCache cache;
    cache.indices = batch[e].indices;
    Tensor p = embed_rows(params, batch[e].indices);
    Dropout embed_drop = dropout(p, keep_embed, ex_rng, training);
    cache.embedded = std::move(embed_drop.y);
    cache.embed_mask = std::move(embed_drop.mask);

    Tensor concat({params.concat_len()});
    std::size_t offset = 0;
    cache.branches.resize(params.branches.size());
    for (std::size_t b = 0; b < params.branches.size(); ++b) {
      MaxPool pool =
          branch_pool(params, params.branches[b], cache.embedded, &cache.branches[b]);
      for (std::size_t k = 0; k < params.dims.filters; ++k) concat[offset + k] = pool.values[k];
      offset += params.dims.filters;
    }
    Dropout dense_drop = dropout(concat, keep_dense, ex_rng, training);
    cache.concat_dropped = std::move(dense_drop.y);
    cache.dense_mask = std::move(dense_drop.mask);

    cache.prob = sigmoid(dense_logit(params, cache.concat_dropped));
    result.probs.push_back(cache.prob);
    result.cache.examples.push_back(std::move(cache));
  }
  return result;
}

double example_logit(const GcnParams& params, const EncodedExample& ex) {
  Tensor embedded = embed_rows(params, ex.indices);
  Tensor concat({params.concat_len()});
  std::size_t offset = 0;
  for (const ConvBranchParams& br : params.branches) {
    MaxPool pool = branch_pool(params, br, embedded, nullptr);
    for (std::size_t k = 0; k < params.dims.filters; ++k) concat[offset + k] = pool.values[k];
    offset += params.dims.filters;
  }
  return dense_logit(params, concat);
}

std::vector<double> predict_probs(const GcnParams& params,
                                  std::span<const EncodedExample> examples) {
  std::vector<double> probs;
  probs.reserve(examples.size());
  for (const EncodedExample& ex : examples) probs.push_back(sigmoid(example_logit(params, ex)));
  return probs;
}

std::vector<int> predict(const GcnParams& params, std::span<const EncodedExample> examples) {
  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const EncodedExample& ex : examples) {
    labels.push_back(example_logit(params, ex) >= 0.0 ? 1 : 0);
  }
  return labels;
}

GcnGrads backward(const GcnParams& params, const ForwardCache& cache,
                  const std::vector<int>& labels) {
  if (!cache.training) {
    throw std::invalid_argument("backward: cache must come from a training-mode forward");
  }
  if (cache.examples.size() != labels.size()) {
    throw std::invalid_argument("backward: cache/batch size mismatch");
  }
  const std::size_t f = params.dims.filters;
  const GatePair acts = gate_activations_for(params.gate);
  const bool train_embedding = params.embedding.trainable;

  GcnGrads grads;
  grads.branches.resize(params.branches.size());
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    const ConvBranchParams& br = params.branches[b];
    grads.branches[b].kernels_main = Tensor(br.kernels_main.shape());
    grads.branches[b].bias_main = Tensor(br.bias_main.shape());
    if (br.gated) {
      grads.branches[b].kernels_gate = Tensor(br.kernels_gate.shape());
      grads.branches[b].bias_gate = Tensor(br.bias_gate.shape());
    }
  }
  grads.dense_w = Tensor(params.dense_w.shape());
  grads.dense_b = Tensor(params.dense_b.shape());

  const double inv_batch = 1.0 / static_cast<double>(labels.size());
  std::vector<ConvPulse> main_pulses(f);
  std::vector<ConvPulse> gate_pulses(f);
  for (std::size_t e = 0; e < cache.examples.size(); ++e) {
    const ExampleCache& ex = cache.examples[e];
    const double p = ex.prob;
    const double gz = bce_loss_grad(p, labels[e]) * p * (1.0 - p) * inv_batch;

    // dense layer
    Tensor grad_x({params.concat_len()});
    grads.dense_b[0] += gz;
    for (std::size_t i = 0; i < params.concat_len(); ++i) {
      grads.dense_w.at(i, 0) += ex.concat_dropped[i] * gz;
      grad_x[i] = gz * params.dense_w.at(i, 0);
    }
    Tensor grad_concat = dropout_backward(ex.dense_mask, cache.keep_dense, grad_x);

    Tensor grad_embedded;
    Tensor* grad_embedded_ptr = nullptr;
    if (train_embedding) {
      grad_embedded = Tensor(ex.embedded.shape());
      grad_embedded_ptr = &grad_embedded;
    }
    for (std::size_t b = 0; b < params.branches.size(); ++b) {
      const ConvBranchParams& br = params.branches[b];
      const BranchCache& bc = ex.branches[b];
      const std::size_t offset = b * f;
      if (br.gated) {
        for (std::size_t k = 0; k < f; ++k) {
          const std::size_t row = bc.pool.argmax[k];
          const double u = grad_concat[offset + k];
          const double pm = bc.pre_main.at(row, k);
          const double pg = bc.pre_gate.at(row, k);
          const double c_val = apply_activation(acts.main, pm);
          const double s_val = apply_activation(acts.gate, pg);
          main_pulses[k] = {row, k, u * s_val * activation_derivative(acts.main, pm)};
          gate_pulses[k] = {row, k, u * c_val * activation_derivative(acts.gate, pg)};
        }
        conv1d_same_backward_pulses(ex.embedded, br.kernels_main, main_pulses, grad_embedded_ptr,
                                    grads.branches[b].kernels_main, grads.branches[b].bias_main);
        conv1d_same_backward_pulses(ex.embedded, br.kernels_gate, gate_pulses, grad_embedded_ptr,
                                    grads.branches[b].kernels_gate, grads.branches[b].bias_gate);
      } else {
        for (std::size_t k = 0; k < f; ++k) {
          const std::size_t row = bc.pool.argmax[k];
          const double u = grad_concat[offset + k];
          main_pulses[k] = {row, k, u * activation_derivative(acts.main, bc.pre_main.at(row, k))};
        }
        conv1d_same_backward_pulses(ex.embedded, br.kernels_main, main_pulses, grad_embedded_ptr,
                                    grads.branches[b].kernels_main, grads.branches[b].bias_main);
      }
    }
    if (train_embedding) {
      Tensor grad_p = dropout_backward(ex.embed_mask, cache.keep_embed, grad_embedded);
      const std::size_t d = params.dims.embed_dim;
      for (std::size_t i = 0; i < params.dims.max_len; ++i) {
        const int idx = ex.indices[i];
        if (idx == 0) continue;  // row 0 stays zero
        auto& row = grads.embedding_rows[idx];
        if (row.empty()) row.assign(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) row[c] += grad_p.at(i, c);
      }
    }
  }
  return grads;
}

std::vector<GateActivationMap> gate_activations(const GcnParams& params,
                                                const EncodedExample& ex) {
  if (params.gate == GateKind::None) {
    throw UnsupportedOperation("gate_activations: model has no gate branch");
  }
  const GatePair acts = gate_activations_for(params.gate);
  Tensor embedded = embed_rows(params, ex.indices);
  std::vector<GateActivationMap> maps;
  for (const ConvBranchParams& br : params.branches) {
    GateActivationMap map;
    map.h = br.h;
    map.activations = activate(acts.gate, conv1d_same(embedded, br.kernels_gate, br.bias_gate));
    map.mean.resize(params.dims.max_len);
    for (std::size_t i = 0; i < params.dims.max_len; ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < params.dims.filters; ++k) sum += map.activations.at(i, k);
      map.mean[i] = sum / static_cast<double>(params.dims.filters);
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

// --------------------------------------------------------------------------
// Checkpoint I/O
// --------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'G', 'C', 'N', 'C'};
constexpr unsigned char kVersion = 1;

void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_tensor(std::ostream& out, const Tensor& t) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(t[i]);
    unsigned char b[8];
    for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>((bits >> (8 * j)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint: unexpected end of file");
  }
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  read_exact(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void read_tensor(std::istream& in, Tensor& t) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    unsigned char b[8];
    read_exact(in, b, 8);
    std::uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
    t[i] = std::bit_cast<double>(bits);
  }
}

std::string to_hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

}  // namespace

void save_checkpoint(const GcnParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));

  nlohmann::json header;
  header["gate"] = to_string(params.gate);
  header["filters"] = params.dims.filters;
  header["embed_dim"] = params.dims.embed_dim;
  header["max_len"] = params.dims.max_len;
  header["kernel_sizes"] = params.dims.kernel_sizes;
  header["vocab_size"] = params.embedding.matrix.dim(0);
  header["vocab_hash"] = to_hex(params.vocab_hash);
  header["seed"] = to_hex(params.seed);
  header["embedding_trainable"] = params.embedding.trainable;
  const std::string header_text = header.dump();
  write_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  for (const ConvBranchParams& br : params.branches) {
    write_tensor(out, br.kernels_main);
    write_tensor(out, br.bias_main);
    if (br.gated) {
      write_tensor(out, br.kernels_gate);
      write_tensor(out, br.bias_gate);
    }
  }
  write_tensor(out, params.dense_w);
  write_tensor(out, params.dense_b);
  write_tensor(out, params.embedding.matrix);
  if (!out) throw IoError("checkpoint write failed: " + path);
}

GcnParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  read_exact(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic, "checkpoint: bad magic bytes");
  }
  char version = 0;
  read_exact(in, &version, 1);
  if (static_cast<unsigned char>(version) != kVersion) {
    throw CheckpointError(CheckpointError::Kind::BadVersion,
                          "checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t header_len = read_u32_le(in);
  std::string header_text(header_len, '\0');
  read_exact(in, header_text.data(), header_len);

  GcnParams params;
  std::size_t vocab_rows = 0;
  try {
    nlohmann::json header = nlohmann::json::parse(header_text);
    params.gate = gate_from_string(header.at("gate").get<std::string>());
    params.dims.filters = header.at("filters").get<std::size_t>();
    params.dims.embed_dim = header.at("embed_dim").get<std::size_t>();
    params.dims.max_len = header.at("max_len").get<std::size_t>();
    params.dims.kernel_sizes = header.at("kernel_sizes").get<std::vector<std::size_t>>();
    vocab_rows = header.at("vocab_size").get<std::size_t>();
    params.vocab_hash = from_hex(header.at("vocab_hash").get<std::string>());
    params.seed = from_hex(header.at("seed").get<std::string>());
    params.embedding.trainable = header.at("embedding_trainable").get<bool>();
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          std::string("checkpoint: bad header: ") + e.what());
  }

  const bool gated = params.gate != GateKind::None;
  const std::size_t f = params.dims.filters;
  const std::size_t d = params.dims.embed_dim;
  for (std::size_t h : params.dims.kernel_sizes) {
    ConvBranchParams br;
    br.h = h;
    br.gated = gated;
    br.kernels_main = Tensor({f, h, d});
    br.bias_main = Tensor({f});
    read_tensor(in, br.kernels_main);
    read_tensor(in, br.bias_main);
    if (gated) {
      br.kernels_gate = Tensor({f, h, d});
      br.bias_gate = Tensor({f});
      read_tensor(in, br.kernels_gate);
      read_tensor(in, br.bias_gate);
    }
    params.branches.push_back(std::move(br));
  }
  params.dense_w = Tensor({params.concat_len(), 1});
  params.dense_b = Tensor({1});
  read_tensor(in, params.dense_w);
  read_tensor(in, params.dense_b);
  params.embedding.matrix = Tensor({vocab_rows, d});
  read_tensor(in, params.embedding.matrix);
  return params;
}

}  // namespace gcn
