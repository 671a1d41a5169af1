#include "gcn/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gcn {

ModelDims ExperimentConfig::model_dims() const {
  ModelDims dims;
  dims.filters = filters;
  dims.embed_dim = embed_dim;
  dims.max_len = max_len;
  dims.kernel_sizes = kernel_sizes;
  return dims;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig tc;
  tc.batch_size = batch_size;
  tc.epochs = epochs;
  tc.patience = patience;
  tc.rho = rho;
  tc.eps = eps;
  tc.keep_embed = 1.0 - dropout_embed;
  tc.keep_dense = 1.0 - dropout_dense;
  tc.seed = seed;
  return tc;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  gate_from_string(gate);  // throws on unknown gate
  if (kernel_sizes.empty()) fail("kernel_sizes must not be empty");
  for (std::size_t h : kernel_sizes) {
    if (h == 0) fail("kernel sizes must be positive");
  }
  if (filters == 0) fail("filters must be positive");
  if (embed_dim == 0) fail("embed_dim must be positive");
  if (max_len == 0) fail("max_len must be positive");
  if (vocab_size == 0) fail("vocab_size must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (epochs == 0) fail("epochs must be positive");
  if (dropout_embed < 0.0 || dropout_embed >= 1.0) fail("dropout_embed must be in [0, 1)");
  if (dropout_dense < 0.0 || dropout_dense >= 1.0) fail("dropout_dense must be in [0, 1)");
  if (rho <= 0.0 || rho >= 1.0) fail("rho must be in (0, 1)");
  if (eps <= 0.0) fail("eps must be positive");
  if (n_seeds == 0) fail("n_seeds must be positive");
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "gate",          "kernel_sizes", "filters",   "embed_dim",  "max_len",
      "vocab_size",    "dropout_embed", "dropout_dense", "batch_size", "epochs",
      "patience",      "rho",          "eps",       "seed",       "n_seeds",
      "workers",       "train_embeddings", "data_path", "embeddings_path", "out_dir"};
  return keys;
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(path + ": config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known_keys().count(it.key())) {
      throw ParseError(path + ": unknown config key '" + it.key() + "'");
    }
  }
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("gate", base.gate);
  get("kernel_sizes", base.kernel_sizes);
  get("filters", base.filters);
  get("embed_dim", base.embed_dim);
  get("max_len", base.max_len);
  get("vocab_size", base.vocab_size);
  get("dropout_embed", base.dropout_embed);
  get("dropout_dense", base.dropout_dense);
  get("batch_size", base.batch_size);
  get("epochs", base.epochs);
  get("patience", base.patience);
  get("rho", base.rho);
  get("eps", base.eps);
  get("seed", base.seed);
  get("n_seeds", base.n_seeds);
  get("workers", base.workers);
  get("train_embeddings", base.train_embeddings);
  get("data_path", base.data_path);
  get("embeddings_path", base.embeddings_path);
  get("out_dir", base.out_dir);
  return base;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto n = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001B3ULL;
    }
    if (n < sizeof(buf)) break;
  }
  char out[19];
  std::snprintf(out, sizeof(out), "0x%016llx", static_cast<unsigned long long>(hash));
  return out;
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["gate"] = c.gate;
  j["kernel_sizes"] = c.kernel_sizes;
  j["filters"] = c.filters;
  j["embed_dim"] = c.embed_dim;
  j["max_len"] = c.max_len;
  j["vocab_size"] = c.vocab_size;
  j["dropout_embed"] = c.dropout_embed;
  j["dropout_dense"] = c.dropout_dense;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["rho"] = c.rho;
  j["eps"] = c.eps;
  j["seed"] = c.seed;
  j["n_seeds"] = c.n_seeds;
  j["workers"] = c.workers;
  j["train_embeddings"] = c.train_embeddings;
  j["data_path"] = c.data_path;
  j["embeddings_path"] = c.embeddings_path;
  j["out_dir"] = c.out_dir;
  return j.dump(2);
}

void write_manifest(const ExperimentConfig& config, const std::string& command,
                    const std::vector<std::string>& input_paths, const std::string& path) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = nlohmann::json::parse(config_to_json(config));
  nlohmann::json inputs = nlohmann::json::object();
  for (const std::string& p : input_paths) inputs[p] = hash_file(p);
  j["inputs"] = inputs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace gcn
