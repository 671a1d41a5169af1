#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcn/model.hpp"
#include "gcn/train.hpp"

namespace gcn {

// Every hyperparameter of the training recipe plus seed, gate variant and
// paths. Defaults are the published settings; overrides are echoed in the
// run manifest.
struct ExperimentConfig {
  std::string gate = "glu";  // glu | gtu | gtru | none
  std::vector<std::size_t> kernel_sizes{3, 4, 5};
  std::size_t filters = 100;
  std::size_t embed_dim = 300;
  std::size_t max_len = 100;
  std::size_t vocab_size = 20000;
  double dropout_embed = 0.5;
  double dropout_dense = 0.2;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::size_t patience = 10;
  double rho = 0.95;
  double eps = 1e-6;
  std::uint64_t seed = 1;
  std::size_t n_seeds = 5;  // evaluation-harness runs per pair; mean reported
  std::size_t workers = 0;  // 0 = hardware concurrency
  bool train_embeddings = false;
  std::string data_path;
  std::string embeddings_path;
  std::string out_dir;

  ModelDims model_dims() const;
  TrainConfig train_config() const;
  void validate() const;  // throws std::invalid_argument on bad values
};

// Applies config-file values (JSON object, same keys as the flags) on top of
// the defaults. Unknown keys are an error. CLI flags are applied on top by
// the caller, so precedence is flag > file > default.
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

// FNV-1a 64 over the file bytes, "0x"-prefixed hex; used to fingerprint
// inputs in run manifests.
std::string hash_file(const std::string& path);

// JSON manifest capturing the exact config, seed and input hashes needed to
// replay a run.
void write_manifest(const ExperimentConfig& config, const std::string& command,
                    const std::vector<std::string>& input_paths, const std::string& path);

std::string config_to_json(const ExperimentConfig& config);

}  // namespace gcn
