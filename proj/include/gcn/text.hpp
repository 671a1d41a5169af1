#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcn/rng.hpp"
#include "gcn/tensor.hpp"

namespace gcn {

// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation
// from each token, drop empties. Bytes >= 0x80 (multi-byte UTF-8) count as
// word characters, so interior unicode survives untouched.
std::vector<std::string> tokenize(const std::string& text);

// Word -> index map. Index 0 is reserved for pad/unknown and never appears in
// the map; real words occupy the dense range 1..size().
class Vocabulary {
 public:
  Vocabulary() = default;

  int lookup(const std::string& word) const;  // 0 when absent
  std::size_t word_count() const { return word_to_index_.size(); }
  // Row count of the embedding matrix: words + the reserved row 0.
  std::size_t table_size() const { return word_to_index_.size() + 1; }

  const std::unordered_map<std::string, int>& map() const { return word_to_index_; }
  void insert(const std::string& word, int index);

  // FNV-1a over "word\tindex\n" in index order; ties checkpoints to the
  // vocabulary they were trained with.
  std::uint64_t content_hash() const;

  std::string to_json() const;  // {"word": index, ...}
  static Vocabulary from_json(const std::string& text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int> word_to_index_;
};

// Top max_size words by frequency over the given documents, ties broken
// lexicographically; indices assigned in (frequency desc, word asc) order
// starting at 1.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs, std::size_t max_size);

struct EncodedExample {
  std::vector<int> indices;  // length max_len; 0 = pad/unknown
  int label = 0;
};

// Per-token lookup, truncate to the first max_len tokens, zero-pad the rest.
EncodedExample encode_pad(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          std::size_t max_len, int label = 0);

struct EmbeddingMatrix {
  Tensor matrix;           // [table_size x dim]; row 0 is always zero
  bool trainable = false;
  std::size_t dim() const { return matrix.dim(1); }
};

// GloVe text format: one word per line followed by `dim` floats. Rows for
// words missing from the file stay zero.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                std::size_t dim);

// Stand-in for pretrained vectors when none are supplied (synthetic runs):
// Glorot-uniform rows with fan_in = fan_out = dim, row 0 kept zero.
EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, Rng& rng);

struct Example {
  std::vector<std::string> tokens;
  int label = 0;
};

enum class Split { Train, Val, Test };

struct DomainDataset {
  std::string domain;
  std::vector<Example> examples;
  std::vector<std::size_t> train_idx, val_idx, test_idx;

  const std::vector<std::size_t>& split(Split s) const {
    switch (s) {
      case Split::Train: return train_idx;
      case Split::Val: return val_idx;
      default: return test_idx;
    }
  }
};

// JSON-lines loader; each line {"text": str, "label": 0|1, "domain": str}.
// A line whose domain differs from `domain` triggers a warning on stderr,
// a label outside {0,1} a ParseError with the line number. Splits are left
// empty; call split_dataset or use load_dataset_presplit.
DomainDataset load_dataset(const std::string& path, const std::string& domain);

// Three already-split files; examples are concatenated and the split index
// lists point at the respective ranges.
DomainDataset load_dataset_presplit(const std::string& train_path, const std::string& val_path,
                                    const std::string& test_path, const std::string& domain);

// Stratified 64/16/20 split: shuffle with the experiment seed, then fill
// per-class quotas (round(0.64 n_c) / round(0.16 n_c) / remainder).
void split_dataset(DomainDataset& ds, Rng& rng, double train_ratio = 0.64,
                   double val_ratio = 0.16);

// One JSON object per line, keys domain/label/text; byte-deterministic.
void save_dataset(const DomainDataset& ds, const std::string& path);

}  // namespace gcn
