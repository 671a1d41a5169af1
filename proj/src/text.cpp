#include "gcn/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gcn/ops.hpp"
#include "json.hpp"

namespace gcn {

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

std::string strip_edges(const std::string& token) {
  std::size_t lo = 0;
  std::size_t hi = token.size();
  while (lo < hi && !is_word_byte(static_cast<unsigned char>(token[lo]))) ++lo;
  while (hi > lo && !is_word_byte(static_cast<unsigned char>(token[hi - 1]))) --hi;
  return token.substr(lo, hi - lo);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::vector<std::string> tokens;
  std::istringstream stream(lower);
  std::string raw;
  while (stream >> raw) {
    std::string token = strip_edges(raw);
    if (!token.empty()) tokens.push_back(std::move(token));
  }
  return tokens;
}

int Vocabulary::lookup(const std::string& word) const {
  auto it = word_to_index_.find(word);
  return it == word_to_index_.end() ? 0 : it->second;
}

void Vocabulary::insert(const std::string& word, int index) {
  if (index <= 0) throw std::invalid_argument("Vocabulary: index 0 is reserved");
  word_to_index_[word] = index;
}

std::uint64_t Vocabulary::content_hash() const {
  std::vector<const std::string*> by_index(word_to_index_.size() + 1, nullptr);
  for (const auto& [word, index] : word_to_index_) {
    if (index <= 0 || static_cast<std::size_t>(index) >= by_index.size() || by_index[index]) {
      throw std::logic_error("Vocabulary: indices must be dense in 1..size");
    }
    by_index[index] = &word;
  }
  std::uint64_t hash = 0xCBF29CE484222325ULL;  // FNV-1a 64
  auto feed = [&hash](const std::string& s) {
    for (unsigned char c : s) {
      hash ^= c;
      hash *= 0x100000001B3ULL;
    }
  };
  for (std::size_t i = 1; i < by_index.size(); ++i) {
    feed(*by_index[i]);
    feed("\t" + std::to_string(i) + "\n");
  }
  return hash;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [word, index] : word_to_index_) j[word] = index;
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  Vocabulary vocab;
  nlohmann::json j = nlohmann::json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it) {
    vocab.insert(it.key(), it.value().get<int>());
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
  out << to_json() << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs, std::size_t max_size) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : docs) {
    for (const auto& word : doc) ++counts[word];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  Vocabulary vocab;
  int index = 1;
  for (const auto& [word, count] : ranked) vocab.insert(word, index++);
  return vocab;
}

EncodedExample encode_pad(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          std::size_t max_len, int label) {
  EncodedExample enc;
  enc.label = label;
  enc.indices.assign(max_len, 0);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) enc.indices[i] = vocab.lookup(tokens[i]);
  return enc;
}

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                std::size_t dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings file: " + path);
  EmbeddingMatrix emb{Tensor({vocab.table_size(), dim}), false};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    const int row = vocab.lookup(word);
    if (row == 0) {
      // Still validate the float count so malformed files never pass silently.
      double v;
      std::size_t got = 0;
      while (fields >> v) ++got;
      if (got != dim) {
        throw ParseError("embeddings line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " floats, got " + std::to_string(got),
                         line_no);
      }
      continue;
    }
    for (std::size_t c = 0; c < dim; ++c) {
      double v;
      if (!(fields >> v)) {
        throw ParseError("embeddings line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " floats, got " + std::to_string(c),
                         line_no);
      }
      emb.matrix.at(static_cast<std::size_t>(row), c) = v;
    }
    double extra;
    if (fields >> extra) {
      throw ParseError("embeddings line " + std::to_string(line_no) + ": more than " +
                           std::to_string(dim) + " floats",
                       line_no);
    }
  }
  return emb;
}

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  EmbeddingMatrix emb{Tensor({vocab.table_size(), dim}), false};
  Tensor rows = glorot_uniform(rng, dim, dim, {vocab.table_size(), dim});
  for (std::size_t r = 1; r < vocab.table_size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) emb.matrix.at(r, c) = rows.at(r, c);
  }
  return emb;
}

namespace {

void load_lines_into(const std::string& path, const std::string& domain, DomainDataset& ds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::string line;
  std::size_t line_no = 0;
  bool warned = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!j.contains("text") || !j.contains("label")) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": missing text/label",
                       line_no);
    }
    if (!j["label"].is_number_integer() ||
        (j["label"].get<int>() != 0 && j["label"].get<int>() != 1)) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": label must be 0 or 1",
                       line_no);
    }
    if (j.contains("domain") && j["domain"].get<std::string>() != domain && !warned) {
      std::cerr << "warning: " << path << " line " << line_no << ": domain '"
                << j["domain"].get<std::string>() << "' does not match expected '" << domain
                << "'\n";
      warned = true;
    }
    ds.examples.push_back({tokenize(j["text"].get<std::string>()), j["label"].get<int>()});
  }
}

}  // namespace

DomainDataset load_dataset(const std::string& path, const std::string& domain) {
  DomainDataset ds;
  ds.domain = domain;
  load_lines_into(path, domain, ds);
  return ds;
}

DomainDataset load_dataset_presplit(const std::string& train_path, const std::string& val_path,
                                    const std::string& test_path, const std::string& domain) {
  DomainDataset ds;
  ds.domain = domain;
  load_lines_into(train_path, domain, ds);
  const std::size_t n_train = ds.examples.size();
  load_lines_into(val_path, domain, ds);
  const std::size_t n_val = ds.examples.size() - n_train;
  load_lines_into(test_path, domain, ds);
  const std::size_t n_test = ds.examples.size() - n_train - n_val;
  for (std::size_t i = 0; i < n_train; ++i) ds.train_idx.push_back(i);
  for (std::size_t i = 0; i < n_val; ++i) ds.val_idx.push_back(n_train + i);
  for (std::size_t i = 0; i < n_test; ++i) ds.test_idx.push_back(n_train + n_val + i);
  return ds;
}

void split_dataset(DomainDataset& ds, Rng& rng, double train_ratio, double val_ratio) {
  ds.train_idx.clear();
  ds.val_idx.clear();
  ds.test_idx.clear();
  std::vector<std::size_t> order(ds.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  // Per-class quotas keep the class balance of each split.
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t idx : order) {
      if (ds.examples[idx].label == cls) members.push_back(idx);
    }
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * n));
    const auto n_val = static_cast<std::size_t>(std::llround(val_ratio * n));
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < n_train) {
        ds.train_idx.push_back(members[i]);
      } else if (i < n_train + n_val) {
        ds.val_idx.push_back(members[i]);
      } else {
        ds.test_idx.push_back(members[i]);
      }
    }
  }
}

void save_dataset(const DomainDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open dataset file for writing: " + path);
  for (const Example& ex : ds.examples) {
    std::string text;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (i) text += ' ';
      text += ex.tokens[i];
    }
    nlohmann::json j;
    j["domain"] = ds.domain;
    j["label"] = ex.label;
    j["text"] = text;
    out << j.dump() << "\n";
  }
}

}  // namespace gcn
