#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace gcn {

// Sparse document vector: (term index, value) pairs with strictly increasing
// indices.
struct SparseFeatureVector {
  std::vector<std::pair<int, double>> entries;
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// Term -> index over the training split; std::map keeps lexicographic index
// assignment deterministic. Terms below min_freq total occurrences are
// dropped.
using TermIndex = std::map<std::string, int>;

TermIndex bow_vocab(const std::vector<std::vector<std::string>>& train_docs,
                    std::size_t min_freq = 5);

// Raw in-vocabulary term counts.
SparseFeatureVector bow_features(const std::vector<std::string>& doc, const TermIndex& terms);

struct DocFreqs {
  std::vector<std::size_t> df;  // indexed by term index
  std::size_t n_docs = 0;
};

DocFreqs doc_frequencies(const std::vector<std::vector<std::string>>& train_docs,
                         const TermIndex& terms);

// tf * idf with idf = ln((1+n)/(1+df)) + 1, L2-normalized.
SparseFeatureVector tfidf_features(const std::vector<std::string>& doc, const TermIndex& terms,
                                   const DocFreqs& freqs);

enum class FeatureKind { Bow, Tfidf };

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  FeatureKind kind = FeatureKind::Bow;
};

struct LogRegOptions {
  double l2 = 1e-4;
  double step = 0.1;
  std::size_t epochs = 500;
};

// Full-batch gradient descent on mean BCE + l2*|w|^2/2 (bias unregularized),
// weights initialized to zero. loss_trace, when given, records the objective
// after every epoch.
LogRegModel logreg_fit(const std::vector<SparseFeatureVector>& features,
                       const std::vector<int>& labels, std::size_t dim,
                       const LogRegOptions& opts = {}, std::vector<double>* loss_trace = nullptr);

double logreg_logit(const LogRegModel& model, const SparseFeatureVector& fv);
// 1 iff logit >= 0.
int logreg_predict(const LogRegModel& model, const SparseFeatureVector& fv);

// JSON round-trip: term map, weights, bias, feature kind.
std::string logreg_to_json(const LogRegModel& model, const TermIndex& terms);
std::pair<LogRegModel, TermIndex> logreg_from_json(const std::string& text);

}  // namespace gcn
