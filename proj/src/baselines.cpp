#include "gcn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "gcn/ops.hpp"
#include "json.hpp"

namespace gcn {

TermIndex bow_vocab(const std::vector<std::vector<std::string>>& train_docs,
                    std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : train_docs) {
    for (const auto& term : doc) ++counts[term];
  }
  TermIndex terms;
  for (const auto& [term, count] : counts) {
    if (count >= min_freq) terms.emplace(term, 0);
  }
  int index = 0;
  for (auto& [term, idx] : terms) idx = index++;
  return terms;
}

SparseFeatureVector bow_features(const std::vector<std::string>& doc, const TermIndex& terms) {
  std::map<int, double> counts;
  for (const auto& term : doc) {
    auto it = terms.find(term);
    if (it != terms.end()) counts[it->second] += 1.0;
  }
  SparseFeatureVector fv;
  fv.entries.assign(counts.begin(), counts.end());
  return fv;
}

DocFreqs doc_frequencies(const std::vector<std::vector<std::string>>& train_docs,
                         const TermIndex& terms) {
  DocFreqs freqs;
  freqs.n_docs = train_docs.size();
  freqs.df.assign(terms.size(), 0);
  for (const auto& doc : train_docs) {
    const SparseFeatureVector fv = bow_features(doc, terms);
    for (const auto& [idx, value] : fv.entries) ++freqs.df[static_cast<std::size_t>(idx)];
  }
  return freqs;
}

SparseFeatureVector tfidf_features(const std::vector<std::string>& doc, const TermIndex& terms,
                                   const DocFreqs& freqs) {
  SparseFeatureVector fv = bow_features(doc, terms);
  double norm_sq = 0.0;
  for (auto& [idx, value] : fv.entries) {
    const double df = static_cast<double>(freqs.df[static_cast<std::size_t>(idx)]);
    const double idf =
        std::log((1.0 + static_cast<double>(freqs.n_docs)) / (1.0 + df)) + 1.0;
    value *= idf;
    norm_sq += value * value;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [idx, value] : fv.entries) value *= inv;
  }
  return fv;
}

double logreg_logit(const LogRegModel& model, const SparseFeatureVector& fv) {
  double z = model.bias;
  for (const auto& [idx, value] : fv.entries) {
    z += model.weights[static_cast<std::size_t>(idx)] * value;
  }
  return z;
}

int logreg_predict(const LogRegModel& model, const SparseFeatureVector& fv) {
  return logreg_logit(model, fv) >= 0.0 ? 1 : 0;
}

LogRegModel logreg_fit(const std::vector<SparseFeatureVector>& features,
                       const std::vector<int>& labels, std::size_t dim,
                       const LogRegOptions& opts, std::vector<double>* loss_trace) {
  if (features.size() != labels.size()) {
    throw ShapeError("logreg_fit: features/labels length mismatch");
  }
  for (const SparseFeatureVector& fv : features) {
    if (!fv.empty() && static_cast<std::size_t>(fv.entries.back().first) >= dim) {
      throw ShapeError("logreg_fit: feature index outside declared dimension");
    }
  }
  LogRegModel model;
  model.weights.assign(dim, 0.0);
  const double n = static_cast<double>(features.size());
  std::vector<double> grad(dim);
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double p = sigmoid(logreg_logit(model, features[i]));
      loss += bce_loss(p, labels[i]);
      const double gz = (p - static_cast<double>(labels[i])) / n;
      grad_bias += gz;
      for (const auto& [idx, value] : features[i].entries) {
        grad[static_cast<std::size_t>(idx)] += gz * value;
      }
    }
    double w_sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      w_sq += model.weights[j] * model.weights[j];
      model.weights[j] -= opts.step * (grad[j] + opts.l2 * model.weights[j]);
    }
    model.bias -= opts.step * grad_bias;
    if (loss_trace) loss_trace->push_back(loss / n + 0.5 * opts.l2 * w_sq);
  }
  return model;
}

std::string logreg_to_json(const LogRegModel& model, const TermIndex& terms) {
  nlohmann::json j;
  j["kind"] = model.kind == FeatureKind::Bow ? "bow" : "tfidf";
  j["bias"] = model.bias;
  j["weights"] = model.weights;
  nlohmann::json terms_json = nlohmann::json::object();
  for (const auto& [term, idx] : terms) terms_json[term] = idx;
  j["terms"] = terms_json;
  return j.dump();
}

std::pair<LogRegModel, TermIndex> logreg_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LogRegModel model;
  model.kind = j.at("kind").get<std::string>() == "bow" ? FeatureKind::Bow : FeatureKind::Tfidf;
  model.bias = j.at("bias").get<double>();
  model.weights = j.at("weights").get<std::vector<double>>();
  TermIndex terms;
  for (auto it = j.at("terms").begin(); it != j.at("terms").end(); ++it) {
    terms[it.key()] = it.value().get<int>();
  }
  return {std::move(model), std::move(terms)};
}

}  // namespace gcn
