#include "gcn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "gcn/baselines.hpp"

namespace gcn {

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

SyntheticCorpusSpec default_synthetic_spec(std::size_t n_domains, std::size_t size_per_domain,
                                           double mix_ratio, std::uint64_t seed) {
  static const char* kNames[] = {"alpha", "beta", "gamma", "delta",
                                 "epsilon", "zeta", "eta", "theta"};
  if (n_domains < 2 || n_domains > 8) {
    throw std::invalid_argument("default_synthetic_spec: 2..8 domains supported");
  }
  SyntheticCorpusSpec spec;
  spec.mix_ratio = mix_ratio;
  spec.size_per_domain = size_per_domain;
  spec.seed = seed;
  auto words = [](const std::string& stem, std::size_t n) {
    std::vector<std::string> out;
    char buf[64];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%s%02zu", stem.c_str(), i);
      out.emplace_back(buf);
    }
    return out;
  };
  spec.shared_pos = words("goodsp", 16);
  spec.shared_neg = words("badsn", 16);
  for (std::size_t d = 0; d < n_domains; ++d) {
    const std::string name = kNames[d];
    spec.domains.push_back(name);
    spec.domain_pos[name] = words(name + "pos", 8);
    spec.domain_neg[name] = words(name + "neg", 8);
    spec.domain_noise[name] = words(name + "web", 32);
  }
  return spec;
}

namespace {

void check_lexicons_disjoint(const SyntheticCorpusSpec& spec) {
  std::unordered_set<std::string> seen;
  auto check = [&seen](const std::vector<std::string>& lex, const char* label) {
    for (const std::string& w : lex) {
      if (!seen.insert(w).second) {
        throw std::invalid_argument(std::string("synthetic spec: word '") + w +
                                    "' appears in more than one lexicon (" + label + ")");
      }
    }
  };
  check(spec.shared_pos, "shared_pos");
  check(spec.shared_neg, "shared_neg");
  for (const std::string& d : spec.domains) {
    check(spec.domain_pos.at(d), "domain_pos");
    check(spec.domain_neg.at(d), "domain_neg");
    check(spec.domain_noise.at(d), "domain_noise");
  }
}

const std::string& pick(const std::vector<std::string>& lex, Rng& rng) {
  return lex[rng.below(lex.size())];
}

}  // namespace

std::vector<DomainDataset> generate_synthetic(const SyntheticCorpusSpec& spec) {
  if (spec.domains.size() < 2) {
    throw std::invalid_argument("generate_synthetic: need at least 2 domains");
  }
  if (spec.min_sentence_len > spec.max_sentence_len ||
      spec.min_polarity_words > spec.max_polarity_words ||
      spec.max_polarity_words > spec.min_sentence_len) {
    throw std::invalid_argument("generate_synthetic: inconsistent length bounds");
  }
  check_lexicons_disjoint(spec);

  std::vector<DomainDataset> datasets;
  const Rng root(spec.seed);
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    const std::string& name = spec.domains[d];
    Rng rng = root.fork(d);
    DomainDataset ds;
    ds.domain = name;
    const auto& dpos = spec.domain_pos.at(name);
    const auto& dneg = spec.domain_neg.at(name);
    const auto& noise = spec.domain_noise.at(name);
    for (std::size_t s = 0; s < spec.size_per_domain; ++s) {
      const int label = static_cast<int>(s % 2);  // alternating keeps |pos-neg| <= 1
      const std::size_t len =
          spec.min_sentence_len + rng.below(spec.max_sentence_len - spec.min_sentence_len + 1);
      const std::size_t n_polar =
          spec.min_polarity_words +
          rng.below(spec.max_polarity_words - spec.min_polarity_words + 1);
      std::vector<std::string> tokens;
      tokens.reserve(len);
      for (std::size_t i = 0; i < n_polar; ++i) {
        const bool domain_specific = rng.bernoulli(spec.mix_ratio);
        const auto& lex = label == 1 ? (domain_specific ? dpos : spec.shared_pos)
                                     : (domain_specific ? dneg : spec.shared_neg);
        tokens.push_back(pick(lex, rng));
      }
      for (std::size_t i = n_polar; i < len; ++i) tokens.push_back(pick(noise, rng));
      for (std::size_t i = tokens.size(); i > 1; --i) {
        std::swap(tokens[i - 1], tokens[rng.below(i)]);
      }
      ds.examples.push_back({std::move(tokens), label});
    }
    datasets.push_back(std::move(ds));
  }
  return datasets;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Glu: return "glu";
    case ModelKind::Gtu: return "gtu";
    case ModelKind::Gtru: return "gtru";
    case ModelKind::None: return "none";
    case ModelKind::BowLr: return "bow";
    case ModelKind::TfidfLr: return "tfidf";
  }
  return "glu";
}

ModelKind model_from_string(const std::string& name) {
  if (name == "glu") return ModelKind::Glu;
  if (name == "gtu") return ModelKind::Gtu;
  if (name == "gtru") return ModelKind::Gtru;
  if (name == "none") return ModelKind::None;
  if (name == "bow") return ModelKind::BowLr;
  if (name == "tfidf") return ModelKind::TfidfLr;
  throw std::invalid_argument("unknown model kind: " + name);
}

bool is_neural(ModelKind kind) {
  return kind == ModelKind::Glu || kind == ModelKind::Gtu || kind == ModelKind::Gtru ||
         kind == ModelKind::None;
}

// ---------------------------------------------------------------------------
// run_pair
// ---------------------------------------------------------------------------

namespace {

std::uint64_t example_content_hash(const Example& ex) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  auto feed = [&hash](unsigned char c) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  };
  for (const std::string& tok : ex.tokens) {
    for (unsigned char c : tok) feed(c);
    feed(0x1F);
  }
  feed(static_cast<unsigned char>('0' + ex.label));
  return hash;
}

void check_no_overlap(const DomainDataset& source, const DomainDataset& target) {
  std::unordered_set<std::uint64_t> source_ids;
  source_ids.reserve(source.examples.size());
  for (const Example& ex : source.examples) source_ids.insert(example_content_hash(ex));
  for (std::size_t i = 0; i < target.examples.size(); ++i) {
    if (source_ids.count(example_content_hash(target.examples[i]))) {
      throw std::invalid_argument("run_pair: document " + std::to_string(i) + " of domain '" +
                                  target.domain + "' also appears in source domain '" +
                                  source.domain + "'");
    }
  }
}

std::vector<std::vector<std::string>> gather_docs(const DomainDataset& ds,
                                                  const std::vector<std::size_t>& idx) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(idx.size());
  for (std::size_t i : idx) docs.push_back(ds.examples[i].tokens);
  return docs;
}

std::vector<EncodedExample> encode_split(const DomainDataset& ds,
                                         const std::vector<std::size_t>& idx,
                                         const Vocabulary& vocab, std::size_t max_len) {
  std::vector<EncodedExample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    out.push_back(encode_pad(ds.examples[i].tokens, vocab, max_len, ds.examples[i].label));
  }
  return out;
}

GateKind gate_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::Glu: return GateKind::Glu;
    case ModelKind::Gtu: return GateKind::Gtu;
    case ModelKind::Gtru: return GateKind::Gtru;
    case ModelKind::None: return GateKind::None;
    default: throw std::logic_error("gate_of: not a neural model");
  }
}

PairOutcome run_neural_pair(const SplitCounter& source, const SplitCounter& target,
                            ModelKind kind, const ExperimentConfig& config,
                            std::uint64_t run_seed, GcnParams* trained_out) {
  PairOutcome outcome;
  const Vocabulary vocab =
      build_vocab(gather_docs(source.dataset(), source.split(Split::Train)), config.vocab_size);

  const Rng root(run_seed);
  EmbeddingMatrix embedding;
  if (config.embeddings_path.empty()) {
    Rng embed_rng = root.fork(2);
    embedding = random_embeddings(vocab, config.embed_dim, embed_rng);
  } else {
    embedding = load_embeddings(config.embeddings_path, vocab, config.embed_dim);
  }
  embedding.trainable = config.train_embeddings;

  const std::vector<EncodedExample> train =
      encode_split(source.dataset(), source.split(Split::Train), vocab, config.max_len);
  const std::vector<EncodedExample> val =
      encode_split(source.dataset(), source.split(Split::Val), vocab, config.max_len);
  const std::vector<EncodedExample> test =
      encode_split(target.dataset(), target.split(Split::Test), vocab, config.max_len);

  Rng init_rng = root.fork(1);
  GcnParams params =
      init_model(gate_of(kind), config.model_dims(), vocab, std::move(embedding), init_rng);

  TrainConfig tc = config.train_config();
  tc.seed = run_seed;
  outcome.report = fit(params, train, val, tc);
  double seconds = 0.0;
  for (const EpochStats& e : outcome.report.epochs) seconds += e.seconds;
  outcome.epoch_seconds_mean =
      outcome.report.epochs.empty() ? 0.0 : seconds / static_cast<double>(outcome.report.epochs.size());
  outcome.accuracy = evaluate(params, test).accuracy;
  if (trained_out) *trained_out = std::move(params);
  return outcome;
}

PairOutcome run_baseline_pair(const SplitCounter& source, const SplitCounter& target,
                              ModelKind kind, const ExperimentConfig& config) {
  PairOutcome outcome;
  const auto train_docs = gather_docs(source.dataset(), source.split(Split::Train));
  const TermIndex terms = bow_vocab(train_docs, 5);
  const DocFreqs freqs =
      kind == ModelKind::TfidfLr ? doc_frequencies(train_docs, terms) : DocFreqs{};
  auto featurize = [&](const std::vector<std::string>& doc) {
    return kind == ModelKind::TfidfLr ? tfidf_features(doc, terms, freqs)
                                      : bow_features(doc, terms);
  };

  std::vector<SparseFeatureVector> features;
  std::vector<int> labels;
  for (std::size_t i : source.split(Split::Train)) {
    features.push_back(featurize(source.dataset().examples[i].tokens));
    labels.push_back(source.dataset().examples[i].label);
  }
  LogRegModel model = logreg_fit(features, labels, terms.size());
  model.kind = kind == ModelKind::TfidfLr ? FeatureKind::Tfidf : FeatureKind::Bow;

  std::size_t correct = 0;
  const auto& test_idx = target.split(Split::Test);
  for (std::size_t i : test_idx) {
    const Example& ex = target.dataset().examples[i];
    if (logreg_predict(model, featurize(ex.tokens)) == ex.label) ++correct;
  }
  if (test_idx.empty()) throw std::invalid_argument("run_pair: empty target test split");
  outcome.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
  return outcome;
}

}  // namespace

PairOutcome run_pair(const DomainDataset& source, const DomainDataset& target, ModelKind kind,
                     const ExperimentConfig& config, std::uint64_t run_seed,
                     bool allow_same_domain, GcnParams* trained_out) {
  if (&source == &target || source.domain == target.domain) {
    if (!allow_same_domain) {
      throw std::invalid_argument("run_pair: source == target requires the sanity-mode flag");
    }
  } else if (!allow_same_domain) {
    check_no_overlap(source, target);
  }

  SplitCounter source_view(source);
  SplitCounter target_view(target);
  PairOutcome outcome =
      is_neural(kind) ? run_neural_pair(source_view, target_view, kind, config, run_seed,
                                        trained_out)
                      : run_baseline_pair(source_view, target_view, kind, config);
  outcome.source = source.domain;
  outcome.target = target.domain;
  outcome.model = to_string(kind);
  outcome.seed = run_seed;

  const bool same = &source == &target;
  if (!same && (target_view.reads(Split::Train) != 0 || target_view.reads(Split::Val) != 0)) {
    throw std::logic_error("run_pair: target train/val splits were read during the run");
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// run_matrix
// ---------------------------------------------------------------------------

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::size_t seed_index) {
  return Rng(base_seed).fork(0x5EED + seed_index).seed();
}

bool CrossDomainMatrix::any_failed() const {
  for (const Row& row : rows) {
    if (row.failed) return true;
  }
  return false;
}

CrossDomainMatrix run_matrix(const std::vector<DomainDataset>& datasets,
                             const std::vector<ModelKind>& models,
                             const ExperimentConfig& config) {
  if (datasets.size() < 2) throw std::invalid_argument("run_matrix: need at least 2 domains");
  if (models.empty()) throw std::invalid_argument("run_matrix: need at least 1 model");

  CrossDomainMatrix matrix;
  for (const DomainDataset& ds : datasets) matrix.domains.push_back(ds.domain);

  struct Task {
    std::size_t src, tgt;
    ModelKind model;
    std::uint64_t run_seed;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < datasets.size(); ++s) {
    for (std::size_t t = 0; t < datasets.size(); ++t) {
      if (s == t) continue;
      for (ModelKind model : models) {
        for (std::size_t k = 0; k < config.n_seeds; ++k) {
          tasks.push_back({s, t, model, derive_run_seed(config.seed, k)});
        }
      }
    }
  }

  std::vector<PairOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        outcomes[i] = run_pair(datasets[task.src], datasets[task.tgt], task.model, config,
                               task.run_seed);
      } catch (const std::exception& e) {
        outcomes[i].source = datasets[task.src].domain;
        outcomes[i].target = datasets[task.tgt].domain;
        outcomes[i].model = to_string(task.model);
        outcomes[i].seed = task.run_seed;
        outcomes[i].failed = true;
        outcomes[i].error = e.what();
      }
    }
  };
  std::size_t n_workers = config.workers != 0
                              ? config.workers
                              : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, tasks.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (std::thread& th : threads) th.join();
  }

  // Deterministic row order: pair-major, model-minor, seeds averaged.
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < datasets.size(); ++s) {
    for (std::size_t t = 0; t < datasets.size(); ++t) {
      if (s == t) continue;
      for (ModelKind model : models) {
        CrossDomainMatrix::Row row;
        row.source = datasets[s].domain;
        row.target = datasets[t].domain;
        row.model = to_string(model);
        row.seed = config.seed;
        double sum = 0.0;
        for (std::size_t k = 0; k < config.n_seeds; ++k) {
          const PairOutcome& outcome = outcomes[cursor++];
          if (outcome.failed) {
            row.failed = true;
            row.error = outcome.error;
          } else {
            sum += outcome.accuracy;
          }
          matrix.runs.push_back(outcome);
        }
        if (!row.failed) {
          row.accuracy_pct = 100.0 * sum / static_cast<double>(config.n_seeds);
        }
        matrix.rows.push_back(row);
      }
    }
  }
  return matrix;
}

void write_matrix_csv(const CrossDomainMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open matrix CSV for writing: " + path);
  out << "source,target,model,accuracy,seed\n";
  char line[256];
  for (const CrossDomainMatrix::Row& row : matrix.rows) {
    if (row.failed) {
      out << row.source << ',' << row.target << ',' << row.model << ",failed," << row.seed
          << "\n";
    } else {
      std::snprintf(line, sizeof(line), "%s,%s,%s,%.2f,%llu\n", row.source.c_str(),
                    row.target.c_str(), row.model.c_str(), row.accuracy_pct,
                    static_cast<unsigned long long>(row.seed));
      out << line;
    }
  }
}

void write_runs_csv(const CrossDomainMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open runs CSV for writing: " + path);
  out << "source,target,model,seed,accuracy\n";
  char line[256];
  for (const PairOutcome& run : matrix.runs) {
    if (run.failed) {
      out << run.source << ',' << run.target << ',' << run.model << ','
          << static_cast<unsigned long long>(run.seed) << ",failed\n";
    } else {
      std::snprintf(line, sizeof(line), "%s,%s,%s,%llu,%.2f\n", run.source.c_str(),
                    run.target.c_str(), run.model.c_str(),
                    static_cast<unsigned long long>(run.seed), 100.0 * run.accuracy);
      out << line;
    }
  }
}

std::vector<TimingRow> timing_report(const std::vector<PairOutcome>& runs) {
  std::vector<TimingRow> rows;
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> seconds;
  for (const PairOutcome& run : runs) {
    if (run.failed || run.report.epochs.empty()) continue;
    if (!seconds.count(run.model)) order.push_back(run.model);
    for (const EpochStats& e : run.report.epochs) seconds[run.model].push_back(e.seconds);
  }
  for (const std::string& model : order) {
    const std::vector<double>& xs = seconds[model];
    TimingRow row;
    row.model = model;
    row.n_epochs = xs.size();
    double sum = 0.0;
    for (double x : xs) sum += x;
    row.mean_seconds = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - row.mean_seconds) * (x - row.mean_seconds);
    row.stddev_seconds = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size())) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_timing_csv(const std::vector<TimingRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open timing CSV for writing: " + path);
  out << "model,epoch_seconds_mean,epoch_seconds_stddev,epochs\n";
  char line[160];
  for (const TimingRow& row : rows) {
    std::snprintf(line, sizeof(line), "%s,%.4f,%.4f,%zu\n", row.model.c_str(), row.mean_seconds,
                  row.stddev_seconds, row.n_epochs);
    out << line;
  }
}

std::string timing_table(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "model    mean s/epoch   stddev   epochs\n";
  char line[160];
  for (const TimingRow& row : rows) {
    std::snprintf(line, sizeof(line), "%-8s %12.4f %8.4f %8zu\n", row.model.c_str(),
                  row.mean_seconds, row.stddev_seconds, row.n_epochs);
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Gate inspection
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kPadText = "<pad>";

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string window_text(const std::vector<std::string>& tokens, std::size_t n, std::size_t h,
                        std::size_t position) {
  const std::size_t pad_top = (h - 1) / 2;
  std::string text;
  for (std::size_t j = 0; j < h; ++j) {
    if (j) text += ' ';
    const std::ptrdiff_t row =
        static_cast<std::ptrdiff_t>(position + j) - static_cast<std::ptrdiff_t>(pad_top);
    if (row < 0 || row >= static_cast<std::ptrdiff_t>(n) ||
        static_cast<std::size_t>(row) >= tokens.size()) {
      text += kPadText;
    } else {
      text += tokens[static_cast<std::size_t>(row)];
    }
  }
  return text;
}

}  // namespace

void export_gate_heatmap(const GcnParams& params, const std::vector<std::string>& tokens,
                         const Vocabulary& vocab, const std::string& path_stem) {
  const EncodedExample ex = encode_pad(tokens, vocab, params.dims.max_len);
  const std::vector<GateActivationMap> maps = gate_activations(params, ex);
  for (const GateActivationMap& map : maps) {
    const std::string path = path_stem + "_h" + std::to_string(map.h) + ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open heatmap CSV for writing: " + path);
    out << "position,ngram";
    for (std::size_t k = 0; k < params.dims.filters; ++k) out << ",f" << k;
    out << ",mean\n";
    char cell[40];
    for (std::size_t i = 0; i < params.dims.max_len; ++i) {
      out << i << ',' << csv_quote(window_text(tokens, params.dims.max_len, map.h, i));
      for (std::size_t k = 0; k < params.dims.filters; ++k) {
        std::snprintf(cell, sizeof(cell), ",%.6f", map.activations.at(i, k));
        out << cell;
      }
      std::snprintf(cell, sizeof(cell), ",%.6f\n", map.mean[i]);
      out << cell;
    }
  }
}

GateContrast gate_polarity_contrast(const GcnParams& params,
                                    const std::vector<Example>& examples,
                                    const Vocabulary& vocab, const SyntheticCorpusSpec& spec,
                                    const std::string& domain, std::size_t h_branch) {
  std::unordered_set<std::string> shared(spec.shared_pos.begin(), spec.shared_pos.end());
  shared.insert(spec.shared_neg.begin(), spec.shared_neg.end());
  const auto& noise_lex = spec.domain_noise.at(domain);
  std::unordered_set<std::string> noise(noise_lex.begin(), noise_lex.end());

  GateContrast contrast;
  double polarity_sum = 0.0;
  double noise_sum = 0.0;
  const std::size_t pad_top = (h_branch - 1) / 2;
  for (const Example& ex : examples) {
    const EncodedExample enc = encode_pad(ex.tokens, vocab, params.dims.max_len, ex.label);
    const std::vector<GateActivationMap> maps = gate_activations(params, enc);
    const GateActivationMap* map = nullptr;
    for (const GateActivationMap& m : maps) {
      if (m.h == h_branch) map = &m;
    }
    if (!map) throw std::invalid_argument("gate_polarity_contrast: no branch with requested h");
    const std::size_t len = std::min(ex.tokens.size(), params.dims.max_len);
    for (std::size_t i = 0; i < params.dims.max_len; ++i) {
      // full in-sentence windows only
      if (i < pad_top || i - pad_top + h_branch > len) continue;
      bool any_shared = false;
      bool all_noise = true;
      for (std::size_t j = 0; j < h_branch; ++j) {
        const std::string& tok = ex.tokens[i - pad_top + j];
        if (shared.count(tok)) any_shared = true;
        if (!noise.count(tok)) all_noise = false;
      }
      if (any_shared) {
        polarity_sum += map->mean[i];
        ++contrast.polarity_windows;
      } else if (all_noise) {
        noise_sum += map->mean[i];
        ++contrast.noise_windows;
      }
    }
  }
  if (contrast.polarity_windows > 0) {
    contrast.polarity_mean = polarity_sum / static_cast<double>(contrast.polarity_windows);
  }
  if (contrast.noise_windows > 0) {
    contrast.noise_mean = noise_sum / static_cast<double>(contrast.noise_windows);
  }
  return contrast;
}

}  // namespace gcn
