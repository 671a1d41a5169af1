#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gcn/config.hpp"
#include "gcn/model.hpp"
#include "gcn/text.hpp"
#include "gcn/train.hpp"

namespace gcn {

// ---------------------------------------------------------------------------
// Synthetic domain-shift corpus
// ---------------------------------------------------------------------------
//
// Desk-scale stand-in for the review corpora: each sentence mixes polarity
// words (shared across domains or domain-specific, per mix_ratio) with
// domain-specific noise words. Labels follow the polarity words, so a model
// that keys on shared cues transfers across domains and one that keys on
// domain cues does not.

struct SyntheticCorpusSpec {
  std::vector<std::string> domains;
  std::vector<std::string> shared_pos, shared_neg;
  std::map<std::string, std::vector<std::string>> domain_pos, domain_neg, domain_noise;
  std::size_t min_sentence_len = 8, max_sentence_len = 20;
  std::size_t min_polarity_words = 2, max_polarity_words = 4;
  // Fraction of polarity words drawn from the domain-specific lexicon.
  double mix_ratio = 0.5;
  std::size_t size_per_domain = 2000;
  std::uint64_t seed = 1;
};

// Generated lexicons (pairwise disjoint by construction) over n_domains
// domains named alpha, beta, gamma, delta, ...
SyntheticCorpusSpec default_synthetic_spec(std::size_t n_domains, std::size_t size_per_domain,
                                           double mix_ratio, std::uint64_t seed);

// Balanced labeled datasets, one per domain, deterministic in spec.seed.
// Throws std::invalid_argument when lexicons overlap.
std::vector<DomainDataset> generate_synthetic(const SyntheticCorpusSpec& spec);

// ---------------------------------------------------------------------------
// Cross-domain evaluation protocol
// ---------------------------------------------------------------------------

enum class ModelKind { Glu, Gtu, Gtru, None, BowLr, TfidfLr };

const char* to_string(ModelKind kind);
ModelKind model_from_string(const std::string& name);
bool is_neural(ModelKind kind);

// Read-counting view over a dataset's splits; proves the evaluation protocol
// never touches target-domain train/val data.
class SplitCounter {
 public:
  explicit SplitCounter(const DomainDataset& ds) : ds_(&ds) {}
  const std::vector<std::size_t>& split(Split s) const {
    ++reads_[static_cast<std::size_t>(s)];
    return ds_->split(s);
  }
  const DomainDataset& dataset() const { return *ds_; }
  std::size_t reads(Split s) const { return reads_[static_cast<std::size_t>(s)]; }

 private:
  const DomainDataset* ds_;
  mutable std::array<std::size_t, 3> reads_{0, 0, 0};
};

struct PairOutcome {
  std::string source, target, model;
  double accuracy = 0.0;  // fraction on the target test split
  std::uint64_t seed = 0;
  double epoch_seconds_mean = 0.0;  // neural models only
  TrainReport report;               // neural models only
  bool failed = false;
  std::string error;
};

// Train on the source train/val splits, evaluate on the target test split.
// Vocabulary, features and embeddings come from the source training split
// only; target train/val reads are asserted to be zero. Source == target is
// the explicitly flagged in-domain sanity mode (allow_same_domain), which
// also skips the overlapping-document check.
PairOutcome run_pair(const DomainDataset& source, const DomainDataset& target, ModelKind kind,
                     const ExperimentConfig& config, std::uint64_t run_seed,
                     bool allow_same_domain = false, GcnParams* trained_out = nullptr);

struct CrossDomainMatrix {
  std::vector<std::string> domains;
  struct Row {
    std::string source, target, model;
    double accuracy_pct = 0.0;  // mean over seeds, percent
    std::uint64_t seed = 0;     // base seed
    bool failed = false;
    std::string error;
  };
  std::vector<Row> rows;          // |domains|*(|domains|-1) per model
  std::vector<PairOutcome> runs;  // every (pair, model, seed) outcome
  bool any_failed() const;
};

// One run_pair per ordered (source, target) pair per model per seed
// (config.n_seeds seeds derived from config.seed), executed on up to
// config.workers parallel slots and merged in deterministic order.
CrossDomainMatrix run_matrix(const std::vector<DomainDataset>& datasets,
                             const std::vector<ModelKind>& models,
                             const ExperimentConfig& config);

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::size_t seed_index);

// matrix.csv: source,target,model,accuracy,seed — byte-deterministic for a
// fixed (seed, config, data) triple. Wall-clock timing lives in timing.csv.
void write_matrix_csv(const CrossDomainMatrix& matrix, const std::string& path);
// runs.csv: per-seed detail (source,target,model,seed,accuracy).
void write_runs_csv(const CrossDomainMatrix& matrix, const std::string& path);

struct TimingRow {
  std::string model;
  double mean_seconds = 0.0;
  double stddev_seconds = 0.0;
  std::size_t n_epochs = 0;
};

// Mean/stddev wall-clock seconds per training epoch, grouped by model.
std::vector<TimingRow> timing_report(const std::vector<PairOutcome>& runs);
void write_timing_csv(const std::vector<TimingRow>& rows, const std::string& path);
std::string timing_table(const std::vector<TimingRow>& rows);

// ---------------------------------------------------------------------------
// Gate inspection
// ---------------------------------------------------------------------------

// One CSV per branch at <path_stem>_h<h>.csv: row = position with its h-gram
// text (pads rendered as <pad>), columns = per-filter gate activations plus
// their mean.
void export_gate_heatmap(const GcnParams& params, const std::vector<std::string>& tokens,
                         const Vocabulary& vocab, const std::string& path_stem);

struct GateContrast {
  double polarity_mean = 0.0;  // windows containing a shared-polarity word
  double noise_mean = 0.0;     // windows of domain noise words only
  std::size_t polarity_windows = 0;
  std::size_t noise_windows = 0;
};

// Mean gate activation (averaged over filters) over h-gram windows, split by
// whether the window carries a shared-polarity cue or only noise words of
// `domain`. Windows touching padding or domain-specific polarity words are
// skipped.
GateContrast gate_polarity_contrast(const GcnParams& params,
                                    const std::vector<Example>& examples,
                                    const Vocabulary& vocab, const SyntheticCorpusSpec& spec,
                                    const std::string& domain, std::size_t h_branch = 3);

}  // namespace gcn
