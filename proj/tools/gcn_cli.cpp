#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcn/check_suite.hpp"
#include "gcn/config.hpp"
#include "gcn/harness.hpp"
#include "gcn/model.hpp"
#include "gcn/train.hpp"

namespace fs = std::filesystem;
using namespace gcn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string domain_from_path(const std::string& path) {
  return fs::path(path).stem().string();
}

std::string default_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("GCN_OUT_DIR")) return env;
  return "gcn_out";
}

// Per-domain split stream; keyed off the experiment seed so the split is
// fixed before any training randomness is drawn.
Rng split_rng(std::uint64_t seed, std::size_t domain_index) {
  return Rng(seed).fork(0x5017 + domain_index);
}

struct ConfigFlags {
  std::string config_path;
  ExperimentConfig values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--gate", values.gate, "gate variant: glu|gtu|gtru|none");
    cmd->add_option("--kernel-sizes", values.kernel_sizes, "convolution kernel sizes");
    cmd->add_option("--filters", values.filters, "filters per kernel size");
    cmd->add_option("--embed-dim", values.embed_dim, "word embedding dimension");
    cmd->add_option("--max-len", values.max_len, "maximum sentence length");
    cmd->add_option("--vocab-size", values.vocab_size, "vocabulary cap");
    cmd->add_option("--dropout-embed", values.dropout_embed, "dropout prob on embeddings");
    cmd->add_option("--dropout-dense", values.dropout_dense, "dropout prob on dense layer");
    cmd->add_option("--batch-size", values.batch_size, "minibatch size");
    cmd->add_option("--epochs", values.epochs, "max training epochs");
    cmd->add_option("--patience", values.patience, "early stopping patience (0 = off)");
    cmd->add_option("--rho", values.rho, "Adadelta decay");
    cmd->add_option("--eps", values.eps, "Adadelta epsilon");
    cmd->add_option("--seed", values.seed, "experiment seed");
    cmd->add_option("--seeds", values.n_seeds, "seeds per pair in matrix runs");
    cmd->add_option("--workers", values.workers, "parallel run slots (0 = auto)");
    cmd->add_flag("--train-embeddings", values.train_embeddings, "fine-tune embeddings");
    cmd->add_option("--embeddings", values.embeddings_path, "GloVe-format embeddings file");
  }

  // flag > config file > default
  ExperimentConfig resolve(CLI::App* cmd) const {
    ExperimentConfig config;
    if (!config_path.empty()) config = load_config_file(config_path);
    auto take = [cmd](const char* flag, auto& dst, const auto& src) {
      if (cmd->count(flag) > 0) dst = src;
    };
    take("--gate", config.gate, values.gate);
    take("--kernel-sizes", config.kernel_sizes, values.kernel_sizes);
    take("--filters", config.filters, values.filters);
    take("--embed-dim", config.embed_dim, values.embed_dim);
    take("--max-len", config.max_len, values.max_len);
    take("--vocab-size", config.vocab_size, values.vocab_size);
    take("--dropout-embed", config.dropout_embed, values.dropout_embed);
    take("--dropout-dense", config.dropout_dense, values.dropout_dense);
    take("--batch-size", config.batch_size, values.batch_size);
    take("--epochs", config.epochs, values.epochs);
    take("--patience", config.patience, values.patience);
    take("--rho", config.rho, values.rho);
    take("--eps", config.eps, values.eps);
    take("--seed", config.seed, values.seed);
    take("--seeds", config.n_seeds, values.n_seeds);
    take("--workers", config.workers, values.workers);
    take("--train-embeddings", config.train_embeddings, values.train_embeddings);
    take("--embeddings", config.embeddings_path, values.embeddings_path);
    config.validate();
    return config;
  }
};

void check_vocab_hash(const GcnParams& params, const Vocabulary& vocab) {
  if (params.vocab_hash != vocab.content_hash()) {
    throw std::runtime_error(
        "vocabulary does not match the one this checkpoint was trained with");
  }
}

int cmd_train(const ExperimentConfig& base, const std::string& source,
              const std::string& val_path, const std::string& test_path,
              const std::string& domain_flag, const std::string& out_flag) {
  ExperimentConfig config = base;
  config.data_path = source;
  config.out_dir = default_out_dir(out_flag);
  fs::create_directories(config.out_dir);
  const std::string domain = domain_flag.empty() ? domain_from_path(source) : domain_flag;

  DomainDataset ds;
  if (!val_path.empty() || !test_path.empty()) {
    if (val_path.empty() || test_path.empty()) {
      throw CLI::ValidationError("--val and --test must be given together");
    }
    ds = load_dataset_presplit(source, val_path, test_path, domain);
  } else {
    ds = load_dataset(source, domain);
    Rng rng = split_rng(config.seed, 0);
    split_dataset(ds, rng);
  }

  std::vector<std::vector<std::string>> train_docs;
  for (std::size_t i : ds.split(Split::Train)) train_docs.push_back(ds.examples[i].tokens);
  const Vocabulary vocab = build_vocab(train_docs, config.vocab_size);

  EmbeddingMatrix embedding;
  if (config.embeddings_path.empty()) {
    Rng embed_rng = Rng(config.seed).fork(2);
    embedding = random_embeddings(vocab, config.embed_dim, embed_rng);
    std::cout << "note: no --embeddings given, using seeded random vectors\n";
  } else {
    embedding = load_embeddings(config.embeddings_path, vocab, config.embed_dim);
  }
  embedding.trainable = config.train_embeddings;

  auto encode = [&](Split s) {
    std::vector<EncodedExample> out;
    for (std::size_t i : ds.split(s)) {
      out.push_back(encode_pad(ds.examples[i].tokens, vocab, config.max_len,
                               ds.examples[i].label));
    }
    return out;
  };
  const auto train_set = encode(Split::Train);
  const auto val_set = encode(Split::Val);
  const auto test_set = encode(Split::Test);

  Rng init_rng = Rng(config.seed).fork(1);
  GcnParams params = init_model(gate_from_string(config.gate), config.model_dims(), vocab,
                                std::move(embedding), init_rng);
  std::cout << "training " << config.gate << " on " << domain << ": " << train_set.size()
            << " train / " << val_set.size() << " val / " << test_set.size() << " test, "
            << params.param_count() << " parameters\n";

  const TrainReport report = fit(params, train_set, val_set, config.train_config());
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    const EpochStats& e = report.epochs[i];
    std::printf("epoch %2zu  train %.4f  val %.4f  acc %.4f  %.2fs\n", i + 1, e.train_loss,
                e.val_loss, e.val_accuracy, e.seconds);
  }
  std::cout << "best epoch " << report.best_epoch << ", stopped at " << report.stopped_epoch
            << "\n";
  if (!test_set.empty()) {
    const EvalResult test = evaluate(params, test_set);
    std::printf("in-domain test accuracy %.2f%%\n", 100.0 * test.accuracy);
  }

  const fs::path out(config.out_dir);
  save_checkpoint(params, (out / "model.gcnc").string());
  vocab.save((out / "vocab.json").string());
  std::ofstream((out / "report.json").string()) << report.to_json() << "\n";
  std::ofstream((out / "report.csv").string()) << report.to_csv();
  std::vector<std::string> inputs{source};
  if (!val_path.empty()) inputs.push_back(val_path);
  if (!test_path.empty()) inputs.push_back(test_path);
  if (!config.embeddings_path.empty()) inputs.push_back(config.embeddings_path);
  write_manifest(config, "train", inputs, (out / "manifest.json").string());
  std::cout << "wrote " << (out / "model.gcnc").string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& vocab_path,
             const std::string& target) {
  const GcnParams params = load_checkpoint(checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  check_vocab_hash(params, vocab);
  const DomainDataset ds = load_dataset(target, domain_from_path(target));

  std::vector<EncodedExample> examples;
  for (const Example& ex : ds.examples) {
    examples.push_back(encode_pad(ex.tokens, vocab, params.dims.max_len, ex.label));
  }
  const EvalResult result = evaluate(params, examples);
  std::printf("%s: accuracy %.2f%%  loss %.4f  (%zu examples)\n", target.c_str(),
              100.0 * result.accuracy, result.mean_loss, examples.size());
  return kExitOk;
}

int cmd_matrix(const ExperimentConfig& base, const std::vector<std::string>& domain_paths,
               const std::string& models_flag, const std::string& out_flag) {
  ExperimentConfig config = base;
  config.out_dir = default_out_dir(out_flag);
  fs::create_directories(config.out_dir);

  std::vector<ModelKind> models;
  std::stringstream model_stream(models_flag);
  std::string name;
  while (std::getline(model_stream, name, ',')) {
    if (!name.empty()) models.push_back(model_from_string(name));
  }
  if (models.empty()) throw CLI::ValidationError("--models must name at least one model");

  std::vector<DomainDataset> datasets;
  for (std::size_t i = 0; i < domain_paths.size(); ++i) {
    DomainDataset ds = load_dataset(domain_paths[i], domain_from_path(domain_paths[i]));
    Rng rng = split_rng(config.seed, i);
    split_dataset(ds, rng);
    datasets.push_back(std::move(ds));
  }

  const CrossDomainMatrix matrix = run_matrix(datasets, models, config);
  const fs::path out(config.out_dir);
  write_matrix_csv(matrix, (out / "matrix.csv").string());
  write_runs_csv(matrix, (out / "runs.csv").string());
  const std::vector<TimingRow> timing = timing_report(matrix.runs);
  write_timing_csv(timing, (out / "timing.csv").string());
  write_manifest(config, "matrix", domain_paths, (out / "manifest.json").string());

  for (const CrossDomainMatrix::Row& row : matrix.rows) {
    if (row.failed) {
      std::printf("%s->%s  %-6s FAILED: %s\n", row.source.c_str(), row.target.c_str(),
                  row.model.c_str(), row.error.c_str());
    } else {
      std::printf("%s->%s  %-6s %6.2f\n", row.source.c_str(), row.target.c_str(),
                  row.model.c_str(), row.accuracy_pct);
    }
  }
  if (!timing.empty()) std::cout << timing_table(timing);
  std::cout << "wrote " << (out / "matrix.csv").string() << "\n";
  return matrix.any_failed() ? kExitRuntime : kExitOk;
}

int cmd_synth_gen(std::size_t n_domains, std::size_t size, double mix_ratio, std::uint64_t seed,
                  const std::string& out_flag) {
  const std::string out_dir = default_out_dir(out_flag);
  fs::create_directories(out_dir);
  const SyntheticCorpusSpec spec = default_synthetic_spec(n_domains, size, mix_ratio, seed);
  const std::vector<DomainDataset> datasets = generate_synthetic(spec);
  for (const DomainDataset& ds : datasets) {
    const std::string path = (fs::path(out_dir) / (ds.domain + ".jsonl")).string();
    save_dataset(ds, path);
    std::cout << "wrote " << path << " (" << ds.examples.size() << " examples)\n";
  }
  return kExitOk;
}

int cmd_inspect_gates(const std::string& checkpoint, const std::string& vocab_path,
                      const std::string& text, const std::string& out_flag) {
  const GcnParams params = load_checkpoint(checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  check_vocab_hash(params, vocab);
  const std::string out_dir = default_out_dir(out_flag);
  fs::create_directories(out_dir);

  const std::vector<std::string> tokens = tokenize(text);
  const std::string stem = (fs::path(out_dir) / "gates").string();
  export_gate_heatmap(params, tokens, vocab, stem);
  for (std::size_t h : params.dims.kernel_sizes) {
    std::cout << "wrote " << stem << "_h" << h << ".csv\n";
  }
  return kExitOk;
}

int cmd_grad_check(std::uint64_t seed, std::size_t n_seeds) {
  double worst = 0.0;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::vector<CheckItem> items = run_grad_check_suite(seed + s);
    for (const CheckItem& item : items) {
      std::printf("seed %llu  %-24s %.3e\n", static_cast<unsigned long long>(seed + s),
                  item.name.c_str(), item.max_rel_error);
    }
    worst = std::max(worst, suite_max_error(items));
  }
  std::printf("max relative error: %.3e\n", worst);
  return worst <= 1e-5 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated convolutional text classifier: training, cross-domain evaluation and "
               "gate inspection"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model on one domain");
  ConfigFlags train_flags;
  std::string source, val_path, test_path, domain_flag, out_flag;
  train_cmd->add_option("--source", source, "training data (JSON lines)")->required();
  train_cmd->add_option("--val", val_path, "validation split file (with --test)");
  train_cmd->add_option("--test", test_path, "test split file (with --val)");
  train_cmd->add_option("--domain", domain_flag, "domain label (default: file stem)");
  train_cmd->add_option("--out", out_flag, "output directory");
  train_flags.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string checkpoint, vocab_path, target;
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--vocab", vocab_path, "vocabulary JSON from training")->required();
  eval_cmd->add_option("--target", target, "dataset to evaluate (JSON lines)")->required();

  // matrix
  auto* matrix_cmd = app.add_subcommand("matrix", "source->target accuracy matrix");
  ConfigFlags matrix_flags;
  std::vector<std::string> domain_paths;
  std::string models_flag = "glu,gtu,gtru,none";
  std::string matrix_out;
  matrix_cmd->add_option("--domains", domain_paths, "one JSON-lines file per domain")
      ->required()
      ->expected(2, -1);
  matrix_cmd->add_option("--models", models_flag, "comma list: glu,gtu,gtru,none,bow,tfidf");
  matrix_cmd->add_option("--out", matrix_out, "output directory");
  matrix_flags.attach(matrix_cmd);

  // synth-gen
  auto* synth_cmd = app.add_subcommand("synth-gen", "generate the synthetic domain-shift corpus");
  std::size_t synth_domains = 2, synth_size = 2000;
  double synth_mix = 0.5;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth_cmd->add_option("--domains", synth_domains, "number of domains (2..8)");
  synth_cmd->add_option("--size", synth_size, "sentences per domain");
  synth_cmd->add_option("--mix-ratio", synth_mix, "fraction of domain-specific polarity words");
  synth_cmd->add_option("--seed", synth_seed, "corpus seed");
  synth_cmd->add_option("--out", synth_out, "output directory");

  // inspect-gates
  auto* gates_cmd = app.add_subcommand("inspect-gates", "export gate activation heatmaps");
  std::string gates_checkpoint, gates_vocab, gates_text, gates_out;
  gates_cmd->add_option("--checkpoint", gates_checkpoint, "model checkpoint")->required();
  gates_cmd->add_option("--vocab", gates_vocab, "vocabulary JSON from training")->required();
  gates_cmd->add_option("--text", gates_text, "sentence to inspect")->required();
  gates_cmd->add_option("--out", gates_out, "output directory");

  // grad-check
  auto* check_cmd = app.add_subcommand("grad-check", "finite-difference gradient check suite");
  std::uint64_t check_seed = 1;
  std::size_t check_seeds = 3;
  check_cmd->add_option("--seed", check_seed, "first seed");
  check_cmd->add_option("--seeds", check_seeds, "number of seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) {
      return cmd_train(train_flags.resolve(train_cmd), source, val_path, test_path, domain_flag,
                       out_flag);
    }
    if (*eval_cmd) return cmd_eval(checkpoint, vocab_path, target);
    if (*matrix_cmd) {
      return cmd_matrix(matrix_flags.resolve(matrix_cmd), domain_paths, models_flag, matrix_out);
    }
    if (*synth_cmd) {
      return cmd_synth_gen(synth_domains, synth_size, synth_mix, synth_seed, synth_out);
    }
    if (*gates_cmd) return cmd_inspect_gates(gates_checkpoint, gates_vocab, gates_text, gates_out);
    if (*check_cmd) return cmd_grad_check(check_seed, check_seeds);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
