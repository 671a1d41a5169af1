#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "gcn/text.hpp"

using namespace gcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gcn_text_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& contents) const {
    const std::string p = (path / name).string();
    std::ofstream out(p, std::ios::binary);
    out << contents;
    return p;
  }
};

}  // namespace

TEST_CASE("tokenize lowercases and strips edge punctuation") {
  CHECK(tokenize("Good Phone!") == std::vector<std::string>{"good", "phone"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t\n ").empty());
  CHECK(tokenize("It's GREAT—really") == std::vector<std::string>{"it's", "great—really"});
  CHECK(tokenize("...") == std::vector<std::string>{});
  CHECK(tokenize("(hello) [world]!") == std::vector<std::string>{"hello", "world"});
}

TEST_CASE("build_vocab ranks by frequency then lexicographically") {
  const std::vector<std::vector<std::string>> docs = {{"a", "a", "b"}, {"a", "c"}};
  const Vocabulary vocab = build_vocab(docs, 2);
  CHECK(vocab.lookup("a") == 1);
  CHECK(vocab.lookup("b") == 2);  // b and c tie at 1; b wins lexicographically
  CHECK(vocab.lookup("c") == 0);
  CHECK(vocab.word_count() == 2);

  const Vocabulary all = build_vocab(docs, 100);
  CHECK(all.word_count() == 3);
}

TEST_CASE("build_vocab truncates a large vocabulary to the cap") {
  std::vector<std::vector<std::string>> docs(1);
  for (int i = 0; i < 30000; ++i) docs[0].push_back("w" + std::to_string(i));
  const Vocabulary vocab = build_vocab(docs, 20000);
  CHECK(vocab.word_count() == 20000);
}

TEST_CASE("vocabulary never assigns index 0") {
  const Vocabulary vocab = build_vocab({{"x", "y", "z"}}, 10);
  for (const auto& [word, index] : vocab.map()) CHECK(index >= 1);
  CHECK_THROWS_AS(Vocabulary().insert("bad", 0), std::invalid_argument);
}

TEST_CASE("vocabulary JSON round-trip is exact") {
  const Vocabulary vocab = build_vocab({{"alpha", "beta", "beta", "gamma"}}, 10);
  const Vocabulary back = Vocabulary::from_json(vocab.to_json());
  CHECK(back.map() == vocab.map());
  CHECK(back.content_hash() == vocab.content_hash());
}

TEST_CASE("encode_pad looks up, truncates, pads") {
  const Vocabulary vocab = build_vocab({{"good", "good", "phone"}}, 10);
  const EncodedExample enc = encode_pad({"good", "phone"}, vocab, 5, 1);
  CHECK(enc.indices == std::vector<int>{1, 2, 0, 0, 0});
  CHECK(enc.label == 1);

  const EncodedExample unknown = encode_pad({"mystery", "words"}, vocab, 4);
  CHECK(unknown.indices == std::vector<int>{0, 0, 0, 0});

  std::vector<std::string> many(150, "good");
  const EncodedExample truncated = encode_pad(many, vocab, 100);
  CHECK(truncated.indices.size() == 100);
  for (int idx : truncated.indices) CHECK(idx == 1);
}

TEST_CASE("encode after tokenize is deterministic") {
  const Vocabulary vocab = build_vocab({{"nice", "camera"}}, 10);
  const std::string text = "Nice camera!";
  const EncodedExample a = encode_pad(tokenize(text), vocab, 8);
  const EncodedExample b = encode_pad(tokenize(text), vocab, 8);
  CHECK(a.indices == b.indices);
}

TEST_CASE("load_embeddings fills matching rows and leaves the rest zero") {
  TempDir tmp;
  const Vocabulary vocab = build_vocab({{"good", "good", "phone"}}, 10);
  const std::string path = tmp.file("emb.txt",
                                    "good 0.1 0.2 0.3 0.4\n"
                                    "unrelated 9 9 9 9\n");
  const EmbeddingMatrix emb = load_embeddings(path, vocab, 4);
  CHECK(emb.matrix.dim(0) == vocab.table_size());
  CHECK(emb.matrix.at(1, 0) == doctest::Approx(0.1));
  CHECK(emb.matrix.at(1, 3) == doctest::Approx(0.4));
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(emb.matrix.at(0, c) == 0.0);  // pad row
    CHECK(emb.matrix.at(2, c) == 0.0);  // "phone" absent from the file
  }
}

TEST_CASE("load_embeddings reports malformed lines with their number") {
  TempDir tmp;
  const Vocabulary vocab = build_vocab({{"good"}}, 10);
  const std::string path = tmp.file("emb.txt",
                                    "filler 1 2 3 4\n"
                                    "good 0.1 0.2\n");
  try {
    load_embeddings(path, vocab, 4);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(load_embeddings((tmp.path / "missing.txt").string(), vocab, 4), IoError);
}

TEST_CASE("load_embeddings with an empty vocab yields a single zero row") {
  TempDir tmp;
  const std::string path = tmp.file("emb.txt", "word 1 2 3\n");
  const EmbeddingMatrix emb = load_embeddings(path, Vocabulary(), 3);
  CHECK(emb.matrix.dim(0) == 1);
  for (std::size_t c = 0; c < 3; ++c) CHECK(emb.matrix.at(0, c) == 0.0);
}

TEST_CASE("random_embeddings keeps row 0 zero") {
  const Vocabulary vocab = build_vocab({{"a", "b", "c"}}, 10);
  Rng rng(4);
  const EmbeddingMatrix emb = random_embeddings(vocab, 6, rng);
  for (std::size_t c = 0; c < 6; ++c) CHECK(emb.matrix.at(0, c) == 0.0);
  bool any_nonzero = false;
  for (std::size_t r = 1; r < emb.matrix.dim(0); ++r) {
    for (std::size_t c = 0; c < 6; ++c) any_nonzero |= emb.matrix.at(r, c) != 0.0;
  }
  CHECK(any_nonzero);
}

TEST_CASE("load_dataset parses JSON lines and validates labels") {
  TempDir tmp;
  const std::string good = tmp.file("ds.jsonl",
                                    R"({"text": "Great phone!", "label": 1, "domain": "tech"})"
                                    "\n"
                                    R"({"text": "waste of money", "label": 0, "domain": "tech"})"
                                    "\n");
  const DomainDataset ds = load_dataset(good, "tech");
  REQUIRE(ds.examples.size() == 2);
  CHECK(ds.examples[0].tokens == std::vector<std::string>{"great", "phone"});
  CHECK(ds.examples[0].label == 1);
  CHECK(ds.examples[1].label == 0);

  const std::string bad = tmp.file("bad.jsonl",
                                   R"({"text": "x", "label": 1})"
                                   "\n"
                                   R"({"text": "y", "label": 3})"
                                   "\n");
  try {
    load_dataset(bad, "tech");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("presplit loader keeps the declared ranges") {
  TempDir tmp;
  auto line = [](const std::string& text, int label) {
    return R"({"text": ")" + text + R"(", "label": )" + std::to_string(label) + "}\n";
  };
  const std::string train = tmp.file("train.jsonl", line("a b", 1) + line("c d", 0));
  const std::string val = tmp.file("val.jsonl", line("e f", 1));
  const std::string test = tmp.file("test.jsonl", line("g h", 0) + line("i j", 1));
  const DomainDataset ds = load_dataset_presplit(train, val, test, "x");
  CHECK(ds.examples.size() == 5);
  CHECK(ds.split(Split::Train) == std::vector<std::size_t>{0, 1});
  CHECK(ds.split(Split::Val) == std::vector<std::size_t>{2});
  CHECK(ds.split(Split::Test) == std::vector<std::size_t>{3, 4});
}

namespace {

DomainDataset balanced_dataset(std::size_t n) {
  DomainDataset ds;
  ds.domain = "synthetic";
  for (std::size_t i = 0; i < n; ++i) {
    ds.examples.push_back({{"tok" + std::to_string(i)}, static_cast<int>(i % 2)});
  }
  return ds;
}

}  // namespace

TEST_CASE("64/16/20 split hits the published counts") {
  DomainDataset ds = balanced_dataset(2000);
  Rng rng(3);
  split_dataset(ds, rng);
  CHECK(ds.split(Split::Train).size() == 1280);
  CHECK(ds.split(Split::Val).size() == 320);
  CHECK(ds.split(Split::Test).size() == 400);

  DomainDataset big = balanced_dataset(20000);
  Rng rng2(3);
  split_dataset(big, rng2);
  CHECK(big.split(Split::Train).size() == 12800);
  CHECK(big.split(Split::Val).size() == 3200);
  CHECK(big.split(Split::Test).size() == 4000);
}

TEST_CASE("tiny stratified split keeps both classes in train") {
  DomainDataset ds = balanced_dataset(10);  // 5 pos / 5 neg
  Rng rng(17);
  split_dataset(ds, rng);
  CHECK(ds.split(Split::Train).size() == 6);
  CHECK(ds.split(Split::Val).size() == 2);
  CHECK(ds.split(Split::Test).size() == 2);
  int pos = 0, neg = 0;
  for (std::size_t i : ds.split(Split::Train)) {
    (ds.examples[i].label == 1 ? pos : neg) += 1;
  }
  CHECK(pos >= 1);
  CHECK(neg >= 1);
}

TEST_CASE("splits partition the dataset") {
  for (std::size_t n : {7u, 10u, 33u, 100u, 2000u}) {
    DomainDataset ds = balanced_dataset(n);
    Rng rng(n);
    split_dataset(ds, rng);
    std::set<std::size_t> seen;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      for (std::size_t i : ds.split(s)) {
        CHECK(seen.insert(i).second);  // disjoint
      }
    }
    CHECK(seen.size() == n);  // exhaustive
  }
}

TEST_CASE("save then load round-trips a dataset") {
  TempDir tmp;
  DomainDataset ds;
  ds.domain = "demo";
  ds.examples.push_back({{"good", "stuff"}, 1});
  ds.examples.push_back({{"bad", "stuff"}, 0});
  const std::string path = (tmp.path / "out.jsonl").string();
  save_dataset(ds, path);
  const DomainDataset back = load_dataset(path, "demo");
  REQUIRE(back.examples.size() == 2);
  CHECK(back.examples[0].tokens == ds.examples[0].tokens);
  CHECK(back.examples[1].label == 0);
}
