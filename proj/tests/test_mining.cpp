#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "dret/errors.hpp"
#include "dret/mining.hpp"
#include "dret/rng.hpp"

using namespace dret;

namespace {

// Hash-bucket embedder: tiny deterministic vectors with no encoder cost.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(int dim = 6) : dim_(dim) {}

  Embedding embed_query(const std::string& text) const override { return vec(text); }
  Embedding embed_doc(const Document& doc) const override { return vec(doc.text); }

 private:
  Embedding vec(const std::string& text) const {
    Embedding v = Embedding::Zero(dim_);
    Rng rng(std::hash<std::string>{}(text));
    for (int i = 0; i < dim_; ++i) v(i) = rng.symmetric();
    return v;
  }
  int dim_;
};

// All documents equally similar to everything: stresses tie handling.
class ConstantEmbedder : public Embedder {
 public:
  Embedding embed_query(const std::string&) const override { return Embedding::Ones(3); }
  Embedding embed_doc(const Document&) const override { return Embedding::Ones(3); }
};

Corpus numbered_corpus(int n) {
  Corpus corpus("mine");
  for (int i = 0; i < n; ++i)
    corpus.add({"d" + std::to_string(i), std::nullopt, "passage number " + std::to_string(i), "s"});
  return corpus;
}

std::vector<TrainingTriple> plain_triples(int n) {
  std::vector<TrainingTriple> triples;
  for (int i = 0; i < n; ++i) {
    TrainingTriple t;
    t.pair.query = "question " + std::to_string(i);
    t.pair.positive = "passage number " + std::to_string(i);
    triples.push_back(std::move(t));
  }
  return triples;
}

}  // namespace

TEST_CASE("mined negatives come from the top-k and never equal the positive") {
  const Corpus corpus = numbered_corpus(30);
  const HashEmbedder embedder;
  const auto triples = plain_triples(10);
  const auto mined = mine_hard_negatives(triples, corpus, embedder, 12, 2, 5);
  REQUIRE(mined.size() == 10);

  const FlatIndex index = index_from_embedder(corpus, embedder);
  for (std::size_t i = 0; i < mined.size(); ++i) {
    REQUIRE(mined[i].hard_negatives.size() == 2);
    const auto top = search(index, embedder.embed_query(mined[i].pair.query), 12);
    std::set<std::string> top_texts;
    for (const auto& hit : top) top_texts.insert(corpus.by_id(hit.doc_id).text);
    for (const auto& neg : mined[i].hard_negatives) {
      CHECK(neg != mined[i].pair.positive);
      CHECK(top_texts.count(neg) == 1);
    }
  }
}

TEST_CASE("mining is deterministic in the seed") {
  const Corpus corpus = numbered_corpus(25);
  const HashEmbedder embedder;
  const auto triples = plain_triples(8);
  const auto a = mine_hard_negatives(triples, corpus, embedder, 10, 1, 3);
  const auto b = mine_hard_negatives(triples, corpus, embedder, 10, 1, 3);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i].hard_negatives == b[i].hard_negatives);
  const auto c = mine_hard_negatives(triples, corpus, embedder, 10, 1, 4);
  bool any_different = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].hard_negatives != c[i].hard_negatives) any_different = true;
  CHECK(any_different);
}

TEST_CASE("mining under constant scores still excludes the positive") {
  const Corpus corpus = numbered_corpus(10);
  const ConstantEmbedder embedder;
  const auto mined = mine_hard_negatives(plain_triples(10), corpus, embedder, 10, 3, 1);
  for (const auto& triple : mined) {
    REQUIRE(triple.hard_negatives.size() == 3);
    for (const auto& neg : triple.hard_negatives) CHECK(neg != triple.pair.positive);
  }
}

TEST_CASE("mining validates corpus size") {
  const HashEmbedder embedder;
  CHECK_THROWS_AS(
      mine_hard_negatives(plain_triples(2), numbered_corpus(1), embedder, 10, 1, 0),
      DataError);
}

TEST_CASE("consistency filter partitions pairs and is monotone in top") {
  const Corpus corpus = numbered_corpus(20);
  const HashEmbedder embedder;
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 20; ++i) {
    TrainingPair p;
    p.query = "query " + std::to_string(i * 7 % 20);
    p.positive = "passage number " + std::to_string(i);
    pairs.push_back(std::move(p));
  }

  std::size_t previous = 0;
  for (std::size_t top = 1; top <= 20; ++top) {
    const FilterResult result = consistency_filter(pairs, corpus, embedder, top);
    CHECK(result.retained.size() + result.dropped.size() == pairs.size());
    CHECK(result.retained.size() >= previous);  // monotone in top
    previous = result.retained.size();
  }
  // top = corpus size retains everything.
  CHECK(previous == pairs.size());
}

TEST_CASE("consistency filter keys on exact text identity") {
  Corpus corpus("dup");
  corpus.add({"a", std::nullopt, "shared text", "s"});
  corpus.add({"b", std::nullopt, "shared text", "s"});
  corpus.add({"c", std::nullopt, "something else", "s"});
  const ConstantEmbedder embedder;  // every score ties; ranking is by doc id
  TrainingPair pair;
  pair.query = "anything";
  pair.positive = "shared text";
  // Both copies of the positive land at ranks 1-2 under the id tie-break.
  const FilterResult result = consistency_filter({pair}, corpus, embedder, 2);
  CHECK(result.retained.size() == 1);

  TrainingPair missing;
  missing.query = "anything";
  missing.positive = "not in the corpus";
  CHECK_THROWS_AS(consistency_filter({missing}, corpus, embedder, 2), DataError);
}

TEST_CASE("embedding table round-trips through the binary file") {
  EmbeddingTable table;
  Rng rng(77);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd v(4);
    for (int j = 0; j < 4; ++j) v(j) = rng.symmetric();
    table.add("item" + std::to_string(i), v);
  }
  const std::string path =
      (std::filesystem::temp_directory_path() / "emb_rt.bin").string();
  save_embeddings(table, path);
  const EmbeddingTable loaded = load_embeddings(path);
  CHECK(loaded.dim == 4);
  REQUIRE(loaded.ids == table.ids);
  for (int i = 0; i < 5; ++i) {
    // Storage is float32; tolerate only the narrowing loss.
    CHECK((loaded.vectors[i] - table.vectors[i]).cwiseAbs().maxCoeff() < 1e-6);
  }

  // Truncation detected.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes.substr(0, bytes.size() - 3);
  }
  CHECK_THROWS_AS(load_embeddings(path), DataError);
  std::remove(path.c_str());

  CHECK_THROWS_AS(table.add("item0", table.vectors[0]), DataError);  // duplicate id
  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS_AS(table.add("fresh", wrong), DataError);  // dim mismatch
}
