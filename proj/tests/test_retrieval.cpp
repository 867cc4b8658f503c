#include <algorithm>

#include "doctest.h"
#include "dret/errors.hpp"
#include "dret/retrieval.hpp"
#include "dret/rng.hpp"

using namespace dret;

namespace {

FlatIndex random_index(Rng& rng, int count, int dim, Similarity similarity) {
  FlatIndex index;
  index.similarity = similarity;
  index.matrix.resize(count, dim);
  for (int i = 0; i < count; ++i) {
    index.ids.push_back("doc" + std::to_string(i));
    for (int j = 0; j < dim; ++j) index.matrix(i, j) = rng.symmetric();
  }
  return index;
}

// Direct-definition oracle: score everything, stable full sort.
std::vector<ScoredDoc> full_sort_oracle(const FlatIndex& index, const Embedding& query,
                                        std::size_t k) {
  std::vector<ScoredDoc> all;
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    double score = index.matrix.row(i).dot(query);
    if (index.similarity == Similarity::cosine)
      score /= index.matrix.row(i).norm() * query.norm();
    all.push_back({index.ids[i], score});
  }
  std::sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST_CASE("search matches the full-sort oracle on random corpora") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const Similarity mode = trial % 2 ? Similarity::cosine : Similarity::dot;
    const FlatIndex index = random_index(rng, 50, 8, mode);
    Embedding query(8);
    for (int j = 0; j < 8; ++j) query(j) = rng.symmetric();
    const std::size_t k = 1 + rng.below(60);  // sometimes above corpus size
    const auto got = search(index, query, k);
    const auto want = full_sort_oracle(index, query, k);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].doc_id == want[i].doc_id);
      CHECK(got[i].score == want[i].score);
    }
  }
}

TEST_CASE("ties break by ascending doc id") {
  FlatIndex index;
  index.matrix = Eigen::MatrixXd::Ones(4, 2);  // identical embeddings, identical scores
  index.ids = {"m", "a", "z", "b"};
  Embedding query(2);
  query << 1, 1;
  const auto got = search(index, query, 4);
  REQUIRE(got.size() == 4);
  CHECK(got[0].doc_id == "a");
  CHECK(got[1].doc_id == "b");
  CHECK(got[2].doc_id == "m");
  CHECK(got[3].doc_id == "z");
}

TEST_CASE("search validates inputs") {
  Rng rng(3);
  const FlatIndex index = random_index(rng, 5, 4, Similarity::dot);
  Embedding query(4);
  query.setOnes();
  CHECK_THROWS_AS(search(index, query, 0), UsageError);
  Embedding wrong(3);
  wrong.setOnes();
  CHECK_THROWS_AS(search(index, wrong, 2), DataError);
}

TEST_CASE("build_index embeds every document and batch_search emits a valid run") {
  Corpus corpus("idx");
  corpus.add({"d1", std::nullopt, "first document", "s"});
  corpus.add({"d2", std::nullopt, "second document", "s"});
  corpus.add({"d3", std::nullopt, "third and final", "s"});
  EncoderConfig config;
  config.d_model = 16;
  config.n_layers = 1;
  config.n_heads = 2;
  config.max_seq_len = 48;
  const EncoderParams params = init_params(config);
  const FlatIndex index = build_index(corpus, params);
  CHECK(index.ids.size() == 3);
  CHECK(index.matrix.rows() == 3);
  CHECK(index.matrix.cols() == 16);
  // Row i must equal the passage-side encoding of document i.
  const Embedding direct = encode(params, kPassageInstructionTemplate, "second document");
  CHECK((index.matrix.row(1).transpose() - direct).cwiseAbs().maxCoeff() == 0.0);

  const std::vector<QueryItem> queries = {{"q1", "first"}, {"q2", "final"}};
  const RetrievalRun run = batch_search(index, queries, params, 2);
  CHECK(run.rankings().size() == 2);
  CHECK(run.rankings().at("q1").size() == 2);

  const std::vector<QueryItem> dup = {{"q1", "a"}, {"q1", "b"}};
  CHECK_THROWS_AS(batch_search(index, dup, params, 2), DataError);
}
