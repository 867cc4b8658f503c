#include "dret/retrieval.hpp"

#include <algorithm>
#include <set>

#include "dret/errors.hpp"

namespace dret {

FlatIndex build_index(const Corpus& corpus, const EncoderParams& params,
                      const std::string& passage_instruction_template, Similarity similarity) {
  if (corpus.size() == 0) throw DataError("cannot index an empty corpus");
  FlatIndex index;
  index.similarity = similarity;
  index.matrix.resize(corpus.size(), params.config.d_model);
  index.ids.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& doc = corpus.docs()[i];
    index.ids.push_back(doc.id);
    index.matrix.row(i) =
        encode(params, passage_instruction_template, doc.text).transpose();
    if (similarity == Similarity::cosine && index.matrix.row(i).norm() == 0.0)
      throw DataError("zero-norm embedding for document '" + doc.id + "' in cosine mode");
  }
  return index;
}

std::vector<ScoredDoc> search(const FlatIndex& index, const Embedding& query_embedding,
                              std::size_t k) {
  if (k < 1) throw UsageError("search requires k >= 1");
  if (query_embedding.size() != index.matrix.cols())
    throw DataError("query embedding dimension does not match the index");
  // Row-by-row dot products pin the accumulation order, so scores are
  // bit-identical to scoring each document on its own.
  Eigen::VectorXd scores(index.matrix.rows());
  const double qn = query_embedding.norm();
  if (index.similarity == Similarity::cosine && qn == 0.0)
    throw DataError("zero-norm query embedding in cosine mode");
  for (Eigen::Index i = 0; i < index.matrix.rows(); ++i) {
    scores(i) = index.matrix.row(i).dot(query_embedding);
    if (index.similarity == Similarity::cosine) scores(i) /= index.matrix.row(i).norm() * qn;
  }
  std::vector<std::size_t> order(index.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t cut = std::min(k, order.size());
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return index.ids[a] < index.ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + cut, order.end(), better);
  std::vector<ScoredDoc> result;
  result.reserve(cut);
  for (std::size_t i = 0; i < cut; ++i) result.push_back({index.ids[order[i]], scores(order[i])});
  return result;
}

RetrievalRun batch_search(const FlatIndex& index, const std::vector<QueryItem>& queries,
                          const EncoderParams& params, std::size_t k) {
  if (queries.empty()) throw UsageError("batch_search requires at least one query");
  std::set<std::string> seen;
  for (const auto& q : queries)
    if (!seen.insert(q.id).second) throw DataError("duplicate query id '" + q.id + "'");
  RetrievalRun run;
  for (const auto& q : queries) {
    const Embedding emb = encode(params, q.instruction_template, q.text);
    run.add(q.id, search(index, emb, k));
  }
  return run;
}

}  // namespace dret
