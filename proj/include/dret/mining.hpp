#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dret/corpus.hpp"
#include "dret/encoder.hpp"
#include "dret/pairgen.hpp"
#include "dret/retrieval.hpp"

namespace dret {

// Anything that can embed queries and corpus documents into one space. The
// mining procedure is agnostic to where the vectors come from.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed_query(const std::string& text) const = 0;
  virtual Embedding embed_doc(const Document& doc) const = 0;
  virtual Similarity similarity() const { return Similarity::dot; }
};

// Embeds with the current checkpoint and the standard instruction templates.
class EncoderEmbedder : public Embedder {
 public:
  EncoderEmbedder(const EncoderParams& params, Instruction instruction = {},
                  Similarity similarity = Similarity::dot)
      : params_(params), instruction_(std::move(instruction)), similarity_(similarity) {}

  Embedding embed_query(const std::string& text) const override {
    return encode(params_, instruction_.query_instruction, text);
  }
  Embedding embed_doc(const Document& doc) const override {
    return encode(params_, instruction_.passage_instruction, doc.text);
  }
  Similarity similarity() const override { return similarity_; }

 private:
  const EncoderParams& params_;
  Instruction instruction_;
  Similarity similarity_;
};

// id -> float32 vector table persisted in the precomputed-embedding file.
struct EmbeddingTable {
  int dim = 0;
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> vectors;
  std::unordered_map<std::string, std::size_t> index;

  void add(const std::string& id, const Eigen::VectorXd& vec);
  const Eigen::VectorXd& at(const std::string& id) const;
};

// Binary layout, little-endian: u32 dim, u32 count, then per item
// u32 id_length, id bytes, dim float32 values.
void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

// Serves vectors from a file. Documents are keyed by id; queries are keyed
// by their exact text (missing key -> error).
class PrecomputedEmbedder : public Embedder {
 public:
  explicit PrecomputedEmbedder(EmbeddingTable table, Similarity similarity = Similarity::dot)
      : table_(std::move(table)), similarity_(similarity) {}

  Embedding embed_query(const std::string& text) const override { return table_.at(text); }
  Embedding embed_doc(const Document& doc) const override { return table_.at(doc.id); }
  Similarity similarity() const override { return similarity_; }

 private:
  EmbeddingTable table_;
  Similarity similarity_;
};

FlatIndex index_from_embedder(const Corpus& corpus, const Embedder& embedder);

// For each triple: retrieve the embedder's top-k corpus passages for the
// query, drop any passage string-equal to the positive, and sample
// `per_query` hard negatives uniformly from the remainder.
std::vector<TrainingTriple> mine_hard_negatives(const std::vector<TrainingTriple>& triples,
                                                const Corpus& corpus, const Embedder& embedder,
                                                std::size_t k = 100, std::size_t per_query = 1,
                                                std::uint64_t seed = 0);

struct FilterResult {
  std::vector<TrainingPair> retained;
  std::vector<TrainingPair> dropped;
};

// Keeps a pair iff its positive ranks within the embedder's top-`top`
// results for the query over corpus_of_positives.
FilterResult consistency_filter(const std::vector<TrainingPair>& pairs,
                                const Corpus& corpus_of_positives, const Embedder& embedder,
                                std::size_t top = 3);

}  // namespace dret
