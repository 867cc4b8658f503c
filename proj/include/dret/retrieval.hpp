#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dret/corpus.hpp"
#include "dret/encoder.hpp"
#include "dret/objective.hpp"

namespace dret {

// Exact brute-force index: row i of matrix is the embedding of ids[i].
struct FlatIndex {
  std::vector<std::string> ids;
  Eigen::MatrixXd matrix;  // count x dim
  Similarity similarity = Similarity::dot;
};

FlatIndex build_index(const Corpus& corpus, const EncoderParams& params,
                      const std::string& passage_instruction_template = kPassageInstructionTemplate,
                      Similarity similarity = Similarity::dot);

// Top-min(k, count) by score descending, ties by ascending doc-id.
std::vector<ScoredDoc> search(const FlatIndex& index, const Embedding& query_embedding,
                              std::size_t k);

struct QueryItem {
  std::string id;
  std::string text;
  std::string instruction_template = kPretrainQueryInstructionTemplate;
};

RetrievalRun batch_search(const FlatIndex& index, const std::vector<QueryItem>& queries,
                          const EncoderParams& params, std::size_t k);

}  // namespace dret
