#pragma once

#include <cstdint>
#include <vector>

#include "dret/corpus.hpp"
#include "dret/evalmetrics.hpp"
#include "dret/pairgen.hpp"
#include "dret/retrieval.hpp"

namespace dret {

// Synthetic separable benchmark: every topic writes words from its own
// 3-letter alphabet, so topics share no bytes and a byte-level encoder can
// tell them apart.
struct ToySpec {
  int topics = 8;
  int docs_per_topic = 50;
  int queries_per_topic = 10;
  int finetune_per_topic = 25;
  int words_per_doc = 12;
  std::uint64_t seed = 7;
};

struct ToyData {
  Corpus train;                          // titled documents, topics * docs_per_topic
  Corpus eval;                           // one representative document per topic
  std::vector<QueryItem> queries;        // held out, none seen in training
  Qrels qrels;                           // each query -> its topic's eval document
  std::vector<QaRecord> finetune_records;
  std::vector<StsPair> sts_pairs;
};

ToyData make_toy_data(const ToySpec& spec = {});

}  // namespace dret
