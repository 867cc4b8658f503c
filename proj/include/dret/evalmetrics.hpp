#pragma once

#include <map>
#include <string>
#include <vector>

#include "dret/corpus.hpp"
#include "dret/encoder.hpp"

namespace dret {

enum class NdcgGain { exponential, linear };  // g(x) = 2^x - 1 vs g(x) = x

// Macro-averaged metric over queries. Queries with no relevant document (or
// absent from the qrels) are excluded from the mean and counted.
struct MetricResult {
  double mean = 0.0;
  std::map<std::string, double> per_query;
  int excluded_queries = 0;
};

MetricResult ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k,
                       NdcgGain gain = NdcgGain::exponential);
MetricResult recall_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k);
MetricResult mrr_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k);
MetricResult map_metric(const RetrievalRun& run, const Qrels& qrels);

// Pearson correlation of average ranks; ties get their mean rank. Throws
// DataError on length mismatch, length < 2, or a constant input.
double spearman(const std::vector<double>& scores_a, const std::vector<double>& scores_b);

struct StsPair {
  std::string sentence_a;
  std::string sentence_b;
  double gold_score = 0.0;
};

inline constexpr const char* kStsInstructionTemplate =
    "Given a sentence, retrieve sentences with the same meaning";

// Cosine similarity of the encoded sentence pair (cosine regardless of the
// retrieval similarity mode), correlated against the gold scores.
double sts_eval(const EncoderParams& params, const std::vector<StsPair>& pairs,
                const std::string& instruction_template = kStsInstructionTemplate);

// "ndcg@10", "recall@5", "mrr@5", "map", ... -> result, rendered as the JSON
// report {metric: {mean, per_query, excluded_queries, gain_variant}}.
std::string metrics_report_json(const std::map<std::string, MetricResult>& results,
                                NdcgGain gain);

// Parses a spec like "ndcg@10,recall@5,recall@20,ndcg@20,mrr@5,map" and
// evaluates each metric. Throws UsageError on an unknown metric name.
std::map<std::string, MetricResult> evaluate_metrics(const RetrievalRun& run, const Qrels& qrels,
                                                     const std::string& metrics_spec,
                                                     NdcgGain gain = NdcgGain::exponential);

}  // namespace dret
