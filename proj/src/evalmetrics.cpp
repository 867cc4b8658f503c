#include "dret/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "dret/errors.hpp"
#include "dret/objective.hpp"
#include "json.hpp"

namespace dret {

namespace {

double gain_of(int grade, NdcgGain gain) {
  return gain == NdcgGain::exponential ? std::pow(2.0, grade) - 1.0 : static_cast<double>(grade);
}

// Applies `per_query_metric` to every run query with at least one relevant
// judged document; others are excluded from the macro average.
template <typename Fn>
MetricResult macro_average(const RetrievalRun& run, const Qrels& qrels, Fn&& per_query_metric) {
  MetricResult result;
  double total = 0.0;
  for (const auto& [qid, ranking] : run.rankings()) {
    const auto judged = qrels.judgments.find(qid);
    bool has_relevant = false;
    if (judged != qrels.judgments.end())
      for (const auto& [did, grade] : judged->second)
        if (grade > 0) has_relevant = true;
    if (!has_relevant) {
      if (judged == qrels.judgments.end())
        std::cerr << "warning: query '" << qid << "' has no qrels entry; excluded\n";
      ++result.excluded_queries;
      continue;
    }
    const double value = per_query_metric(ranking, judged->second);
    result.per_query[qid] = value;
    total += value;
  }
  if (!result.per_query.empty()) result.mean = total / static_cast<double>(result.per_query.size());
  return result;
}

}  // namespace

MetricResult ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k, NdcgGain gain) {
  if (k < 1) throw UsageError("ndcg@k requires k >= 1");
  return macro_average(run, qrels,
                       [&](const std::vector<ScoredDoc>& ranking,
                           const std::map<std::string, int>& judged) {
    double dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
      const auto it = judged.find(ranking[r].doc_id);
      if (it != judged.end())
        dcg += gain_of(it->second, gain) / std::log2(static_cast<double>(r) + 2.0);
    }
    std::vector<int> grades;
    for (const auto& [did, grade] : judged)
      if (grade > 0) grades.push_back(grade);
    std::sort(grades.rbegin(), grades.rend());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r)
      idcg += gain_of(grades[r], gain) / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
  });
}

MetricResult recall_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k) {
  if (k < 1) throw UsageError("recall@k requires k >= 1");
  return macro_average(run, qrels,
                       [&](const std::vector<ScoredDoc>& ranking,
                           const std::map<std::string, int>& judged) {
    std::size_t relevant = 0;
    for (const auto& [did, grade] : judged)
      if (grade > 0) ++relevant;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
      const auto it = judged.find(ranking[r].doc_id);
      if (it != judged.end() && it->second > 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(relevant);
  });
}

MetricResult mrr_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k) {
  if (k < 1) throw UsageError("mrr@k requires k >= 1");
  return macro_average(run, qrels,
                       [&](const std::vector<ScoredDoc>& ranking,
                           const std::map<std::string, int>& judged) {
    for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
      const auto it = judged.find(ranking[r].doc_id);
      if (it != judged.end() && it->second > 0)
        return 1.0 / static_cast<double>(r + 1);
    }
    return 0.0;
  });
}

MetricResult map_metric(const RetrievalRun& run, const Qrels& qrels) {
  return macro_average(run, qrels,
                       [&](const std::vector<ScoredDoc>& ranking,
                           const std::map<std::string, int>& judged) {
    std::size_t relevant = 0;
    for (const auto& [did, grade] : judged)
      if (grade > 0) ++relevant;
    double sum_precision = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      const auto it = judged.find(ranking[r].doc_id);
      if (it != judged.end() && it->second > 0) {
        ++hits;
        sum_precision += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    return sum_precision / static_cast<double>(relevant);
  });
}

namespace {

// Average ranks, 1-based; tied values share the mean of their rank range.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& scores_a, const std::vector<double>& scores_b) {
  if (scores_a.size() != scores_b.size()) throw DataError("spearman: length mismatch");
  const std::size_t n = scores_a.size();
  if (n < 2) throw DataError("spearman: need at least 2 observations");
  const auto ra = average_ranks(scores_a);
  const auto rb = average_ranks(scores_b);
  const double mean_a = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(n);
  const double mean_b = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - mean_a) * (rb[i] - mean_b);
    var_a += (ra[i] - mean_a) * (ra[i] - mean_a);
    var_b += (rb[i] - mean_b) * (rb[i] - mean_b);
  }
  if (var_a == 0.0 || var_b == 0.0)
    throw DataError("spearman is undefined for a constant input");
  return cov / std::sqrt(var_a * var_b);
}

double sts_eval(const EncoderParams& params, const std::vector<StsPair>& pairs,
                const std::string& instruction_template) {
  if (pairs.size() < 2) throw DataError("sts_eval requires at least 2 sentence pairs");
  std::vector<double> model_scores, gold_scores;
  const LossConfig cosine{1.0, Similarity::cosine};
  for (const auto& pair : pairs) {
    const Embedding ea = encode(params, instruction_template, pair.sentence_a);
    const Embedding eb = encode(params, instruction_template, pair.sentence_b);
    model_scores.push_back(sim(ea, eb, cosine));
    gold_scores.push_back(pair.gold_score);
  }
  return spearman(model_scores, gold_scores);
}

std::string metrics_report_json(const std::map<std::string, MetricResult>& results,
                                NdcgGain gain) {
  nlohmann::json report;
  for (const auto& [name, result] : results) {
    nlohmann::json entry;
    entry["mean"] = result.mean;
    entry["per_query"] = result.per_query;
    entry["excluded_queries"] = result.excluded_queries;
    entry["gain_variant"] = gain == NdcgGain::exponential ? "exponential" : "linear";
    report[name] = entry;
  }
  return report.dump(2);
}

std::map<std::string, MetricResult> evaluate_metrics(const RetrievalRun& run, const Qrels& qrels,
                                                     const std::string& metrics_spec,
                                                     NdcgGain gain) {
  std::map<std::string, MetricResult> results;
  std::istringstream ss(metrics_spec);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const auto at = name.find('@');
    const std::string base = name.substr(0, at);
    std::size_t k = 0;
    if (at != std::string::npos) {
      try {
        k = static_cast<std::size_t>(std::stoul(name.substr(at + 1)));
      } catch (const std::exception&) {
        throw UsageError("bad metric cutoff in '" + name + "'");
      }
    }
    if (base == "ndcg" && k > 0) results[name] = ndcg_at_k(run, qrels, k, gain);
    else if (base == "recall" && k > 0) results[name] = recall_at_k(run, qrels, k);
    else if (base == "mrr" && k > 0) results[name] = mrr_at_k(run, qrels, k);
    else if (name == "map") results[name] = map_metric(run, qrels);
    else throw UsageError("unknown metric '" + name + "'");
  }
  return results;
}

}  // namespace dret
