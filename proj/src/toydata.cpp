#include "dret/toydata.hpp"

#include <numeric>
#include <string>

#include "dret/errors.hpp"
#include "dret/rng.hpp"

namespace dret {

namespace {

std::string topic_word(int topic, Rng& rng) {
  static const char* alphabet = "abcdefghijklmnopqrstuvwxyz";
  const int base = topic * 3;
  const std::size_t len = 4 + rng.below(3);
  std::string word;
  for (std::size_t i = 0; i < len; ++i) word += alphabet[base + rng.below(3)];
  return word;
}

std::string topic_sentence(int topic, int words, Rng& rng) {
  std::string text;
  for (int w = 0; w < words; ++w) {
    if (w > 0) text += ' ';
    text += topic_word(topic, rng);
  }
  return text;
}

}  // namespace

ToyData make_toy_data(const ToySpec& spec) {
  if (spec.topics < 1 || spec.topics > 8) throw UsageError("toy topics must be in [1, 8]");
  Rng rng(spec.seed);
  ToyData data;
  data.train = Corpus("toy-train");
  data.eval = Corpus("toy-eval");

  for (int t = 0; t < spec.topics; ++t) {
    for (int i = 0; i < spec.docs_per_topic; ++i) {
      Document doc;
      doc.id = "d" + std::to_string(t) + "_" + std::to_string(i);
      doc.title = topic_sentence(t, 3, rng);
      doc.text = topic_sentence(t, spec.words_per_doc, rng);
      doc.source = "toy";
      data.train.add(std::move(doc));
    }
  }

  for (int t = 0; t < spec.topics; ++t) {
    Document doc;
    doc.id = "e" + std::to_string(t);
    doc.text = topic_sentence(t, spec.words_per_doc, rng);
    doc.source = "toy";
    data.eval.add(std::move(doc));
  }

  for (int t = 0; t < spec.topics; ++t)
    for (int i = 0; i < spec.queries_per_topic; ++i) {
      QueryItem q;
      q.id = "q" + std::to_string(t) + "_" + std::to_string(i);
      q.text = topic_sentence(t, 4, rng);
      data.queries.push_back(std::move(q));
      data.qrels.judgments["q" + std::to_string(t) + "_" + std::to_string(i)]
                          ["e" + std::to_string(t)] = 1;
    }

  // Distinct gold passages per topic so in-batch negatives are never false.
  for (int t = 0; t < spec.topics; ++t) {
    std::vector<int> doc_idx(spec.docs_per_topic);
    std::iota(doc_idx.begin(), doc_idx.end(), 0);
    rng.shuffle(doc_idx);
    for (int i = 0; i < spec.finetune_per_topic; ++i) {
      QaRecord rec;
      rec.question = topic_sentence(t, 4, rng);
      rec.gold_passage =
          data.train
              .by_id("d" + std::to_string(t) + "_" +
                     std::to_string(doc_idx[i % spec.docs_per_topic]))
              .text;
      data.finetune_records.push_back(std::move(rec));
    }
  }

  for (int i = 0; i < 10 && spec.topics >= 2; ++i) {
    const int t = static_cast<int>(rng.below(spec.topics));
    data.sts_pairs.push_back({topic_sentence(t, 6, rng), topic_sentence(t, 6, rng),
                              3.0 + static_cast<double>(rng.below(2))});
    const int a = static_cast<int>(rng.below(spec.topics));
    int b = static_cast<int>(rng.below(spec.topics));
    if (b == a) b = (b + 1) % spec.topics;
    data.sts_pairs.push_back({topic_sentence(a, 6, rng), topic_sentence(b, 6, rng),
                              static_cast<double>(rng.below(2))});
  }

  return data;
}

}  // namespace dret
