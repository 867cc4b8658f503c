// Emits the bundled synthetic benchmark used by the end-to-end tests and README
// walkthrough: 8 disjoint-vocabulary topics, a titled training corpus, a small
// evaluation corpus with one document per topic, held-out queries with qrels,
// question/passage records for fine-tuning, and sentence pairs for the
// similarity check.
#include <iostream>

#include "dret/corpus.hpp"
#include "dret/io.hpp"
#include "dret/toydata.hpp"
#include "json.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_toy_data <output-dir>\n";
    return 1;
  }
  const std::string dir = argv[1];
  const dret::ToyData data = dret::make_toy_data({});

  dret::write_jsonl(data.train, dir + "/corpus.jsonl");
  dret::write_jsonl(data.eval, dir + "/eval_corpus.jsonl");
  dret::write_qrels(data.qrels, dir + "/qrels.tsv");

  dret::atomic_write(dir + "/queries.jsonl", [&](std::ostream& out) {
    for (const auto& q : data.queries)
      out << nlohmann::json{{"_id", q.id}, {"text", q.text}}.dump() << "\n";
  });
  dret::atomic_write(dir + "/finetune.jsonl", [&](std::ostream& out) {
    for (const auto& rec : data.finetune_records)
      out << nlohmann::json{{"question", rec.question}, {"passage", rec.gold_passage}}.dump() << "\n";
  });
  dret::atomic_write(dir + "/sts_pairs.jsonl", [&](std::ostream& out) {
    for (const auto& pair : data.sts_pairs)
      out << nlohmann::json{{"sentence_a", pair.sentence_a},
                            {"sentence_b", pair.sentence_b},
                            {"score", pair.gold_score}}
                 .dump()
          << "\n";
  });

  std::cout << "wrote toy benchmark to " << dir << "\n";
  return 0;
}
