#include "dret/pairgen.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "dret/errors.hpp"
#include "dret/io.hpp"
#include "dret/rng.hpp"
#include "json.hpp"

namespace dret {

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(std::move(tok));
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += tokens[i];
  }
  return out;
}

void check_triple(const TrainingTriple& triple, const std::string& where) {
  if (triple.pair.query.empty()) throw DataError(where + ": empty query");
  if (triple.pair.positive.empty()) throw DataError(where + ": empty positive");
  for (const auto& neg : triple.hard_negatives)
    if (neg == triple.pair.positive)
      throw DataError(where + ": hard negative equals the positive passage");
}

}  // namespace

std::string render_instruction(const std::string& instruction_template, const std::string& text) {
  const auto slot = instruction_template.find("{}");
  if (slot == std::string::npos) return instruction_template + " " + text;
  std::string out = instruction_template;
  out.replace(slot, 2, text);
  return out;
}

std::string to_string(PairOrigin origin) {
  switch (origin) {
    case PairOrigin::title_abstract: return "title-abstract";
    case PairOrigin::crop: return "crop";
    case PairOrigin::labeled: return "labeled";
    case PairOrigin::synthetic: return "synthetic";
  }
  throw DataError("invalid pair origin");
}

PairOrigin pair_origin_from_string(const std::string& s) {
  if (s == "title-abstract") return PairOrigin::title_abstract;
  if (s == "crop") return PairOrigin::crop;
  if (s == "labeled") return PairOrigin::labeled;
  if (s == "synthetic") return PairOrigin::synthetic;
  throw DataError("unknown pair origin '" + s + "'");
}

std::vector<TrainingPair> title_abstract_pairs(const Corpus& corpus) {
  std::vector<TrainingPair> pairs;
  for (const auto& doc : corpus.docs()) {
    if (!doc.title) continue;
    TrainingPair pair;
    pair.query = *doc.title;
    pair.positive = doc.text;
    pair.origin = PairOrigin::title_abstract;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TrainingPair> crop_pairs(const Corpus& corpus, std::uint64_t seed, std::size_t min_len,
                                     std::size_t max_len) {
  if (min_len < 1) throw UsageError("crop min_len must be >= 1");
  if (max_len < min_len) throw UsageError("crop max_len must be >= min_len");
  std::vector<TrainingPair> pairs;
  Rng rng(seed);
  for (const auto& doc : corpus.docs()) {
    const auto tokens = whitespace_tokens(doc.text);
    const std::size_t n = tokens.size();
    if (n < 2 * min_len) continue;
    // First span length: must leave room for a second span of >= min_len.
    const std::size_t len_a =
        min_len + rng.below(std::min(max_len, n - min_len) - min_len + 1);
    const std::size_t len_b = min_len + rng.below(std::min(max_len, n - len_a) - min_len + 1);
    const std::size_t start_a = rng.below(n - len_a - len_b + 1);
    const std::size_t start_b = start_a + len_a + rng.below(n - len_b - (start_a + len_a) + 1);
    TrainingPair pair;
    pair.query = join_tokens(tokens, start_a, start_a + len_a);
    pair.positive = join_tokens(tokens, start_b, start_b + len_b);
    pair.origin = PairOrigin::crop;
    pair.query_span = {start_a, start_a + len_a};
    pair.positive_span = {start_b, start_b + len_b};
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TrainingTriple> convert_similarity_records(
    const std::vector<SimilarityRecord>& records) {
  // Anchor -> contradict partners, gathered over the whole record list so a
  // later contradiction still attaches to an earlier positive.
  std::map<std::string, std::vector<std::string>> negatives;
  for (const auto& rec : records)
    if (rec.label == SimilarityLabel::contradict) negatives[rec.sentence_a].push_back(rec.sentence_b);
  std::vector<TrainingTriple> triples;
  for (const auto& rec : records) {
    if (rec.label != SimilarityLabel::entail) continue;
    TrainingTriple triple;
    triple.pair.query = rec.sentence_a;
    triple.pair.positive = rec.sentence_b;
    triple.pair.origin = PairOrigin::labeled;
    auto it = negatives.find(rec.sentence_a);
    if (it != negatives.end())
      for (const auto& neg : it->second)
        if (neg != triple.pair.positive) triple.hard_negatives.push_back(neg);
    triples.push_back(std::move(triple));
  }
  return triples;
}

std::vector<TrainingTriple> convert_qa_records(const std::vector<QaRecord>& records) {
  std::vector<TrainingTriple> triples;
  for (const auto& rec : records) {
    TrainingTriple triple;
    triple.pair.query = rec.question;
    triple.pair.positive = rec.gold_passage;
    triple.pair.origin = PairOrigin::labeled;
    triples.push_back(std::move(triple));
  }
  return triples;
}

std::vector<TrainingTriple> convert_dialogue_records(const std::vector<DialogueRecord>& records) {
  std::vector<QaRecord> as_qa;
  as_qa.reserve(records.size());
  for (const auto& rec : records) as_qa.push_back({rec.user_query, rec.answer});
  return convert_qa_records(as_qa);
}

void attach_instructions(std::vector<TrainingPair>& pairs, const std::string& query_instruction) {
  if (query_instruction.empty()) throw UsageError("query instruction must be non-empty");
  for (auto& pair : pairs)
    pair.instruction = {query_instruction, kPassageInstructionTemplate};
}

void attach_instructions(std::vector<TrainingTriple>& triples,
                         const std::string& query_instruction) {
  if (query_instruction.empty()) throw UsageError("query instruction must be non-empty");
  for (auto& triple : triples)
    triple.pair.instruction = {query_instruction, kPassageInstructionTemplate};
}

void save_triples(const std::vector<TrainingTriple>& triples, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& triple : triples) {
      nlohmann::json obj;
      obj["query"] = triple.pair.query;
      obj["positive"] = triple.pair.positive;
      obj["hard_negatives"] = triple.hard_negatives;
      obj["query_instruction"] = triple.pair.instruction.query_instruction;
      obj["passage_instruction"] = triple.pair.instruction.passage_instruction;
      obj["origin"] = to_string(triple.pair.origin);
      out << obj.dump() << "\n";
    }
  });
}

std::vector<TrainingTriple> load_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pairs file: " + path);
  std::vector<TrainingTriple> triples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    TrainingTriple triple;
    try {
      triple.pair.query = obj.at("query").get<std::string>();
      triple.pair.positive = obj.at("positive").get<std::string>();
      if (obj.contains("hard_negatives"))
        triple.hard_negatives = obj["hard_negatives"].get<std::vector<std::string>>();
      if (obj.contains("query_instruction"))
        triple.pair.instruction.query_instruction = obj["query_instruction"].get<std::string>();
      if (obj.contains("passage_instruction"))
        triple.pair.instruction.passage_instruction = obj["passage_instruction"].get<std::string>();
      if (obj.contains("origin"))
        triple.pair.origin = pair_origin_from_string(obj["origin"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    check_triple(triple, where);
    triples.push_back(std::move(triple));
  }
  return triples;
}

std::vector<TrainingPair> pairs_of(const std::vector<TrainingTriple>& triples) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(triples.size());
  for (const auto& triple : triples) pairs.push_back(triple.pair);
  return pairs;
}

std::vector<TrainingTriple> triples_of(const std::vector<TrainingPair>& pairs) {
  std::vector<TrainingTriple> triples;
  triples.reserve(pairs.size());
  for (const auto& pair : pairs) triples.push_back({pair, {}});
  return triples;
}

}  // namespace dret
