#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dret/corpus.hpp"

namespace dret {

// Instruction templates carry a "{}" slot that render_instruction fills with
// the raw text.
inline constexpr const char* kPassageInstructionTemplate = "Represent this passage. Passage: {}";
inline constexpr const char* kPretrainQueryInstructionTemplate =
    "Given a query, retrieve passages that are relevant to the query. Query: {}";

std::string render_instruction(const std::string& instruction_template, const std::string& text);

struct Instruction {
  std::string query_instruction = kPretrainQueryInstructionTemplate;
  std::string passage_instruction = kPassageInstructionTemplate;
  bool operator==(const Instruction&) const = default;
};

enum class PairOrigin { title_abstract, crop, labeled, synthetic };

std::string to_string(PairOrigin origin);
PairOrigin pair_origin_from_string(const std::string& s);

struct TokenSpan {
  std::size_t begin = 0;  // token index, inclusive
  std::size_t end = 0;    // token index, exclusive
  bool operator==(const TokenSpan&) const = default;
};

struct TrainingPair {
  std::string query;
  std::string positive;
  Instruction instruction;
  PairOrigin origin = PairOrigin::labeled;
  // Populated for origin == crop only: the whitespace-token spans of the
  // source document the two sides were cut from.
  TokenSpan query_span;
  TokenSpan positive_span;
};

struct TrainingTriple {
  TrainingPair pair;
  std::vector<std::string> hard_negatives;
};

// One pair per titled document (query = title, positive = body); untitled
// documents are skipped.
std::vector<TrainingPair> title_abstract_pairs(const Corpus& corpus);

// Two disjoint whitespace-token spans per document, each span length in
// [min_len, max_len]; documents shorter than 2*min_len tokens are skipped.
// Deterministic for a fixed seed.
std::vector<TrainingPair> crop_pairs(const Corpus& corpus, std::uint64_t seed,
                                     std::size_t min_len = 32, std::size_t max_len = 128);

enum class SimilarityLabel { entail, contradict, neutral };

struct SimilarityRecord {
  std::string sentence_a;
  std::string sentence_b;
  SimilarityLabel label = SimilarityLabel::neutral;
};

struct QaRecord {
  std::string question;
  std::string gold_passage;
};

struct DialogueRecord {
  std::string user_query;
  std::string answer;
};

// entail/similar partners become positives for their anchor; contradict
// partners of the same anchor attach as hard negatives; neutral dropped.
std::vector<TrainingTriple> convert_similarity_records(const std::vector<SimilarityRecord>& records);
std::vector<TrainingTriple> convert_qa_records(const std::vector<QaRecord>& records);
std::vector<TrainingTriple> convert_dialogue_records(const std::vector<DialogueRecord>& records);

// Overwrites every pair's instruction with (query_instruction, default
// passage instruction). Throws UsageError on an empty instruction.
void attach_instructions(std::vector<TrainingPair>& pairs, const std::string& query_instruction);
void attach_instructions(std::vector<TrainingTriple>& triples,
                         const std::string& query_instruction);

// JSONL persistence shared by pair and triple files: fields query, positive,
// hard_negatives, query_instruction, passage_instruction, origin.
void save_triples(const std::vector<TrainingTriple>& triples, const std::string& path);
std::vector<TrainingTriple> load_triples(const std::string& path);

std::vector<TrainingPair> pairs_of(const std::vector<TrainingTriple>& triples);
std::vector<TrainingTriple> triples_of(const std::vector<TrainingPair>& pairs);

}  // namespace dret
