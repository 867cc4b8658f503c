#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dret/pairgen.hpp"
#include "dret/rng.hpp"

namespace dret {

struct ChatMessage {
  std::string role;
  std::string content;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages, double temperature) = 0;
};

// Speaks the chat-completions JSON protocol: POST {model, messages,
// temperature} to the endpoint, Bearer token read from DRET_API_KEY.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(std::string endpoint_url, std::string model);
  std::string complete(const std::vector<ChatMessage>& messages, double temperature) override;

 private:
  std::string endpoint_url_;
  std::string model_;
};

// Deterministic offline stand-in: recognizes the three prompt shapes and
// fabricates well-formed replies, so the whole pipeline runs with no network.
class StubChatClient : public ChatClient {
 public:
  explicit StubChatClient(std::uint64_t seed = 0) : rng_(seed) {}
  std::string complete(const std::vector<ChatMessage>& messages, double temperature) override;

 private:
  Rng rng_;
  std::uint64_t calls_ = 0;
};

struct SynthKnobs {
  std::string query_type;
  std::string query_length;
  std::string clarity;
  std::string num_words;
  std::string difficulty;
};

extern const std::vector<std::string> kQueryTypeOptions;
extern const std::vector<std::string> kQueryLengthOptions;
extern const std::vector<std::string> kClarityOptions;
extern const std::vector<std::string> kNumWordsOptions;
extern const std::vector<std::string> kDifficultyOptions;

SynthKnobs sample_knobs(Rng& rng);
inline SynthKnobs sample_knobs(std::uint64_t seed) {
  Rng rng(seed);
  return sample_knobs(rng);
}

struct SynthExample {
  std::string user_query;
  std::string positive_document;
  std::string hard_negative_document;
  std::string task;
};

enum class InstanceDomain { pubmed, covid };

inline constexpr const char* kPubmedInstruction =
    "Given a question, retrieve Pubmed passages that answer the question.";
inline constexpr const char* kCovidInstruction =
    "Given a query on COVID-19, retrieve COVID-19 related articles that answer the query.";

std::string task_generation_prompt();
std::string example_generation_prompt(const std::string& task, const SynthKnobs& knobs);
std::string instance_query_prompt(const std::string& passage);

// Parses a JSON or Python-style list of strings.
std::vector<std::string> parse_string_list(const std::string& reply);

// Single prompt issue; non-list reply after `retries` extra attempts is a
// RemoteError carrying the raw reply.
std::vector<std::string> generate_tasks(ChatClient& client, int retries = 0);

// Re-issues the task prompt until `count` distinct tasks accumulate (exact
// string dedup) or max_rounds runs out.
std::vector<std::string> generate_task_pool(ChatClient& client, std::size_t count,
                                            std::size_t max_rounds = 100);

// nullopt = discarded after exhausting retries on malformed replies.
// Transport failures propagate as RemoteError.
std::optional<SynthExample> generate_example(ChatClient& client, const std::string& task,
                                             const SynthKnobs& knobs, int retries = 3);

std::optional<TrainingPair> generate_instance_query(ChatClient& client,
                                                    const std::string& passage,
                                                    InstanceDomain domain, int retries = 3);

}  // namespace dret
