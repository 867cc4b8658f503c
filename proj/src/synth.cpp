#include "dret/synth.hpp"

#include <cstdlib>
#include <set>
#include <sstream>

#include "dret/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dret {

const std::vector<std::string> kQueryTypeOptions = {"extremely long-tail", "long-tail", "common"};
const std::vector<std::string> kQueryLengthOptions = {"less than 5 words", "5-10 words",
                                                      "at least 10 words"};
const std::vector<std::string> kClarityOptions = {"clear", "understandable with some effort",
                                                  "ambiguous"};
const std::vector<std::string> kNumWordsOptions = {"50 words", "50-100 words", "200 words",
                                                   "300 words", "400 words"};
const std::vector<std::string> kDifficultyOptions = {"high school", "college", "PhD"};

SynthKnobs sample_knobs(Rng& rng) {
  SynthKnobs knobs;
  knobs.query_type = kQueryTypeOptions[rng.below(kQueryTypeOptions.size())];
  knobs.query_length = kQueryLengthOptions[rng.below(kQueryLengthOptions.size())];
  knobs.clarity = kClarityOptions[rng.below(kClarityOptions.size())];
  knobs.num_words = kNumWordsOptions[rng.below(kNumWordsOptions.size())];
  knobs.difficulty = kDifficultyOptions[rng.below(kDifficultyOptions.size())];
  return knobs;
}

std::string task_generation_prompt() {
  return
      "Brainstorm a list of potentially useful biomedical text retrieval tasks.\n"
      "\n"
      "Here are a few examples for your reference:\n"
      "1. Provided a scientific claim as query, retrieve documents that help verify or refute the "
      "claim.\n"
      "2. Search for documents that answers a FAQ-style query on children's nutrition.\n"
      "\n"
      "Please adhere to the following guidelines:\n"
      "1. Specify what the query is, and what the desired documents are.\n"
      "2. Each retrieval task should cover a wide range of queries, and should not be too "
      "specific.\n"
      "3. Focus on biomedical related topics.\n"
      "\n"
      "Your output should always be a python list of strings only, with about 20 elements, and "
      "each element corresponds to a distinct retrieval task in one sentence. Do not explain "
      "yourself or output anything else. Be creative!";
}

std::string example_generation_prompt(const std::string& task, const SynthKnobs& knobs) {
  return
      "You have been assigned a biomedical retrieval task: " + task + "\n"
      "\n"
      "Your mission is to write one biomedical text retrieval example for this task in JSON "
      "format. The JSON object must contain the following keys:\n"
      "1. \"user_query\": a string, a random user search query specified by the retrieval task.\n"
      "2. \"positive_document\": a string, a relevant document for the user query.\n"
      "3. \"hard_negative_document\": a string, a hard negative document that only appears "
      "relevant to the query.\n"
      "\n"
      "Please adhere to the following guidelines:\n"
      "1. The \"user_query\" should be " + knobs.query_type + ", " + knobs.query_length + ", " +
      knobs.clarity + ", and diverse in topic.\n"
      "2. All documents should be at least " + knobs.num_words + " words long.\n"
      "3. Both the query and documents should be in English.\n"
      "4. Both the query and documents require " + knobs.difficulty +
      " level education to understand.\n"
      "\n"
      "Your output must always be a JSON object only, do not explain yourself or output anything "
      "else. Be creative!";
}

std::string instance_query_prompt(const std::string& passage) {
  return
      "Generate one relevant search query based on the context of the following passage. Output "
      "the query only, with no explanation.\n"
      "\n"
      "Passage: " + passage;
}

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> parse_string_list(const std::string& reply) {
  const std::string text = strip(reply);
  // JSON first; otherwise a hand parse that also accepts Python single quotes.
  try {
    const auto parsed = nlohmann::json::parse(text);
    if (parsed.is_array()) {
      std::vector<std::string> out;
      for (const auto& item : parsed) {
        if (!item.is_string()) throw DataError("list item is not a string");
        out.push_back(item.get<std::string>());
      }
      return out;
    }
  } catch (const nlohmann::json::parse_error&) {
  }
  if (text.empty() || text.front() != '[' || text.back() != ']')
    throw DataError("reply is not a list");
  std::vector<std::string> out;
  std::size_t i = 1;
  const std::size_t end = text.size() - 1;
  while (i < end) {
    while (i < end && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ','))
      ++i;
    if (i >= end) break;
    const char quote = text[i];
    if (quote != '\'' && quote != '"') throw DataError("reply is not a list of strings");
    ++i;
    std::string item;
    while (i < end && text[i] != quote) {
      if (text[i] == '\\' && i + 1 < end) {
        ++i;
        switch (text[i]) {
          case 'n': item += '\n'; break;
          case 't': item += '\t'; break;
          default: item += text[i];
        }
      } else {
        item += text[i];
      }
      ++i;
    }
    if (i >= end) throw DataError("unterminated string in list reply");
    ++i;  // closing quote
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<std::string> generate_tasks(ChatClient& client, int retries) {
  const std::vector<ChatMessage> messages = {{"user", task_generation_prompt()}};
  std::string reply;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    reply = client.complete(messages, 1.0);
    try {
      return parse_string_list(reply);
    } catch (const DataError&) {
    }
  }
  throw RemoteError("task generation reply is not a list of strings; raw reply: " + reply);
}

std::vector<std::string> generate_task_pool(ChatClient& client, std::size_t count,
                                            std::size_t max_rounds) {
  std::vector<std::string> tasks;
  std::set<std::string> seen;
  for (std::size_t round = 0; round < max_rounds && tasks.size() < count; ++round) {
    for (auto& task : generate_tasks(client)) {
      if (tasks.size() >= count) break;
      if (seen.insert(task).second) tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

std::optional<SynthExample> generate_example(ChatClient& client, const std::string& task,
                                             const SynthKnobs& knobs, int retries) {
  if (task.empty()) throw UsageError("generate_example requires a non-empty task");
  const std::vector<ChatMessage> messages = {{"user", example_generation_prompt(task, knobs)}};
  for (int attempt = 0; attempt <= retries; ++attempt) {
    const std::string reply = client.complete(messages, 1.0);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(strip(reply));
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (!obj.is_object() || obj.size() != 3 || !obj.contains("user_query") ||
        !obj.contains("positive_document") || !obj.contains("hard_negative_document"))
      continue;
    if (!obj["user_query"].is_string() || !obj["positive_document"].is_string() ||
        !obj["hard_negative_document"].is_string())
      continue;
    SynthExample example;
    example.user_query = obj["user_query"].get<std::string>();
    example.positive_document = obj["positive_document"].get<std::string>();
    example.hard_negative_document = obj["hard_negative_document"].get<std::string>();
    example.task = task;
    if (example.user_query.empty() || example.positive_document.empty() ||
        example.hard_negative_document.empty() ||
        example.positive_document == example.hard_negative_document)
      continue;
    return example;
  }
  return std::nullopt;
}

std::optional<TrainingPair> generate_instance_query(ChatClient& client, const std::string& passage,
                                                    InstanceDomain domain, int retries) {
  if (passage.empty()) throw UsageError("generate_instance_query requires a non-empty passage");
  const std::vector<ChatMessage> messages = {{"user", instance_query_prompt(passage)}};
  for (int attempt = 0; attempt <= retries; ++attempt) {
    const std::string query = strip(client.complete(messages, 1.0));
    if (query.empty()) continue;
    TrainingPair pair;
    pair.query = query;
    pair.positive = passage;
    pair.origin = PairOrigin::synthetic;
    pair.instruction.query_instruction =
        domain == InstanceDomain::pubmed ? kPubmedInstruction : kCovidInstruction;
    return pair;
  }
  return std::nullopt;
}

HttpChatClient::HttpChatClient(std::string endpoint_url, std::string model)
    : endpoint_url_(std::move(endpoint_url)), model_(std::move(model)) {
  if (endpoint_url_.empty()) throw UsageError("chat endpoint URL must be non-empty");
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages,
                                     double temperature) {
  // Split scheme://host[:port] from the request path.
  const auto scheme_end = endpoint_url_.find("://");
  if (scheme_end == std::string::npos)
    throw UsageError("endpoint URL must include a scheme: " + endpoint_url_);
  const auto path_start = endpoint_url_.find('/', scheme_end + 3);
  const std::string base =
      path_start == std::string::npos ? endpoint_url_ : endpoint_url_.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/v1/chat/completions" : endpoint_url_.substr(path_start);

  nlohmann::json body;
  body["model"] = model_;
  body["temperature"] = temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  httplib::Client client(base);
  client.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (const char* token = std::getenv("DRET_API_KEY"))
    headers.emplace("Authorization", std::string("Bearer ") + token);
  const auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw RemoteError("cannot reach chat endpoint " + endpoint_url_);
  if (res->status != 200)
    throw RemoteError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                      res->body);
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::string StubChatClient::complete(const std::vector<ChatMessage>& messages, double) {
  if (messages.empty()) throw UsageError("empty message list");
  const std::string& prompt = messages.back().content;
  ++calls_;
  if (prompt.rfind("Brainstorm a list", 0) == 0) {
    static const std::vector<std::string> topics = {
        "neurology",      "cardiology",  "oncology",       "immunology", "epidemiology",
        "pharmacology",   "genetics",    "endocrinology",  "pediatrics", "radiology",
        "rheumatology",   "pathology",   "virology",       "toxicology", "dermatology",
        "hematology",     "nephrology",  "ophthalmology",  "psychiatry", "anesthesiology"};
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < topics.size(); ++i) {
      const std::size_t variant = (calls_ - 1) * topics.size() + i;
      list.push_back("Search for articles discussing the latest advancements in " + topics[i] +
                     " (scenario " + std::to_string(variant) + ").");
    }
    return list.dump();
  }
  if (prompt.rfind("You have been assigned", 0) == 0) {
    const auto task_start = prompt.find(": ") + 2;
    const auto task_end = prompt.find('\n', task_start);
    const std::string task = prompt.substr(task_start, task_end - task_start);
    const std::uint64_t tag = rng_.next() % 100000;
    nlohmann::json obj;
    obj["user_query"] = "stub query " + std::to_string(tag) + " for: " + task;
    obj["positive_document"] = "Stub positive document " + std::to_string(tag) +
                               " answering the query derived from the task: " + task;
    obj["hard_negative_document"] = "Stub hard negative document " + std::to_string(tag) +
                                    " that merely resembles material about: " + task;
    return obj.dump();
  }
  if (prompt.rfind("Generate one relevant search query", 0) == 0) {
    // Echo the first 5 words of the passage.
    const auto passage_start = prompt.find("Passage: ") + 9;
    std::istringstream ss(prompt.substr(passage_start));
    std::string word, query;
    for (int i = 0; i < 5 && ss >> word; ++i) {
      if (!query.empty()) query += ' ';
      query += word;
    }
    return query;
  }
  throw RemoteError("stub client does not recognize this prompt");
}

}  // namespace dret
