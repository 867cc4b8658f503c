#pragma once

#include <stdexcept>
#include <string>

namespace dret {

// Invalid flags, bad config keys, malformed command lines.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data: corpora, qrels, runs, checkpoints.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures talking to an external chat-completion endpoint.
struct RemoteError : std::runtime_error {
  explicit RemoteError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dret
