#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace uacl {

// Invalid configuration, malformed scenario/curriculum/model files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reward-DSL parse failure. Carries the byte offset of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& msg)
      : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// LLM endpoint failure: network trouble after retries, or unusable responses.
// Keeps every raw response text seen so a failed exchange can be audited.
class ProviderError : public std::runtime_error {
 public:
  explicit ProviderError(const std::string& msg,
                         std::vector<std::string> raw_responses = {})
      : std::runtime_error(msg), raw_responses_(std::move(raw_responses)) {}
  const std::vector<std::string>& raw_responses() const {
    return raw_responses_;
  }

 private:
  std::vector<std::string> raw_responses_;
};

// A broken internal invariant. Maps to CLI exit code 4.
class InvariantError : public std::logic_error {
 public:
  explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace uacl
