#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "uacl/curriculum.hpp"

namespace uacl {

struct PromptBundle {
  enum class Kind { GenerateCurriculum, ReviewProgress };
  Kind kind = Kind::GenerateCurriculum;
  std::string system_text;
  std::string user_text;
};

// Deterministic rendering of the target task for the curriculum-generation
// prompt: observation/action spaces, objective and constraints, the reward
// primitives, and the required curriculum JSON schema. Pure function of its
// inputs. Template text lives in docs/prompts.md.
PromptBundle describe(const EnvConfig& target, const EncodingSpec& spec);

// Reward-history summary plus the current curriculum, asking for a
// keep/adjust decision in the documented JSON shape.
PromptBundle describe_review(const RewardHistory& history,
                             const Curriculum& curriculum, int stage_index,
                             const EncodingSpec& spec);

std::string render_history(const RewardHistory& history);

// First balanced {...} object inside free text (string-literal aware).
// Returns an empty string when none exists.
std::string extract_first_json_object(const std::string& text);

std::uint64_t fnv1a64(std::string_view text);
std::string request_hash(std::string_view request_body);

// Transport for one chat-completions exchange: takes the request body JSON,
// returns the raw response body JSON.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string post(const std::string& request_body) = 0;
  virtual const char* name() const = 0;
};

// Live HTTP POST to <base_url>/v1/chat/completions with a bearer token from
// $LLM_API_KEY. Every instance bumps a process-wide request counter, which
// is how tests assert that replay mode stays off the network.
class HttpTransport : public ChatTransport {
 public:
  explicit HttpTransport(std::string base_url, int timeout_s = 60);
  std::string post(const std::string& request_body) override;
  const char* name() const override { return "http"; }

  static long total_requests() { return request_count_.load(); }

 private:
  std::string base_url_;
  int timeout_s_;
  static std::atomic<long> request_count_;
};

struct CassetteRecord {
  std::string request_hash;
  std::string request;
  std::string response;
  std::string timestamp;
};

// Append-only JSON-lines file of recorded exchanges.
std::vector<CassetteRecord> load_cassette(const std::filesystem::path& path);
void append_cassette(const std::filesystem::path& path,
                     const CassetteRecord& record);

// Wraps a live transport and records each exchange.
class RecordingTransport : public ChatTransport {
 public:
  RecordingTransport(std::shared_ptr<ChatTransport> inner,
                     std::filesystem::path cassette);
  std::string post(const std::string& request_body) override;
  const char* name() const override { return "record"; }

 private:
  std::shared_ptr<ChatTransport> inner_;
  std::filesystem::path cassette_;
};

// Pure playback: answers only requests whose hash was recorded, in file
// order per hash. Performs zero network activity by construction.
class ReplayTransport : public ChatTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& cassette);
  std::string post(const std::string& request_body) override;
  const char* name() const override { return "replay"; }
  long lookups() const { return lookups_; }

 private:
  std::map<std::string, std::deque<std::string>> by_hash_;
  long lookups_ = 0;
};

struct LlmOptions {
  std::string model = "gpt-4";
  double temperature = 0.2;
  int max_attempts = 3;
};

// Chat client that turns prompts into validated curriculum objects. On an
// unusable response it re-prompts with the validation error appended, up to
// max_attempts, then throws ProviderError carrying every raw response.
class LlmClient {
 public:
  LlmClient(std::shared_ptr<ChatTransport> transport, LlmOptions options);

  Curriculum generate_curriculum(const PromptBundle& prompt,
                                 const EncodingSpec& spec,
                                 const EnvConfig& target);
  Adjustment review_progress(const PromptBundle& prompt,
                             const EncodingSpec& spec);

 private:
  std::string exchange(std::vector<std::pair<std::string, std::string>>&
                           messages);  // returns message content

  std::shared_ptr<ChatTransport> transport_;
  LlmOptions options_;
};

// CurriculumProvider backed by the chat client.
class LlmProvider : public CurriculumProvider {
 public:
  LlmProvider(std::shared_ptr<ChatTransport> transport, LlmOptions options,
              EncodingSpec spec);
  Curriculum generate(const EnvConfig& target,
                      const EncodingSpec& spec) override;
  Adjustment review(const RewardHistory& history, const Curriculum& curriculum,
                    int stage_index) override;
  const char* name() const override { return "llm"; }

 private:
  LlmClient client_;
  EncodingSpec spec_;
};

}  // namespace uacl
