#include "uacl/llm_client.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "uacl/errors.hpp"

namespace uacl {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string primitive_list() {
  std::string out;
  for (Primitive p : all_primitives()) {
    if (!out.empty()) out += ", ";
    out += primitive_name(p);
    out += "()";
  }
  return out;
}

constexpr const char* kCurriculumSchema =
    "{\"stages\":[{\"name\":str,"
    "\"env\":{\"num_ues\":int,\"num_bs\":int,\"ue_velocity_range\":[lo,hi],"
    "\"episode_len\":int,\"bs_positions\":[[x,y],...] optional},"
    "\"reward\":str,\"threshold\":number,\"window\":int,"
    "\"max_env_steps\":int}]}";

}  // namespace

PromptBundle describe(const EnvConfig& target, const EncodingSpec& spec) {
  PromptBundle prompt;
  prompt.kind = PromptBundle::Kind::GenerateCurriculum;
  prompt.system_text =
      "You design training curricula for reinforcement learning agents that "
      "manage user association in simulated mobile networks. Respond with a "
      "single JSON object and nothing else.";

  std::ostringstream u;
  u << "Design a curriculum for the following target task.\n\n";
  u << "Target task:\n";
  u << "- " << target.num_ues
    << " user equipments (UEs) moving by random waypoint with speeds in ["
    << fmt(target.ue_velocity_range[0]) << ", "
    << fmt(target.ue_velocity_range[1]) << "] m/s\n";
  u << "- " << target.num_bs << " base stations (BSs)\n";
  u << "- episode length " << target.episode_len << " steps\n";
  u << "- objective: maximize the long-term average quality of experience "
       "(QoE) over all UEs, (1/M) * sum_ij x_ij * Q_ij\n";
  u << "- constraints: x_ij in {0,1}; a UE may hold several connections at "
       "once; a (UE, BS) pair is connectable only while its SINR is at least "
       "the configured minimum\n\n";
  u << "Agent interface (fixed across all stages):\n";
  u << "- observation: 3*M_max*N_max values, blocks [association | scaled "
       "SINR | QoE], zero-padded beyond the stage dims; M_max="
    << spec.m_max << ", N_max=" << spec.n_max << "\n";
  u << "- action: one bit per (UE, BS) pair, M_max*N_max bits, masked to the "
       "stage dims\n\n";
  u << "Stage reward expressions use this grammar:\n";
  u << "  expr := term (('+'|'-') term)* ; term := factor (('*'|'/') "
       "factor)* ; factor := NUMBER | IDENT '(' ')' | '(' expr ')' | '-' "
       "factor\n";
  u << "Available primitives: " << primitive_list() << "\n\n";
  u << "Output exactly one JSON object with this schema (no extra keys):\n";
  u << kCurriculumSchema << "\n";
  u << "Rules:\n";
  u << "- stage dims must fit within " << spec.m_max << "x" << spec.n_max
    << "\n";
  u << "- the final stage must equal the target task exactly (num_ues="
    << target.num_ues << ", num_bs=" << target.num_bs
    << ", ue_velocity_range=[" << fmt(target.ue_velocity_range[0]) << ", "
    << fmt(target.ue_velocity_range[1]) << "], episode_len="
    << target.episode_len << ")\n";
  u << "- threshold is the sliding-window mean episode reward required to "
       "advance; window is the episode count of that window\n";
  u << "- use 3 to 5 stages, easiest first\n";
  prompt.user_text = u.str();
  return prompt;
}

std::string render_history(const RewardHistory& history) {
  std::ostringstream out;
  for (const auto& trace : history.traces) {
    out << "stage " << trace.stage_index << " \"" << trace.stage_name
        << "\" visit " << trace.visit << ": episodes="
        << trace.episodes.size() << ", env_steps=" << trace.env_steps;
    if (!trace.episodes.empty()) {
      std::size_t w = std::min<std::size_t>(10, trace.episodes.size());
      double mean = 0.0;
      for (std::size_t i = trace.episodes.size() - w;
           i < trace.episodes.size(); ++i)
        mean += trace.episodes[i].mean_reward;
      out << ", mean(last " << w << ")=" << fmt(mean / w);
      out << ", rewards=[";
      std::size_t show = std::min<std::size_t>(50, trace.episodes.size());
      for (std::size_t i = trace.episodes.size() - show;
           i < trace.episodes.size(); ++i) {
        if (i != trace.episodes.size() - show) out << ", ";
        out << fmt(trace.episodes[i].mean_reward);
      }
      out << "]";
    }
    out << "\n";
  }
  return out.str();
}

PromptBundle describe_review(const RewardHistory& history,
                             const Curriculum& curriculum, int stage_index,
                             const EncodingSpec& spec) {
  PromptBundle prompt;
  prompt.kind = PromptBundle::Kind::ReviewProgress;
  prompt.system_text =
      "You adapt training curricula for reinforcement learning agents based "
      "on their reward history. Respond with a single JSON object and "
      "nothing else.";

  int restart = std::max(stage_index - 1, 0);
  std::ostringstream u;
  u << "The agent trains on the curriculum below and progress has stalled at "
       "stage " << stage_index << " (\""
    << curriculum.stages[stage_index].name << "\").\n\n";
  u << "Current curriculum:\n" << curriculum_to_json(curriculum).dump(2)
    << "\n\n";
  u << "Reward history (per-episode mean rewards):\n"
    << render_history(history) << "\n";
  u << "Respond with exactly one JSON object, either\n";
  u << "{\"action\":\"keep\"} to leave the curriculum unchanged, or\n";
  u << "{\"action\":\"adjust\",\"stages\":[...]} where the stages replace "
       "the current curriculum from stage " << restart
    << " onward. Stages use the schema " << kCurriculumSchema
    << " with dims within " << spec.m_max << "x" << spec.n_max
    << "; the final stage must remain exactly the target task.\n";
  prompt.user_text = u.str();
  return prompt;
}

std::string extract_first_json_object(const std::string& text) {
  std::size_t start = text.find('{');
  if (start == std::string::npos) return "";
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}') {
      --depth;
      if (depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return "";
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string request_hash(std::string_view request_body) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(request_body)));
  return buf;
}

std::atomic<long> HttpTransport::request_count_{0};

HttpTransport::HttpTransport(std::string base_url, int timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

std::string HttpTransport::post(const std::string& request_body) {
  request_count_.fetch_add(1);
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_s_, 0);
  client.set_read_timeout(timeout_s_, 0);
  client.set_write_timeout(timeout_s_, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv("LLM_API_KEY"))
    headers.emplace("Authorization", std::string("Bearer ") + key);
  auto res = client.Post("/v1/chat/completions", headers, request_body,
                         "application/json");
  if (!res)
    throw ProviderError("llm endpoint unreachable: " +
                        httplib::to_string(res.error()));
  if (res->status != 200)
    throw ProviderError("llm endpoint returned HTTP " +
                        std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
  return res->body;
}

namespace {

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<CassetteRecord> load_cassette(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open cassette: " + path.string());
  std::vector<CassetteRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cassette " + path.string() + " line " +
                        std::to_string(lineno) + ": " + e.what());
    }
    CassetteRecord rec;
    try {
      rec.request_hash = j.at("request_hash").get<std::string>();
      rec.request = j.at("request").get<std::string>();
      rec.response = j.at("response").get<std::string>();
      if (j.contains("timestamp"))
        rec.timestamp = j.at("timestamp").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cassette " + path.string() + " line " +
                        std::to_string(lineno) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void append_cassette(const std::filesystem::path& path,
                     const CassetteRecord& record) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw ConfigError("cannot write cassette: " + path.string());
  nlohmann::json j;
  j["request_hash"] = record.request_hash;
  j["request"] = record.request;
  j["response"] = record.response;
  j["timestamp"] = record.timestamp;
  f << j.dump() << '\n';
}

RecordingTransport::RecordingTransport(std::shared_ptr<ChatTransport> inner,
                                       std::filesystem::path cassette)
    : inner_(std::move(inner)), cassette_(std::move(cassette)) {}

std::string RecordingTransport::post(const std::string& request_body) {
  std::string response = inner_->post(request_body);
  CassetteRecord rec;
  rec.request_hash = request_hash(request_body);
  rec.request = request_body;
  rec.response = response;
  rec.timestamp = iso_timestamp();
  append_cassette(cassette_, rec);
  return response;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& cassette) {
  for (auto& rec : load_cassette(cassette))
    by_hash_[rec.request_hash].push_back(std::move(rec.response));
}

std::string ReplayTransport::post(const std::string& request_body) {
  ++lookups_;
  std::string hash = request_hash(request_body);
  auto it = by_hash_.find(hash);
  if (it == by_hash_.end() || it->second.empty())
    throw ProviderError("replay cassette has no exchange for request hash " +
                        hash);
  std::string response = std::move(it->second.front());
  it->second.pop_front();
  return response;
}

LlmClient::LlmClient(std::shared_ptr<ChatTransport> transport,
                     LlmOptions options)
    : transport_(std::move(transport)), options_(options) {}

namespace {

std::string build_request(
    const std::vector<std::pair<std::string, std::string>>& messages,
    const LlmOptions& options) {
  nlohmann::json body;
  body["model"] = options.model;
  body["temperature"] = options.temperature;
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& [role, content] : messages)
    msgs.push_back({{"role", role}, {"content", content}});
  body["messages"] = std::move(msgs);
  return body.dump();
}

std::string content_of(const std::string& response_body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(response_body);
    return j.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed chat response: ") + e.what());
  }
}

}  // namespace

Curriculum LlmClient::generate_curriculum(const PromptBundle& prompt,
                                          const EncodingSpec& spec,
                                          const EnvConfig& target) {
  std::vector<std::pair<std::string, std::string>> messages = {
      {"system", prompt.system_text}, {"user", prompt.user_text}};
  std::vector<std::string> raw_texts;
  std::string last_error;

  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    std::string content;
    try {
      content = content_of(transport_->post(build_request(messages, options_)));
    } catch (const ProviderError& e) {
      // transport-level failure: same request again
      last_error = e.what();
      continue;
    } catch (const ConfigError& e) {
      raw_texts.push_back("");
      last_error = e.what();
      messages.emplace_back("user", std::string("Your response was not "
                                                "usable: ") +
                                        e.what() + " Respond again.");
      continue;
    }
    raw_texts.push_back(content);
    std::string error;
    try {
      std::string json_text = extract_first_json_object(content);
      if (json_text.empty())
        throw ConfigError("no JSON object found in the response");
      Curriculum c = curriculum_from_json(nlohmann::json::parse(json_text),
                                          spec, target);
      c.provenance = std::string(transport_->name()) == "replay"
                         ? Curriculum::Provenance::Replay
                         : Curriculum::Provenance::Llm;
      c.raw_text = content;
      return c;
    } catch (const nlohmann::json::exception& e) {
      error = e.what();
    } catch (const ConfigError& e) {
      error = e.what();
    }
    last_error = error;
    messages.emplace_back("assistant", content);
    messages.emplace_back(
        "user", "That curriculum was rejected: " + error +
                    " Respond again with exactly one JSON object following "
                    "the schema.");
  }
  throw ProviderError("curriculum generation failed after " +
                          std::to_string(options_.max_attempts) +
                          " attempts; last error: " + last_error,
                      raw_texts);
}

Adjustment LlmClient::review_progress(const PromptBundle& prompt,
                                      const EncodingSpec& spec) {
  std::vector<std::pair<std::string, std::string>> messages = {
      {"system", prompt.system_text}, {"user", prompt.user_text}};
  std::vector<std::string> raw_texts;
  std::string last_error;

  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    std::string content;
    try {
      content = content_of(transport_->post(build_request(messages, options_)));
    } catch (const ProviderError& e) {
      last_error = e.what();
      continue;
    } catch (const ConfigError& e) {
      raw_texts.push_back("");
      last_error = e.what();
      messages.emplace_back("user", std::string("Your response was not "
                                                "usable: ") +
                                        e.what() + " Respond again.");
      continue;
    }
    raw_texts.push_back(content);
    std::string error;
    try {
      std::string json_text = extract_first_json_object(content);
      if (json_text.empty())
        throw ConfigError("no JSON object found in the response");
      nlohmann::json j = nlohmann::json::parse(json_text);
      if (!j.is_object()) throw ConfigError("review: expected a JSON object");
      for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "action" && it.key() != "stages")
          throw ConfigError("review: unknown key \"" + it.key() + "\"");
      if (!j.contains("action") || !j.at("action").is_string())
        throw ConfigError("review: \"action\" must be a string");
      std::string action = j.at("action").get<std::string>();
      Adjustment adj;
      adj.raw_text = content;
      if (action == "keep") {
        if (j.contains("stages"))
          throw ConfigError("review: \"keep\" must not carry stages");
        adj.action = Adjustment::Action::Keep;
        return adj;
      }
      if (action != "adjust")
        throw ConfigError("review: action must be \"keep\" or \"adjust\"");
      if (!j.contains("stages") || !j.at("stages").is_array() ||
          j.at("stages").empty())
        throw ConfigError(
            "review: \"adjust\" requires a non-empty \"stages\" array");
      adj.action = Adjustment::Action::Adjust;
      std::size_t i = 0;
      for (const auto& sj : j.at("stages")) {
        Stage s = stage_from_json(sj, i);
        validate_stage(s, spec, i);
        adj.stages.push_back(std::move(s));
        ++i;
      }
      return adj;
    } catch (const nlohmann::json::exception& e) {
      error = e.what();
    } catch (const ConfigError& e) {
      error = e.what();
    }
    last_error = error;
    messages.emplace_back("assistant", content);
    messages.emplace_back(
        "user", "That adjustment was rejected: " + error +
                    " Respond again with exactly one JSON object.");
  }
  throw ProviderError("progress review failed after " +
                          std::to_string(options_.max_attempts) +
                          " attempts; last error: " + last_error,
                      raw_texts);
}

LlmProvider::LlmProvider(std::shared_ptr<ChatTransport> transport,
                         LlmOptions options, EncodingSpec spec)
    : client_(std::move(transport), options), spec_(spec) {}

Curriculum LlmProvider::generate(const EnvConfig& target,
                                 const EncodingSpec& spec) {
  spec_ = spec;
  return client_.generate_curriculum(describe(target, spec), spec, target);
}

Adjustment LlmProvider::review(const RewardHistory& history,
                               const Curriculum& curriculum, int stage_index) {
  return client_.review_progress(
      describe_review(history, curriculum, stage_index, spec_), spec_);
}

}  // namespace uacl
