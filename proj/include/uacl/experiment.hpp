#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uacl/curriculum.hpp"
#include "uacl/llm_client.hpp"
#include "uacl/ppo.hpp"
#include "uacl/trainer.hpp"

namespace uacl {

struct LlmRunOptions {
  std::string endpoint = "https://api.openai.com";
  std::string model = "gpt-4";
  double temperature = 0.2;
  std::string cassette;  // required in record/replay modes
};

// One experiment description: what to train, how, and where to put it.
struct RunConfig {
  enum class Mode { Curriculum, Baseline };
  enum class ProviderKind { Scripted, Llm, Record, Replay };

  Mode mode = Mode::Curriculum;
  ProviderKind provider = ProviderKind::Scripted;
  EnvConfig env;
  PpoConfig ppo;
  EncodingSpec encoding;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  long total_step_budget = 600000;
  LlmRunOptions llm;
  ScriptedOptions curriculum_opts;
  std::optional<std::string> curriculum_file;  // explicit curriculum JSON
};

const char* mode_name(RunConfig::Mode m);
const char* provider_kind_name(RunConfig::ProviderKind p);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);  // strict
RunConfig load_run_config(const std::filesystem::path& path);

// Compact float formatting used in every emitted CSV (shortest round-trip).
std::string csv_double(double v);

// metrics.csv: one row per completed training episode.
// header: run_id,seed,phase,env_step,episode,mean_episode_reward,mean_qoe,
//         connected_fraction,dropouts
void write_metrics_csv(const std::filesystem::path& path,
                       const std::string& run_id, std::uint64_t seed,
                       const RewardHistory& history);

struct TrainOutcome {
  std::filesystem::path run_dir;
  std::string run_id;
  std::uint64_t seed = 0;
  std::string status;  // completed | budget_exhausted
  long total_env_steps = 0;
};

// Trains every seed in the config; writes per-run model.json, metrics.csv,
// manifest.json and (curriculum mode) curriculum.json. A manifest is itself
// a loadable RunConfig, so any run reproduces from its own directory.
// Throws ConfigError / ProviderError / InvariantError; callers map those to
// exit codes.
std::vector<TrainOutcome> cmd_train(const RunConfig& cfg);

struct EvalOptions {
  std::filesystem::path model_path;
  EnvConfig env;  // num_ues overridden per evaluated M
  EncodingSpec encoding;
  int ue_lo = 6;
  int ue_hi = 10;
  int episodes = 10;
  std::optional<std::uint64_t> bs_shuffle_seed;
  std::uint64_t seed = 1;
  std::filesystem::path out_csv = "eval.csv";
};

// eval.csv: one row per UE count, deterministic greedy policy.
// header: model,seed,bs_shuffle_seed,num_ues,episodes,steps,mean_qoe,
//         mean_connected_ues,dropouts
void cmd_eval(const EvalOptions& opts);

struct CompareOptions {
  std::vector<std::filesystem::path> run_dirs;
  std::optional<double> threshold;  // default: target-stage threshold
  std::optional<int> window;        // default: target-stage window
  std::filesystem::path out_dir = ".";
};

struct RunSummary {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string mode;
  long pre_target_steps = 0;     // env steps spent before the target phase
  long steps_to_threshold = -1;  // total env steps, -1 when never reached
  double final_window_mean = 0.0;
};

// Aligns the runs' target-phase reward curves on total env steps and
// reports steps-to-threshold per run. Writes compare.csv (curves) and
// compare_summary.csv (per-run rows plus per-mode means and the
// baseline-minus-curriculum delta); returns the per-run summaries.
std::vector<RunSummary> cmd_compare(const CompareOptions& opts);

// First total-env-step at which the W-episode sliding mean of rewards
// reaches the threshold; -1 when it never does. Points are (env_step,
// episode_reward) in order.
long steps_to_threshold(
    const std::vector<std::pair<long, double>>& episode_points,
    double threshold, int window);

}  // namespace uacl
