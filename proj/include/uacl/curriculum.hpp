#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uacl/encoding.hpp"
#include "uacl/env_config.hpp"
#include "uacl/reward_dsl.hpp"

namespace uacl {

// One curriculum unit: an environment override, a reward expression, and a
// pass threshold over a sliding window of episode rewards.
struct Stage {
  std::string name;
  int num_ues = 0;
  int num_bs = 0;
  Vec2 ue_velocity_range{0.0, 0.0};
  int episode_len = 100;
  std::optional<std::vector<Vec2>> bs_positions;
  std::string reward;  // DSL text; parses by construction after validation
  double threshold = 0.0;
  int window = 20;
  long max_env_steps = 0;

  friend bool operator==(const Stage&, const Stage&) = default;
};

// The target config with one stage's overrides applied (grid BS placement
// when the stage names none).
EnvConfig stage_env(const Stage& stage, const EnvConfig& target);

struct Curriculum {
  enum class Provenance { Scripted, Llm, Replay };
  std::vector<Stage> stages;
  Provenance provenance = Provenance::Scripted;
  std::string raw_text;  // generating text, kept for audit
};

const char* provenance_name(Curriculum::Provenance p);

// Tunables of the scripted four-stage curriculum. The thresholds and
// budgets are openly configurable; the stage structure is fixed.
struct ScriptedOptions {
  std::array<double, 4> thresholds{1.8, 3.2, 0.5, 0.6};
  std::array<int, 4> windows{20, 20, 20, 20};
  std::array<long, 4> budgets{50000, 50000, 100000, 300000};
  Vec2 slow_velocity{0.5, 1.5};  // stage 2 "slow" mobility
};

// The deterministic four-stage curriculum: basic connectivity (2 UEs, 1 BS,
// stationary), mobility (2x2, slow), preliminary QoE (3 UEs, 2 BSs), then
// the target task. Throws ConfigError when the target is smaller than the
// early stages need.
Curriculum scripted_curriculum(const EnvConfig& target,
                               const ScriptedOptions& opts = {});

nlohmann::json curriculum_to_json(const Curriculum& c);
nlohmann::json stage_to_json(const Stage& s);

// Strict per-stage schema: unknown keys rejected, every field typed.
Stage stage_from_json(const nlohmann::json& j, std::size_t index);

// Range checks plus dims-fit-encoding and reward-parses gates.
void validate_stage(const Stage& s, const EncodingSpec& spec,
                    std::size_t index);

// Strict schema validation (unknown keys rejected, every field typed and
// range-checked, reward must parse, stage dims must fit the encoding, the
// final stage must equal the target task). Throws ConfigError.
Curriculum curriculum_from_json(const nlohmann::json& j,
                                const EncodingSpec& spec,
                                const EnvConfig& target);

// Per-episode aggregates a trainer reports back.
struct EpisodeMetrics {
  double mean_reward = 0.0;    // stage reward, averaged over the episode
  double mean_qoe = 0.0;       // Eq-style mean QoE basis, for metrics
  double connected_fraction = 0.0;
  int dropouts = 0;
  int steps = 0;
  long env_step_end = 0;  // trainer-global env step count at episode end
};

// One visit to one stage. A fresh trace opens each time the orchestrator
// (re-)enters a stage, so histories stay append-only across regressions.
struct StageTrace {
  std::string stage_name;
  int stage_index = 0;
  int visit = 0;
  std::vector<EpisodeMetrics> episodes;
  long env_steps = 0;
  std::size_t last_review_episode = 0;  // stagnation cooldown marker
};

struct RewardHistory {
  std::vector<StageTrace> traces;
};

enum class Progress { Advance, Continue, Stagnant };

struct ProgressPolicy {
  double slope_tol = 1e-3;  // reward/episode over the last 2W episodes
};

// Least-squares slope of y against x = 0..n-1.
double least_squares_slope(std::span<const double> y);

// Advance when the last-W mean reaches the threshold; Stagnant when 2W
// episodes since the last review show a flat trend below threshold, or the
// stage step budget is exhausted; Continue otherwise.
Progress check_progress(const StageTrace& trace, const Stage& stage,
                        const ProgressPolicy& policy);

struct Adjustment {
  enum class Action { Keep, Adjust };
  Action action = Action::Keep;
  std::vector<Stage> stages;  // replacement tail when action == Adjust
  std::string raw_text;
};

// Replaces stages from index max(s-1, 0) onward with the adjustment's
// stages and re-validates the whole curriculum. Throws ConfigError when the
// result violates the schema; callers keep the original in that case.
Curriculum apply_adjustment(const Curriculum& curriculum, int s,
                            const Adjustment& adj, const EncodingSpec& spec,
                            const EnvConfig& target);

struct ChunkResult {
  std::vector<EpisodeMetrics> episodes;  // episodes completed this chunk
  long env_steps = 0;
};

// What the orchestrator drives. The PPO trainer implements this; tests
// drive the control flow with scripted fakes.
class StageTrainer {
 public:
  virtual ~StageTrainer() = default;
  // Trains roughly one PPO update worth of steps on the given stage.
  virtual ChunkResult train_chunk(const Stage& stage, int stage_index,
                                  int visit) = 0;
  // Identity of the policy tensor shapes; asserted constant at every stage
  // transition.
  virtual std::string policy_signature() const = 0;
};

class CurriculumProvider {
 public:
  virtual ~CurriculumProvider() = default;
  virtual Curriculum generate(const EnvConfig& target,
                              const EncodingSpec& spec) = 0;
  virtual Adjustment review(const RewardHistory& history,
                            const Curriculum& curriculum, int stage_index) = 0;
  virtual const char* name() const = 0;
};

// Deterministic stand-in for the LLM: generates the scripted curriculum and
// answers every review with an eased clone of the failing stage
// (threshold * 0.75) inserted before it.
class ScriptedProvider : public CurriculumProvider {
 public:
  explicit ScriptedProvider(ScriptedOptions opts = {}) : opts_(opts) {}
  Curriculum generate(const EnvConfig& target,
                      const EncodingSpec& spec) override;
  Adjustment review(const RewardHistory& history, const Curriculum& curriculum,
                    int stage_index) override;
  const char* name() const override { return "scripted"; }

 private:
  ScriptedOptions opts_;
};

struct OrchestratorConfig {
  long total_step_budget = 1000000;
  ProgressPolicy progress;
};

struct CurriculumRunResult {
  enum class Status { Completed, BudgetExhausted, ProviderFailed };
  Status status = Status::Completed;
  RewardHistory history;
  Curriculum executed;  // as executed, adjustments included
  long total_env_steps = 0;
  int adjustments = 0;
  std::string error;
};

const char* status_name(CurriculumRunResult::Status s);

// The stage-progression loop: train on stage s, advance on threshold,
// review-and-adjust on stagnation with regression to max(s-1, 0), stop when
// every stage passed or the global budget runs out. Provider failures abort
// with the history preserved.
CurriculumRunResult run_curriculum(StageTrainer& trainer, Curriculum curriculum,
                                   const OrchestratorConfig& cfg,
                                   CurriculumProvider& provider,
                                   const EncodingSpec& spec,
                                   const EnvConfig& target);

struct BaselineResult {
  RewardHistory history;  // single trace named "baseline"
  int updates = 0;
  long total_env_steps = 0;
};

// Direct training on the target task with the mean-QoE reward for
// floor(budget / rollout_len) update chunks.
BaselineResult train_baseline(StageTrainer& trainer, const EnvConfig& target,
                              long budget, long rollout_len);

}  // namespace uacl
