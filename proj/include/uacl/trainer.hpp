#pragma once

#include <optional>
#include <string>

#include "uacl/curriculum.hpp"
#include "uacl/ppo.hpp"
#include "uacl/sim.hpp"

namespace uacl {

// Drives one policy through stage environments: rollouts of rollout_len
// steps followed by a PPO update per chunk. The policy and optimizer state
// persist across stage switches (continual training); the environment is
// rebuilt deterministically whenever the stage changes.
class PpoTrainer : public StageTrainer {
 public:
  PpoTrainer(EnvConfig target, EncodingSpec spec, PpoConfig ppo,
             std::uint64_t seed);

  ChunkResult train_chunk(const Stage& stage, int stage_index,
                          int visit) override;
  std::string policy_signature() const override;

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }
  const EncodingSpec& encoding() const { return spec_; }
  const PpoConfig& ppo_config() const { return ppo_; }
  long global_env_steps() const { return global_steps_; }
  const UpdateStats& last_update() const { return last_update_; }

 private:
  void ensure_stage(const Stage& stage, int stage_index, int visit);

  EnvConfig target_;
  EncodingSpec spec_;
  PpoConfig ppo_;
  PolicyParams params_;
  AdamState adam_;
  Rng action_rng_;
  Rng shuffle_rng_;
  std::uint64_t seed_;

  std::optional<Env> env_;
  std::string stage_key_;
  RewardExpr reward_;
  ActionMask mask_;
  int env_builds_ = 0;
  long global_steps_ = 0;
  UpdateStats last_update_;

  // partial-episode accumulators, carried across chunks within a stage
  double ep_reward_ = 0.0;
  double ep_qoe_ = 0.0;
  double ep_connected_ = 0.0;
  int ep_dropouts_ = 0;
  int ep_steps_ = 0;
};

// Deterministic greedy rollout (bit on iff logit > 0) of a trained policy.
// Environments with more UEs than the encoding supports are driven through
// the partition protocol: UEs are ordered by distance to their nearest BS
// and split into balanced groups of at most m_max; the policy acts per
// group on the shared environment, re-grouped every step.
struct EvalResult {
  double mean_qoe = 0.0;            // episode-step mean of the QoE reward
  double mean_connected_ues = 0.0;  // per-step mean count
  long dropouts = 0;                // summed over all episodes
  int episodes = 0;
  long steps = 0;
};

EvalResult evaluate_policy(const PolicyParams& params,
                           const EncodingSpec& spec, const EnvConfig& env_cfg,
                           int episodes, std::uint64_t seed);

// Hard cap on the partition protocol (groups of m_max each).
constexpr int kMaxEvalGroups = 4;

}  // namespace uacl
