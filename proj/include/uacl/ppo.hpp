#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uacl/encoding.hpp"
#include "uacl/rng.hpp"

namespace uacl {

// Policy/value network: shared trunk in -> hidden -> hidden (tanh), then a
// logits head (one Bernoulli logit per (i,j) pair) and a scalar value head.
// Parameters live in one flat vector so the optimizer, the gradient clip and
// the finite-difference checks can treat them uniformly.
struct PolicyParams {
  int in = 0;
  int hidden = 64;
  int out_policy = 0;
  std::vector<double> w;  // [w1 | b1 | w2 | b2 | w3 | b3 | w4 | b4]

  static PolicyParams init(int in, int out_policy, Rng& rng, int hidden = 64);

  std::size_t size() const { return w.size(); }
  std::size_t expected_size() const;

  // Offsets into the flat vector; weight blocks are row-major (out x in).
  std::size_t o_w1() const { return 0; }
  std::size_t o_b1() const { return o_w1() + std::size_t(hidden) * in; }
  std::size_t o_w2() const { return o_b1() + hidden; }
  std::size_t o_b2() const { return o_w2() + std::size_t(hidden) * hidden; }
  std::size_t o_w3() const { return o_b2() + hidden; }
  std::size_t o_b3() const { return o_w3() + std::size_t(out_policy) * hidden; }
  std::size_t o_w4() const { return o_b3() + out_policy; }
  std::size_t o_b4() const { return o_w4() + hidden; }
};

struct ForwardResult {
  std::vector<double> logits;
  double value = 0.0;
  // cached activations, consumed by the backward pass
  std::vector<double> h1, h2;
};

ForwardResult forward(const PolicyParams& params,
                      std::span<const double> obs);

struct SampledAction {
  std::vector<std::uint8_t> bits;  // length = logits length; masked bits 0
  double log_prob = 0.0;           // joint over valid bits only
};

// Each valid bit ~ Bernoulli(sigmoid(logit)); masked bits are forced to 0
// and consume no randomness.
SampledAction sample_action(std::span<const double> logits,
                            const ActionMask& mask, Rng& rng);

// Joint log-probability of given bits under the logits, valid bits only.
double action_log_prob(std::span<const double> logits,
                       std::span<const std::uint8_t> bits,
                       const ActionMask& mask);

// Sum of per-bit binary entropies over valid bits.
double action_entropy(std::span<const double> logits, const ActionMask& mask);

// Reverse-recursion GAE. dones[t] marks s_{t+1} terminal; bootstrap_value
// estimates v(s_T) for the step after the last one.
void gae(std::span<const double> rewards, std::span<const double> values,
         std::span<const std::uint8_t> dones, double gamma, double lambda,
         double bootstrap_value, std::vector<double>& advantages,
         std::vector<double>& returns);

struct PpoConfig {
  double lr = 0.0005;
  int minibatch = 64;
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int rollout_len = 2048;
  int epochs_per_update = 10;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;
};

void validate(const PpoConfig& cfg);
nlohmann::json to_json(const PpoConfig& cfg);
PpoConfig ppo_config_from_json(const nlohmann::json& j);

// One trajectory segment of experience plus GAE results.
class RolloutBuffer {
 public:
  RolloutBuffer(int obs_dim, int act_dim);

  void push(std::span<const double> obs, std::span<const std::uint8_t> bits,
            std::span<const std::uint8_t> mask, double log_prob, double value,
            double reward, bool done);

  // Computes advantages/returns; idempotent guard, must run before update().
  void finalize(double bootstrap_value, double gamma, double lambda);

  std::size_t size() const { return reward_.size(); }
  bool finalized() const { return finalized_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  std::span<const double> obs(std::size_t t) const;
  std::span<const std::uint8_t> bits(std::size_t t) const;
  std::span<const std::uint8_t> mask(std::size_t t) const;
  double log_prob(std::size_t t) const { return log_prob_[t]; }
  double value(std::size_t t) const { return value_[t]; }
  double reward(std::size_t t) const { return reward_[t]; }
  bool done(std::size_t t) const { return done_[t] != 0; }
  double advantage(std::size_t t) const { return advantage_[t]; }
  double ret(std::size_t t) const { return return_[t]; }

  std::span<double> advantages() { return advantage_; }
  void clear();

 private:
  int obs_dim_;
  int act_dim_;
  std::vector<double> obs_;
  std::vector<std::uint8_t> bits_;
  std::vector<std::uint8_t> mask_;
  std::vector<double> log_prob_, value_, reward_;
  std::vector<std::uint8_t> done_;
  std::vector<double> advantage_, return_;
  bool finalized_ = false;
};

// In-place shift/scale to mean 0, std 1 (denominator guarded by 1e-8).
void normalize(std::span<double> v);

struct LossStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped-surrogate PPO loss over the given sample indices:
//   -mean(min(r A, clip(r, 1-eps, 1+eps) A))
//   + value_coef * mean((v - ret)^2) - entropy_coef * mean(entropy).
// When grad_out is non-null it receives the exact analytic gradient
// (clipped branch contributes zero policy gradient where the clip is
// active). Throws InvariantError naming the term on any non-finite
// intermediate.
LossStats ppo_loss(const PolicyParams& params, const RolloutBuffer& buffer,
                   std::span<const int> indices, const PpoConfig& cfg,
                   std::vector<double>* grad_out);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Scales the gradient so its global L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_grad_norm(std::span<double> grad, double max_norm);

void adam_step(PolicyParams& params, AdamState& state,
               std::span<const double> grad, double lr);

struct UpdateStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm
  int minibatches = 0;
};

// Full PPO update: normalizes advantages across the buffer, then runs
// epochs_per_update passes of shuffled minibatches with Adam steps.
UpdateStats update(PolicyParams& params, AdamState& adam,
                   RolloutBuffer& buffer, const PpoConfig& cfg, Rng& rng);

// JSON model file with explicit shapes and full-precision weights.
void save_model(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_model(const std::filesystem::path& path);

}  // namespace uacl
