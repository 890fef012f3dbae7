#include "uacl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uacl/errors.hpp"

namespace uacl {

namespace {

Rng make_rng(std::uint64_t root, std::uint64_t stream) {
  return Rng(derive_seed(root, stream));
}

std::string stage_identity(const Stage& s, int stage_index, int visit) {
  std::ostringstream key;
  key << stage_index << '/' << visit << '/' << s.name << '/' << s.num_ues
      << 'x' << s.num_bs << '/' << s.ue_velocity_range[0] << '-'
      << s.ue_velocity_range[1] << '/' << s.episode_len << '/' << s.reward;
  if (s.bs_positions)
    for (const auto& p : *s.bs_positions) key << '/' << p[0] << ',' << p[1];
  return key.str();
}

}  // namespace

PpoTrainer::PpoTrainer(EnvConfig target, EncodingSpec spec, PpoConfig ppo,
                       std::uint64_t seed)
    : target_(resolved(std::move(target))),
      spec_(spec),
      ppo_(ppo),
      params_([&] {
        Rng init = make_rng(seed, 0x11);
        return PolicyParams::init(spec.observation_size(), spec.pairs(), init);
      }()),
      adam_(params_.size()),
      action_rng_(make_rng(seed, 0x22)),
      shuffle_rng_(make_rng(seed, 0x33)),
      seed_(seed) {
  validate(target_);
  validate(spec_);
  validate(ppo_);
  if (target_.num_ues > spec_.m_max || target_.num_bs > spec_.n_max)
    throw ConfigError("trainer: target task exceeds the encoding spec");
}

void PpoTrainer::ensure_stage(const Stage& stage, int stage_index, int visit) {
  std::string key = stage_identity(stage, stage_index, visit);
  if (key == stage_key_) return;
  stage_key_ = key;
  EnvConfig cfg = stage_env(stage, target_);
  if (cfg.num_ues > spec_.m_max || cfg.num_bs > spec_.n_max)
    throw ConfigError("trainer: stage \"" + stage.name +
                      "\" exceeds the encoding spec");
  env_.emplace(cfg, derive_seed(seed_, 0x100 + env_builds_));
  env_builds_ += 1;
  reward_ = parse_reward(stage.reward);
  mask_ = make_mask(cfg.num_ues, cfg.num_bs, spec_);
  // a partial episode from the previous stage is abandoned, not reported
  ep_reward_ = ep_qoe_ = ep_connected_ = 0.0;
  ep_dropouts_ = 0;
  ep_steps_ = 0;
}

ChunkResult PpoTrainer::train_chunk(const Stage& stage, int stage_index,
                                    int visit) {
  ensure_stage(stage, stage_index, visit);
  ChunkResult result;

  RolloutBuffer buffer(spec_.observation_size(), spec_.pairs());
  bool last_done = false;
  Observation obs;
  for (int step = 0; step < ppo_.rollout_len; ++step) {
    obs = encode(env_->state(), spec_);
    ForwardResult fwd = forward(params_, obs);
    SampledAction act = sample_action(fwd.logits, mask_, action_rng_);
    BitMat proposed = decode_action(act.bits, mask_);

    env_->apply(proposed);
    const NetworkState& st = env_->state();
    double reward = reward_.eval(st);

    ep_reward_ += reward;
    ep_qoe_ += base_reward(st);
    ep_connected_ += fraction_connected(st);
    ep_dropouts_ += count_dropouts(st, env_->config());
    ep_steps_ += 1;

    bool done = env_->advance();
    global_steps_ += 1;
    buffer.push(obs, act.bits, mask_.bits, act.log_prob, fwd.value, reward,
                done);

    if (done) {
      EpisodeMetrics ep;
      ep.steps = ep_steps_;
      ep.mean_reward = ep_reward_ / ep_steps_;
      ep.mean_qoe = ep_qoe_ / ep_steps_;
      ep.connected_fraction = ep_connected_ / ep_steps_;
      ep.dropouts = ep_dropouts_;
      ep.env_step_end = global_steps_;
      result.episodes.push_back(ep);
      ep_reward_ = ep_qoe_ = ep_connected_ = 0.0;
      ep_dropouts_ = 0;
      ep_steps_ = 0;
      env_->reset();
    }
    last_done = done;
  }
  result.env_steps = ppo_.rollout_len;

  double bootstrap = 0.0;
  if (!last_done) {
    Observation next = encode(env_->state(), spec_);
    bootstrap = forward(params_, next).value;
  }
  buffer.finalize(bootstrap, ppo_.gamma, ppo_.gae_lambda);
  last_update_ = update(params_, adam_, buffer, ppo_, shuffle_rng_);
  return result;
}

std::string PpoTrainer::policy_signature() const {
  return std::to_string(params_.in) + ":" + std::to_string(params_.hidden) +
         ":" + std::to_string(params_.out_policy);
}

namespace {

// Balanced contiguous partition of UEs ordered by nearest-BS distance.
std::vector<std::vector<int>> partition_ues(const NetworkState& state,
                                            const EnvConfig& cfg, int m_max) {
  int m = state.num_ues();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> nearest(m);
  for (int i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : cfg.bs_positions) {
      double d = std::hypot(state.ue[i].x - p[0], state.ue[i].y - p[1]);
      best = std::min(best, d);
    }
    nearest[i] = best;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return nearest[a] < nearest[b];
  });

  int groups = (m + m_max - 1) / m_max;
  std::vector<std::vector<int>> out(groups);
  int base = m / groups;
  int extra = m % groups;
  int pos = 0;
  for (int g = 0; g < groups; ++g) {
    int size = base + (g < extra ? 1 : 0);
    out[g].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  return out;
}

NetworkState sub_state(const NetworkState& full,
                       const std::vector<int>& ue_indices) {
  int n = full.num_bs();
  NetworkState s;
  s.t = full.t;
  s.assoc = BitMat(static_cast<int>(ue_indices.size()), n);
  s.prev_assoc = s.assoc;
  s.sinr = Mat(static_cast<int>(ue_indices.size()), n);
  s.rate = s.sinr;
  s.qoe = s.sinr;
  for (std::size_t r = 0; r < ue_indices.size(); ++r) {
    int i = ue_indices[r];
    s.ue.push_back(full.ue[i]);
    for (int j = 0; j < n; ++j) {
      s.assoc(static_cast<int>(r), j) = full.assoc(i, j);
      s.prev_assoc(static_cast<int>(r), j) = full.prev_assoc(i, j);
      s.sinr(static_cast<int>(r), j) = full.sinr(i, j);
      s.rate(static_cast<int>(r), j) = full.rate(i, j);
      s.qoe(static_cast<int>(r), j) = full.qoe(i, j);
    }
  }
  return s;
}

}  // namespace

EvalResult evaluate_policy(const PolicyParams& params,
                           const EncodingSpec& spec, const EnvConfig& env_cfg,
                           int episodes, std::uint64_t seed) {
  EnvConfig cfg = resolved(env_cfg);
  validate(cfg);
  if (cfg.num_bs > spec.n_max)
    throw ConfigError("evaluate: num_bs exceeds the encoding spec");
  if (cfg.num_ues > kMaxEvalGroups * spec.m_max)
    throw ConfigError("evaluate: num_ues beyond the evaluation cap of " +
                      std::to_string(kMaxEvalGroups * spec.m_max));
  if (params.in != spec.observation_size() ||
      params.out_policy != spec.pairs())
    throw ConfigError("evaluate: model does not match the encoding spec");

  Env env(cfg, derive_seed(seed, 0x77));
  EvalResult result;
  result.episodes = episodes;

  for (int ep = 0; ep < episodes; ++ep) {
    env.reset();
    bool done = false;
    while (!done) {
      const NetworkState& full = env.state();
      BitMat proposed(cfg.num_ues, cfg.num_bs);
      auto groups = partition_ues(full, cfg, spec.m_max);
      for (const auto& group : groups) {
        NetworkState view = sub_state(full, group);
        Observation obs = encode(view, spec);
        ForwardResult fwd = forward(params, obs);
        ActionMask mask =
            make_mask(static_cast<int>(group.size()), cfg.num_bs, spec);
        for (std::size_t r = 0; r < group.size(); ++r)
          for (int j = 0; j < cfg.num_bs; ++j) {
            int k = static_cast<int>(r) * spec.n_max + j;
            proposed(group[r], j) = fwd.logits[k] > 0.0 ? 1 : 0;
          }
      }
      env.apply(proposed);
      const NetworkState& st = env.state();
      result.mean_qoe += base_reward(st);
      result.mean_connected_ues +=
          fraction_connected(st) * st.num_ues();
      result.dropouts += count_dropouts(st, cfg);
      result.steps += 1;
      done = env.advance();
    }
  }
  if (result.steps > 0) {
    result.mean_qoe /= result.steps;
    result.mean_connected_ues /= result.steps;
  }
  return result;
}

}  // namespace uacl
