#include "uacl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "uacl/errors.hpp"

namespace uacl {

namespace {

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw InvariantError(std::string("ppo_loss: non-finite ") + term);
}

}  // namespace

PolicyParams PolicyParams::init(int in, int out_policy, Rng& rng, int hidden) {
  PolicyParams p;
  p.in = in;
  p.hidden = hidden;
  p.out_policy = out_policy;
  p.w.assign(p.expected_size(), 0.0);
  auto fill = [&](std::size_t off, int rows, int cols, double scale) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        p.w[off + std::size_t(r) * cols + c] =
            rng.normal() * scale / std::sqrt(static_cast<double>(cols));
  };
  fill(p.o_w1(), hidden, in, 1.0);
  fill(p.o_w2(), hidden, hidden, 1.0);
  // near-zero logits head: the initial policy stays close to uniform
  fill(p.o_w3(), out_policy, hidden, 0.01);
  fill(p.o_w4(), 1, hidden, 1.0);
  return p;
}

std::size_t PolicyParams::expected_size() const {
  return std::size_t(hidden) * in + hidden + std::size_t(hidden) * hidden +
         hidden + std::size_t(out_policy) * hidden + out_policy + hidden + 1;
}

ForwardResult forward(const PolicyParams& p, std::span<const double> obs) {
  if (static_cast<int>(obs.size()) != p.in)
    throw std::invalid_argument("forward: observation length " +
                                std::to_string(obs.size()) + " != " +
                                std::to_string(p.in));
  ForwardResult out;
  out.h1.assign(p.hidden, 0.0);
  out.h2.assign(p.hidden, 0.0);
  out.logits.assign(p.out_policy, 0.0);

  const double* w1 = p.w.data() + p.o_w1();
  const double* b1 = p.w.data() + p.o_b1();
  for (int h = 0; h < p.hidden; ++h) {
    double acc = b1[h];
    const double* row = w1 + std::size_t(h) * p.in;
    for (int i = 0; i < p.in; ++i) acc += row[i] * obs[i];
    out.h1[h] = std::tanh(acc);
  }
  const double* w2 = p.w.data() + p.o_w2();
  const double* b2 = p.w.data() + p.o_b2();
  for (int h = 0; h < p.hidden; ++h) {
    double acc = b2[h];
    const double* row = w2 + std::size_t(h) * p.hidden;
    for (int k = 0; k < p.hidden; ++k) acc += row[k] * out.h1[k];
    out.h2[h] = std::tanh(acc);
  }
  const double* w3 = p.w.data() + p.o_w3();
  const double* b3 = p.w.data() + p.o_b3();
  for (int o = 0; o < p.out_policy; ++o) {
    double acc = b3[o];
    const double* row = w3 + std::size_t(o) * p.hidden;
    for (int k = 0; k < p.hidden; ++k) acc += row[k] * out.h2[k];
    out.logits[o] = acc;
  }
  const double* w4 = p.w.data() + p.o_w4();
  double acc = p.w[p.o_b4()];
  for (int k = 0; k < p.hidden; ++k) acc += w4[k] * out.h2[k];
  out.value = acc;
  return out;
}

SampledAction sample_action(std::span<const double> logits,
                            const ActionMask& mask, Rng& rng) {
  if (logits.size() != mask.bits.size())
    throw std::invalid_argument("sample_action: logits/mask length mismatch");
  SampledAction out;
  out.bits.assign(logits.size(), 0);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!mask.bits[k]) continue;
    double p = sigmoid(logits[k]);
    bool on = rng.uniform01() < p;
    out.bits[k] = on ? 1 : 0;
    out.log_prob += on ? -softplus(-logits[k]) : -softplus(logits[k]);
  }
  return out;
}

double action_log_prob(std::span<const double> logits,
                       std::span<const std::uint8_t> bits,
                       const ActionMask& mask) {
  double lp = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!mask.bits[k]) continue;
    lp += bits[k] ? -softplus(-logits[k]) : -softplus(logits[k]);
  }
  return lp;
}

double action_entropy(std::span<const double> logits, const ActionMask& mask) {
  double h = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!mask.bits[k]) continue;
    double z = logits[k];
    double p = sigmoid(z);
    h += p * softplus(-z) + (1.0 - p) * softplus(z);
  }
  return h;
}

void gae(std::span<const double> rewards, std::span<const double> values,
         std::span<const std::uint8_t> dones, double gamma, double lambda,
         double bootstrap_value, std::vector<double>& advantages,
         std::vector<double>& returns) {
  std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw std::invalid_argument("gae: mismatched array lengths");
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double last = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    double not_done = dones[t] ? 0.0 : 1.0;
    double next_value = (t + 1 < n) ? values[t + 1] : bootstrap_value;
    double delta = rewards[t] + gamma * next_value * not_done - values[t];
    last = delta + gamma * lambda * not_done * last;
    advantages[t] = last;
    returns[t] = last + values[t];
  }
}

void validate(const PpoConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
    throw ConfigError("ppo: gamma must be in (0, 1]");
  if (cfg.gae_lambda < 0.0 || cfg.gae_lambda > 1.0)
    throw ConfigError("ppo: gae_lambda must be in [0, 1]");
  if (!(cfg.clip_eps > 0.0)) throw ConfigError("ppo: clip_eps must be > 0");
  if (cfg.minibatch < 1) throw ConfigError("ppo: minibatch must be >= 1");
  if (cfg.rollout_len < 1) throw ConfigError("ppo: rollout_len must be >= 1");
  if (cfg.epochs_per_update < 1)
    throw ConfigError("ppo: epochs_per_update must be >= 1");
  if (cfg.lr < 0.0) throw ConfigError("ppo: lr must be >= 0");
  if (!(cfg.max_grad_norm > 0.0))
    throw ConfigError("ppo: max_grad_norm must be > 0");
}

nlohmann::json to_json(const PpoConfig& cfg) {
  return {{"lr", cfg.lr},
          {"minibatch", cfg.minibatch},
          {"clip_eps", cfg.clip_eps},
          {"gamma", cfg.gamma},
          {"gae_lambda", cfg.gae_lambda},
          {"rollout_len", cfg.rollout_len},
          {"epochs_per_update", cfg.epochs_per_update},
          {"value_coef", cfg.value_coef},
          {"entropy_coef", cfg.entropy_coef},
          {"max_grad_norm", cfg.max_grad_norm}};
}

PpoConfig ppo_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("ppo config must be a JSON object");
  static const std::set<std::string> known = {
      "lr",          "minibatch",        "clip_eps",
      "gamma",       "gae_lambda",       "rollout_len",
      "epochs_per_update", "value_coef", "entropy_coef",
      "max_grad_norm"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("ppo: unknown key \"" + it.key() + "\"");
  PpoConfig cfg;
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("minibatch")) cfg.minibatch = j.at("minibatch").get<int>();
  if (j.contains("clip_eps")) cfg.clip_eps = j.at("clip_eps").get<double>();
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
  if (j.contains("gae_lambda"))
    cfg.gae_lambda = j.at("gae_lambda").get<double>();
  if (j.contains("rollout_len"))
    cfg.rollout_len = j.at("rollout_len").get<int>();
  if (j.contains("epochs_per_update"))
    cfg.epochs_per_update = j.at("epochs_per_update").get<int>();
  if (j.contains("value_coef")) cfg.value_coef = j.at("value_coef").get<double>();
  if (j.contains("entropy_coef"))
    cfg.entropy_coef = j.at("entropy_coef").get<double>();
  if (j.contains("max_grad_norm"))
    cfg.max_grad_norm = j.at("max_grad_norm").get<double>();
  validate(cfg);
  return cfg;
}

RolloutBuffer::RolloutBuffer(int obs_dim, int act_dim)
    : obs_dim_(obs_dim), act_dim_(act_dim) {}

void RolloutBuffer::push(std::span<const double> obs,
                         std::span<const std::uint8_t> bits,
                         std::span<const std::uint8_t> mask, double log_prob,
                         double value, double reward, bool done) {
  if (static_cast<int>(obs.size()) != obs_dim_ ||
      static_cast<int>(bits.size()) != act_dim_ ||
      static_cast<int>(mask.size()) != act_dim_)
    throw std::invalid_argument("rollout push: wrong span length");
  obs_.insert(obs_.end(), obs.begin(), obs.end());
  bits_.insert(bits_.end(), bits.begin(), bits.end());
  mask_.insert(mask_.end(), mask.begin(), mask.end());
  log_prob_.push_back(log_prob);
  value_.push_back(value);
  reward_.push_back(reward);
  done_.push_back(done ? 1 : 0);
  finalized_ = false;
}

void RolloutBuffer::finalize(double bootstrap_value, double gamma,
                             double lambda) {
  gae(reward_, value_, done_, gamma, lambda, bootstrap_value, advantage_,
      return_);
  finalized_ = true;
}

std::span<const double> RolloutBuffer::obs(std::size_t t) const {
  return {obs_.data() + t * obs_dim_, static_cast<std::size_t>(obs_dim_)};
}
std::span<const std::uint8_t> RolloutBuffer::bits(std::size_t t) const {
  return {bits_.data() + t * act_dim_, static_cast<std::size_t>(act_dim_)};
}
std::span<const std::uint8_t> RolloutBuffer::mask(std::size_t t) const {
  return {mask_.data() + t * act_dim_, static_cast<std::size_t>(act_dim_)};
}

void RolloutBuffer::clear() {
  obs_.clear();
  bits_.clear();
  mask_.clear();
  log_prob_.clear();
  value_.clear();
  reward_.clear();
  done_.clear();
  advantage_.clear();
  return_.clear();
  finalized_ = false;
}

void normalize(std::span<double> v) {
  if (v.empty()) return;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  double std_dev = std::sqrt(var / v.size());
  double inv = 1.0 / (std_dev + 1e-8);
  for (double& x : v) x = (x - mean) * inv;
}

LossStats ppo_loss(const PolicyParams& params, const RolloutBuffer& buffer,
                   std::span<const int> indices, const PpoConfig& cfg,
                   std::vector<double>* grad_out) {
  if (indices.empty())
    throw std::invalid_argument("ppo_loss: empty minibatch");
  if (!buffer.finalized())
    throw InvariantError("ppo_loss: buffer not finalized");

  if (grad_out) grad_out->assign(params.size(), 0.0);

  LossStats stats;
  const double inv_b = 1.0 / static_cast<double>(indices.size());
  std::vector<double> g_logits(params.out_policy);
  ActionMask mask;
  mask.bits.resize(params.out_policy);

  for (int idx : indices) {
    auto obs = buffer.obs(idx);
    auto bits = buffer.bits(idx);
    auto msk = buffer.mask(idx);
    std::copy(msk.begin(), msk.end(), mask.bits.begin());

    ForwardResult fwd = forward(params, obs);
    check_finite(fwd.value, "value");

    double new_logp = 0.0;
    double entropy = 0.0;
    for (int k = 0; k < params.out_policy; ++k) {
      if (!mask.bits[k]) continue;
      double z = fwd.logits[k];
      new_logp += bits[k] ? -softplus(-z) : -softplus(z);
      double p = sigmoid(z);
      entropy += p * softplus(-z) + (1.0 - p) * softplus(z);
    }
    check_finite(new_logp, "log-prob");

    double adv = buffer.advantage(idx);
    double ratio = std::exp(new_logp - buffer.log_prob(idx));
    check_finite(ratio, "ratio");

    double clipped =
        std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    double u_plain = ratio * adv;
    double u_clip = clipped * adv;
    double surrogate = std::min(u_plain, u_clip);
    check_finite(surrogate, "surrogate");

    double value_err = fwd.value - buffer.ret(idx);

    stats.policy_loss += -surrogate * inv_b;
    stats.value_loss += value_err * value_err * inv_b;
    stats.entropy += entropy * inv_b;
    if (std::fabs(ratio - 1.0) > cfg.clip_eps) stats.clip_fraction += inv_b;

    if (!grad_out) continue;

    // d(-surrogate)/dz: the unclipped branch carries A * r * (a - p); when
    // the min picks the clipped branch the clip is saturated, so zero.
    bool plain_branch = u_plain <= u_clip;
    double g_value = 2.0 * cfg.value_coef * value_err * inv_b;
    for (int k = 0; k < params.out_policy; ++k) {
      if (!mask.bits[k]) {
        g_logits[k] = 0.0;
        continue;
      }
      double z = fwd.logits[k];
      double p = sigmoid(z);
      double g = 0.0;
      if (plain_branch) g -= adv * ratio * (bits[k] - p);
      g += cfg.entropy_coef * z * p * (1.0 - p);
      g_logits[k] = g * inv_b;
    }

    // backprop through the trunk
    std::vector<double>& grad = *grad_out;
    double* gw3 = grad.data() + params.o_w3();
    double* gb3 = grad.data() + params.o_b3();
    double* gw4 = grad.data() + params.o_w4();
    const double* w3 = params.w.data() + params.o_w3();
    const double* w4 = params.w.data() + params.o_w4();

    std::vector<double> g_h2(params.hidden, 0.0);
    for (int o = 0; o < params.out_policy; ++o) {
      double go = g_logits[o];
      if (go == 0.0) continue;
      gb3[o] += go;
      double* wrow = gw3 + std::size_t(o) * params.hidden;
      const double* row = w3 + std::size_t(o) * params.hidden;
      for (int k = 0; k < params.hidden; ++k) {
        wrow[k] += go * fwd.h2[k];
        g_h2[k] += go * row[k];
      }
    }
    grad[params.o_b4()] += g_value;
    for (int k = 0; k < params.hidden; ++k) {
      gw4[k] += g_value * fwd.h2[k];
      g_h2[k] += g_value * w4[k];
    }

    std::vector<double> g_u2(params.hidden);
    for (int k = 0; k < params.hidden; ++k)
      g_u2[k] = g_h2[k] * (1.0 - fwd.h2[k] * fwd.h2[k]);

    double* gw2 = grad.data() + params.o_w2();
    double* gb2 = grad.data() + params.o_b2();
    const double* w2 = params.w.data() + params.o_w2();
    std::vector<double> g_h1(params.hidden, 0.0);
    for (int h = 0; h < params.hidden; ++h) {
      double gh = g_u2[h];
      if (gh == 0.0) continue;
      gb2[h] += gh;
      double* wrow = gw2 + std::size_t(h) * params.hidden;
      const double* row = w2 + std::size_t(h) * params.hidden;
      for (int k = 0; k < params.hidden; ++k) {
        wrow[k] += gh * fwd.h1[k];
        g_h1[k] += gh * row[k];
      }
    }

    double* gw1 = grad.data() + params.o_w1();
    double* gb1 = grad.data() + params.o_b1();
    for (int h = 0; h < params.hidden; ++h) {
      double gh = g_h1[h] * (1.0 - fwd.h1[h] * fwd.h1[h]);
      if (gh == 0.0) continue;
      gb1[h] += gh;
      double* wrow = gw1 + std::size_t(h) * params.in;
      for (int i = 0; i < params.in; ++i) wrow[i] += gh * obs[i];
    }
  }

  stats.loss = stats.policy_loss + cfg.value_coef * stats.value_loss -
               cfg.entropy_coef * stats.entropy;
  check_finite(stats.loss, "total loss");
  return stats;
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

void adam_step(PolicyParams& params, AdamState& state,
               std::span<const double> grad, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  state.step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params.w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

UpdateStats update(PolicyParams& params, AdamState& adam,
                   RolloutBuffer& buffer, const PpoConfig& cfg, Rng& rng) {
  if (!buffer.finalized()) throw InvariantError("update: buffer not finalized");
  if (buffer.size() == 0) throw std::invalid_argument("update: empty buffer");

  normalize(buffer.advantages());

  std::vector<int> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  UpdateStats stats;

  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += cfg.minibatch) {
      std::size_t count = std::min<std::size_t>(cfg.minibatch,
                                                order.size() - start);
      std::span<const int> mb(order.data() + start, count);
      LossStats ls = ppo_loss(params, buffer, mb, cfg, &grad);
      stats.grad_norm += clip_grad_norm(grad, cfg.max_grad_norm);
      adam_step(params, adam, grad, cfg.lr);
      stats.loss += ls.loss;
      stats.policy_loss += ls.policy_loss;
      stats.value_loss += ls.value_loss;
      stats.entropy += ls.entropy;
      stats.clip_fraction += ls.clip_fraction;
      stats.minibatches += 1;
    }
  }
  if (stats.minibatches > 0) {
    double inv = 1.0 / stats.minibatches;
    stats.loss *= inv;
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.clip_fraction *= inv;
    stats.grad_norm *= inv;
  }
  return stats;
}

namespace {

std::vector<double> require_weight_array(const nlohmann::json& weights,
                                         const char* key,
                                         std::size_t expected) {
  if (!weights.contains(key))
    throw ConfigError(std::string("model: missing weight block \"") + key +
                      "\"");
  const auto& arr = weights.at(key);
  if (!arr.is_array() || arr.size() != expected)
    throw ConfigError(std::string("model: weight block \"") + key +
                      "\" must be an array of length " +
                      std::to_string(expected));
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : arr) {
    if (!v.is_number())
      throw ConfigError(std::string("model: non-numeric entry in \"") + key +
                        "\"");
    double d = v.get<double>();
    if (!std::isfinite(d))
      throw ConfigError(std::string("model: non-finite entry in \"") + key +
                        "\"");
    out.push_back(d);
  }
  return out;
}

}  // namespace

void save_model(const PolicyParams& params,
                const std::filesystem::path& path) {
  nlohmann::json j;
  j["arch"] = {{"in", params.in},
               {"hidden", params.hidden},
               {"out_policy", params.out_policy},
               {"out_value", 1}};
  j["activation"] = "tanh";
  auto block = [&](std::size_t off, std::size_t len) {
    return std::vector<double>(params.w.begin() + off,
                               params.w.begin() + off + len);
  };
  nlohmann::json weights;
  weights["w1"] = block(params.o_w1(), std::size_t(params.hidden) * params.in);
  weights["b1"] = block(params.o_b1(), params.hidden);
  weights["w2"] =
      block(params.o_w2(), std::size_t(params.hidden) * params.hidden);
  weights["b2"] = block(params.o_b2(), params.hidden);
  weights["w3"] =
      block(params.o_w3(), std::size_t(params.out_policy) * params.hidden);
  weights["b3"] = block(params.o_b3(), params.out_policy);
  weights["w4"] = block(params.o_w4(), params.hidden);
  weights["b4"] = block(params.o_b4(), 1);
  j["weights"] = std::move(weights);

  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write model file: " + path.string());
  f << j.dump(2) << '\n';
}

PolicyParams load_model(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model " + path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("arch") || !j.contains("weights"))
    throw ConfigError("model: expected object with \"arch\" and \"weights\"");
  const auto& arch = j.at("arch");
  PolicyParams p;
  try {
    p.in = arch.at("in").get<int>();
    p.hidden = arch.at("hidden").get<int>();
    p.out_policy = arch.at("out_policy").get<int>();
    if (arch.contains("out_value") && arch.at("out_value").get<int>() != 1)
      throw ConfigError("model: out_value must be 1");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: bad arch block: ") + e.what());
  }
  if (p.in < 1 || p.hidden < 1 || p.out_policy < 1)
    throw ConfigError("model: arch dims must be >= 1");
  if (j.contains("activation") && j.at("activation") != "tanh")
    throw ConfigError("model: unsupported activation");

  const auto& weights = j.at("weights");
  p.w.clear();
  p.w.reserve(p.expected_size());
  auto append = [&](const char* key, std::size_t len) {
    auto block = require_weight_array(weights, key, len);
    p.w.insert(p.w.end(), block.begin(), block.end());
  };
  append("w1", std::size_t(p.hidden) * p.in);
  append("b1", p.hidden);
  append("w2", std::size_t(p.hidden) * p.hidden);
  append("b2", p.hidden);
  append("w3", std::size_t(p.out_policy) * p.hidden);
  append("b3", p.out_policy);
  append("w4", p.hidden);
  append("b4", 1);
  return p;
}

}  // namespace uacl
