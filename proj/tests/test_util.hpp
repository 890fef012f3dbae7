// Shared helpers for the test suites: random-state generators and the
// independent oracle implementations that the library code is checked
// against. Everything here is deliberately written as plain double loops,
// separate from the library's own code paths.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "uacl/curriculum.hpp"
#include "uacl/ppo.hpp"
#include "uacl/rng.hpp"
#include "uacl/sim.hpp"

namespace uacl::testing {

// Random state respecting the structural invariants (qoe/rate zero where
// assoc is zero, sinr positive, prev_assoc binary).
inline NetworkState random_state(Rng& rng, int m, int n) {
  NetworkState s;
  s.t = 1;
  s.ue.resize(m);
  for (auto& u : s.ue) {
    u.x = rng.uniform(0.0, 1000.0);
    u.y = rng.uniform(0.0, 1000.0);
  }
  s.assoc = BitMat(m, n);
  s.prev_assoc = BitMat(m, n);
  s.sinr = Mat(m, n);
  s.rate = Mat(m, n);
  s.qoe = Mat(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      s.assoc(i, j) = rng.bernoulli(0.5) ? 1 : 0;
      s.prev_assoc(i, j) = rng.bernoulli(0.5) ? 1 : 0;
      s.sinr(i, j) = std::pow(10.0, rng.uniform(-2.0, 4.0));
      if (s.assoc(i, j)) {
        s.rate(i, j) = std::pow(10.0, rng.uniform(5.0, 8.0));
        s.qoe(i, j) = rng.uniform01();
      }
    }
  }
  return s;
}

// Hand-coded stage rewards, straight from their closed forms.
inline double hand_stage1_reward(const NetworkState& s) {
  // sum over UEs of x_i1 generalized to all pairs (stage 1 has N = 1)
  double total = 0.0;
  for (int i = 0; i < s.num_ues(); ++i)
    for (int j = 0; j < s.num_bs(); ++j) total += s.assoc(i, j);
  return total;
}

inline double hand_stage2_reward(const NetworkState& s) {
  double total = 0.0;
  for (int i = 0; i < s.num_ues(); ++i)
    for (int j = 0; j < s.num_bs(); ++j)
      total += static_cast<double>(s.assoc(i, j)) *
               static_cast<double>(s.prev_assoc(i, j));
  return total;
}

inline double hand_stage3_reward(const NetworkState& s) {
  double total = 0.0;
  for (int i = 0; i < s.num_ues(); ++i)
    for (int j = 0; j < s.num_bs(); ++j) total += s.qoe(i, j);
  return total / s.num_ues();
}

inline double hand_eq4_reward(const NetworkState& s) {
  // objective form with the explicit x_ij factor
  double total = 0.0;
  for (int i = 0; i < s.num_ues(); ++i)
    for (int j = 0; j < s.num_bs(); ++j)
      total += s.assoc(i, j) ? s.qoe(i, j) : 0.0;
  return total / s.num_ues();
}

// Brute-force GAE by its double-sum definition: A_t = sum_l (gamma*lambda)^l
// delta_{t+l}, the sum cut at the first terminal step.
inline std::vector<double> gae_bruteforce(const std::vector<double>& rewards,
                                          const std::vector<double>& values,
                                          const std::vector<std::uint8_t>& dones,
                                          double gamma, double lambda,
                                          double bootstrap) {
  std::size_t n = rewards.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    double w = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      double next_v = (l + 1 < n) ? values[l + 1] : bootstrap;
      double not_done = dones[l] ? 0.0 : 1.0;
      double delta = rewards[l] + gamma * next_v * not_done - values[l];
      acc += w * delta;
      if (dones[l]) break;
      w *= gamma * lambda;
    }
    adv[t] = acc;
  }
  return adv;
}

// Central finite differences of the ppo_loss scalar.
inline std::vector<double> fd_gradient(PolicyParams params,
                                       const RolloutBuffer& buffer,
                                       std::span<const int> indices,
                                       const PpoConfig& cfg,
                                       double h = 1e-5) {
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    double saved = params.w[k];
    params.w[k] = saved + h;
    double up = ppo_loss(params, buffer, indices, cfg, nullptr).loss;
    params.w[k] = saved - h;
    double down = ppo_loss(params, buffer, indices, cfg, nullptr).loss;
    params.w[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Independent scoring of one candidate association, all formulas inlined.
inline double score_assoc(const BitMat& assoc, const Mat& sinr,
                          const EnvConfig& cfg) {
  int m = assoc.rows;
  int n = assoc.cols;
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    int load = 0;
    for (int i = 0; i < m; ++i) load += assoc(i, j);
    if (!load) continue;
    for (int i = 0; i < m; ++i) {
      if (!assoc(i, j)) continue;
      double rate = cfg.bandwidth_hz / load * std::log2(1.0 + sinr(i, j));
      double q = rate > 0.0 ? (std::log(rate) - std::log(cfg.d_min_bps)) /
                                  (std::log(cfg.d_max_bps) -
                                   std::log(cfg.d_min_bps))
                            : 0.0;
      total += std::clamp(q, 0.0, 1.0);
    }
  }
  return total / m;
}

// Independent exhaustive association search, structured as a recursive
// per-pair branch (deliberately unlike the library's ascending bitmask
// scan). Recursing from the highest bit index down with the 0-branch first
// generates candidates in ascending binary-code order (bit i*N+j, value
// 2^(i*N+j)), so strict improvement keeps the lowest encoding on ties.
inline void enumerate_assoc_rec(BitMat& assoc, const Mat& sinr,
                                const EnvConfig& cfg, int k,
                                double& best_reward, BitMat& best) {
  int n = assoc.cols;
  if (k < 0) {
    double r = score_assoc(assoc, sinr, cfg);
    if (r > best_reward) {
      best_reward = r;
      best = assoc;
    }
    return;
  }
  int i = k / n;
  int j = k % n;
  assoc(i, j) = 0;
  enumerate_assoc_rec(assoc, sinr, cfg, k - 1, best_reward, best);
  if (sinr(i, j) >= cfg.sinr_min) {
    assoc(i, j) = 1;
    enumerate_assoc_rec(assoc, sinr, cfg, k - 1, best_reward, best);
    assoc(i, j) = 0;
  }
}

inline std::pair<BitMat, double> independent_oracle(const NetworkState& state,
                                                    const EnvConfig& cfg) {
  BitMat assoc(state.num_ues(), state.num_bs());
  BitMat best(state.num_ues(), state.num_bs());
  double best_reward = -1.0;
  enumerate_assoc_rec(assoc, state.sinr, cfg,
                      state.num_ues() * state.num_bs() - 1, best_reward, best);
  return {best, best_reward};
}

}  // namespace uacl::testing
