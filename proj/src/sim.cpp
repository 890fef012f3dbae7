#include "uacl/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "uacl/errors.hpp"

namespace uacl {

namespace {

constexpr double kDistanceFloorM = 10.0;

double dist(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

}  // namespace

double path_loss_db(double distance_m, const EnvConfig& cfg) {
  double d_km = std::max(distance_m, kDistanceFloorM) / 1000.0;
  double lf = std::log10(cfg.carrier_freq_mhz);
  double lhb = std::log10(cfg.bs_height_m);
  // mobile antenna correction, small/medium city
  double a_hm = (1.1 * lf - 0.7) * cfg.ue_height_m - (1.56 * lf - 0.8);
  return 69.55 + 26.16 * lf - 13.82 * lhb - a_hm +
         (44.9 - 6.55 * lhb) * std::log10(d_km);
}

double noise_power_dbm(const EnvConfig& cfg) {
  return cfg.noise_dbm_per_hz + 10.0 * std::log10(cfg.bandwidth_hz);
}

double sinr_linear(double tx_dbm, double pl_db, double noise_dbm) {
  return std::pow(10.0, (tx_dbm - pl_db - noise_dbm) / 10.0);
}

Mat compute_sinr(const NetworkState& state, const EnvConfig& cfg) {
  int m = static_cast<int>(state.ue.size());
  int n = static_cast<int>(cfg.bs_positions.size());
  Mat out(m, n);
  double noise_mw = dbm_to_mw(noise_power_dbm(cfg));
  Mat rx_mw(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double d = dist(state.ue[i].x, state.ue[i].y, cfg.bs_positions[j][0],
                      cfg.bs_positions[j][1]);
      rx_mw(i, j) = dbm_to_mw(cfg.tx_power_dbm - path_loss_db(d, cfg));
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double denom = noise_mw;
      if (cfg.interference) {
        for (int k = 0; k < n; ++k) {
          if (k != j) denom += rx_mw(i, k);
        }
      }
      out(i, j) = rx_mw(i, j) / denom;
    }
  }
  return out;
}

Mat compute_rates(const NetworkState& state, const EnvConfig& cfg) {
  int m = state.num_ues();
  int n = state.num_bs();
  Mat out(m, n);
  for (int j = 0; j < n; ++j) {
    int load = 0;
    for (int i = 0; i < m; ++i) load += state.assoc(i, j);
    if (load == 0) continue;
    double share = cfg.bandwidth_hz / load;
    for (int i = 0; i < m; ++i) {
      if (state.assoc(i, j))
        out(i, j) = share * std::log2(1.0 + state.sinr(i, j));
    }
  }
  return out;
}

double qoe(double rate_bps, const EnvConfig& cfg) {
  if (rate_bps <= 0.0) return 0.0;
  double v = (std::log(rate_bps) - std::log(cfg.d_min_bps)) /
             (std::log(cfg.d_max_bps) - std::log(cfg.d_min_bps));
  return std::clamp(v, 0.0, 1.0);
}

Mat compute_qoe(const Mat& rates, const EnvConfig& cfg) {
  Mat out(rates.rows, rates.cols);
  for (int i = 0; i < rates.rows; ++i)
    for (int j = 0; j < rates.cols; ++j) out(i, j) = qoe(rates(i, j), cfg);
  return out;
}

NetworkState apply_action(NetworkState state, const BitMat& proposed,
                          const EnvConfig& cfg) {
  if (!proposed.same_shape(state.assoc))
    throw std::invalid_argument("apply_action: proposed association is " +
                                std::to_string(proposed.rows) + "x" +
                                std::to_string(proposed.cols) + ", state is " +
                                std::to_string(state.assoc.rows) + "x" +
                                std::to_string(state.assoc.cols));
  state.prev_assoc = state.assoc;
  for (int i = 0; i < state.num_ues(); ++i) {
    for (int j = 0; j < state.num_bs(); ++j) {
      state.assoc(i, j) =
          (proposed(i, j) != 0 && state.sinr(i, j) >= cfg.sinr_min) ? 1 : 0;
    }
  }
  state.rate = compute_rates(state, cfg);
  state.qoe = compute_qoe(state.rate, cfg);
  return state;
}

NetworkState advance_mobility(NetworkState state, const EnvConfig& cfg,
                              Rng& rng) {
  for (auto& u : state.ue) {
    double step = u.velocity * cfg.step_duration;
    double d = dist(u.x, u.y, u.waypoint_x, u.waypoint_y);
    if (d <= step) {
      // Arrival consumes the step; fresh waypoint and speed for the next one.
      u.x = u.waypoint_x;
      u.y = u.waypoint_y;
      u.waypoint_x = rng.uniform(0.0, cfg.area_width);
      u.waypoint_y = rng.uniform(0.0, cfg.area_height);
      u.velocity =
          rng.uniform(cfg.ue_velocity_range[0], cfg.ue_velocity_range[1]);
    } else {
      u.x += step * (u.waypoint_x - u.x) / d;
      u.y += step * (u.waypoint_y - u.y) / d;
    }
    u.x = std::clamp(u.x, 0.0, cfg.area_width);
    u.y = std::clamp(u.y, 0.0, cfg.area_height);
  }
  state.t += 1;
  return state;
}

void refresh_channel(NetworkState& state, const EnvConfig& cfg) {
  state.sinr = compute_sinr(state, cfg);
  // Connections that fell below the gate are lost to movement.
  for (int i = 0; i < state.num_ues(); ++i)
    for (int j = 0; j < state.num_bs(); ++j)
      if (state.assoc(i, j) && state.sinr(i, j) < cfg.sinr_min)
        state.assoc(i, j) = 0;
  state.rate = compute_rates(state, cfg);
  state.qoe = compute_qoe(state.rate, cfg);
}

NetworkState reset(const EnvConfig& cfg, Rng& rng) {
  NetworkState s;
  s.t = 0;
  s.ue.resize(cfg.num_ues);
  for (auto& u : s.ue) {
    u.x = rng.uniform(0.0, cfg.area_width);
    u.y = rng.uniform(0.0, cfg.area_height);
    u.waypoint_x = rng.uniform(0.0, cfg.area_width);
    u.waypoint_y = rng.uniform(0.0, cfg.area_height);
    u.velocity =
        rng.uniform(cfg.ue_velocity_range[0], cfg.ue_velocity_range[1]);
  }
  s.assoc = BitMat(cfg.num_ues, cfg.num_bs);
  s.prev_assoc = BitMat(cfg.num_ues, cfg.num_bs);
  s.sinr = compute_sinr(s, cfg);
  s.rate = Mat(cfg.num_ues, cfg.num_bs);
  s.qoe = Mat(cfg.num_ues, cfg.num_bs);
  return s;
}

double instant_reward(const NetworkState& state) {
  double sum = 0.0;
  for (double q : state.qoe.data) sum += q;
  return sum / state.num_ues();
}

OracleResult oracle_step_assoc(const NetworkState& state,
                               const EnvConfig& cfg) {
  int m = state.num_ues();
  int n = state.num_bs();
  int bits = m * n;
  if (bits > 16)
    throw std::invalid_argument(
        "oracle_step_assoc: refusing M*N > 16 (got " + std::to_string(bits) +
        " bits)");

  std::uint32_t feasible = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (state.sinr(i, j) >= cfg.sinr_min)
        feasible |= 1u << (i * n + j);

  NetworkState scratch = state;
  OracleResult best;
  best.assoc = BitMat(m, n);
  best.reward = -1.0;
  for (std::uint32_t code = 0; code < (1u << bits); ++code) {
    if ((code & feasible) != code) continue;  // gating collapses it elsewhere
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        scratch.assoc(i, j) = (code >> (i * n + j)) & 1u;
    scratch.rate = compute_rates(scratch, cfg);
    scratch.qoe = compute_qoe(scratch.rate, cfg);
    double r = instant_reward(scratch);
    if (r > best.reward) {  // strict: ascending scan keeps the lowest code
      best.reward = r;
      best.assoc = scratch.assoc;
    }
  }
  return best;
}

int count_dropouts(const NetworkState& state, const EnvConfig& cfg) {
  int dropouts = 0;
  for (int i = 0; i < state.num_ues(); ++i) {
    bool connected = false;
    bool feasible = false;
    for (int j = 0; j < state.num_bs(); ++j) {
      connected = connected || state.assoc(i, j);
      feasible = feasible || state.sinr(i, j) >= cfg.sinr_min;
    }
    if (!connected && feasible) ++dropouts;
  }
  return dropouts;
}

double fraction_connected(const NetworkState& state) {
  int connected = 0;
  for (int i = 0; i < state.num_ues(); ++i) {
    for (int j = 0; j < state.num_bs(); ++j) {
      if (state.assoc(i, j)) {
        ++connected;
        break;
      }
    }
  }
  return static_cast<double>(connected) / state.num_ues();
}

Env::Env(EnvConfig cfg, std::uint64_t seed)
    : cfg_(resolved(std::move(cfg))), rng_(seed) {
  validate(cfg_);
  state_ = uacl::reset(cfg_, rng_);
}

void Env::reset() { state_ = uacl::reset(cfg_, rng_); }

void Env::apply(const BitMat& proposed) {
  state_ = apply_action(std::move(state_), proposed, cfg_);
}

bool Env::advance() {
  state_ = advance_mobility(std::move(state_), cfg_, rng_);
  refresh_channel(state_, cfg_);
  return state_.t >= cfg_.episode_len;
}

}  // namespace uacl
