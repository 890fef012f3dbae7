#pragma once

#include <cstdint>
#include <vector>

#include "uacl/env_config.hpp"
#include "uacl/grid.hpp"
#include "uacl/rng.hpp"

namespace uacl {

struct UEState {
  double x = 0.0;
  double y = 0.0;
  double waypoint_x = 0.0;
  double waypoint_y = 0.0;
  double velocity = 0.0;  // m/s
};

// Full per-timestep snapshot: positions, association (current and previous),
// and the per-pair channel quantities derived from them.
struct NetworkState {
  int t = 0;
  std::vector<UEState> ue;
  BitMat assoc;       // x_ij(t)
  BitMat prev_assoc;  // x_ij(t-1)
  Mat sinr;           // linear ratios
  Mat rate;           // bit/s
  Mat qoe;            // [0, 1]

  int num_ues() const { return assoc.rows; }
  int num_bs() const { return assoc.cols; }
};

// Hata urban (small/medium city) path loss in dB. Distance is floored at
// 10 m to keep the log term out of its singularity.
double path_loss_db(double distance_m, const EnvConfig& cfg);

// Total noise power over the configured bandwidth, in dBm.
double noise_power_dbm(const EnvConfig& cfg);

// Link budget in the dB domain converted to a linear ratio.
double sinr_linear(double tx_dbm, double path_loss_db, double noise_dbm);

// Per-pair SINR at the current positions. Noise-only unless
// cfg.interference is set, in which case received power from every other
// BS is added to the denominator.
Mat compute_sinr(const NetworkState& state, const EnvConfig& cfg);

// Shannon rate with the BS bandwidth split equally among its connected UEs.
// Zero wherever assoc is zero.
Mat compute_rates(const NetworkState& state, const EnvConfig& cfg);

// Log-normalized rate utility, clamped to [0, 1]; exactly 0 for zero rate.
double qoe(double rate_bps, const EnvConfig& cfg);

Mat compute_qoe(const Mat& rates, const EnvConfig& cfg);

// Installs the proposed association after SINR gating (entries with
// sinr < sinr_min are forced to 0), shifts prev_assoc, and recomputes
// rates and QoE. Throws std::invalid_argument on a shape mismatch.
NetworkState apply_action(NetworkState state, const BitMat& proposed,
                          const EnvConfig& cfg);

// Random-waypoint kinematics for one step: each UE moves toward its
// waypoint by velocity * step_duration; on arrival a fresh uniform waypoint
// and velocity are drawn. Increments t. Channel quantities are not touched
// here; see refresh_channel.
NetworkState advance_mobility(NetworkState state, const EnvConfig& cfg,
                              Rng& rng);

// Recomputes SINR at the current positions, drops association entries that
// fell below the gate (a connection lost to movement), and recomputes
// rates/QoE.
void refresh_channel(NetworkState& state, const EnvConfig& cfg);

// Fresh episode state: uniform UE positions, empty association, t = 0.
NetworkState reset(const EnvConfig& cfg, Rng& rng);

// Mean-QoE instantaneous reward, (1/M) * sum_ij Q_ij.
double instant_reward(const NetworkState& state);

struct OracleResult {
  BitMat assoc;
  double reward = 0.0;
};

// Brute-force best single-step association: enumerates every feasible
// binary matrix (after SINR gating) and returns one maximizing the
// mean-QoE reward; ties break toward the lowest binary encoding
// (bit i*N+j, ascending). Refuses M*N > 16.
OracleResult oracle_step_assoc(const NetworkState& state,
                               const EnvConfig& cfg);

// Number of UEs with no connection although at least one BS is feasible
// for them (sinr >= sinr_min).
int count_dropouts(const NetworkState& state, const EnvConfig& cfg);

double fraction_connected(const NetworkState& state);

// Stateful wrapper owning the state and its RNG; what the trainer and the
// CLI drive. Instances are independent and hold no shared state.
class Env {
 public:
  Env(EnvConfig cfg, std::uint64_t seed);

  void reset();

  // Action phase of a step: gated association + reward basis recompute.
  void apply(const BitMat& proposed);

  // Mobility phase: move, refresh channel, re-gate. Returns true when the
  // episode just ended (t reached episode_len).
  bool advance();

  const NetworkState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  EnvConfig cfg_;
  NetworkState state_;
  Rng rng_;
};

}  // namespace uacl
