#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "uacl/grid.hpp"
#include "uacl/sim.hpp"

namespace uacl {

// Fixed-size observation/action layout. One spec spans every curriculum
// stage, which is what lets a single policy train across all of them.
struct EncodingSpec {
  int m_max = 5;
  int n_max = 3;
  double sinr_db_lo = -10.0;  // clip-and-scale range for the SINR block
  double sinr_db_hi = 40.0;

  int pairs() const { return m_max * n_max; }
  int observation_size() const { return 3 * pairs(); }
};

void validate(const EncodingSpec& spec);
nlohmann::json to_json(const EncodingSpec& spec);
EncodingSpec encoding_spec_from_json(const nlohmann::json& j);

// Layout: [assoc block | sinr block | qoe block], each block row-major over
// (i, j) with stride n_max. Padded slots (i >= M or j >= N) are exactly 0.
using Observation = std::vector<double>;

struct ActionMask {
  int m = 0;
  int n = 0;
  int m_max = 0;
  int n_max = 0;
  std::vector<std::uint8_t> bits;  // length m_max * n_max

  int valid_count() const { return m * n; }
};

ActionMask make_mask(int m, int n, const EncodingSpec& spec);

// Throws std::invalid_argument when state dims exceed the spec.
Observation encode(const NetworkState& state, const EncodingSpec& spec);

// Masked-out bits are dropped; valid bits are copied into the M x N matrix.
// Throws std::invalid_argument on a length mismatch.
BitMat decode_action(const std::vector<std::uint8_t>& raw_bits,
                     const ActionMask& mask);

// Mean QoE over all UEs: (1/M) * sum_ij Q_ij.
double base_reward(const NetworkState& state);

}  // namespace uacl
