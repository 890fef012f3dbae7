#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace uacl {

using Vec2 = std::array<double, 2>;

// Scenario parameters for one simulated network. Serialized field-for-field
// as JSON (see docs/file-formats.md); unknown keys are rejected.
struct EnvConfig {
  int num_ues = 5;
  int num_bs = 3;
  double area_width = 1000.0;
  double area_height = 1000.0;
  std::vector<Vec2> bs_positions;  // empty -> uniform grid placement
  Vec2 ue_velocity_range{0.0, 10.0};  // m/s
  int episode_len = 100;
  double step_duration = 1.0;  // s
  double tx_power_dbm = 40.0;
  double bandwidth_hz = 9e6;
  double carrier_freq_mhz = 900.0;
  double bs_height_m = 50.0;
  double ue_height_m = 1.5;
  double noise_dbm_per_hz = -174.0;
  double sinr_min = 1.0;  // linear ratio
  double d_min_bps = 1e5;
  double d_max_bps = 1e8;
  bool interference = false;  // co-channel interference from other BSs
  std::uint64_t seed = 0;
};

// BS placement used when bs_positions is left empty: cells of a near-square
// grid, one BS at each cell center, row-major from the bottom-left.
std::vector<Vec2> grid_bs_positions(int n, double width, double height);

// Returns a copy with bs_positions filled in (grid rule above).
EnvConfig resolved(EnvConfig cfg);

// Throws ConfigError on any violated invariant.
void validate(const EnvConfig& cfg);

nlohmann::json to_json(const EnvConfig& cfg);

// Strict: unknown keys rejected, every present key type-checked, then
// validate() applied. Missing keys fall back to the defaults above.
EnvConfig env_config_from_json(const nlohmann::json& j);

EnvConfig load_scenario(const std::filesystem::path& path);

}  // namespace uacl
