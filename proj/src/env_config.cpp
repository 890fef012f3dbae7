#include "uacl/env_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "uacl/errors.hpp"

namespace uacl {

std::vector<Vec2> grid_bs_positions(int n, double width, double height) {
  std::vector<Vec2> out;
  out.reserve(n);
  int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  int rows = (n + cols - 1) / cols;
  for (int k = 0; k < n; ++k) {
    int r = k / cols;
    int c = k % cols;
    out.push_back({(c + 0.5) * width / cols, (r + 0.5) * height / rows});
  }
  return out;
}

EnvConfig resolved(EnvConfig cfg) {
  if (cfg.bs_positions.empty()) {
    cfg.bs_positions = grid_bs_positions(cfg.num_bs, cfg.area_width,
                                         cfg.area_height);
  }
  return cfg;
}

void validate(const EnvConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("env: " + msg); };
  if (cfg.num_ues < 1) fail("num_ues must be >= 1");
  if (cfg.num_bs < 1) fail("num_bs must be >= 1");
  if (!(cfg.area_width > 0.0) || !(cfg.area_height > 0.0))
    fail("area dimensions must be positive");
  if (!cfg.bs_positions.empty() &&
      static_cast<int>(cfg.bs_positions.size()) != cfg.num_bs)
    fail("bs_positions length must equal num_bs");
  for (const auto& p : cfg.bs_positions) {
    if (p[0] < 0.0 || p[0] > cfg.area_width || p[1] < 0.0 ||
        p[1] > cfg.area_height)
      fail("bs position outside area bounds");
  }
  if (cfg.ue_velocity_range[0] < 0.0 ||
      cfg.ue_velocity_range[0] > cfg.ue_velocity_range[1])
    fail("ue_velocity_range must satisfy 0 <= min <= max");
  if (cfg.episode_len < 1) fail("episode_len must be >= 1");
  if (!(cfg.step_duration > 0.0)) fail("step_duration must be positive");
  if (!(cfg.bandwidth_hz > 0.0)) fail("bandwidth_hz must be positive");
  if (cfg.carrier_freq_mhz < 150.0 || cfg.carrier_freq_mhz > 1500.0)
    fail("carrier_freq_mhz outside the Hata validity range [150, 1500]");
  if (!(cfg.bs_height_m > 0.0) || !(cfg.ue_height_m > 0.0))
    fail("antenna heights must be positive");
  if (!(cfg.sinr_min > 0.0)) fail("sinr_min must be > 0");
  if (!(cfg.d_min_bps > 0.0)) fail("d_min_bps must be positive");
  if (!(cfg.d_min_bps < cfg.d_max_bps)) fail("d_min_bps must be < d_max_bps");
}

nlohmann::json to_json(const EnvConfig& cfg) {
  nlohmann::json j;
  j["num_ues"] = cfg.num_ues;
  j["num_bs"] = cfg.num_bs;
  j["area_width"] = cfg.area_width;
  j["area_height"] = cfg.area_height;
  j["bs_positions"] = cfg.bs_positions;
  j["ue_velocity_range"] = cfg.ue_velocity_range;
  j["episode_len"] = cfg.episode_len;
  j["step_duration"] = cfg.step_duration;
  j["tx_power_dbm"] = cfg.tx_power_dbm;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["carrier_freq_mhz"] = cfg.carrier_freq_mhz;
  j["bs_height_m"] = cfg.bs_height_m;
  j["ue_height_m"] = cfg.ue_height_m;
  j["noise_dbm_per_hz"] = cfg.noise_dbm_per_hz;
  j["sinr_min"] = cfg.sinr_min;
  j["d_min_bps"] = cfg.d_min_bps;
  j["d_max_bps"] = cfg.d_max_bps;
  j["interference"] = cfg.interference;
  j["seed"] = cfg.seed;
  return j;
}

namespace {

void require_object(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

void reject_unknown_keys(const nlohmann::json& j,
                         const std::set<std::string>& known,
                         const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError(what + ": unknown key \"" + it.key() + "\"");
  }
}

double get_number(const nlohmann::json& j, const std::string& key) {
  if (!j.at(key).is_number())
    throw ConfigError("env: \"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

int get_int(const nlohmann::json& j, const std::string& key) {
  if (!j.at(key).is_number_integer())
    throw ConfigError("env: \"" + key + "\" must be an integer");
  return j.at(key).get<int>();
}

Vec2 get_pair(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() ||
      !v[1].is_number())
    throw ConfigError("env: \"" + key + "\" must be [number, number]");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

EnvConfig env_config_from_json(const nlohmann::json& j) {
  require_object(j, "env config");
  static const std::set<std::string> known = {
      "num_ues",        "num_bs",          "area_width",
      "area_height",    "bs_positions",    "ue_velocity_range",
      "episode_len",    "step_duration",   "tx_power_dbm",
      "bandwidth_hz",   "carrier_freq_mhz", "bs_height_m",
      "ue_height_m",    "noise_dbm_per_hz", "sinr_min",
      "d_min_bps",      "d_max_bps",       "interference",
      "seed"};
  reject_unknown_keys(j, known, "env");

  EnvConfig cfg;
  if (j.contains("num_ues")) cfg.num_ues = get_int(j, "num_ues");
  if (j.contains("num_bs")) cfg.num_bs = get_int(j, "num_bs");
  if (j.contains("area_width")) cfg.area_width = get_number(j, "area_width");
  if (j.contains("area_height"))
    cfg.area_height = get_number(j, "area_height");
  if (j.contains("bs_positions")) {
    const auto& arr = j.at("bs_positions");
    if (!arr.is_array())
      throw ConfigError("env: \"bs_positions\" must be an array of [x, y]");
    cfg.bs_positions.clear();
    for (const auto& p : arr) cfg.bs_positions.push_back(get_pair(p, "bs_positions"));
  }
  if (j.contains("ue_velocity_range"))
    cfg.ue_velocity_range = get_pair(j.at("ue_velocity_range"),
                                     "ue_velocity_range");
  if (j.contains("episode_len")) cfg.episode_len = get_int(j, "episode_len");
  if (j.contains("step_duration"))
    cfg.step_duration = get_number(j, "step_duration");
  if (j.contains("tx_power_dbm"))
    cfg.tx_power_dbm = get_number(j, "tx_power_dbm");
  if (j.contains("bandwidth_hz"))
    cfg.bandwidth_hz = get_number(j, "bandwidth_hz");
  if (j.contains("carrier_freq_mhz"))
    cfg.carrier_freq_mhz = get_number(j, "carrier_freq_mhz");
  if (j.contains("bs_height_m")) cfg.bs_height_m = get_number(j, "bs_height_m");
  if (j.contains("ue_height_m")) cfg.ue_height_m = get_number(j, "ue_height_m");
  if (j.contains("noise_dbm_per_hz"))
    cfg.noise_dbm_per_hz = get_number(j, "noise_dbm_per_hz");
  if (j.contains("sinr_min")) cfg.sinr_min = get_number(j, "sinr_min");
  if (j.contains("d_min_bps")) cfg.d_min_bps = get_number(j, "d_min_bps");
  if (j.contains("d_max_bps")) cfg.d_max_bps = get_number(j, "d_max_bps");
  if (j.contains("interference")) {
    if (!j.at("interference").is_boolean())
      throw ConfigError("env: \"interference\" must be a boolean");
    cfg.interference = j.at("interference").get<bool>();
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw ConfigError("env: \"seed\" must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  validate(cfg);
  return cfg;
}

EnvConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario file: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
  return env_config_from_json(j);
}

}  // namespace uacl
