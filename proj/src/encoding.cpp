#include "uacl/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "uacl/errors.hpp"

namespace uacl {

void validate(const EncodingSpec& spec) {
  if (spec.m_max < 1 || spec.n_max < 1)
    throw ConfigError("encoding: m_max and n_max must be >= 1");
  if (!(spec.sinr_db_lo < spec.sinr_db_hi))
    throw ConfigError("encoding: sinr_db_lo must be < sinr_db_hi");
}

nlohmann::json to_json(const EncodingSpec& spec) {
  return {{"m_max", spec.m_max},
          {"n_max", spec.n_max},
          {"sinr_db_lo", spec.sinr_db_lo},
          {"sinr_db_hi", spec.sinr_db_hi}};
}

EncodingSpec encoding_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("encoding must be a JSON object");
  static const std::set<std::string> known = {"m_max", "n_max", "sinr_db_lo",
                                              "sinr_db_hi"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("encoding: unknown key \"" + it.key() + "\"");
  }
  EncodingSpec spec;
  if (j.contains("m_max")) spec.m_max = j.at("m_max").get<int>();
  if (j.contains("n_max")) spec.n_max = j.at("n_max").get<int>();
  if (j.contains("sinr_db_lo"))
    spec.sinr_db_lo = j.at("sinr_db_lo").get<double>();
  if (j.contains("sinr_db_hi"))
    spec.sinr_db_hi = j.at("sinr_db_hi").get<double>();
  validate(spec);
  return spec;
}

ActionMask make_mask(int m, int n, const EncodingSpec& spec) {
  if (m > spec.m_max || n > spec.n_max)
    throw std::invalid_argument("mask dims exceed encoding spec");
  ActionMask mask;
  mask.m = m;
  mask.n = n;
  mask.m_max = spec.m_max;
  mask.n_max = spec.n_max;
  mask.bits.assign(static_cast<std::size_t>(spec.m_max) * spec.n_max, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) mask.bits[i * spec.n_max + j] = 1;
  return mask;
}

Observation encode(const NetworkState& state, const EncodingSpec& spec) {
  int m = state.num_ues();
  int n = state.num_bs();
  if (m > spec.m_max || n > spec.n_max)
    throw std::invalid_argument(
        "encode: state dims exceed the encoding spec");

  int p = spec.pairs();
  Observation obs(3 * p, 0.0);
  double span = spec.sinr_db_hi - spec.sinr_db_lo;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      int k = i * spec.n_max + j;
      obs[k] = state.assoc(i, j);
      double lin = state.sinr(i, j);
      double db = lin > 0.0 ? 10.0 * std::log10(lin) : spec.sinr_db_lo;
      db = std::clamp(db, spec.sinr_db_lo, spec.sinr_db_hi);
      obs[p + k] = (db - spec.sinr_db_lo) / span;
      obs[2 * p + k] = state.qoe(i, j);
    }
  }
  return obs;
}

BitMat decode_action(const std::vector<std::uint8_t>& raw_bits,
                     const ActionMask& mask) {
  if (raw_bits.size() != mask.bits.size())
    throw std::invalid_argument("decode_action: raw bit length " +
                                std::to_string(raw_bits.size()) +
                                " != mask length " +
                                std::to_string(mask.bits.size()));
  BitMat out(mask.m, mask.n);
  for (int i = 0; i < mask.m; ++i)
    for (int j = 0; j < mask.n; ++j) {
      int k = i * mask.n_max + j;
      out(i, j) = (mask.bits[k] && raw_bits[k]) ? 1 : 0;
    }
  return out;
}

double base_reward(const NetworkState& state) {
  double sum = 0.0;
  for (int i = 0; i < state.num_ues(); ++i)
    for (int j = 0; j < state.num_bs(); ++j) sum += state.qoe(i, j);
  return sum / state.num_ues();
}

}  // namespace uacl
