#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "uacl/encoding.hpp"
#include "uacl/errors.hpp"

using namespace uacl;

namespace {

NetworkState small_state(int m, int n) {
  NetworkState s;
  s.ue.resize(m);
  s.assoc = BitMat(m, n);
  s.prev_assoc = BitMat(m, n);
  s.sinr = Mat(m, n);
  s.rate = Mat(m, n);
  s.qoe = Mat(m, n);
  return s;
}

}  // namespace

TEST_CASE("encode places a 2x1 state into the padded layout") {
  EncodingSpec spec;  // 5 x 3
  NetworkState s = small_state(2, 1);
  s.assoc(0, 0) = 1;
  s.assoc(1, 0) = 1;
  s.sinr(0, 0) = 1000.0;  // 30 dB
  s.sinr(1, 0) = 1000.0;
  s.qoe(0, 0) = 0.25;
  s.qoe(1, 0) = 0.75;
  Observation obs = encode(s, spec);
  REQUIRE(obs.size() == 45);
  int p = spec.pairs();
  // live indices within each block are i * n_max + j = {0, 3}
  for (int block = 0; block < 3; ++block)
    for (int k = 0; k < p; ++k)
      if (k != 0 && k != 3) CHECK(obs[block * p + k] == 0.0);
  CHECK(obs[0] == 1.0);
  CHECK(obs[3] == 1.0);
  CHECK(obs[2 * p + 0] == 0.25);
  CHECK(obs[2 * p + 3] == 0.75);
}

TEST_CASE("sinr at the range midpoint encodes to one half") {
  EncodingSpec spec;  // [-10, 40] dB -> midpoint 15 dB
  NetworkState s = small_state(1, 1);
  s.sinr(0, 0) = std::pow(10.0, 1.5);
  Observation obs = encode(s, spec);
  CHECK(obs[spec.pairs()] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sinr clips to the configured range") {
  EncodingSpec spec;
  NetworkState s = small_state(1, 1);
  s.sinr(0, 0) = 1e12;
  CHECK(encode(s, spec)[spec.pairs()] == 1.0);
  s.sinr(0, 0) = 1e-12;
  CHECK(encode(s, spec)[spec.pairs()] == 0.0);
}

TEST_CASE("all-zero state encodes to all zeros") {
  EncodingSpec spec;
  NetworkState s = small_state(5, 3);
  for (auto& v : s.sinr.data) v = 0.0;
  Observation obs = encode(s, spec);
  for (double v : obs) CHECK(v == 0.0);
}

TEST_CASE("encode rejects oversized states") {
  EncodingSpec spec;
  NetworkState s = small_state(6, 3);
  CHECK_THROWS_AS(encode(s, spec), std::invalid_argument);
}

TEST_CASE("padded slots are exactly zero for every small shape") {
  EncodingSpec spec;
  Rng rng(8);
  for (int m = 1; m <= spec.m_max; ++m) {
    for (int n = 1; n <= spec.n_max; ++n) {
      NetworkState s = uacl::testing::random_state(rng, m, n);
      Observation obs = encode(s, spec);
      int p = spec.pairs();
      for (int i = 0; i < spec.m_max; ++i)
        for (int j = 0; j < spec.n_max; ++j) {
          if (i < m && j < n) continue;
          int k = i * spec.n_max + j;
          CHECK(obs[k] == 0.0);
          CHECK(obs[p + k] == 0.0);
          CHECK(obs[2 * p + k] == 0.0);
        }
      CHECK(obs.size() == static_cast<std::size_t>(3 * p));
    }
  }
}

TEST_CASE("decode_action copies valid bits and drops the rest") {
  EncodingSpec spec;
  ActionMask mask = make_mask(2, 1, spec);
  std::vector<std::uint8_t> bits(15, 1);
  BitMat assoc = decode_action(bits, mask);
  REQUIRE(assoc.rows == 2);
  REQUIRE(assoc.cols == 1);
  CHECK(assoc(0, 0) == 1);
  CHECK(assoc(1, 0) == 1);

  std::vector<std::uint8_t> zeros(15, 0);
  CHECK(decode_action(zeros, mask) == BitMat(2, 1));

  std::vector<std::uint8_t> padded_only(15, 0);
  padded_only[1] = 1;  // (0, 1) is outside the 2x1 mask
  CHECK(decode_action(padded_only, mask) == BitMat(2, 1));
}

TEST_CASE("decode_action rejects wrong lengths") {
  EncodingSpec spec;
  ActionMask mask = make_mask(2, 1, spec);
  std::vector<std::uint8_t> bits(14, 1);
  CHECK_THROWS_AS(decode_action(bits, mask), std::invalid_argument);
}

TEST_CASE("mask never leaks bits into the matrix") {
  EncodingSpec spec;
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    int m = 1 + static_cast<int>(rng.uniform_int(spec.m_max));
    int n = 1 + static_cast<int>(rng.uniform_int(spec.n_max));
    ActionMask mask = make_mask(m, n, spec);
    std::vector<std::uint8_t> bits(mask.bits.size());
    for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    BitMat assoc = decode_action(bits, mask);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(assoc(i, j) == bits[i * spec.n_max + j]);
    // encode a state carrying this assoc: masked positions stay zero
    NetworkState s;
    s.ue.resize(m);
    s.assoc = assoc;
    s.prev_assoc = BitMat(m, n);
    s.sinr = Mat(m, n, 1.0);
    s.rate = Mat(m, n);
    s.qoe = Mat(m, n);
    Observation obs = encode(s, spec);
    for (std::size_t k = 0; k < mask.bits.size(); ++k)
      if (!mask.bits[k]) CHECK(obs[k] == 0.0);
  }
}

TEST_CASE("mask marks exactly the live pairs") {
  EncodingSpec spec;
  ActionMask mask = make_mask(4, 2, spec);
  for (int i = 0; i < spec.m_max; ++i)
    for (int j = 0; j < spec.n_max; ++j)
      CHECK(static_cast<int>(mask.bits[i * spec.n_max + j]) ==
            ((i < 4 && j < 2) ? 1 : 0));
  CHECK(mask.valid_count() == 8);
}

TEST_CASE("base_reward on fully served UEs is one") {
  NetworkState s = small_state(5, 3);
  for (int i = 0; i < 5; ++i) {
    s.assoc(i, i % 3) = 1;
    s.qoe(i, i % 3) = 1.0;
  }
  CHECK(base_reward(s) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("base_reward of a disconnected network is zero") {
  NetworkState s = small_state(4, 2);
  CHECK(base_reward(s) == 0.0);
}

TEST_CASE("base_reward averages over UEs") {
  NetworkState s = small_state(2, 2);
  s.assoc(0, 0) = 1;
  s.qoe(0, 0) = 0.4;
  s.assoc(1, 1) = 1;
  s.qoe(1, 1) = 0.6;
  CHECK(base_reward(s) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("base_reward equals an independent double loop") {
  Rng rng(23);
  for (int k = 0; k < 300; ++k) {
    int m = 1 + static_cast<int>(rng.uniform_int(5));
    int n = 1 + static_cast<int>(rng.uniform_int(3));
    NetworkState s = uacl::testing::random_state(rng, m, n);
    CHECK(base_reward(s) ==
          doctest::Approx(uacl::testing::hand_eq4_reward(s)).epsilon(1e-12));
  }
}

TEST_CASE("observation length is stage-invariant") {
  EncodingSpec spec;
  Rng rng(31);
  std::size_t expected = static_cast<std::size_t>(spec.observation_size());
  for (auto [m, n] : {std::pair{2, 1}, {2, 2}, {3, 2}, {5, 3}}) {
    NetworkState s = uacl::testing::random_state(rng, m, n);
    CHECK(encode(s, spec).size() == expected);
  }
}

TEST_CASE("encoding spec json is strict") {
  nlohmann::json j = {{"m_max", 5}, {"n_max", 3}};
  EncodingSpec spec = encoding_spec_from_json(j);
  CHECK(spec.m_max == 5);
  j["extra"] = true;
  CHECK_THROWS_AS(encoding_spec_from_json(j), ConfigError);
  CHECK_THROWS_AS(
      encoding_spec_from_json(nlohmann::json{{"m_max", 0}}), ConfigError);
  CHECK_THROWS_AS(encoding_spec_from_json(nlohmann::json{
                      {"sinr_db_lo", 40.0}, {"sinr_db_hi", -10.0}}),
                  ConfigError);
}
