#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "uacl/curriculum.hpp"
#include "uacl/errors.hpp"
#include "uacl/trainer.hpp"

using namespace uacl;

namespace {

EnvConfig target_cfg() {
  EnvConfig cfg;
  cfg.num_ues = 5;
  cfg.num_bs = 3;
  return resolved(cfg);
}

// Trainer whose episode rewards follow a script per stage name; one episode
// per chunk of 100 steps.
class FakeTrainer : public StageTrainer {
 public:
  std::map<std::string, std::vector<double>> script;
  double fallback = 0.0;
  std::map<std::string, int> calls;
  std::vector<std::string> visited;

  ChunkResult train_chunk(const Stage& stage, int, int) override {
    visited.push_back(stage.name);
    int k = calls[stage.name]++;
    double reward = fallback;
    auto it = script.find(stage.name);
    if (it != script.end() && !it->second.empty())
      reward = it->second[std::min<std::size_t>(k, it->second.size() - 1)];
    ChunkResult chunk;
    EpisodeMetrics ep;
    ep.mean_reward = reward;
    ep.steps = 100;
    ep.env_step_end = 100 * static_cast<long>(visited.size());
    chunk.episodes.push_back(ep);
    chunk.env_steps = 100;
    return chunk;
  }
  std::string policy_signature() const override { return "fake"; }
};

Curriculum two_stage_curriculum(double threshold1, double threshold2,
                                int window = 3,
                                long budget = 100000) {
  Curriculum c;
  c.provenance = Curriculum::Provenance::Scripted;
  Stage a;
  a.name = "easy";
  a.num_ues = 2;
  a.num_bs = 1;
  a.ue_velocity_range = {0.0, 0.0};
  a.episode_len = 100;
  a.reward = "sum_connected()";
  a.threshold = threshold1;
  a.window = window;
  a.max_env_steps = budget;
  Stage b = a;
  b.name = "target";
  b.num_ues = 5;
  b.num_bs = 3;
  b.ue_velocity_range = {0.0, 10.0};
  b.reward = "mean_qoe()";
  b.threshold = threshold2;
  c.stages = {a, b};
  return c;
}

}  // namespace

TEST_CASE("scripted curriculum reproduces the four stages") {
  Curriculum c = scripted_curriculum(target_cfg());
  REQUIRE(c.stages.size() == 4);
  CHECK(c.stages[0].num_ues == 2);
  CHECK(c.stages[0].num_bs == 1);
  CHECK(c.stages[1].num_ues == 2);
  CHECK(c.stages[1].num_bs == 2);
  CHECK(c.stages[2].num_ues == 3);
  CHECK(c.stages[2].num_bs == 2);
  CHECK(c.stages[3].num_ues == 5);
  CHECK(c.stages[3].num_bs == 3);

  // stage 1 is stationary; stage 2 moves slowly
  CHECK(c.stages[0].ue_velocity_range == Vec2{0.0, 0.0});
  CHECK(c.stages[1].ue_velocity_range[1] <= 2.0);
  CHECK(c.stages[1].ue_velocity_range[0] > 0.0);

  RewardExpr s2 = parse_reward(c.stages[1].reward);
  REQUIRE(s2.root());
  CHECK(s2.root()->kind == ExprNode::Kind::Primitive);
  CHECK(s2.root()->prim == Primitive::Persistence);
  CHECK(c.stages[0].reward == "sum_connected()");
  CHECK(c.stages[2].reward == "mean_qoe()");
  CHECK(c.stages[3].reward == "mean_qoe()");
}

TEST_CASE("scripted stage rewards equal the hand-coded forms") {
  Curriculum c = scripted_curriculum(target_cfg());
  RewardExpr r1 = parse_reward(c.stages[0].reward);
  RewardExpr r2 = parse_reward(c.stages[1].reward);
  RewardExpr r3 = parse_reward(c.stages[2].reward);
  RewardExpr r4 = parse_reward(c.stages[3].reward);
  Rng rng(2024);
  for (int k = 0; k < 1000; ++k) {
    int m = 1 + static_cast<int>(rng.uniform_int(5));
    int n = 1 + static_cast<int>(rng.uniform_int(3));
    NetworkState s = uacl::testing::random_state(rng, m, n);
    REQUIRE(r1.eval(s) == doctest::Approx(
        uacl::testing::hand_stage1_reward(s)).epsilon(1e-12));
    REQUIRE(r2.eval(s) == doctest::Approx(
        uacl::testing::hand_stage2_reward(s)).epsilon(1e-12));
    REQUIRE(r3.eval(s) == doctest::Approx(
        uacl::testing::hand_stage3_reward(s)).epsilon(1e-12));
    REQUIRE(r4.eval(s) == doctest::Approx(
        uacl::testing::hand_eq4_reward(s)).epsilon(1e-12));
  }
}

TEST_CASE("scripted curriculum refuses a too-small target") {
  EnvConfig tiny = target_cfg();
  tiny.num_ues = 2;
  tiny.bs_positions.clear();
  CHECK_THROWS_AS(scripted_curriculum(resolved(tiny)), ConfigError);
}

TEST_CASE("stage_env applies overrides and grid placement") {
  Curriculum c = scripted_curriculum(target_cfg());
  EnvConfig e0 = stage_env(c.stages[0], target_cfg());
  CHECK(e0.num_ues == 2);
  CHECK(e0.num_bs == 1);
  REQUIRE(e0.bs_positions.size() == 1);
  CHECK(e0.ue_velocity_range == Vec2{0.0, 0.0});
  EnvConfig e3 = stage_env(c.stages[3], target_cfg());
  CHECK(e3.bs_positions == target_cfg().bs_positions);
}

TEST_CASE("least-squares slope recovers a synthetic line") {
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) y.push_back(0.01 * i);
  CHECK(least_squares_slope(y) == doctest::Approx(0.01).epsilon(1e-10));
  std::vector<double> flat(20, 3.0);
  CHECK(least_squares_slope(flat) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("check_progress: advance, continue, stagnate") {
  Stage stage;
  stage.name = "s";
  stage.threshold = 0.8;
  stage.window = 5;
  stage.max_env_steps = 1000000;
  ProgressPolicy policy;

  StageTrace trace;
  auto push = [&](double r) {
    EpisodeMetrics ep;
    ep.mean_reward = r;
    trace.episodes.push_back(ep);
  };

  SUBCASE("window mean above threshold advances") {
    for (int i = 0; i < 5; ++i) push(0.85);
    CHECK(check_progress(trace, stage, policy) == Progress::Advance);
  }
  SUBCASE("short history continues") {
    push(5.0);
    CHECK(check_progress(trace, stage, policy) == Progress::Continue);
  }
  SUBCASE("rising rewards below threshold continue") {
    for (int i = 0; i < 12; ++i) push(0.01 * i);
    CHECK(check_progress(trace, stage, policy) == Progress::Continue);
  }
  SUBCASE("flat rewards below threshold stagnate after 2W") {
    for (int i = 0; i < 10; ++i) push(0.1);
    CHECK(check_progress(trace, stage, policy) == Progress::Stagnant);
  }
  SUBCASE("budget exhaustion stagnates regardless of trend") {
    for (int i = 0; i < 3; ++i) push(0.5 + 0.1 * i);
    trace.env_steps = 1000000;
    CHECK(check_progress(trace, stage, policy) == Progress::Stagnant);
  }
  SUBCASE("review cooldown suppresses immediate re-stagnation") {
    for (int i = 0; i < 10; ++i) push(0.1);
    trace.last_review_episode = 10;
    for (int i = 0; i < 9; ++i) push(0.1);
    CHECK(check_progress(trace, stage, policy) == Progress::Continue);
    push(0.1);
    CHECK(check_progress(trace, stage, policy) == Progress::Stagnant);
  }
}

TEST_CASE("scripted adjustment eases the failing stage") {
  EnvConfig target = target_cfg();
  EncodingSpec spec;
  ScriptedProvider provider;
  Curriculum c = scripted_curriculum(target);
  RewardHistory history;

  Adjustment adj = provider.review(history, c, 2);
  REQUIRE(adj.action == Adjustment::Action::Adjust);
  Curriculum adjusted = apply_adjustment(c, 2, adj, spec, target);
  REQUIRE(adjusted.stages.size() == 5);
  CHECK(adjusted.stages[1] == c.stages[1]);  // regression target verbatim
  CHECK(adjusted.stages[2].name == "preliminary_qoe_eased");
  CHECK(adjusted.stages[2].threshold ==
        doctest::Approx(c.stages[2].threshold * 0.75));
  CHECK(adjusted.stages[3] == c.stages[2]);
  CHECK(adjusted.stages[4] == c.stages[3]);
  // passed stages before the regression point are untouched
  CHECK(adjusted.stages[0] == c.stages[0]);
}

TEST_CASE("invalid adjustments are rejected and keep the original") {
  EnvConfig target = target_cfg();
  EncodingSpec spec;
  Curriculum c = scripted_curriculum(target);

  Adjustment bad;
  bad.action = Adjustment::Action::Adjust;
  Stage s = c.stages[1];
  s.reward = "not_a_primitive()";
  bad.stages = {s, c.stages[1], c.stages[2], c.stages[3]};
  CHECK_THROWS_AS(apply_adjustment(c, 1, bad, spec, target), ConfigError);

  Adjustment oversize;
  oversize.action = Adjustment::Action::Adjust;
  Stage big = c.stages[1];
  big.num_ues = 99;
  oversize.stages = {big, c.stages[1], c.stages[2], c.stages[3]};
  CHECK_THROWS_AS(apply_adjustment(c, 1, oversize, spec, target), ConfigError);

  Adjustment keep;
  keep.action = Adjustment::Action::Keep;
  Curriculum unchanged = apply_adjustment(c, 1, keep, spec, target);
  CHECK(unchanged.stages == c.stages);
}

TEST_CASE("curriculum json round-trips and validates strictly") {
  EnvConfig target = target_cfg();
  EncodingSpec spec;
  Curriculum c = scripted_curriculum(target);
  nlohmann::json j = curriculum_to_json(c);
  Curriculum back = curriculum_from_json(j, spec, target);
  CHECK(back.stages == c.stages);

  SUBCASE("unknown key at the top level") {
    j["notes"] = "hi";
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("unknown key inside a stage") {
    j["stages"][0]["difficulty"] = 3;
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("unknown key inside env") {
    j["stages"][0]["env"]["power"] = 10;
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("missing reward") {
    j["stages"][0].erase("reward");
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("non-parsing reward") {
    j["stages"][0]["reward"] = "qoe_total()";
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("dims beyond the encoding") {
    j["stages"][0]["env"]["num_ues"] = 6;
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("final stage must match the target") {
    j["stages"][3]["env"]["num_ues"] = 4;
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("wrong type") {
    j["stages"][0]["threshold"] = "high";
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
  SUBCASE("empty stages") {
    j["stages"] = nlohmann::json::array();
    CHECK_THROWS_AS(curriculum_from_json(j, spec, target), ConfigError);
  }
}

TEST_CASE("orchestrator advances through passing stages") {
  FakeTrainer trainer;
  trainer.script["easy"] = {2.0};
  trainer.script["target"] = {0.9};
  Curriculum c = two_stage_curriculum(1.5, 0.5);
  OrchestratorConfig cfg;
  cfg.total_step_budget = 1000000;
  ScriptedProvider provider;
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               target_cfg());
  CHECK(result.status == CurriculumRunResult::Status::Completed);
  REQUIRE(result.history.traces.size() == 2);
  CHECK(result.history.traces[0].stage_name == "easy");
  CHECK(result.history.traces[0].episodes.size() == 3);  // one window
  CHECK(result.history.traces[1].stage_name == "target");
  CHECK(result.adjustments == 0);
}

TEST_CASE("degenerate threshold completes after one window") {
  FakeTrainer trainer;
  trainer.fallback = 0.0;
  Curriculum c = two_stage_curriculum(1.0, 1.0);
  c.stages.pop_back();
  c.stages[0].threshold = -std::numeric_limits<double>::infinity();
  c.stages[0].window = 4;
  OrchestratorConfig cfg;
  ScriptedProvider provider;
  EnvConfig small_target = target_cfg();
  small_target.num_ues = c.stages[0].num_ues;
  small_target.num_bs = c.stages[0].num_bs;
  small_target.ue_velocity_range = c.stages[0].ue_velocity_range;
  small_target.bs_positions.clear();
  small_target = resolved(small_target);
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               small_target);
  CHECK(result.status == CurriculumRunResult::Status::Completed);
  CHECK(result.history.traces[0].episodes.size() == 4);
}

TEST_CASE("stagnation adjusts and regresses one stage") {
  FakeTrainer trainer;
  trainer.script["easy"] = {2.0};
  // flat and below threshold for the first visit, recovered afterwards
  trainer.script["target"] = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.9};
  trainer.script["target_eased"] = {0.9};
  Curriculum c = two_stage_curriculum(1.5, 0.5, 3);
  OrchestratorConfig cfg;
  ScriptedProvider provider;
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               target_cfg());
  CHECK(result.status == CurriculumRunResult::Status::Completed);
  CHECK(result.adjustments == 1);
  REQUIRE(result.executed.stages.size() == 3);
  CHECK(result.executed.stages[1].name == "target_eased");
  CHECK(result.executed.stages[1].threshold == doctest::Approx(0.375));
  // stage index path: easy -> target (stagnates) -> easy -> eased -> target
  REQUIRE(result.history.traces.size() >= 4);
  CHECK(result.history.traces[0].stage_index == 0);
  CHECK(result.history.traces[1].stage_index == 1);
  CHECK(result.history.traces[2].stage_index == 0);  // regression
  CHECK(result.history.traces[2].visit == 1);
  // the final stage still passed with the eased intermediate in place
  CHECK(result.history.traces.back().stage_name == "target");
  // transitions only ever move by one stage
  for (std::size_t k = 1; k < result.history.traces.size(); ++k) {
    int delta = result.history.traces[k].stage_index -
                result.history.traces[k - 1].stage_index;
    CHECK(delta <= 1);
    CHECK(delta >= -1);
  }
}

TEST_CASE("stagnation at stage zero stays at stage zero") {
  FakeTrainer trainer;
  trainer.script["easy"] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0};
  trainer.script["easy_eased"] = {2.0};
  trainer.script["target"] = {0.9};
  Curriculum c = two_stage_curriculum(1.5, 0.5, 3);
  OrchestratorConfig cfg;
  ScriptedProvider provider;
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               target_cfg());
  CHECK(result.status == CurriculumRunResult::Status::Completed);
  REQUIRE(result.history.traces.size() >= 2);
  CHECK(result.history.traces[0].stage_index == 0);
  CHECK(result.history.traces[1].stage_index == 0);  // max(s-1, 0) with s=0
  CHECK(result.history.traces[1].stage_name == "easy_eased");
}

TEST_CASE("keep verdict applies a cooldown instead of regressing") {
  class KeepProvider : public ScriptedProvider {
   public:
    int reviews = 0;
    Adjustment review(const RewardHistory&, const Curriculum&, int) override {
      ++reviews;
      Adjustment adj;
      adj.action = Adjustment::Action::Keep;
      return adj;
    }
  };
  FakeTrainer trainer;
  std::vector<double> rewards(12, 0.1);
  for (int i = 12; i < 40; ++i) rewards.push_back(2.0);  // recovers later
  trainer.script["easy"] = rewards;
  trainer.script["target"] = {0.9};
  Curriculum c = two_stage_curriculum(1.5, 0.5, 3);
  OrchestratorConfig cfg;
  KeepProvider provider;
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               target_cfg());
  CHECK(result.status == CurriculumRunResult::Status::Completed);
  CHECK(provider.reviews >= 1);
  CHECK(result.adjustments == 0);
  CHECK(result.history.traces.size() == 2);  // never regressed
}

TEST_CASE("global budget exhaustion ends the run with history intact") {
  FakeTrainer trainer;
  trainer.fallback = 0.0;
  Curriculum c = two_stage_curriculum(1.5, 0.5, 3, 100000000L);
  OrchestratorConfig cfg;
  cfg.total_step_budget = 500;  // five chunks
  ScriptedProvider provider;
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               target_cfg());
  CHECK(result.status == CurriculumRunResult::Status::BudgetExhausted);
  CHECK(result.total_env_steps >= 500);
  CHECK(!result.history.traces.empty());
}

TEST_CASE("provider failure aborts with history preserved") {
  class FailingProvider : public CurriculumProvider {
   public:
    Curriculum generate(const EnvConfig&, const EncodingSpec&) override {
      throw ProviderError("no");
    }
    Adjustment review(const RewardHistory&, const Curriculum&, int) override {
      throw ProviderError("endpoint down");
    }
    const char* name() const override { return "failing"; }
  };
  FakeTrainer trainer;
  trainer.script["easy"] = {0.0};  // stagnates -> review -> failure
  Curriculum c = two_stage_curriculum(1.5, 0.5, 3);
  OrchestratorConfig cfg;
  FailingProvider provider;
  auto result = run_curriculum(trainer, c, cfg, provider, EncodingSpec{},
                               target_cfg());
  CHECK(result.status == CurriculumRunResult::Status::ProviderFailed);
  CHECK(result.error.find("endpoint down") != std::string::npos);
  CHECK(!result.history.traces.empty());
  CHECK(!result.history.traces[0].episodes.empty());
}

TEST_CASE("baseline bookkeeping") {
  EnvConfig target = target_cfg();
  EncodingSpec spec;
  PpoConfig ppo;
  ppo.rollout_len = 256;
  ppo.minibatch = 64;

  SUBCASE("zero budget leaves the agent untouched") {
    PpoTrainer trainer(target, spec, ppo, 7);
    PolicyParams before = trainer.params();
    BaselineResult result = train_baseline(trainer, target, 0, ppo.rollout_len);
    CHECK(result.updates == 0);
    CHECK(trainer.params().w == before.w);
  }
  SUBCASE("update count is budget over rollout length") {
    PpoTrainer trainer(target, spec, ppo, 7);
    BaselineResult result =
        train_baseline(trainer, target, 1024, ppo.rollout_len);
    CHECK(result.updates == 4);
    CHECK(result.total_env_steps == 1024);
    REQUIRE(result.history.traces.size() == 1);
    CHECK(result.history.traces[0].stage_name == "baseline");
  }
  SUBCASE("same seed reproduces the history") {
    PpoTrainer t1(target, spec, ppo, 7);
    PpoTrainer t2(target, spec, ppo, 7);
    BaselineResult r1 = train_baseline(t1, target, 512, ppo.rollout_len);
    BaselineResult r2 = train_baseline(t2, target, 512, ppo.rollout_len);
    REQUIRE(r1.history.traces[0].episodes.size() ==
            r2.history.traces[0].episodes.size());
    for (std::size_t k = 0; k < r1.history.traces[0].episodes.size(); ++k)
      CHECK(r1.history.traces[0].episodes[k].mean_reward ==
            r2.history.traces[0].episodes[k].mean_reward);
    CHECK(t1.params().w == t2.params().w);
  }
}

TEST_CASE("ppo trainer keeps policy shapes across stage switches") {
  EnvConfig target = target_cfg();
  EncodingSpec spec;
  PpoConfig ppo;
  ppo.rollout_len = 128;
  PpoTrainer trainer(target, spec, ppo, 3);
  Curriculum c = scripted_curriculum(target);
  std::string sig = trainer.policy_signature();
  trainer.train_chunk(c.stages[0], 0, 0);
  CHECK(trainer.policy_signature() == sig);
  trainer.train_chunk(c.stages[3], 3, 0);
  CHECK(trainer.policy_signature() == sig);
  CHECK(trainer.global_env_steps() == 256);
}
