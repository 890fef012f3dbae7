// uacl command line: train / eval / compare.
//
// Exit codes: 0 success, 2 configuration error, 3 provider (LLM endpoint)
// error, 4 internal invariant violation.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uacl/errors.hpp"
#include "uacl/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitInternal = 4;

int run_train(const std::string& config_path, const std::string& mode,
              const std::string& provider, const std::vector<std::uint64_t>& seeds,
              const std::string& out_dir, const std::string& endpoint,
              const std::string& cassette, const std::string& curriculum_file) {
  uacl::RunConfig cfg = uacl::load_run_config(config_path);
  if (!mode.empty()) {
    nlohmann::json patch = uacl::to_json(cfg);
    patch["mode"] = mode;
    cfg = uacl::run_config_from_json(patch);
  }
  if (!provider.empty()) {
    nlohmann::json patch = uacl::to_json(cfg);
    patch["provider"] = provider;
    cfg = uacl::run_config_from_json(patch);
  }
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (!endpoint.empty()) cfg.llm.endpoint = endpoint;
  if (!cassette.empty()) cfg.llm.cassette = cassette;
  if (!curriculum_file.empty()) cfg.curriculum_file = curriculum_file;
  if ((cfg.provider == uacl::RunConfig::ProviderKind::Record ||
       cfg.provider == uacl::RunConfig::ProviderKind::Replay) &&
      cfg.llm.cassette.empty())
    throw uacl::ConfigError("record/replay providers require --cassette");

  auto outcomes = uacl::cmd_train(cfg);
  for (const auto& o : outcomes)
    std::printf("%s: %s after %ld env steps -> %s\n", o.run_id.c_str(),
                o.status.c_str(), o.total_env_steps,
                o.run_dir.string().c_str());
  return kExitOk;
}

bool parse_range(const std::string& text, int& lo, int& hi) {
  auto pos = text.find("..");
  try {
    if (pos == std::string::npos) {
      lo = hi = std::stoi(text);
    } else {
      lo = std::stoi(text.substr(0, pos));
      hi = std::stoi(text.substr(pos + 2));
    }
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum-driven PPO for user association in simulated "
               "mobile networks"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run training per the config");
  std::string train_config;
  std::string train_mode, train_provider, train_out, train_endpoint;
  std::string train_cassette, train_curriculum;
  std::vector<std::uint64_t> train_seeds;
  train->add_option("--config", train_config, "Run config JSON")->required();
  train->add_option("--mode", train_mode, "curriculum | baseline");
  train->add_option("--provider", train_provider,
                    "scripted | llm | record | replay");
  train->add_option("--seed,--seeds", train_seeds,
                    "Seeds (overrides the config)");
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--llm-endpoint", train_endpoint, "Chat endpoint base URL");
  train->add_option("--cassette", train_cassette,
                    "Cassette path for record/replay");
  train->add_option("--curriculum", train_curriculum,
                    "Explicit curriculum JSON (skips generation)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  std::string eval_model, eval_scenario, eval_ues = "6..10", eval_out =
      "eval.csv";
  int eval_episodes = 10;
  std::uint64_t eval_seed = 1;
  std::int64_t eval_shuffle = -1;
  eval->add_option("--model", eval_model, "model.json path")->required();
  eval->add_option("--scenario", eval_scenario,
                   "Scenario JSON (defaults match training defaults)");
  eval->add_option("--ues", eval_ues, "UE count or range LO..HI");
  eval->add_option("--episodes", eval_episodes, "Episodes per UE count");
  eval->add_option("--bs-shuffle-seed", eval_shuffle,
                   "Redraw BS positions with this seed");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--out", eval_out, "Output CSV");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare finished runs");
  std::vector<std::string> compare_dirs;
  std::string compare_out = ".";
  double compare_threshold = 0.0;
  bool compare_has_threshold = false;
  int compare_window = 0;
  compare->add_option("dirs", compare_dirs, "Run directories")
      ->required()
      ->expected(-2);
  compare->add_option("--out", compare_out, "Output directory");
  auto* thr = compare->add_option("--threshold", compare_threshold,
                                  "Target reward threshold");
  compare->add_option("--window", compare_window, "Sliding window (episodes)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train)
      return run_train(train_config, train_mode, train_provider, train_seeds,
                       train_out, train_endpoint, train_cassette,
                       train_curriculum);
    if (*eval) {
      uacl::EvalOptions opts;
      opts.model_path = eval_model;
      if (!eval_scenario.empty()) opts.env = uacl::load_scenario(eval_scenario);
      if (!parse_range(eval_ues, opts.ue_lo, opts.ue_hi))
        throw uacl::ConfigError("--ues expects N or LO..HI");
      opts.episodes = eval_episodes;
      if (eval_shuffle >= 0)
        opts.bs_shuffle_seed = static_cast<std::uint64_t>(eval_shuffle);
      opts.seed = eval_seed;
      opts.out_csv = eval_out;
      uacl::cmd_eval(opts);
      std::printf("wrote %s\n", eval_out.c_str());
      return kExitOk;
    }
    if (*compare) {
      uacl::CompareOptions opts;
      for (const auto& d : compare_dirs) opts.run_dirs.emplace_back(d);
      compare_has_threshold = thr->count() > 0;
      if (compare_has_threshold) opts.threshold = compare_threshold;
      if (compare_window > 0) opts.window = compare_window;
      opts.out_dir = compare_out;
      auto summaries = uacl::cmd_compare(opts);
      for (const auto& s : summaries) {
        if (s.steps_to_threshold >= 0)
          std::printf("%s (%s, seed %llu): threshold at %ld env steps\n",
                      s.run_id.c_str(), s.mode.c_str(),
                      static_cast<unsigned long long>(s.seed),
                      s.steps_to_threshold);
        else
          std::printf("%s (%s, seed %llu): threshold not reached "
                      "(final window mean %.4f)\n",
                      s.run_id.c_str(), s.mode.c_str(),
                      static_cast<unsigned long long>(s.seed),
                      s.final_window_mean);
      }
      std::printf("wrote %s/compare.csv and %s/compare_summary.csv\n",
                  compare_out.c_str(), compare_out.c_str());
      return kExitOk;
    }
  } catch (const uacl::ProviderError& e) {
    std::fprintf(stderr, "provider error: %s\n", e.what());
    return kExitProvider;
  } catch (const uacl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const uacl::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitOk;
}
