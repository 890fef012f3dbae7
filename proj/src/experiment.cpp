#include "uacl/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "uacl/errors.hpp"

namespace uacl {

const char* mode_name(RunConfig::Mode m) {
  return m == RunConfig::Mode::Curriculum ? "curriculum" : "baseline";
}

const char* provider_kind_name(RunConfig::ProviderKind p) {
  switch (p) {
    case RunConfig::ProviderKind::Scripted: return "scripted";
    case RunConfig::ProviderKind::Llm: return "llm";
    case RunConfig::ProviderKind::Record: return "record";
    case RunConfig::ProviderKind::Replay: return "replay";
  }
  return "?";
}

std::string csv_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

namespace {

nlohmann::json scripted_options_to_json(const ScriptedOptions& o) {
  return {{"thresholds", o.thresholds},
          {"windows", o.windows},
          {"budgets", o.budgets},
          {"slow_velocity", o.slow_velocity}};
}

ScriptedOptions scripted_options_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw ConfigError("curriculum options must be a JSON object");
  static const std::set<std::string> known = {"thresholds", "windows",
                                              "budgets", "slow_velocity"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("curriculum options: unknown key \"" + it.key() +
                        "\"");
  ScriptedOptions o;
  auto fill4 = [&](const char* key, auto& arr) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 4)
      throw ConfigError(std::string("curriculum options: \"") + key +
                        "\" must be an array of 4");
    for (int i = 0; i < 4; ++i)
      arr[i] = a[i].get<std::decay_t<decltype(arr[0])>>();
  };
  fill4("thresholds", o.thresholds);
  fill4("windows", o.windows);
  fill4("budgets", o.budgets);
  if (j.contains("slow_velocity")) {
    const auto& v = j.at("slow_velocity");
    if (!v.is_array() || v.size() != 2)
      throw ConfigError(
          "curriculum options: \"slow_velocity\" must be [lo, hi]");
    o.slow_velocity = {v[0].get<double>(), v[1].get<double>()};
  }
  return o;
}

nlohmann::json llm_options_to_json(const LlmRunOptions& o) {
  return {{"endpoint", o.endpoint},
          {"model", o.model},
          {"temperature", o.temperature},
          {"cassette", o.cassette}};
}

LlmRunOptions llm_options_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("llm options must be a JSON object");
  static const std::set<std::string> known = {"endpoint", "model",
                                              "temperature", "cassette"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("llm options: unknown key \"" + it.key() + "\"");
  LlmRunOptions o;
  if (j.contains("endpoint")) o.endpoint = j.at("endpoint").get<std::string>();
  if (j.contains("model")) o.model = j.at("model").get<std::string>();
  if (j.contains("temperature"))
    o.temperature = j.at("temperature").get<double>();
  if (j.contains("cassette")) o.cassette = j.at("cassette").get<std::string>();
  return o;
}

}  // namespace

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["mode"] = mode_name(cfg.mode);
  j["provider"] = provider_kind_name(cfg.provider);
  j["env"] = to_json(cfg.env);
  j["ppo"] = to_json(cfg.ppo);
  j["encoding"] = to_json(cfg.encoding);
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["total_step_budget"] = cfg.total_step_budget;
  j["llm"] = llm_options_to_json(cfg.llm);
  j["curriculum"] = scripted_options_to_json(cfg.curriculum_opts);
  if (cfg.curriculum_file) j["curriculum_file"] = *cfg.curriculum_file;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  static const std::set<std::string> known = {
      "mode", "provider", "env",  "ppo",      "encoding",
      "seeds", "output_dir", "total_step_budget", "llm", "curriculum",
      "curriculum_file"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("run config: unknown key \"" + it.key() + "\"");

  RunConfig cfg;
  if (j.contains("mode")) {
    std::string m = j.at("mode").get<std::string>();
    if (m == "curriculum")
      cfg.mode = RunConfig::Mode::Curriculum;
    else if (m == "baseline")
      cfg.mode = RunConfig::Mode::Baseline;
    else
      throw ConfigError("run config: unknown mode \"" + m + "\"");
  }
  if (j.contains("provider")) {
    std::string p = j.at("provider").get<std::string>();
    if (p == "scripted")
      cfg.provider = RunConfig::ProviderKind::Scripted;
    else if (p == "llm")
      cfg.provider = RunConfig::ProviderKind::Llm;
    else if (p == "record")
      cfg.provider = RunConfig::ProviderKind::Record;
    else if (p == "replay")
      cfg.provider = RunConfig::ProviderKind::Replay;
    else
      throw ConfigError("run config: unknown provider \"" + p + "\"");
  }
  if (j.contains("env")) cfg.env = env_config_from_json(j.at("env"));
  if (j.contains("ppo")) cfg.ppo = ppo_config_from_json(j.at("ppo"));
  if (j.contains("encoding"))
    cfg.encoding = encoding_spec_from_json(j.at("encoding"));
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array() || j.at("seeds").empty())
      throw ConfigError("run config: \"seeds\" must be a non-empty array");
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds"))
      cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("total_step_budget"))
    cfg.total_step_budget = j.at("total_step_budget").get<long>();
  if (j.contains("llm")) cfg.llm = llm_options_from_json(j.at("llm"));
  if (j.contains("curriculum"))
    cfg.curriculum_opts = scripted_options_from_json(j.at("curriculum"));
  if (j.contains("curriculum_file"))
    cfg.curriculum_file = j.at("curriculum_file").get<std::string>();

  if (cfg.total_step_budget < 1)
    throw ConfigError("run config: total_step_budget must be >= 1");
  if ((cfg.provider == RunConfig::ProviderKind::Record ||
       cfg.provider == RunConfig::ProviderKind::Replay) &&
      cfg.llm.cassette.empty())
    throw ConfigError(
        "run config: record/replay providers require llm.cassette");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::string& run_id, std::uint64_t seed,
                       const RewardHistory& history) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write metrics: " + path.string());
  f << "run_id,seed,phase,env_step,episode,mean_episode_reward,mean_qoe,"
       "connected_fraction,dropouts\n";
  long episode = 0;
  for (const auto& trace : history.traces) {
    for (const auto& ep : trace.episodes) {
      f << run_id << ',' << seed << ',' << trace.stage_name << ','
        << ep.env_step_end << ',' << episode << ','
        << csv_double(ep.mean_reward) << ',' << csv_double(ep.mean_qoe) << ','
        << csv_double(ep.connected_fraction) << ',' << ep.dropouts << '\n';
      ++episode;
    }
  }
}

namespace {

std::unique_ptr<CurriculumProvider> make_provider(const RunConfig& cfg) {
  LlmOptions options;
  options.model = cfg.llm.model;
  options.temperature = cfg.llm.temperature;
  switch (cfg.provider) {
    case RunConfig::ProviderKind::Scripted:
      return std::make_unique<ScriptedProvider>(cfg.curriculum_opts);
    case RunConfig::ProviderKind::Llm:
      return std::make_unique<LlmProvider>(
          std::make_shared<HttpTransport>(cfg.llm.endpoint), options,
          cfg.encoding);
    case RunConfig::ProviderKind::Record:
      return std::make_unique<LlmProvider>(
          std::make_shared<RecordingTransport>(
              std::make_shared<HttpTransport>(cfg.llm.endpoint),
              cfg.llm.cassette),
          options, cfg.encoding);
    case RunConfig::ProviderKind::Replay:
      return std::make_unique<LlmProvider>(
          std::make_shared<ReplayTransport>(cfg.llm.cassette), options,
          cfg.encoding);
  }
  throw InvariantError("unreachable provider kind");
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    std::uint64_t seed, const std::string& run_id,
                    const std::string& status, long total_env_steps) {
  RunConfig single = cfg;
  single.seeds = {seed};
  nlohmann::json j;
  j["run_id"] = run_id;
  j["seed"] = seed;
  j["mode"] = mode_name(cfg.mode);
  j["status"] = status;
  j["total_env_steps"] = total_env_steps;
  j["config"] = to_json(single);
  std::ofstream f(dir / "manifest.json");
  if (!f)
    throw ConfigError("cannot write manifest in " + dir.string());
  f << j.dump(2) << '\n';
}

Curriculum load_curriculum_file(const std::filesystem::path& path,
                                const EncodingSpec& spec,
                                const EnvConfig& target) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open curriculum file: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("curriculum " + path.string() + ": " + e.what());
  }
  Curriculum c = curriculum_from_json(j, spec, target);
  c.provenance = Curriculum::Provenance::Replay;
  c.raw_text = "loaded from " + path.string();
  return c;
}

}  // namespace

std::vector<TrainOutcome> cmd_train(const RunConfig& cfg) {
  validate(cfg.env);
  validate(cfg.ppo);
  validate(cfg.encoding);
  EnvConfig target = resolved(cfg.env);
  if (target.num_ues > cfg.encoding.m_max ||
      target.num_bs > cfg.encoding.n_max)
    throw ConfigError("run config: target task exceeds the encoding spec");

  std::vector<TrainOutcome> outcomes;
  for (std::uint64_t seed : cfg.seeds) {
    std::string run_id =
        std::string(mode_name(cfg.mode)) + "-s" + std::to_string(seed);
    std::filesystem::path dir =
        std::filesystem::path(cfg.output_dir) / run_id;
    std::filesystem::create_directories(dir);

    PpoTrainer trainer(target, cfg.encoding, cfg.ppo, seed);
    TrainOutcome outcome;
    outcome.run_dir = dir;
    outcome.run_id = run_id;
    outcome.seed = seed;

    if (cfg.mode == RunConfig::Mode::Baseline) {
      BaselineResult result = train_baseline(trainer, target,
                                             cfg.total_step_budget,
                                             cfg.ppo.rollout_len);
      write_metrics_csv(dir / "metrics.csv", run_id, seed, result.history);
      save_model(trainer.params(), dir / "model.json");
      outcome.status = "completed";
      outcome.total_env_steps = result.total_env_steps;
      write_manifest(dir, cfg, seed, run_id, outcome.status,
                     outcome.total_env_steps);
    } else {
      auto provider = make_provider(cfg);
      Curriculum curriculum =
          cfg.curriculum_file
              ? load_curriculum_file(*cfg.curriculum_file, cfg.encoding,
                                     target)
              : provider->generate(target, cfg.encoding);

      OrchestratorConfig ocfg;
      ocfg.total_step_budget = cfg.total_step_budget;
      CurriculumRunResult result = run_curriculum(
          trainer, curriculum, ocfg, *provider, cfg.encoding, target);

      write_metrics_csv(dir / "metrics.csv", run_id, seed, result.history);
      save_model(trainer.params(), dir / "model.json");
      {
        std::ofstream f(dir / "curriculum.json");
        if (!f)
          throw ConfigError("cannot write curriculum.json in " +
                            dir.string());
        f << curriculum_to_json(result.executed).dump(2) << '\n';
      }
      if (!result.executed.raw_text.empty()) {
        std::ofstream f(dir / "curriculum_raw.txt");
        f << result.executed.raw_text << '\n';
      }
      outcome.status = status_name(result.status);
      outcome.total_env_steps = result.total_env_steps;
      write_manifest(dir, cfg, seed, run_id, outcome.status,
                     outcome.total_env_steps);
      if (result.status == CurriculumRunResult::Status::ProviderFailed)
        throw ProviderError("run " + run_id +
                            " aborted by provider failure: " + result.error);
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

void cmd_eval(const EvalOptions& opts) {
  PolicyParams params = load_model(opts.model_path);
  validate(opts.encoding);
  if (params.in != opts.encoding.observation_size() ||
      params.out_policy != opts.encoding.pairs())
    throw ConfigError("eval: model shapes do not match the encoding spec");
  if (opts.ue_lo < 1 || opts.ue_lo > opts.ue_hi)
    throw ConfigError("eval: need 1 <= ue_lo <= ue_hi");
  if (opts.ue_hi > kMaxEvalGroups * opts.encoding.m_max)
    throw ConfigError("eval: ue range beyond the evaluation cap of " +
                      std::to_string(kMaxEvalGroups * opts.encoding.m_max));
  if (opts.episodes < 1) throw ConfigError("eval: episodes must be >= 1");

  EnvConfig base = resolved(opts.env);
  if (opts.bs_shuffle_seed) {
    Rng rng(derive_seed(*opts.bs_shuffle_seed, 0xB5));
    for (auto& p : base.bs_positions) {
      p[0] = rng.uniform(0.0, base.area_width);
      p[1] = rng.uniform(0.0, base.area_height);
    }
  }

  std::ofstream f(opts.out_csv);
  if (!f) throw ConfigError("cannot write " + opts.out_csv.string());
  f << "model,seed,bs_shuffle_seed,num_ues,episodes,steps,mean_qoe,"
       "mean_connected_ues,dropouts\n";
  for (int m = opts.ue_lo; m <= opts.ue_hi; ++m) {
    EnvConfig cfg = base;
    cfg.num_ues = m;
    EvalResult r = evaluate_policy(params, opts.encoding, cfg, opts.episodes,
                                   derive_seed(opts.seed, m));
    f << opts.model_path.string() << ',' << opts.seed << ','
      << (opts.bs_shuffle_seed ? std::to_string(*opts.bs_shuffle_seed) : "")
      << ',' << m << ',' << r.episodes << ',' << r.steps << ','
      << csv_double(r.mean_qoe) << ',' << csv_double(r.mean_connected_ues)
      << ',' << r.dropouts << '\n';
  }
}

long steps_to_threshold(
    const std::vector<std::pair<long, double>>& episode_points,
    double threshold, int window) {
  if (window < 1) throw ConfigError("steps_to_threshold: window must be >= 1");
  std::size_t w = static_cast<std::size_t>(window);
  double sum = 0.0;
  for (std::size_t k = 0; k < episode_points.size(); ++k) {
    sum += episode_points[k].second;
    if (k >= w) sum -= episode_points[k - w].second;
    if (k + 1 >= w && sum / w >= threshold) return episode_points[k].first;
  }
  return -1;
}

namespace {

struct MetricsRowIn {
  std::string phase;
  long env_step = 0;
  long episode = 0;
  double reward = 0.0;
};

struct RunData {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string mode;
  std::vector<MetricsRowIn> rows;
  std::string target_phase;
  double threshold = 0.0;
  int window = 20;
  bool has_stage_gate = false;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

RunData load_run(const std::filesystem::path& dir) {
  RunData run;
  std::ifstream mf(dir / "manifest.json");
  if (!mf)
    throw ConfigError("compare: missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
    run.run_id = manifest.at("run_id").get<std::string>();
    run.seed = manifest.at("seed").get<std::uint64_t>();
    run.mode = manifest.at("mode").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("compare: bad manifest in " + dir.string() + ": " +
                      e.what());
  }

  std::ifstream f(dir / "metrics.csv");
  if (!f)
    throw ConfigError("compare: missing metrics.csv in " + dir.string());
  std::string line;
  if (!std::getline(f, line))
    throw ConfigError("compare: empty metrics.csv in " + dir.string());
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 9)
      throw ConfigError("compare: malformed metrics row in " + dir.string());
    MetricsRowIn row;
    row.phase = fields[2];
    row.env_step = std::stol(fields[3]);
    row.episode = std::stol(fields[4]);
    row.reward = std::stod(fields[5]);
    run.rows.push_back(std::move(row));
  }

  if (run.mode == "baseline") {
    run.target_phase = "baseline";
  } else {
    std::ifstream cf(dir / "curriculum.json");
    if (!cf)
      throw ConfigError("compare: missing curriculum.json in " + dir.string());
    nlohmann::json cj;
    try {
      cf >> cj;
      const auto& last = cj.at("stages").back();
      run.target_phase = last.at("name").get<std::string>();
      run.threshold = last.at("threshold").get<double>();
      run.window = last.at("window").get<int>();
      run.has_stage_gate = true;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("compare: bad curriculum.json in " + dir.string() +
                        ": " + e.what());
    }
  }
  return run;
}

}  // namespace

std::vector<RunSummary> cmd_compare(const CompareOptions& opts) {
  if (opts.run_dirs.size() < 2)
    throw ConfigError("compare: need at least 2 run directories");
  std::vector<RunData> runs;
  for (const auto& dir : opts.run_dirs) runs.push_back(load_run(dir));

  // gate defaults come from the first curriculum run when flags are absent
  double threshold;
  int window;
  if (opts.threshold) {
    threshold = *opts.threshold;
    window = opts.window.value_or(20);
  } else {
    auto it = std::find_if(runs.begin(), runs.end(),
                           [](const RunData& r) { return r.has_stage_gate; });
    if (it == runs.end())
      throw ConfigError(
          "compare: no curriculum run among inputs; pass an explicit "
          "threshold");
    threshold = it->threshold;
    window = opts.window.value_or(it->window);
  }

  std::filesystem::create_directories(opts.out_dir);
  std::ofstream curves(opts.out_dir / "compare.csv");
  if (!curves)
    throw ConfigError("compare: cannot write compare.csv in " +
                      opts.out_dir.string());
  curves << "run_id,seed,mode,env_step,episode,target_phase_reward\n";

  std::vector<RunSummary> summaries;
  for (const auto& run : runs) {
    RunSummary s;
    s.run_id = run.run_id;
    s.seed = run.seed;
    s.mode = run.mode;
    std::vector<std::pair<long, double>> points;
    for (const auto& row : run.rows) {
      if (row.phase == run.target_phase) {
        points.emplace_back(row.env_step, row.reward);
        curves << run.run_id << ',' << run.seed << ',' << run.mode << ','
               << row.env_step << ',' << row.episode << ','
               << csv_double(row.reward) << '\n';
      } else {
        s.pre_target_steps = std::max(s.pre_target_steps, row.env_step);
      }
    }
    s.steps_to_threshold = steps_to_threshold(points, threshold, window);
    if (!points.empty()) {
      std::size_t w = std::min<std::size_t>(window, points.size());
      double sum = 0.0;
      for (std::size_t i = points.size() - w; i < points.size(); ++i)
        sum += points[i].second;
      s.final_window_mean = sum / w;
    }
    summaries.push_back(std::move(s));
  }

  std::ofstream summary(opts.out_dir / "compare_summary.csv");
  if (!summary)
    throw ConfigError("compare: cannot write compare_summary.csv in " +
                      opts.out_dir.string());
  summary << "run_id,seed,mode,pre_target_steps,steps_to_threshold,"
             "final_window_mean\n";
  std::map<std::string, std::pair<double, int>> mode_means;
  for (const auto& s : summaries) {
    summary << s.run_id << ',' << s.seed << ',' << s.mode << ','
            << s.pre_target_steps << ',' << s.steps_to_threshold << ','
            << csv_double(s.final_window_mean) << '\n';
    if (s.steps_to_threshold >= 0) {
      mode_means[s.mode].first += static_cast<double>(s.steps_to_threshold);
      mode_means[s.mode].second += 1;
    }
  }
  for (const auto& [mode, acc] : mode_means) {
    if (acc.second == 0) continue;
    summary << "mean," << "," << mode << ",,"
            << csv_double(acc.first / acc.second) << ",\n";
  }
  if (mode_means.count("baseline") && mode_means.count("curriculum") &&
      mode_means["baseline"].second > 0 &&
      mode_means["curriculum"].second > 0) {
    double delta =
        mode_means["baseline"].first / mode_means["baseline"].second -
        mode_means["curriculum"].first / mode_means["curriculum"].second;
    summary << "delta_baseline_minus_curriculum,,,,"
            << csv_double(delta) << ",\n";
  }
  return summaries;
}

}  // namespace uacl
