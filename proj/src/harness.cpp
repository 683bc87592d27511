#include "metanas/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "metanas/config.hpp"
#include "metanas/errors.hpp"
#include "metanas/graph.hpp"

namespace metanas {

using json = nlohmann::ordered_json;

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kMetaA2C: return "meta_a2c";
    case AgentKind::kDqn: return "dqn";
    case AgentKind::kRandom: return "random";
  }
  return "?";
}

AgentKind agent_kind_from_string(const std::string& name) {
  if (name == "meta_a2c" || name == "a2c") return AgentKind::kMetaA2C;
  if (name == "dqn") return AgentKind::kDqn;
  if (name == "random") return AgentKind::kRandom;
  throw ConfigError("unknown agent kind: " + name);
}

void TrialConfig::validate() const {
  if (stages.empty()) throw ConfigError("trial needs at least one stage");
  for (const StageSpec& s : stages) {
    if (s.env_id.empty()) throw ConfigError("stage env_id must not be empty");
    if (s.t_max < 1) throw ConfigError("stage t_max must be >= 1");
  }
  if (transfer_policy && agent != AgentKind::kMetaA2C)
    throw ConfigError("transfer_policy applies to the meta_a2c agent only");
  if (sigma < 0.0 || sigma > 1.0) throw ConfigError("sigma must be in [0, 1]");
  a2c.validate();
  EnvironmentConfig probe = stage_env_config(stages.front());
  probe.validate();
}

EnvironmentConfig TrialConfig::stage_env_config(const StageSpec& stage) const {
  EnvironmentConfig cfg = env;
  cfg.env_id = stage.env_id;
  cfg.mode = mode;
  cfg.sigma = sigma;
  cfg.seed = seed;
  auto it = difficulty_overrides.find(stage.env_id);
  cfg.difficulty =
      it != difficulty_overrides.end() ? it->second : difficulty_for(stage.env_id);
  return cfg;
}

TrialConfig trial_config_from(const KeyValueConfig& kv) {
  TrialConfig cfg;
  for (const std::string& item : kv.get_list("stages")) {
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("stage entry must be env:t_max, got: " + item);
    StageSpec s;
    s.env_id = item.substr(0, colon);
    s.t_max = std::stol(item.substr(colon + 1));
    cfg.stages.push_back(s);
  }
  cfg.agent = agent_kind_from_string(kv.get_string("agent", "meta_a2c"));
  cfg.transfer_policy =
      kv.get_bool("transfer_policy", cfg.agent == AgentKind::kMetaA2C);
  cfg.mode = mode_from_string(kv.get_string("mode", "chain"));
  cfg.sigma = kv.get_double("sigma", 0.0);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  cfg.out_dir = kv.get_string("out", "");

  cfg.env.max_depth = static_cast<int>(kv.get_int("env.d", 10));
  cfg.env.max_episode_steps = static_cast<int>(kv.get_int("env.tau", 10));
  cfg.env.max_kernel = static_cast<int>(kv.get_int("env.k", 5));
  cfg.env.input_shape.height = static_cast<int>(kv.get_int("env.input_height", 84));
  cfg.env.input_shape.width = static_cast<int>(kv.get_int("env.input_width", 84));
  cfg.env.input_shape.channels =
      static_cast<int>(kv.get_int("env.input_channels", 3));
  cfg.env.conv_channels = static_cast<int>(kv.get_int("env.channels", 32));

  cfg.a2c.update_horizon = static_cast<int>(kv.get_int("a2c.j", 5));
  cfg.a2c.gamma = kv.get_double("a2c.gamma", 0.9);
  cfg.a2c.entropy_coef = kv.get_double("a2c.eta", 0.01);
  cfg.a2c.learning_rate = kv.get_double("a2c.alpha", 0.001);
  cfg.a2c.lstm_units = static_cast<int>(kv.get_int("a2c.lstm_units", 128));
  cfg.a2c.value_loss_weight = kv.get_double("a2c.value_loss_weight", 0.5);
  cfg.a2c.grad_clip = kv.get_double("a2c.grad_clip", 0.5);

  cfg.dqn.buffer_size = kv.get_int("dqn.buffer_size", 0);
  cfg.dqn.batch_size = static_cast<int>(kv.get_int("dqn.batch_size", 20));
  cfg.dqn.epsilon_start = kv.get_double("dqn.eps_start", 1.0);
  cfg.dqn.epsilon_end = kv.get_double("dqn.eps_end", 0.1);
  cfg.dqn.learning_rate = kv.get_double("dqn.alpha", 0.0005);
  cfg.dqn.target_sync_interval = kv.get_int("dqn.target_sync_interval", 100);
  cfg.dqn.gamma = kv.get_double("dqn.gamma", 0.9);

  for (const auto& [env_id, value] : kv.with_prefix("difficulty."))
    cfg.difficulty_overrides[env_id] = std::stod(value);
  return cfg;
}

// --- TrialLog ----------------------------------------------------------------

namespace {

json step_to_json(const StepRecord& r) {
  json j;
  j["step"] = r.global_step;
  j["stage"] = r.stage;
  j["env"] = r.env_id;
  j["episode"] = r.episode;
  j["c"] = r.episode_step;
  j["action"] = r.action;
  j["reward"] = r.reward;
  j["done"] = r.done;
  j["reason"] = r.reason;
  j["entropy"] = r.entropy;
  j["cache_hit"] = r.cache_hit;
  j["state"] = r.state;
  return j;
}

StepRecord step_from_json(const json& j) {
  StepRecord r;
  r.global_step = j.at("step").get<long>();
  r.stage = j.at("stage").get<int>();
  r.env_id = j.at("env").get<std::string>();
  r.episode = j.at("episode").get<long>();
  r.episode_step = j.at("c").get<int>();
  r.action = j.at("action").get<int>();
  r.reward = j.at("reward").get<double>();
  r.done = j.at("done").get<bool>();
  r.reason = j.at("reason").get<std::string>();
  r.entropy = j.at("entropy").get<double>();
  r.cache_hit = j.at("cache_hit").get<bool>();
  r.state = j.at("state").get<std::string>();
  return r;
}

json episode_to_json(const EpisodeSummary& e) {
  json j;
  j["episode"] = e.episode;
  j["stage"] = e.stage;
  j["env"] = e.env_id;
  j["length"] = e.length;
  j["accumulated_reward"] = e.accumulated_reward;
  j["best_reward"] = e.best_reward;
  j["best_so_far"] = e.best_so_far;
  j["end_step"] = e.end_step;
  j["final_state"] = e.final_state;
  return j;
}

EpisodeSummary episode_from_json(const json& j) {
  EpisodeSummary e;
  e.episode = j.at("episode").get<long>();
  e.stage = j.at("stage").get<int>();
  e.env_id = j.at("env").get<std::string>();
  e.length = j.at("length").get<long>();
  e.accumulated_reward = j.at("accumulated_reward").get<double>();
  e.best_reward = j.at("best_reward").get<double>();
  e.best_so_far = j.at("best_so_far").get<double>();
  e.end_step = j.at("end_step").get<long>();
  e.final_state = j.at("final_state").get<std::string>();
  return e;
}

}  // namespace

std::vector<EpisodeSummary> TrialLog::derive_episodes(
    const std::vector<StepRecord>& steps) {
  std::vector<EpisodeSummary> episodes;
  EpisodeSummary cur;
  bool open = false;
  int cur_stage = -1;
  double stage_best = 0.0;
  for (const StepRecord& r : steps) {
    if (r.stage != cur_stage) {
      // stage switch abandons any partial episode
      cur_stage = r.stage;
      stage_best = 0.0;
      open = false;
    }
    if (!open) {
      cur = EpisodeSummary{};
      cur.episode = r.episode;
      cur.stage = r.stage;
      cur.env_id = r.env_id;
      open = true;
    }
    cur.length += 1;
    cur.accumulated_reward += r.reward;
    cur.best_reward = std::max(cur.best_reward, r.reward);
    if (r.done) {
      stage_best = std::max(stage_best, cur.best_reward);
      cur.best_so_far = stage_best;
      cur.end_step = r.global_step;
      cur.final_state = r.state;
      episodes.push_back(cur);
      open = false;
    }
  }
  return episodes;
}

void TrialLog::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream steps_out(dir / "steps.jsonl");
  for (const StepRecord& r : steps) steps_out << step_to_json(r).dump() << '\n';
  std::ofstream episodes_out(dir / "episodes.jsonl");
  for (const EpisodeSummary& e : episodes)
    episodes_out << episode_to_json(e).dump() << '\n';
}

TrialLog TrialLog::load(const std::filesystem::path& dir) {
  TrialLog log;
  std::ifstream steps_in(dir / "steps.jsonl");
  if (!steps_in)
    throw ConfigError("cannot open " + (dir / "steps.jsonl").string());
  std::string line;
  while (std::getline(steps_in, line)) {
    if (line.empty()) continue;
    log.steps.push_back(step_from_json(json::parse(line)));
  }
  std::ifstream episodes_in(dir / "episodes.jsonl");
  if (episodes_in) {
    while (std::getline(episodes_in, line)) {
      if (line.empty()) continue;
      log.episodes.push_back(episode_from_json(json::parse(line)));
    }
  }
  if (log.episodes != derive_episodes(log.steps))
    throw ConfigError("episode summaries disagree with step records in " +
                      dir.string());
  return log;
}

std::string TrialLog::digest() const {
  std::string text;
  for (const StepRecord& r : steps) {
    text += step_to_json(r).dump();
    text += '\n';
  }
  for (const EpisodeSummary& e : episodes) {
    text += episode_to_json(e).dump();
    text += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

// --- trial loop ---------------------------------------------------------------

namespace {

std::string params_digest(const ParameterStore& store) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(store.to_json().dump())));
  return buf;
}

Vector flatten_encoding(const Matrix& m) {
  Vector v(m.size());
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(pos++) = m(r, c);
  return v;
}

// Entropy of the epsilon-greedy mixture over n actions.
double epsilon_greedy_entropy(double epsilon, int n) {
  const double explore = epsilon / static_cast<double>(n);
  const double greedy = 1.0 - epsilon + explore;
  double h = 0.0;
  if (greedy > 0.0) h -= greedy * std::log(greedy);
  if (explore > 0.0) h -= (n - 1) * explore * std::log(explore);
  return h;
}

StepRecord make_record(long global_step, int stage, const std::string& env_id,
                       const StepOutcome& out, int action, double entropy) {
  StepRecord r;
  r.global_step = global_step;
  r.stage = stage;
  r.env_id = env_id;
  r.episode = out.episode_index;
  r.episode_step = out.episode_step;
  r.action = action;
  r.reward = out.reward;
  r.done = out.done;
  r.reason = out.reason ? to_string(*out.reason) : "";
  r.entropy = entropy;
  r.cache_hit = out.cache_hit;
  r.state = state_signature(out.state);
  return r;
}

json make_manifest(const TrialConfig& config) {
  json m;
  m["agent"] = to_string(config.agent);
  m["mode"] = to_string(config.mode);
  m["num_actions"] = action_count(config.mode);
  m["d"] = config.env.max_depth;
  m["tau"] = config.env.max_episode_steps;
  m["k"] = config.env.max_kernel;
  m["sigma"] = config.sigma;
  m["seed"] = config.seed;
  m["transfer_policy"] = config.transfer_policy;
  m["lstm_units"] = config.a2c.lstm_units;
  json stages = json::array();
  for (const StageSpec& s : config.stages)
    stages.push_back({{"env", s.env_id}, {"t_max", s.t_max}});
  m["stages"] = stages;
  return m;
}

}  // namespace

TrialResult run_trial(const TrialConfig& config) {
  config.validate();
  const bool persist = !config.out_dir.empty();
  if (persist) std::filesystem::create_directories(config.out_dir);

  TrialResult result;
  const int num_actions = action_count(config.mode);
  const int a2c_input = policy_input_size(config.stage_env_config(config.stages[0]));

  std::optional<MetaA2cAgent> a2c;
  if (config.agent == AgentKind::kMetaA2C)
    a2c.emplace(a2c_input, num_actions, config.a2c, config.seed);
  Rng random_rng(Rng::mix(config.seed, "random-agent"));

  long global_step = 0;
  for (size_t stage = 0; stage < config.stages.size(); ++stage) {
    const StageSpec& spec = config.stages[stage];
    EnvironmentConfig env_cfg = config.stage_env_config(spec);
    std::optional<NasEnvironment> env;
    if (persist) {
      const std::string cache_path =
          (config.out_dir / ("cache_" + spec.env_id + ".tsv")).string();
      env.emplace(env_cfg, cache_path);
    } else {
      env.emplace(env_cfg);
    }

    std::optional<DqnAgent> dqn;
    if (config.agent == AgentKind::kDqn)
      dqn.emplace(static_cast<int>(env_cfg.max_depth *
                                   encoding_width(env_cfg.max_depth,
                                                  env_cfg.max_kernel, config.mode)),
                  num_actions, config.dqn, spec.t_max,
                  Rng::mix(config.seed, "dqn-stage-" + std::to_string(stage)));
    if (config.agent == AgentKind::kMetaA2C) {
      if (!config.transfer_policy && stage > 0)
        a2c.emplace(a2c_input, num_actions, config.a2c,
                    Rng::mix(config.seed, "a2c-stage-" + std::to_string(stage)));
      a2c->begin_trial();
      result.stage_start_param_digest.push_back(params_digest(a2c->params()));
    } else if (dqn) {
      result.stage_start_param_digest.push_back(params_digest(dqn->params()));
    } else {
      result.stage_start_param_digest.push_back("");
    }

    env->reset();
    int prev_action = a2c ? a2c->initial_prev_action() : 0;
    double prev_reward = 0.0;

    for (long t = 0; t < spec.t_max; ++t) {
      int action = 0;
      double entropy_value = 0.0;
      Vector dqn_state;
      if (config.agent == AgentKind::kMetaA2C) {
        const Vector input = build_policy_input(
            encode_state(env->state(), env_cfg), prev_action, num_actions,
            prev_reward, env->steps_in_episode());
        MetaA2cAgent::ActResult act = a2c->act(input);
        action = act.action;
        entropy_value = act.entropy;
      } else if (config.agent == AgentKind::kDqn) {
        dqn_state = flatten_encoding(encode_state(env->state(), env_cfg));
        const double eps = dqn_epsilon(t, spec.t_max, config.dqn.epsilon_start,
                                       config.dqn.epsilon_end);
        action = dqn->act(dqn_state, eps);
        entropy_value = epsilon_greedy_entropy(eps, num_actions);
      } else {
        action = static_cast<int>(random_action(random_rng, config.mode));
        entropy_value = std::log(static_cast<double>(num_actions));
      }

      StepOutcome out = env->step(static_cast<ActionId>(action));
      result.log.steps.push_back(make_record(
          global_step, static_cast<int>(stage), spec.env_id, out, action,
          entropy_value));

      if (config.agent == AgentKind::kMetaA2C) {
        a2c->observe(out.reward, out.done);
        if (a2c->segment_full() || t + 1 == spec.t_max) {
          std::optional<Vector> bootstrap;
          if (!out.done)
            bootstrap = build_policy_input(
                encode_state(env->state(), env_cfg), action, num_actions,
                out.reward, env->steps_in_episode());
          a2c->update(bootstrap);
        }
      } else if (config.agent == AgentKind::kDqn) {
        DqnTransition tr;
        tr.state = dqn_state;
        tr.action = action;
        tr.reward = out.reward;
        tr.next_state = flatten_encoding(encode_state(out.state, env_cfg));
        tr.done = out.done;
        dqn->push_transition(std::move(tr));
        dqn->update();
        dqn->on_env_step();
      }

      prev_action = action;
      prev_reward = out.reward;
      if (out.done) env->reset();
      ++global_step;
    }

    if (a2c)
      result.stage_end_param_digest.push_back(params_digest(a2c->params()));
    else if (dqn)
      result.stage_end_param_digest.push_back(params_digest(dqn->params()));
    else
      result.stage_end_param_digest.push_back("");

    result.estimator_calls += env->estimator_calls();
    result.distinct_states += env->distinct_states_seen();

    if (stage + 1 == config.stages.size()) {
      json checkpoint;
      checkpoint["format"] = "metanas-checkpoint-v1";
      checkpoint["manifest"] = make_manifest(config);
      if (a2c)
        checkpoint["agent"] = a2c->save();
      else if (dqn)
        checkpoint["agent"] = dqn->save();
      result.checkpoint = std::move(checkpoint);
    }
  }

  result.log.episodes = TrialLog::derive_episodes(result.log.steps);
  if (persist) {
    result.log.save(config.out_dir);
    std::ofstream ck(config.out_dir / "checkpoint.json");
    ck << result.checkpoint.dump(2) << '\n';
  }
  return result;
}

EvaluationResult run_frozen_evaluation(const json& checkpoint,
                                       const std::vector<std::string>& env_ids,
                                       long t_max, const TrialConfig& config) {
  if (!checkpoint.contains("format") ||
      checkpoint["format"] != "metanas-checkpoint-v1")
    throw IncompatibleCheckpointError("not a trial checkpoint");
  const json& manifest = checkpoint.at("manifest");
  if (manifest.at("agent").get<std::string>() != "meta_a2c")
    throw IncompatibleCheckpointError("frozen evaluation needs a meta_a2c checkpoint");
  if (manifest.at("mode").get<std::string>() != to_string(config.mode) ||
      manifest.at("num_actions").get<int>() != action_count(config.mode))
    throw IncompatibleCheckpointError("checkpoint mode/action set mismatch");

  A2cConfig a2c_cfg = config.a2c;
  a2c_cfg.lstm_units = manifest.at("lstm_units").get<int>();
  MetaA2cAgent agent =
      MetaA2cAgent::load(checkpoint.at("agent"), a2c_cfg, config.seed);

  EvaluationResult result;
  result.params_digest_before = params_digest(agent.params());

  const int num_actions = action_count(config.mode);
  long global_step = 0;
  for (size_t stage = 0; stage < env_ids.size(); ++stage) {
    StageSpec spec{env_ids[stage], t_max};
    EnvironmentConfig env_cfg = config.stage_env_config(spec);
    std::optional<NasEnvironment> env;
    if (!config.out_dir.empty()) {
      std::filesystem::create_directories(config.out_dir);
      env.emplace(env_cfg,
                  (config.out_dir / ("cache_" + spec.env_id + ".tsv")).string());
    } else {
      env.emplace(env_cfg);
    }

    agent.begin_trial();  // reset h per environment, fixed pi
    env->reset();
    int prev_action = agent.initial_prev_action();
    double prev_reward = 0.0;
    for (long t = 0; t < t_max; ++t) {
      const Vector input = build_policy_input(
          encode_state(env->state(), env_cfg), prev_action, num_actions,
          prev_reward, env->steps_in_episode());
      MetaA2cAgent::ActResult act = agent.act(input);
      agent.discard_segment();  // no learning
      StepOutcome out = env->step(static_cast<ActionId>(act.action));
      result.log.steps.push_back(make_record(global_step,
                                             static_cast<int>(stage),
                                             spec.env_id, out, act.action,
                                             act.entropy));
      prev_action = act.action;
      prev_reward = out.reward;
      if (out.done) env->reset();
      ++global_step;
    }
  }

  result.log.episodes = TrialLog::derive_episodes(result.log.steps);
  result.params_digest_after = params_digest(agent.params());
  result.top_architectures = best_architectures(result.log, 2);
  if (!config.out_dir.empty()) result.log.save(config.out_dir);
  return result;
}

std::vector<BestArchitecture> best_architectures(const TrialLog& log,
                                                 int count) {
  struct Entry {
    double reward;
    long step;
    std::string state;
  };
  std::map<std::string, std::map<std::string, Entry>> per_env;  // env -> state -> best
  for (const StepRecord& r : log.steps) {
    if (r.state.empty()) continue;
    auto& bucket = per_env[r.env_id];
    auto it = bucket.find(r.state);
    if (it == bucket.end() || r.reward > it->second.reward)
      bucket[r.state] = Entry{r.reward, r.global_step, r.state};
  }

  std::vector<BestArchitecture> out;
  for (auto& [env_id, bucket] : per_env) {
    std::vector<Entry> entries;
    entries.reserve(bucket.size());
    for (auto& [state, e] : bucket) entries.push_back(e);
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.reward != b.reward) return a.reward > b.reward;
      return a.step < b.step;
    });
    for (int i = 0; i < count && i < static_cast<int>(entries.size()); ++i)
      out.push_back(BestArchitecture{env_id, entries[static_cast<size_t>(i)].state,
                                     entries[static_cast<size_t>(i)].reward,
                                     entries[static_cast<size_t>(i)].step});
  }
  return out;
}

// --- metrics -------------------------------------------------------------------

namespace {

std::vector<WindowStat> windowed(const std::vector<double>& values, int window) {
  std::vector<WindowStat> out;
  for (size_t begin = 0; begin < values.size(); begin += static_cast<size_t>(window)) {
    const size_t end = std::min(values.size(), begin + static_cast<size_t>(window));
    const long n = static_cast<long>(end - begin);
    double mean = 0.0;
    for (size_t i = begin; i < end; ++i) mean += values[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = begin; i < end; ++i) {
      const double d = values[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    out.push_back(WindowStat{static_cast<int>(begin / static_cast<size_t>(window)),
                             n, mean, std::sqrt(var), n < window});
  }
  return out;
}

}  // namespace

std::vector<MetricSeries> aggregate_metrics(const TrialLog& log, int window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  std::vector<MetricSeries> out;

  std::vector<int> stages;
  for (const EpisodeSummary& e : log.episodes)
    if (stages.empty() || stages.back() != e.stage) stages.push_back(e.stage);
  for (const StepRecord& r : log.steps)
    if (std::find(stages.begin(), stages.end(), r.stage) == stages.end())
      stages.push_back(r.stage);
  std::sort(stages.begin(), stages.end());

  for (int stage : stages) {
    std::string env_id;
    std::vector<double> best, accumulated, length;
    for (const EpisodeSummary& e : log.episodes) {
      if (e.stage != stage) continue;
      env_id = e.env_id;
      best.push_back(e.best_reward);
      accumulated.push_back(e.accumulated_reward);
      length.push_back(static_cast<double>(e.length));
    }
    std::vector<double> entropy_values;
    for (const StepRecord& r : log.steps) {
      if (r.stage != stage) continue;
      if (env_id.empty()) env_id = r.env_id;
      entropy_values.push_back(r.entropy);
    }
    out.push_back(MetricSeries{"best_reward", stage, env_id, windowed(best, window)});
    out.push_back(MetricSeries{"accumulated_reward", stage, env_id,
                               windowed(accumulated, window)});
    out.push_back(
        MetricSeries{"episode_length", stage, env_id, windowed(length, window)});
    out.push_back(
        MetricSeries{"entropy", stage, env_id, windowed(entropy_values, window)});
  }
  return out;
}

std::vector<ActionProportions> action_proportions(const TrialLog& log,
                                                  Mode mode, bool by_stage) {
  const int n = action_count(mode);
  std::map<int, ActionProportions> buckets;
  for (const StepRecord& r : log.steps) {
    const int key = by_stage ? r.stage : 0;
    auto [it, fresh] = buckets.emplace(key, ActionProportions{});
    if (fresh) {
      it->second.stage = key;
      it->second.env_id = by_stage ? r.env_id : "all";
      it->second.proportions.assign(static_cast<size_t>(n), 0.0);
    }
    if (r.action < 0 || r.action >= n)
      throw ConfigError("action id outside the mode's action set");
    it->second.proportions[static_cast<size_t>(r.action)] += 1.0;
    it->second.total += 1;
  }
  std::vector<ActionProportions> out;
  for (auto& [stage, p] : buckets) {
    for (double& v : p.proportions) v /= static_cast<double>(p.total);
    out.push_back(std::move(p));
  }
  return out;
}

MultiBranchStats count_multibranch(const TrialLog& log, int window) {
  MultiBranchStats stats;
  std::vector<double> indicator;
  for (const EpisodeSummary& e : log.episodes) {
    bool multi = false;
    const ArchitectureState state =
        parse_state_signature(e.final_state, Mode::kMultiBranch);
    for (const NscVector& v : state.vectors)
      if (v.type == LayerType::kAddition || v.type == LayerType::kConcatenation)
        multi = true;
    indicator.push_back(multi ? 1.0 : 0.0);
    if (multi)
      ++stats.multi_branch_episodes;
    else
      ++stats.chain_episodes;
  }
  stats.windows = windowed(indicator, window);
  return stats;
}

void write_metrics_csv(const std::vector<MetricSeries>& series,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  out << std::setprecision(12);
  out << "metric,stage,env,window,count,mean,stddev,partial\n";
  for (const MetricSeries& s : series)
    for (const WindowStat& w : s.windows)
      out << s.metric << ',' << s.stage << ',' << s.env_id << ',' << w.window
          << ',' << w.count << ',' << w.mean << ',' << w.stddev << ','
          << (w.partial ? 1 : 0) << '\n';
}

void write_action_proportions_csv(const std::vector<ActionProportions>& rows,
                                  const std::filesystem::path& path) {
  std::ofstream out(path);
  out << std::setprecision(12);
  out << "stage,env,action,proportion,total\n";
  for (const ActionProportions& p : rows)
    for (size_t a = 0; a < p.proportions.size(); ++a)
      out << p.stage << ',' << p.env_id << ",A" << a << ',' << p.proportions[a]
          << ',' << p.total << '\n';
}

void write_multibranch_csv(const MultiBranchStats& stats,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  out << std::setprecision(12);
  out << "window,count,mean,stddev,partial\n";
  for (const WindowStat& w : stats.windows)
    out << w.window << ',' << w.count << ',' << w.mean << ',' << w.stddev << ','
        << (w.partial ? 1 : 0) << '\n';
}

}  // namespace metanas
