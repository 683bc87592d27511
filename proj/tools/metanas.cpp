#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "metanas/config.hpp"
#include "metanas/errors.hpp"
#include "metanas/estimator.hpp"
#include "metanas/graph.hpp"
#include "metanas/harness.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace metanas;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return json::parse(in);
}

int cmd_train(const std::string& config_path, long seed_override,
              const std::string& out_override) {
  KeyValueConfig kv = KeyValueConfig::from_file(config_path);
  if (seed_override >= 0) kv.set("seed", std::to_string(seed_override));
  if (!out_override.empty()) kv.set("out", out_override);
  TrialConfig config = trial_config_from(kv);
  config.validate();

  TrialResult result = run_trial(config);
  std::cout << "steps: " << result.log.steps.size()
            << "  episodes: " << result.log.episodes.size()
            << "  estimator calls: " << result.estimator_calls
            << "  distinct architectures: " << result.distinct_states << "\n";
  for (const BestArchitecture& best : best_architectures(result.log, 1))
    std::cout << "best on " << best.env_id << ": reward " << best.reward
              << "  state " << best.state << "\n";
  if (!config.out_dir.empty())
    std::cout << "log + checkpoint written to " << config.out_dir.string()
              << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& envs,
                 long steps, long seed, const std::string& out_dir,
                 double sigma_override) {
  json checkpoint = read_json_file(checkpoint_path);
  const json& manifest = checkpoint.at("manifest");

  TrialConfig config;
  config.mode = mode_from_string(manifest.at("mode").get<std::string>());
  config.sigma = sigma_override >= 0.0 ? sigma_override
                                       : manifest.at("sigma").get<double>();
  config.seed = static_cast<std::uint64_t>(seed);
  config.env.max_depth = manifest.at("d").get<int>();
  config.env.max_episode_steps = manifest.at("tau").get<int>();
  config.env.max_kernel = manifest.at("k").get<int>();
  config.a2c.lstm_units = manifest.at("lstm_units").get<int>();
  config.out_dir = out_dir;

  std::vector<std::string> env_ids;
  std::stringstream ss(envs);
  std::string id;
  while (std::getline(ss, id, ',')) {
    if (!id.empty()) env_ids.push_back(id);
  }
  if (env_ids.empty()) throw ConfigError("--envs must list at least one env id");

  EvaluationResult result =
      run_frozen_evaluation(checkpoint, env_ids, steps, config);
  std::cout << "frozen policy; parameters unchanged: "
            << (result.params_digest_before == result.params_digest_after
                    ? "yes"
                    : "NO")
            << "\n";
  for (const BestArchitecture& best : result.top_architectures)
    std::cout << best.env_id << "  reward " << best.reward << "  step "
              << best.step << "  state " << best.state << "\n";
  return 0;
}

int cmd_report(const std::string& log_dir, int window,
               const std::string& out_dir) {
  TrialLog log = TrialLog::load(log_dir);
  std::filesystem::create_directories(out_dir);

  const auto series = aggregate_metrics(log, window);
  write_metrics_csv(series, std::filesystem::path(out_dir) / "metrics.csv");

  // Infer the mode from the widest action id present.
  Mode mode = Mode::kChain;
  for (const StepRecord& r : log.steps)
    if (r.action >= action_count(Mode::kChain)) mode = Mode::kMultiBranch;
  write_action_proportions_csv(
      action_proportions(log, mode, true),
      std::filesystem::path(out_dir) / "action_proportions.csv");

  if (mode == Mode::kMultiBranch) {
    const MultiBranchStats stats = count_multibranch(log, window);
    write_multibranch_csv(stats,
                          std::filesystem::path(out_dir) / "multibranch.csv");
    std::cout << "multi-branch episodes: " << stats.multi_branch_episodes
              << "  chain episodes: " << stats.chain_episodes << "\n";
  }
  std::cout << "episodes: " << log.episodes.size() << "  steps: "
            << log.steps.size() << "  reports in " << out_dir << "\n";
  return 0;
}

int cmd_inspect(const std::string& key, long seed, double difficulty, int d,
                int tau, int k, int channels) {
  auto [env_id, signature] = split_canonical_key(key);

  EnvironmentConfig cfg;
  cfg.env_id = env_id;
  cfg.max_depth = d;
  cfg.max_episode_steps = tau;
  cfg.max_kernel = k;
  cfg.conv_channels = channels;
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.difficulty = difficulty > 0.0 ? difficulty : difficulty_for(env_id);
  cfg.mode = Mode::kMultiBranch;  // accepts chain states too
  cfg.validate();

  ArchitectureState state = parse_state_signature(signature, cfg.mode);
  if (auto bad = validate_state(state, NscSpace{}, cfg))
    throw ConfigError("invalid state: " + to_string(bad->code) + " (" +
                      bad->detail + ")");

  const ArchitectureFeatures features = surrogate_features(state, cfg);
  std::cout << to_dot(build_and_shape(state, cfg), "inspected");
  std::cout << "features: conv=" << features.n_conv << " pool=" << features.n_pool
            << " kernel_diversity=" << features.kernel_diversity
            << " merges=" << features.n_merge << " depth=" << features.depth
            << " final_spatial=" << features.final_spatial << "\n";
  std::cout << "surrogate accuracy (difficulty " << cfg.difficulty
            << ", seed " << seed << "): " << surrogate_accuracy(state, cfg)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NAS meta-RL experiment harness"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, envs, out_dir, log_dir, state_key;
  long seed = -1;
  long steps = 2000;
  int window = 50;
  double sigma = -1.0;
  double difficulty = 0.0;
  int d = 10, tau = 10, k = 5, channels = 32;

  CLI::App* train = app.add_subcommand("train", "run a training trial");
  train->add_option("--config", config_path, "trial config file")->required();
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out_dir, "override the output directory");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "frozen-policy evaluation");
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint.json")
      ->required();
  evaluate->add_option("--envs", envs, "comma-separated env ids")->required();
  evaluate->add_option("--steps", steps, "steps per environment");
  evaluate->add_option("--seed", seed, "evaluation seed");
  evaluate->add_option("--out", out_dir, "output directory");
  evaluate->add_option("--sigma", sigma, "override sigma");

  CLI::App* report = app.add_subcommand("report", "aggregate a trial log");
  report->add_option("--log", log_dir, "directory holding steps.jsonl")
      ->required();
  report->add_option("--window", window, "episodes/steps per window");
  report->add_option("--out", out_dir, "CSV output directory")->required();

  CLI::App* inspect =
      app.add_subcommand("inspect", "print graph, shapes and surrogate score");
  inspect->add_option("--state", state_key, "canonical key env;t,ks,p1,p2;...")
      ->required();
  inspect->add_option("--seed", seed, "surrogate seed");
  inspect->add_option("--difficulty", difficulty, "override difficulty");
  inspect->add_option("--d", d, "max depth");
  inspect->add_option("--tau", tau, "max episode length");
  inspect->add_option("--k", k, "max kernel size");
  inspect->add_option("--channels", channels, "conv filter count");

  try {
    app.parse(argc, argv);
    if (*train) return cmd_train(config_path, seed, out_dir);
    if (*evaluate)
      return cmd_evaluate(checkpoint_path, envs, steps,
                          seed >= 0 ? seed : 0, out_dir, sigma);
    if (*report) return cmd_report(log_dir, window, out_dir);
    if (*inspect)
      return cmd_inspect(state_key, seed >= 0 ? seed : 0, difficulty, d, tau,
                         k, channels);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const metanas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
