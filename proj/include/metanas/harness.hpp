#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metanas/agents.hpp"
#include "metanas/config.hpp"
#include "metanas/environment.hpp"

namespace metanas {

enum class AgentKind { kMetaA2C, kDqn, kRandom };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& name);

struct StageSpec {
  std::string env_id;
  long t_max = 0;
};

struct TrialConfig {
  std::vector<StageSpec> stages;
  AgentKind agent = AgentKind::kMetaA2C;
  bool transfer_policy = true;  // meta-A2C only: carry weights across stages
  Mode mode = Mode::kChain;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;

  // Template for per-stage environments; env_id/difficulty/sigma/seed are
  // filled per stage.
  EnvironmentConfig env;
  A2cConfig a2c;
  DqnConfig dqn;
  std::map<std::string, double> difficulty_overrides;

  void validate() const;
  EnvironmentConfig stage_env_config(const StageSpec& stage) const;
};

// Builds a TrialConfig from a key-value file. Recognized keys are documented
// in the README; unknown keys are ignored.
TrialConfig trial_config_from(const KeyValueConfig& kv);

struct StepRecord {
  long global_step = 0;
  int stage = 0;
  std::string env_id;
  long episode = 0;
  int episode_step = 0;  // c_t seen by the policy
  int action = 0;
  double reward = 0.0;
  bool done = false;
  std::string reason;  // empty unless done
  double entropy = 0.0;
  bool cache_hit = false;
  std::string state;  // post-action NSC signature

  bool operator==(const StepRecord&) const = default;
};

struct EpisodeSummary {
  long episode = 0;
  int stage = 0;
  std::string env_id;
  long length = 0;
  double accumulated_reward = 0.0;
  double best_reward = 0.0;   // highest step reward inside the episode
  double best_so_far = 0.0;   // running best episode reward within the stage
  long end_step = 0;
  std::string final_state;

  bool operator==(const EpisodeSummary&) const = default;
};

struct TrialLog {
  std::vector<StepRecord> steps;
  std::vector<EpisodeSummary> episodes;  // completed episodes only

  // Recomputes episode summaries from the step records.
  static std::vector<EpisodeSummary> derive_episodes(
      const std::vector<StepRecord>& steps);

  // steps.jsonl + episodes.jsonl under dir.
  void save(const std::filesystem::path& dir) const;
  // Throws ConfigError when stored summaries disagree with the step records.
  static TrialLog load(const std::filesystem::path& dir);

  std::string digest() const;  // content hash over the serialized log

  bool operator==(const TrialLog&) const = default;
};

struct TrialResult {
  TrialLog log;
  nlohmann::ordered_json checkpoint;  // agent snapshot + manifest
  // Serialized parameters at each stage boundary, for transfer checks.
  std::vector<std::string> stage_start_param_digest;
  std::vector<std::string> stage_end_param_digest;
  long estimator_calls = 0;
  long distinct_states = 0;
};

// Runs the interaction loop over every stage: reset, act, step, learn,
// auto-reset on termination. Meta-A2C zeroes its recurrent state at each
// stage start and keeps (or re-draws) its weights according to
// transfer_policy; DQN always trains a fresh network per stage.
// When out_dir is set, writes steps.jsonl, episodes.jsonl, checkpoint.json
// and a per-environment reward cache.
TrialResult run_trial(const TrialConfig& config);

struct BestArchitecture {
  std::string env_id;
  std::string state;
  double reward = 0.0;
  long step = 0;
};

struct EvaluationResult {
  TrialLog log;
  std::vector<BestArchitecture> top_architectures;  // two per environment
  std::string params_digest_before;
  std::string params_digest_after;
};

// Frozen-policy evaluation: no updates, hidden state reset per environment.
// Throws IncompatibleCheckpointError if the checkpoint's action set does not
// match the requested mode.
EvaluationResult run_frozen_evaluation(const nlohmann::ordered_json& checkpoint,
                                       const std::vector<std::string>& env_ids,
                                       long t_max, const TrialConfig& config);

// Extracts the best `count` distinct architectures per environment, ranked by
// reward with ties broken by the earliest step.
std::vector<BestArchitecture> best_architectures(const TrialLog& log,
                                                 int count = 2);

struct WindowStat {
  int window = 0;
  long count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  bool partial = false;
};

struct MetricSeries {
  std::string metric;
  int stage = 0;
  std::string env_id;
  std::vector<WindowStat> windows;
};

// Per-stage windowed means/stds: best_reward, accumulated_reward and
// episode_length over episode windows, entropy over step windows. The final
// partial window is included and flagged.
std::vector<MetricSeries> aggregate_metrics(const TrialLog& log,
                                            int window = 50);

struct ActionProportions {
  int stage = 0;
  std::string env_id;
  long total = 0;
  std::vector<double> proportions;  // one entry per action id, fixed size
};

std::vector<ActionProportions> action_proportions(const TrialLog& log,
                                                  Mode mode,
                                                  bool by_stage = true);

struct MultiBranchStats {
  std::vector<WindowStat> windows;  // share of multi-branch episodes
  long multi_branch_episodes = 0;
  long chain_episodes = 0;
};

// An episode is multi-branch when its final state holds at least one
// addition/concatenation vector; the builder's auto-inserted merge does not
// count.
MultiBranchStats count_multibranch(const TrialLog& log, int window = 50);

// Plot-ready CSV emission for the three series kinds.
void write_metrics_csv(const std::vector<MetricSeries>& series,
                       const std::filesystem::path& path);
void write_action_proportions_csv(const std::vector<ActionProportions>& rows,
                                  const std::filesystem::path& path);
void write_multibranch_csv(const MultiBranchStats& stats,
                           const std::filesystem::path& path);

}  // namespace metanas
