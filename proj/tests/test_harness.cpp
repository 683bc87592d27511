#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "metanas/errors.hpp"
#include "metanas/harness.hpp"
#include "oracle_states.hpp"
#include "test_support.hpp"

using namespace metanas;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("metanas_harness_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TrialConfig base_config(AgentKind agent, Mode mode = Mode::kChain) {
  TrialConfig cfg;
  cfg.agent = agent;
  cfg.transfer_policy = agent == AgentKind::kMetaA2C;
  cfg.mode = mode;
  cfg.seed = 7;
  cfg.a2c.lstm_units = 16;  // small net keeps the suite quick
  return cfg;
}

}  // namespace

TEST_CASE("random trials produce complete, bounded logs") {
  TrialConfig cfg = base_config(AgentKind::kRandom);
  cfg.stages = {{"omniglot", 100}};
  const TrialResult result = run_trial(cfg);

  CHECK(result.log.steps.size() == 100);
  for (const EpisodeSummary& e : result.log.episodes) {
    CHECK(e.length <= cfg.env.max_episode_steps);
    CHECK(e.length >= 1);
  }
  CHECK(result.estimator_calls == result.distinct_states);
}

TEST_CASE("config validation gates bad trials") {
  TrialConfig cfg = base_config(AgentKind::kDqn);
  cfg.stages = {{"omniglot", 50}};
  cfg.transfer_policy = true;  // only meaningful for meta_a2c
  CHECK_THROWS_AS(run_trial(cfg), ConfigError);

  TrialConfig empty = base_config(AgentKind::kRandom);
  CHECK_THROWS_AS(empty.validate(), ConfigError);

  TrialConfig bad_stage = base_config(AgentKind::kRandom);
  bad_stage.stages = {{"omniglot", 0}};
  CHECK_THROWS_AS(bad_stage.validate(), ConfigError);
}

TEST_CASE("trial config parses from key-value text") {
  const KeyValueConfig kv = KeyValueConfig::from_string(R"(
# three-stage curriculum
stages = omniglot:800, vgg_flower:700, dtd:700
agent = meta_a2c
mode = chain
seed = 3
a2c.j = 5
a2c.gamma = 0.9
a2c.eta = 0.01
difficulty.omniglot = 0.85
)");
  const TrialConfig cfg = trial_config_from(kv);
  CHECK(cfg.stages.size() == 3);
  CHECK(cfg.stages[1].env_id == "vgg_flower");
  CHECK(cfg.stages[1].t_max == 700);
  CHECK(cfg.agent == AgentKind::kMetaA2C);
  CHECK(cfg.transfer_policy);
  CHECK(cfg.seed == 3);
  CHECK(cfg.a2c.update_horizon == 5);
  CHECK(cfg.difficulty_overrides.at("omniglot") == 0.85);
  CHECK(cfg.stage_env_config(cfg.stages[0]).difficulty == 0.85);
  CHECK(cfg.stage_env_config(cfg.stages[2]).difficulty == 0.4);
}

TEST_CASE("curriculum transfer hands parameters across stages") {
  TrialConfig cfg = base_config(AgentKind::kMetaA2C);
  cfg.stages = {{"omniglot", 40}, {"vgg_flower", 40}, {"dtd", 40}};
  const TrialResult result = run_trial(cfg);
  REQUIRE(result.stage_start_param_digest.size() == 3);
  CHECK(result.stage_start_param_digest[1] == result.stage_end_param_digest[0]);
  CHECK(result.stage_start_param_digest[2] == result.stage_end_param_digest[1]);
  // learning happened, so stage ends differ from stage starts
  CHECK(result.stage_start_param_digest[0] != result.stage_end_param_digest[0]);

  cfg.transfer_policy = false;
  const TrialResult fresh = run_trial(cfg);
  CHECK(fresh.stage_start_param_digest[1] != fresh.stage_end_param_digest[0]);
}

TEST_CASE("dqn trains a new network per stage") {
  TrialConfig cfg = base_config(AgentKind::kDqn);
  cfg.stages = {{"omniglot", 60}, {"dtd", 60}};
  const TrialResult result = run_trial(cfg);
  CHECK(result.stage_start_param_digest[1] != result.stage_end_param_digest[0]);
  CHECK(result.stage_start_param_digest[0] != result.stage_start_param_digest[1]);
}

TEST_CASE("identical configs replay bit-identically") {
  for (AgentKind agent :
       {AgentKind::kMetaA2C, AgentKind::kDqn, AgentKind::kRandom}) {
    TrialConfig cfg = base_config(agent);
    cfg.stages = {{"omniglot", 120}, {"dtd", 80}};
    const TrialResult a = run_trial(cfg);
    const TrialResult b = run_trial(cfg);
    CHECK(a.log == b.log);
    CHECK(a.log.digest() == b.log.digest());
    CHECK(a.checkpoint.dump() == b.checkpoint.dump());
  }
}

TEST_CASE("logs round-trip through the filesystem") {
  TrialConfig cfg = base_config(AgentKind::kMetaA2C);
  cfg.stages = {{"omniglot", 80}};
  cfg.out_dir = temp_dir("roundtrip");
  const TrialResult result = run_trial(cfg);

  const TrialLog loaded = TrialLog::load(cfg.out_dir);
  CHECK(loaded == result.log);

  // per-episode accumulated reward equals the sum of its step rewards
  for (const EpisodeSummary& e : loaded.episodes) {
    double sum = 0.0;
    long count = 0;
    for (const StepRecord& r : loaded.steps) {
      if (r.episode == e.episode && r.stage == e.stage) {
        sum += r.reward;
        ++count;
      }
    }
    CHECK(count == e.length);
    CHECK(sum == doctest::Approx(e.accumulated_reward).epsilon(1e-12));
  }

  // tampered summaries are rejected on load
  TrialLog tampered = loaded;
  tampered.episodes[0].accumulated_reward += 1.0;
  tampered.save(cfg.out_dir);
  CHECK_THROWS_AS(TrialLog::load(cfg.out_dir), ConfigError);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("stage boundaries land on the exact global steps") {
  TrialConfig cfg = base_config(AgentKind::kRandom);
  cfg.stages = {{"omniglot", 37}, {"vgg_flower", 53}, {"dtd", 11}};
  const TrialResult result = run_trial(cfg);
  long expected_start = 0;
  int stage = 0;
  for (const StageSpec& spec : cfg.stages) {
    bool found = false;
    for (const StepRecord& r : result.log.steps) {
      if (r.stage == stage) {
        CHECK(r.global_step == expected_start);
        found = true;
        break;
      }
    }
    CHECK(found);
    expected_start += spec.t_max;
    ++stage;
  }
  CHECK(result.log.steps.size() == static_cast<size_t>(expected_start));
}

TEST_CASE("windowed aggregation: means, stds, partial windows") {
  TrialLog log;
  // 120 episodes: reward 0.5 everywhere, lengths cycling 1..50
  long step = 0;
  for (int episode = 0; episode < 120; ++episode) {
    const int length = episode % 50 + 1;
    for (int c = 0; c < length; ++c) {
      StepRecord r;
      r.global_step = step++;
      r.stage = 0;
      r.env_id = "omniglot";
      r.episode = episode;
      r.episode_step = c;
      r.action = 0;
      r.reward = 0.5;
      r.done = c + 1 == length;
      r.reason = r.done ? "Terminal" : "";
      r.entropy = 2.0;
      r.state = "1,3,0,0";
      log.steps.push_back(r);
    }
  }
  log.episodes = TrialLog::derive_episodes(log.steps);
  REQUIRE(log.episodes.size() == 120);

  const auto series = aggregate_metrics(log, 50);
  auto find = [&](const std::string& metric) {
    for (const MetricSeries& s : series)
      if (s.metric == metric) return s;
    throw std::runtime_error("missing series " + metric);
  };

  const MetricSeries best = find("best_reward");
  REQUIRE(best.windows.size() == 3);  // 50 + 50 + 20
  CHECK(best.windows[0].mean == doctest::Approx(0.5));
  CHECK(best.windows[0].stddev == doctest::Approx(0.0));
  CHECK_FALSE(best.windows[0].partial);
  CHECK(best.windows[2].count == 20);
  CHECK(best.windows[2].partial);

  // population std of 1..50 around its mean 25.5
  const MetricSeries lengths = find("episode_length");
  CHECK(lengths.windows[0].mean == doctest::Approx(25.5));
  CHECK(lengths.windows[0].stddev == doctest::Approx(14.43087).epsilon(1e-5));

  const MetricSeries entropy_series = find("entropy");
  CHECK(entropy_series.windows[0].mean == doctest::Approx(2.0));
}

TEST_CASE("action proportions: fixed rows that sum to one") {
  TrialLog log;
  for (int i = 0; i < 10; ++i) {
    StepRecord r;
    r.stage = 0;
    r.env_id = "omniglot";
    r.episode = i;
    r.action = 3;
    r.done = true;
    r.state = "2,2,0,0";
    log.steps.push_back(r);
  }
  const auto rows = action_proportions(log, Mode::kMultiBranch, true);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].proportions.size() == 14);  // A8..A13 present even at zero
  CHECK(rows[0].proportions[3] == 1.0);
  double sum = 0.0;
  for (double p : rows[0].proportions) sum += p;
  CHECK(std::fabs(sum - 1.0) <= 1e-12);

  TrialConfig cfg = base_config(AgentKind::kRandom);
  cfg.stages = {{"omniglot", 10000}};
  const TrialResult result = run_trial(cfg);
  const auto uniform = action_proportions(result.log, Mode::kChain, true);
  REQUIRE(uniform.size() == 1);
  for (double p : uniform[0].proportions)
    CHECK(std::fabs(p - 1.0 / 8.0) < 0.02);
}

TEST_CASE("multi-branch episode accounting excludes the auto merge") {
  TrialLog log;
  auto add_episode = [&log](long episode, const std::string& final_state) {
    StepRecord r;
    r.stage = 0;
    r.env_id = "omniglot";
    r.episode = episode;
    r.action = 0;
    r.reward = 0.1;
    r.done = true;
    r.reason = "Terminal";
    r.state = final_state;
    log.steps.push_back(r);
  };
  // chain-only episode: two parallel stems WITHOUT an explicit merge still
  // count as chain, since the builder's concat is not an NSC vector
  add_episode(0, "1,3,0,0;1,5,0,0");
  add_episode(1, state_signature(oracle::worked_example()));
  add_episode(2, "1,3,0,0;2,2,1,0");
  log.episodes = TrialLog::derive_episodes(log.steps);

  const MultiBranchStats stats = count_multibranch(log, 50);
  CHECK(stats.multi_branch_episodes == 1);
  CHECK(stats.chain_episodes == 2);
  REQUIRE(stats.windows.size() == 1);
  CHECK(stats.windows[0].mean == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("best-architecture extraction ranks by reward then earliest step") {
  TrialLog log;
  auto add = [&log](long step, const std::string& state, double reward) {
    StepRecord r;
    r.global_step = step;
    r.stage = 0;
    r.env_id = "aircraft";
    r.state = state;
    r.reward = reward;
    log.steps.push_back(r);
  };
  add(0, "1,3,0,0", 0.4);
  add(1, "1,5,0,0", 0.6);
  add(2, "1,3,0,0;2,2,1,0", 0.6);  // same reward, later step
  add(3, "1,1,0,0", 0.2);
  add(4, "1,5,0,0", 0.6);  // duplicate state, not a second entry

  const auto best = best_architectures(log, 2);
  REQUIRE(best.size() == 2);
  CHECK(best[0].state == "1,5,0,0");
  CHECK(best[0].reward == 0.6);
  CHECK(best[0].step == 1);
  CHECK(best[1].state == "1,3,0,0;2,2,1,0");
  CHECK(best[1].reward == 0.6);
}

TEST_CASE("frozen evaluation never touches the parameters") {
  TrialConfig train_cfg = base_config(AgentKind::kMetaA2C);
  train_cfg.stages = {{"omniglot", 60}};
  const TrialResult trained = run_trial(train_cfg);

  TrialConfig eval_cfg = base_config(AgentKind::kMetaA2C);
  eval_cfg.seed = 123;
  const EvaluationResult eval = run_frozen_evaluation(
      trained.checkpoint, {"aircraft", "cu_birds"}, 50, eval_cfg);

  CHECK(eval.params_digest_before == eval.params_digest_after);
  CHECK(eval.log.steps.size() == 100);
  CHECK(eval.top_architectures.size() <= 4);
  for (const BestArchitecture& b : eval.top_architectures)
    CHECK((b.env_id == "aircraft" || b.env_id == "cu_birds"));

  // a chain checkpoint cannot drive a multi-branch evaluation
  TrialConfig wrong_mode = base_config(AgentKind::kMetaA2C, Mode::kMultiBranch);
  CHECK_THROWS_AS(
      run_frozen_evaluation(trained.checkpoint, {"aircraft"}, 10, wrong_mode),
      IncompatibleCheckpointError);
}

TEST_CASE("logged entropies replay exactly from the same seed") {
  TrialConfig cfg = base_config(AgentKind::kMetaA2C);
  cfg.stages = {{"omniglot", 100}};
  const TrialResult first = run_trial(cfg);
  const TrialResult second = run_trial(cfg);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const size_t idx =
        static_cast<size_t>(rng.uniform_int(static_cast<int>(first.log.steps.size())));
    CHECK(first.log.steps[idx].entropy == second.log.steps[idx].entropy);
  }
}

TEST_CASE("csv emission writes one row per window and action") {
  TrialConfig cfg = base_config(AgentKind::kRandom, Mode::kMultiBranch);
  cfg.stages = {{"omniglot", 300}};
  const TrialResult result = run_trial(cfg);
  const auto dir = temp_dir("csv");

  write_metrics_csv(aggregate_metrics(result.log, 50), dir / "metrics.csv");
  write_action_proportions_csv(
      action_proportions(result.log, Mode::kMultiBranch, true),
      dir / "actions.csv");
  write_multibranch_csv(count_multibranch(result.log, 50),
                        dir / "multibranch.csv");

  for (const char* name : {"metrics.csv", "actions.csv", "multibranch.csv"}) {
    std::ifstream in(dir / name);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header.find(',') != std::string::npos);
    std::string row;
    CHECK(std::getline(in, row).good());
  }
  std::filesystem::remove_all(dir);
}
