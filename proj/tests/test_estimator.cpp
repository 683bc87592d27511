#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "metanas/errors.hpp"
#include "metanas/estimator.hpp"
#include "oracle_states.hpp"
#include "test_support.hpp"

using namespace metanas;
using metanas::oracle::chain;
using metanas::testing::make_config;
using metanas::testing::random_state;

TEST_CASE("feature extraction on the golden architectures") {
  EnvironmentConfig cfg = make_config(Mode::kMultiBranch);

  const ArchitectureFeatures worked =
      surrogate_features(oracle::worked_example(), cfg);
  CHECK(worked.n_conv == 3);
  CHECK(worked.n_pool == 3);
  CHECK(worked.kernel_diversity == 3);
  CHECK(worked.n_merge == 2);  // the appended addition + the auto merge
  CHECK(worked.depth == 7);    // terminal does not count
  CHECK(worked.final_spatial == 42);

  EnvironmentConfig chain_cfg = make_config(Mode::kChain);
  const ArchitectureFeatures omniglot =
      surrogate_features(oracle::best_omniglot().state, chain_cfg);
  CHECK(omniglot.n_conv == 6);
  CHECK(omniglot.n_pool == 3);
  CHECK(omniglot.kernel_diversity == 2);
  CHECK(omniglot.n_merge == 0);
  CHECK(omniglot.final_spatial == 3);

  ArchitectureState empty;
  empty.mode = Mode::kChain;
  CHECK(surrogate_features(empty, chain_cfg) == ArchitectureFeatures{});

  ArchitectureState terminal_only;
  terminal_only.mode = Mode::kChain;
  terminal_only.vectors = {oracle::vec(1, LayerType::kTerminal, 0, 0, 0)};
  CHECK(surrogate_features(terminal_only, chain_cfg) == ArchitectureFeatures{});
}

TEST_CASE("invalid architectures surface as errors") {
  EnvironmentConfig cfg = make_config(Mode::kChain);
  cfg.input_shape = Shape{2, 2, 3};
  CHECK_THROWS_AS(
      surrogate_features(chain({{LayerType::kMaxPooling, 3}}), cfg),
      InvalidArchitectureError);
  CHECK_THROWS_AS(surrogate_accuracy(chain({{LayerType::kMaxPooling, 3}}), cfg),
                  InvalidArchitectureError);
}

TEST_CASE("noise-free score matches the closed form") {
  const ArchitectureFeatures f{3, 3, 3, 2, 7, 42};
  // 0.9 * (0.5*(1-e^-1.5) + 0.3*(1-e^-1.5) + 0.2)
  const double expected = 0.9 * (0.8 * (1.0 - std::exp(-1.5)) + 0.2);
  CHECK(surrogate_score(f, 0.9) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(surrogate_score(f, 0.9) == doctest::Approx(0.7394).epsilon(1e-4));
  CHECK(surrogate_score(ArchitectureFeatures{}, 0.9) == 0.0);
}

TEST_CASE("empty architectures carry noise only") {
  for (double difficulty : {0.3, 0.6, 1.0}) {
    for (std::uint64_t seed : {0ULL, 7ULL, 99ULL}) {
      EnvironmentConfig cfg = make_config(Mode::kChain);
      cfg.difficulty = difficulty;
      cfg.seed = seed;
      ArchitectureState empty;
      empty.mode = Mode::kChain;
      const double acc = surrogate_accuracy(empty, cfg);
      CHECK(acc >= 0.0);
      CHECK(acc <= 0.02);
    }
  }
}

TEST_CASE("appending a convolution never lowers the noise-free score") {
  // every chain of depth <= 3 over the seven layer choices
  const std::vector<std::pair<LayerType, int>> ops = {
      {LayerType::kConvolution, 1}, {LayerType::kConvolution, 3},
      {LayerType::kConvolution, 5}, {LayerType::kMaxPooling, 2},
      {LayerType::kMaxPooling, 3},  {LayerType::kAvgPooling, 2},
      {LayerType::kAvgPooling, 3}};
  EnvironmentConfig cfg = make_config(Mode::kChain);

  std::vector<std::vector<std::pair<LayerType, int>>> stack = {{}};
  for (int depth = 0; depth < 3; ++depth) {
    const size_t count = stack.size();
    for (size_t i = 0; i < count; ++i) {
      if (static_cast<int>(stack[i].size()) != depth) continue;
      for (const auto& op : ops) {
        auto extended = stack[i];
        extended.push_back(op);
        stack.push_back(std::move(extended));
      }
    }
  }

  int checked = 0;
  for (const auto& layers : stack) {
    ArchitectureState base = chain(layers);
    const double before =
        layers.empty()
            ? 0.0
            : surrogate_score(surrogate_features(base, cfg), cfg.difficulty);
    for (int kernel : {1, 3, 5}) {
      auto extended = layers;
      extended.push_back({LayerType::kConvolution, kernel});
      try {
        const double after = surrogate_score(
            surrogate_features(chain(extended), cfg), cfg.difficulty);
        CHECK(after >= before);
        ++checked;
      } catch (const InvalidArchitectureError&) {
        // the appended convolution underflowed the map; not an architecture
      }
    }
  }
  CHECK(checked > 1100);
}

TEST_CASE("surrogate is deterministic to the last bit") {
  EnvironmentConfig cfg = make_config(Mode::kMultiBranch);
  cfg.seed = 12345;
  const ArchitectureState state = oracle::worked_example();
  const double a = surrogate_accuracy(state, cfg);
  const double b = surrogate_accuracy(state, cfg);
  CHECK(a == b);

  cfg.seed = 12346;
  CHECK(surrogate_accuracy(state, cfg) != a);  // seed moves the noise
}

TEST_CASE("surrogate stays inside [0, 1] over random states") {
  Rng rng(31);
  int evaluated = 0;
  for (int trial = 0; trial < 100000; ++trial) {
    EnvironmentConfig cfg =
        make_config(trial % 2 == 0 ? Mode::kChain : Mode::kMultiBranch);
    cfg.seed = static_cast<std::uint64_t>(trial);
    cfg.difficulty = 0.05 + 0.95 * (trial % 7) / 6.0;
    const ArchitectureState state = random_state(rng, cfg);
    try {
      const double acc = surrogate_accuracy(state, cfg);
      CHECK(acc >= 0.0);
      CHECK(acc <= 1.0);
      ++evaluated;
    } catch (const InvalidArchitectureError&) {
      // pooling chains can underflow; that is the environment's concern
    }
  }
  CHECK(evaluated > 50000);
}

TEST_CASE("difficulty strictly orders the noise-free score") {
  EnvironmentConfig cfg = make_config(Mode::kChain);
  const ArchitectureFeatures f =
      surrogate_features(oracle::best_dtd().state, cfg);
  double last = 0.0;
  for (double difficulty : {0.3, 0.4, 0.6, 0.7, 0.9}) {
    const double score = surrogate_score(f, difficulty);
    CHECK(score > last);
    last = score;
  }
}

TEST_CASE("difficulty table mirrors the hardness ordering") {
  const auto& table = default_difficulty_table();
  CHECK(table.at("omniglot") == 0.9);
  CHECK(table.at("vgg_flower") == 0.7);
  CHECK(table.at("aircraft") == 0.6);
  CHECK(table.at("dtd") == 0.4);
  CHECK(table.at("cu_birds") == 0.3);
  CHECK(difficulty_for("unknown_env", 0.5) == 0.5);
}

TEST_CASE("eval request carries the NSC rows and the training recipe") {
  TrainingSpec spec;
  spec.num_classes = 1623;
  const std::string msg =
      encode_eval_request(oracle::worked_example(), "omniglot", spec,
                          Shape{84, 84, 3}, Mode::kMultiBranch);

  const auto parsed = nlohmann::json::parse(msg);
  CHECK(parsed.at("dataset_id") == "omniglot");
  CHECK(parsed.at("nsc").size() == 8);
  CHECK(parsed.at("nsc").at(0) == nlohmann::json({1, 1, 1, 0, 0}));
  CHECK(parsed.at("nsc").at(7) == nlohmann::json({8, 7, 0, 0, 0}));
  CHECK(parsed.at("input_shape") == nlohmann::json({84, 84, 3}));
  CHECK(parsed.at("train").at("epochs") == 12);
  CHECK(parsed.at("train").at("batch_size") == 128);
  CHECK(parsed.at("train").at("optimizer").at("beta1") == 0.9);
  CHECK(parsed.at("train").at("optimizer").at("beta2") == 0.999);
  CHECK(parsed.at("train").at("optimizer").at("epsilon") == 1e-8);
  CHECK(parsed.at("train").at("optimizer").at("learning_rate") == 0.001);
  CHECK(parsed.at("train").at("optimizer").at("lr_decay_factor") == 0.2);
  CHECK(parsed.at("train").at("optimizer").at("lr_decay_every_epochs") == 5);
  CHECK(parsed.at("train").at("prediction_module").at("dense_units") == 1024);
  CHECK(parsed.at("train").at("prediction_module").at("dropout") == 0.4);
}

TEST_CASE("request round-trip is the identity") {
  Rng rng(41);
  EnvironmentConfig cfg = make_config(Mode::kMultiBranch);
  for (int trial = 0; trial < 50; ++trial) {
    const ArchitectureState state = random_state(rng, cfg);
    TrainingSpec spec;
    spec.num_classes = 10 + rng.uniform_int(1000);
    spec.batch_size = trial % 2 == 0 ? 128 : 64;
    const EvalRequest back = decode_eval_request(encode_eval_request(
        state, "dtd", spec, Shape{84, 84, 3}, Mode::kMultiBranch));
    CHECK(back.state == state);
    CHECK(back.dataset_id == "dtd");
    CHECK(back.train == spec);
    CHECK(back.input_shape == Shape{84, 84, 3});
  }
}

TEST_CASE("response parsing enforces the accuracy bounds") {
  const EstimatorResult ok = decode_eval_response(encode_eval_response(0.42));
  CHECK(ok.accuracy == 0.42);
  CHECK(ok.source == EstimateSource::kExternal);

  CHECK_THROWS_AS(decode_eval_response(encode_eval_response(1.2)),
                  AccuracyOutOfRangeError);
  CHECK_THROWS_AS(decode_eval_response(encode_eval_response(-0.1)),
                  AccuracyOutOfRangeError);
  CHECK_THROWS_AS(decode_eval_response("not json"), MalformedResponseError);
  CHECK_THROWS_AS(decode_eval_response("{\"result\":{}}"),
                  MalformedResponseError);
  CHECK_THROWS_AS(decode_eval_response(encode_eval_error("trainer exploded")),
                  MalformedResponseError);
}
