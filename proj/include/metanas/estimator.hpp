#pragma once

#include <map>
#include <optional>
#include <string>

#include "metanas/nsc.hpp"

namespace metanas {

enum class EstimateSource { kSurrogate, kExternal, kCache };

struct EstimatorResult {
  double accuracy = 0.0;  // in [0, 1]
  EstimateSource source = EstimateSource::kSurrogate;
};

// Structural features feeding the surrogate. Counted on the built graph, so
// the auto-inserted leaf merge contributes to n_merge.
struct ArchitectureFeatures {
  int n_conv = 0;
  int n_pool = 0;
  int kernel_diversity = 0;  // distinct conv kernel sizes, 0..3
  int n_merge = 0;           // Add + Concat nodes
  int depth = 0;             // non-terminal vector count
  int final_spatial = 0;     // output height after shape inference

  bool operator==(const ArchitectureFeatures&) const = default;
};

// Extracts features from the built and shaped graph. A state with no
// non-terminal vectors yields all zeros. Throws InvalidArchitectureError when
// shape inference fails.
ArchitectureFeatures surrogate_features(const ArchitectureState& state,
                                        const EnvironmentConfig& config);

// Signal term of the surrogate, before noise and clamping:
//   difficulty * (0.5*(1 - e^(-n_conv/2)) + 0.3*(1 - e^(-n_pool/2))
//                 + 0.2*(kernel_diversity/3)).
// Monotone non-decreasing in each feature; strictly increasing in difficulty
// for any non-empty architecture.
double surrogate_score(const ArchitectureFeatures& features, double difficulty);

// Deterministic noise in [-1, 1): FNV-1a over canonical key + ";" + seed,
// interpreted as a signed 64-bit value over 2^63.
double surrogate_noise(const std::string& key, std::uint64_t seed);

// Deterministic synthetic accuracy in [0, 1]:
//   clamp01(surrogate_score + 0.02 * noise).
// Stands in for early-stop training behind the same state -> accuracy
// contract. Throws InvalidArchitectureError for unbuildable states.
double surrogate_accuracy(const ArchitectureState& state,
                          const EnvironmentConfig& config);

class SurrogateEstimator {
 public:
  double estimate(const ArchitectureState& state,
                  const EnvironmentConfig& config) const {
    return surrogate_accuracy(state, config);
  }
};

// Synthetic per-environment difficulty constants, hardest last.
const std::map<std::string, double>& default_difficulty_table();

// Table value when present, otherwise fallback.
double difficulty_for(const std::string& env_id, double fallback = 0.5);

// --- external trainer protocol ------------------------------------------
// The delegation contract for a real trainer: a request carries the NSC
// list, the input shape and the full training recipe; the response carries
// an accuracy in [0, 1] or an error string. Messages are UTF-8 JSON.

struct TrainingSpec {
  int dense_units = 1024;
  std::string activation = "relu";
  double dropout = 0.4;
  int num_classes = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double learning_rate = 0.001;
  double lr_decay_factor = 0.2;
  int lr_decay_every_epochs = 5;
  int epochs = 12;
  int batch_size = 128;  // 64 in multi-branch runs

  bool operator==(const TrainingSpec&) const = default;
};

struct EvalRequest {
  std::string dataset_id;
  ArchitectureState state;
  Shape input_shape{84, 84, 3};
  TrainingSpec train;
};

std::string encode_eval_request(const ArchitectureState& state,
                                const std::string& dataset_id,
                                const TrainingSpec& train,
                                Shape input_shape = Shape{84, 84, 3},
                                Mode mode = Mode::kChain);

// Throws MalformedResponseError on unparseable/incomplete messages.
EvalRequest decode_eval_request(const std::string& message);

std::string encode_eval_response(double accuracy);
std::string encode_eval_error(const std::string& error);

// Throws MalformedResponseError or AccuracyOutOfRangeError.
EstimatorResult decode_eval_response(const std::string& message);

}  // namespace metanas
