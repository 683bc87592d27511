#include "metanas/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "metanas/errors.hpp"
#include "metanas/graph.hpp"

namespace metanas {

using json = nlohmann::ordered_json;

ArchitectureFeatures surrogate_features(const ArchitectureState& state,
                                        const EnvironmentConfig& config) {
  ArchitectureFeatures f;
  f.depth = state.content_depth();
  if (f.depth == 0) return f;  // nothing to build, all zeros

  NetworkGraph graph;
  try {
    graph = build_and_shape(state, config);
  } catch (const ShapeUnderflowError& e) {
    throw InvalidArchitectureError(e.what());
  }

  std::set<int> kernels;
  for (const GraphNode& n : graph.nodes) {
    switch (n.op) {
      case OpKind::kPcc:
        ++f.n_conv;
        kernels.insert(n.arg);
        break;
      case OpKind::kMaxPool:
      case OpKind::kAvgPool:
        ++f.n_pool;
        break;
      case OpKind::kAdd:
      case OpKind::kConcat:
        ++f.n_merge;
        break;
      case OpKind::kInput:
        break;
    }
  }
  f.kernel_diversity = static_cast<int>(kernels.size());
  f.final_spatial = graph.node(graph.output_id).out.height;
  return f;
}

double surrogate_score(const ArchitectureFeatures& features, double difficulty) {
  const double conv_term = 0.5 * (1.0 - std::exp(-features.n_conv / 2.0));
  const double pool_term = 0.3 * (1.0 - std::exp(-features.n_pool / 2.0));
  const double diversity_term = 0.2 * (features.kernel_diversity / 3.0);
  return difficulty * (conv_term + pool_term + diversity_term);
}

double surrogate_noise(const std::string& key, std::uint64_t seed) {
  const std::uint64_t h = fnv1a64(key + ";" + std::to_string(seed));
  return static_cast<double>(static_cast<std::int64_t>(h)) /
         9223372036854775808.0;  // 2^63
}

double surrogate_accuracy(const ArchitectureState& state,
                          const EnvironmentConfig& config) {
  const ArchitectureFeatures f = surrogate_features(state, config);
  const double u = surrogate_noise(canonical_key(state, config.env_id),
                                   config.seed);
  const double raw = surrogate_score(f, config.difficulty) + 0.02 * u;
  return std::clamp(raw, 0.0, 1.0);
}

const std::map<std::string, double>& default_difficulty_table() {
  static const std::map<std::string, double> table{
      {"omniglot", 0.9}, {"vgg_flower", 0.7}, {"aircraft", 0.6},
      {"dtd", 0.4},      {"cu_birds", 0.3},
  };
  return table;
}

double difficulty_for(const std::string& env_id, double fallback) {
  const auto& table = default_difficulty_table();
  auto it = table.find(env_id);
  return it == table.end() ? fallback : it->second;
}

namespace {

json training_spec_to_json(const TrainingSpec& t) {
  json train;
  train["optimizer"] = {
      {"name", "adam"},          {"beta1", t.adam_beta1},
      {"beta2", t.adam_beta2},   {"epsilon", t.adam_epsilon},
      {"learning_rate", t.learning_rate},
      {"lr_decay_factor", t.lr_decay_factor},
      {"lr_decay_every_epochs", t.lr_decay_every_epochs},
  };
  train["epochs"] = t.epochs;
  train["batch_size"] = t.batch_size;
  train["prediction_module"] = {
      {"dense_units", t.dense_units}, {"activation", t.activation},
      {"dropout", t.dropout},         {"num_classes", t.num_classes},
      {"output", "softmax"},
  };
  return train;
}

TrainingSpec training_spec_from_json(const json& train) {
  TrainingSpec t;
  const json& opt = train.at("optimizer");
  t.adam_beta1 = opt.at("beta1").get<double>();
  t.adam_beta2 = opt.at("beta2").get<double>();
  t.adam_epsilon = opt.at("epsilon").get<double>();
  t.learning_rate = opt.at("learning_rate").get<double>();
  t.lr_decay_factor = opt.at("lr_decay_factor").get<double>();
  t.lr_decay_every_epochs = opt.at("lr_decay_every_epochs").get<int>();
  t.epochs = train.at("epochs").get<int>();
  t.batch_size = train.at("batch_size").get<int>();
  const json& pm = train.at("prediction_module");
  t.dense_units = pm.at("dense_units").get<int>();
  t.activation = pm.at("activation").get<std::string>();
  t.dropout = pm.at("dropout").get<double>();
  t.num_classes = pm.at("num_classes").get<int>();
  return t;
}

}  // namespace

std::string encode_eval_request(const ArchitectureState& state,
                                const std::string& dataset_id,
                                const TrainingSpec& train, Shape input_shape,
                                Mode mode) {
  json msg;
  msg["dataset_id"] = dataset_id;
  msg["mode"] = to_string(mode);
  json nsc = json::array();
  for (const NscVector& v : state.vectors)
    nsc.push_back({v.layer_index, static_cast<int>(v.type), v.kernel_size,
                   v.pred1, v.pred2});
  msg["nsc"] = nsc;
  msg["input_shape"] = {input_shape.height, input_shape.width,
                        input_shape.channels};
  msg["train"] = training_spec_to_json(train);
  return msg.dump();
}

EvalRequest decode_eval_request(const std::string& message) {
  json msg;
  try {
    msg = json::parse(message);
    EvalRequest req;
    req.dataset_id = msg.at("dataset_id").get<std::string>();
    req.state.mode = mode_from_string(msg.at("mode").get<std::string>());
    for (const json& row : msg.at("nsc")) {
      if (row.size() != 5)
        throw MalformedResponseError("nsc rows must have 5 fields");
      req.state.vectors.push_back(
          NscVector{row[0].get<int>(), static_cast<LayerType>(row[1].get<int>()),
                    row[2].get<int>(), row[3].get<int>(), row[4].get<int>()});
    }
    const json& shape = msg.at("input_shape");
    req.input_shape =
        Shape{shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
    req.train = training_spec_from_json(msg.at("train"));
    return req;
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("bad eval request: ") + e.what());
  }
}

std::string encode_eval_response(double accuracy) {
  json msg;
  msg["result"]["accuracy"] = accuracy;
  return msg.dump();
}

std::string encode_eval_error(const std::string& error) {
  json msg;
  msg["result"]["error"] = error;
  return msg.dump();
}

EstimatorResult decode_eval_response(const std::string& message) {
  json msg;
  try {
    msg = json::parse(message);
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("bad eval response: ") + e.what());
  }
  if (!msg.contains("result"))
    throw MalformedResponseError("eval response lacks 'result'");
  const json& result = msg["result"];
  if (result.contains("error"))
    throw MalformedResponseError("trainer error: " +
                                 result["error"].get<std::string>());
  if (!result.contains("accuracy") || !result["accuracy"].is_number())
    throw MalformedResponseError("eval response lacks 'result.accuracy'");
  const double acc = result["accuracy"].get<double>();
  if (!(acc >= 0.0 && acc <= 1.0))
    throw AccuracyOutOfRangeError("accuracy " + std::to_string(acc) +
                                  " outside [0, 1]");
  return EstimatorResult{acc, EstimateSource::kExternal};
}

}  // namespace metanas
