#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "metanas/actions.hpp"
#include "metanas/learning.hpp"
#include "metanas/nsc.hpp"

namespace metanas {

struct A2cConfig {
  int update_horizon = 5;        // j: transitions per update segment
  double gamma = 0.9;
  double entropy_coef = 0.01;    // eta
  double learning_rate = 0.001;  // alpha
  int lstm_units = 128;
  double value_loss_weight = 0.5;
  double grad_clip = 0.5;        // global norm; <= 0 disables

  void validate() const;
};

struct DqnConfig {
  long buffer_size = 0;  // t_max / 2 when 0
  int batch_size = 20;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double learning_rate = 0.0005;
  long target_sync_interval = 100;
  double gamma = 0.9;

  void validate() const;
};

// The recurrent-policy input s_t = x_t . a_{t-1} . r_{t-1} . c_t, flattened:
// encoded state (row-major), previous-action one-hot, previous reward and the
// episode step counter.
Vector build_policy_input(const Matrix& encoded_state, int prev_action,
                          int num_actions, double prev_reward,
                          int episode_step);

int policy_input_size(const EnvironmentConfig& config);

// Discounted j-step returns with bootstrap:
//   R_t = sum_i gamma^i r_{t+i} (+ gamma^j V(s_{t+j}) unless the segment
//   ended an episode); a done inside the segment stops the recursion.
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       const std::vector<bool>& dones,
                                       double gamma, double bootstrap_value);

// Exact linear exploration schedule: eps(0) = start, eps(t_max) = end.
double dqn_epsilon(long t, long t_max, double eps_start = 1.0,
                   double eps_end = 0.1);

// Q-learning regression target; a terminal transition reduces to r.
double dqn_target(double reward, bool done, double gamma, double max_next_q);

// Recurrent advantage actor-critic over the flattened meta input. One LSTM
// trunk shared by the policy and value heads; the hidden state is zeroed at
// trial starts only, never between episodes.
class MetaA2cAgent {
 public:
  MetaA2cAgent(int input_size, int num_actions, const A2cConfig& config,
               std::uint64_t seed);

  // Layers hold pointers into the store, so the agent moves but never copies.
  MetaA2cAgent(const MetaA2cAgent&) = delete;
  MetaA2cAgent& operator=(const MetaA2cAgent&) = delete;
  MetaA2cAgent(MetaA2cAgent&&) = default;
  MetaA2cAgent& operator=(MetaA2cAgent&&) = default;

  // Zeroes h/c, clears any partial segment and samples the synthetic first
  // previous-action a_0 uniformly.
  void begin_trial();
  int initial_prev_action() const { return initial_prev_action_; }

  struct ActResult {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    double entropy = 0.0;
  };
  // Forward pass, samples the action and records the step on the tape.
  ActResult act(const Vector& input);

  // Attaches reward/done to the most recent acted step.
  void observe(double reward, bool done);

  int segment_size() const { return static_cast<int>(tape_.size()); }
  bool segment_full() const { return segment_size() >= config_.update_horizon; }

  // V(s) under the current recurrent state, without advancing it.
  double value_probe(const Vector& input) const;

  struct UpdateDiagnostics {
    int steps = 0;
    double policy_objective = 0.0;
    double value_loss = 0.0;
    double mean_entropy = 0.0;
    double grad_norm = 0.0;
  };
  // Accumulates the segment's loss gradients into params().grad. Leaves the
  // tape and the parameters untouched; update() builds on this.
  UpdateDiagnostics accumulate_gradients(
      const std::optional<Vector>& bootstrap_input);
  // One A2C update over the recorded segment: gradients, global-norm clip,
  // Adam step, tape cleared. bootstrap_input supplies s_{t+j} when the
  // segment did not end an episode. Throws std::logic_error on an empty
  // segment.
  UpdateDiagnostics update(const std::optional<Vector>& bootstrap_input);

  // Drops recorded transitions without learning (frozen evaluation).
  void discard_segment() { tape_.clear(); }

  const ParameterStore& params() const { return store_; }
  ParameterStore& params() { return store_; }
  int num_actions() const { return num_actions_; }
  int input_size() const { return input_size_; }
  const A2cConfig& config() const { return config_; }
  const LstmCell::State& recurrent_state() const { return rstate_; }

  nlohmann::ordered_json save() const;
  static MetaA2cAgent load(const nlohmann::ordered_json& snapshot,
                           const A2cConfig& config, std::uint64_t seed);

 private:
  struct TapeEntry {
    Vector input;
    LstmCell::Cache cache;
    Vector logits;
    Vector probs;
    double value = 0.0;
    int action = 0;
    double reward = 0.0;
    bool done = false;
  };

  MetaA2cAgent(const A2cConfig& config, std::uint64_t seed);

  ParameterStore store_;
  LstmCell lstm_;
  DenseLayer policy_head_;
  DenseLayer value_head_;
  A2cConfig config_;
  int input_size_ = 0;
  int num_actions_ = 0;
  LstmCell::State rstate_;
  std::vector<TapeEntry> tape_;
  Rng rng_;
  int initial_prev_action_ = 0;
};

struct DqnTransition {
  Vector state;
  int action = 0;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
};

// Fixed-capacity FIFO replay memory.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(long capacity);
  void push(DqnTransition t);
  const DqnTransition& sample(Rng& rng) const;
  long size() const { return static_cast<long>(items_.size()); }
  long capacity() const { return capacity_; }

 private:
  std::deque<DqnTransition> items_;
  long capacity_;
};

// Feed-forward Q-network (dense 128 ReLU -> |A|) with a target copy and
// epsilon-greedy exploration over the encoded state alone.
class DqnAgent {
 public:
  DqnAgent(int input_size, int num_actions, const DqnConfig& config,
           long t_max, std::uint64_t seed);

  int act(const Vector& state, double epsilon);
  void push_transition(DqnTransition t);
  // Regression step on a uniform minibatch; nullopt while the buffer holds
  // fewer than batch_size transitions.
  std::optional<double> update();
  void sync_target();
  // Call once per environment step; syncs every target_sync_interval steps.
  void on_env_step();

  Vector q_values(const Vector& state) const;
  const ReplayBuffer& buffer() const { return buffer_; }
  const ParameterStore& params() const { return store_; }
  ParameterStore& params() { return store_; }
  const DqnConfig& config() const { return config_; }
  long t_max() const { return t_max_; }
  int num_actions() const { return num_actions_; }

  nlohmann::ordered_json save() const;

 private:
  Vector q_forward(const ParameterStore& store, const Vector& state) const;

  ParameterStore store_;
  ParameterStore target_;
  DqnConfig config_;
  ReplayBuffer buffer_;
  long t_max_;
  int input_size_;
  int num_actions_;
  long env_steps_ = 0;
  Rng rng_;
};

// Uniform draw over the mode's action set.
ActionId random_action(Rng& rng, Mode mode);

}  // namespace metanas
