#include "metanas/agents.hpp"

#include <cmath>
#include <stdexcept>

#include "metanas/errors.hpp"

namespace metanas {

void A2cConfig::validate() const {
  if (update_horizon < 1) throw ConfigError("a2c horizon j must be >= 1");
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
  if (lstm_units < 1) throw ConfigError("lstm units must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("learning rate must be >= 0");
}

void DqnConfig::validate() const {
  if (batch_size < 1) throw ConfigError("dqn batch size must be >= 1");
  if (buffer_size > 0 && buffer_size < batch_size)
    throw ConfigError("dqn buffer must hold at least one batch");
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
  if (target_sync_interval < 1)
    throw ConfigError("target sync interval must be >= 1");
}

Vector build_policy_input(const Matrix& encoded_state, int prev_action,
                          int num_actions, double prev_reward,
                          int episode_step) {
  if (prev_action < 0 || prev_action >= num_actions)
    throw ShapeMismatchError("previous action outside the action set");
  const Eigen::Index flat = encoded_state.size();
  Vector input(flat + num_actions + 2);
  input.setZero();
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < encoded_state.rows(); ++r)
    for (Eigen::Index c = 0; c < encoded_state.cols(); ++c)
      input(pos++) = encoded_state(r, c);
  input(pos + prev_action) = 1.0;
  pos += num_actions;
  input(pos++) = prev_reward;
  input(pos) = static_cast<double>(episode_step);
  return input;
}

int policy_input_size(const EnvironmentConfig& config) {
  return config.max_depth *
             encoding_width(config.max_depth, config.max_kernel, config.mode) +
         action_count(config.mode) + 2;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       const std::vector<bool>& dones,
                                       double gamma, double bootstrap_value) {
  if (rewards.size() != dones.size())
    throw std::invalid_argument("rewards/dones length mismatch");
  std::vector<double> returns(rewards.size());
  double running = bootstrap_value;
  for (size_t idx = rewards.size(); idx-- > 0;) {
    if (dones[idx]) running = 0.0;
    running = rewards[idx] + gamma * running;
    returns[idx] = running;
  }
  return returns;
}

double dqn_epsilon(long t, long t_max, double eps_start, double eps_end) {
  if (t_max <= 0) return eps_end;
  const double f = static_cast<double>(t) / static_cast<double>(t_max);
  return (1.0 - f) * eps_start + f * eps_end;
}

double dqn_target(double reward, bool done, double gamma, double max_next_q) {
  return reward + (done ? 0.0 : gamma * max_next_q);
}

// --- MetaA2cAgent ---------------------------------------------------------

MetaA2cAgent::MetaA2cAgent(const A2cConfig& config, std::uint64_t seed)
    : config_(config), rng_(Rng::mix(seed, "a2c")) {}

MetaA2cAgent::MetaA2cAgent(int input_size, int num_actions,
                           const A2cConfig& config, std::uint64_t seed)
    : MetaA2cAgent(config, seed) {
  config_.validate();
  input_size_ = input_size;
  num_actions_ = num_actions;
  Rng init_rng(Rng::mix(seed, "a2c-init"));
  lstm_ = LstmCell::create(store_, "lstm", input_size, config_.lstm_units,
                           init_rng);
  policy_head_ =
      DenseLayer::create(store_, "policy", config_.lstm_units, num_actions,
                         init_rng);
  value_head_ =
      DenseLayer::create(store_, "value", config_.lstm_units, 1, init_rng);
  rstate_ = lstm_.zero_state();
}

void MetaA2cAgent::begin_trial() {
  rstate_ = lstm_.zero_state();
  tape_.clear();
  initial_prev_action_ = rng_.uniform_int(num_actions_);
}

MetaA2cAgent::ActResult MetaA2cAgent::act(const Vector& input) {
  TapeEntry entry;
  entry.input = input;
  rstate_ = lstm_.forward(input, rstate_, &entry.cache);
  entry.logits = policy_head_.forward(rstate_.h);
  entry.probs = softmax(entry.logits);
  entry.value = value_head_.forward(rstate_.h)(0);
  entry.action = categorical_sample(entry.probs, rng_);

  ActResult result;
  result.action = entry.action;
  result.log_prob = std::log(std::max(entry.probs(entry.action), 1e-300));
  result.value = entry.value;
  result.entropy = entropy(entry.probs);
  tape_.push_back(std::move(entry));
  return result;
}

void MetaA2cAgent::observe(double reward, bool done) {
  if (tape_.empty()) throw std::logic_error("observe() before act()");
  tape_.back().reward = reward;
  tape_.back().done = done;
}

double MetaA2cAgent::value_probe(const Vector& input) const {
  LstmCell::State probe = lstm_.forward(input, rstate_, nullptr);
  return value_head_.forward(probe.h)(0);
}

MetaA2cAgent::UpdateDiagnostics MetaA2cAgent::accumulate_gradients(
    const std::optional<Vector>& bootstrap_input) {
  if (tape_.empty()) throw std::logic_error("update() on an empty segment");

  const int n = static_cast<int>(tape_.size());
  std::vector<double> rewards(static_cast<size_t>(n));
  std::vector<bool> dones(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) {
    rewards[static_cast<size_t>(t)] = tape_[static_cast<size_t>(t)].reward;
    dones[static_cast<size_t>(t)] = tape_[static_cast<size_t>(t)].done;
  }
  double bootstrap = 0.0;
  if (!dones.back() && bootstrap_input) bootstrap = value_probe(*bootstrap_input);
  const std::vector<double> returns =
      discounted_returns(rewards, dones, config_.gamma, bootstrap);

  // Objective per step: log pi(a|s) * advantage + eta * H(pi(s))
  //                     - w_v * (R - V(s))^2, maximized; gradients below are
  // of the negated mean, fed to Adam as a descent step. The advantage is a
  // constant with respect to the parameters.
  UpdateDiagnostics diag;
  diag.steps = n;
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector dh_next = Vector::Zero(config_.lstm_units);
  Vector dc_next = Vector::Zero(config_.lstm_units);
  for (int t = n - 1; t >= 0; --t) {
    const TapeEntry& e = tape_[static_cast<size_t>(t)];
    const double ret = returns[static_cast<size_t>(t)];
    const double advantage = ret - e.value;
    const double td = e.value - ret;

    diag.policy_objective +=
        inv_n * std::log(std::max(e.probs(e.action), 1e-300)) * advantage;
    diag.value_loss += inv_n * td * td;
    diag.mean_entropy += inv_n * entropy(e.probs);

    // d(-J)/dlogits = (pi - onehot(a)) * A - eta * dH/dlogits, scaled 1/n.
    Vector dlogits = e.probs * advantage;
    dlogits(e.action) -= advantage;
    dlogits -= config_.entropy_coef * entropy_grad_logits(e.probs);
    dlogits *= inv_n;

    // d(-J)/dV = 2 * w_v * (V - R), scaled 1/n.
    Vector dvalue(1);
    dvalue(0) = inv_n * 2.0 * config_.value_loss_weight * td;

    Vector dh = policy_head_.backward(e.cache.h, dlogits) +
                value_head_.backward(e.cache.h, dvalue) + dh_next;
    LstmCell::BackwardResult back = lstm_.backward(e.cache, dh, dc_next);
    dh_next = std::move(back.dh_prev);
    dc_next = std::move(back.dc_prev);
  }
  return diag;
}

MetaA2cAgent::UpdateDiagnostics MetaA2cAgent::update(
    const std::optional<Vector>& bootstrap_input) {
  UpdateDiagnostics diag = accumulate_gradients(bootstrap_input);
  diag.grad_norm = store_.clip_grads(config_.grad_clip);
  store_.adam_step(config_.learning_rate);
  tape_.clear();
  return diag;
}

nlohmann::ordered_json MetaA2cAgent::save() const {
  nlohmann::ordered_json j;
  j["kind"] = "meta_a2c";
  j["input_size"] = input_size_;
  j["num_actions"] = num_actions_;
  j["lstm_units"] = config_.lstm_units;
  j["store"] = store_.to_json();
  return j;
}

MetaA2cAgent MetaA2cAgent::load(const nlohmann::ordered_json& snapshot,
                                const A2cConfig& config, std::uint64_t seed) {
  if (!snapshot.contains("kind") || snapshot["kind"] != "meta_a2c")
    throw IncompatibleCheckpointError("checkpoint is not a meta_a2c agent");
  if (snapshot.at("lstm_units").get<int>() != config.lstm_units)
    throw IncompatibleCheckpointError("lstm size mismatch");
  MetaA2cAgent agent(config, seed);
  agent.input_size_ = snapshot.at("input_size").get<int>();
  agent.num_actions_ = snapshot.at("num_actions").get<int>();
  agent.store_ = ParameterStore::from_json(snapshot.at("store"));
  agent.lstm_ = LstmCell::attach(agent.store_, "lstm", config.lstm_units);
  agent.policy_head_ = DenseLayer::attach(agent.store_, "policy");
  agent.value_head_ = DenseLayer::attach(agent.store_, "value");
  if (agent.lstm_.in_size() != agent.input_size_ ||
      agent.policy_head_.out_size() != agent.num_actions_)
    throw IncompatibleCheckpointError("checkpoint shapes disagree with manifest");
  agent.rstate_ = agent.lstm_.zero_state();
  return agent;
}

// --- DQN -------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(long capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(DqnTransition t) {
  items_.push_back(std::move(t));
  if (static_cast<long>(items_.size()) > capacity_) items_.pop_front();
}

const DqnTransition& ReplayBuffer::sample(Rng& rng) const {
  if (items_.empty()) throw std::logic_error("sampling an empty buffer");
  return items_[static_cast<size_t>(rng.uniform_int(static_cast<int>(items_.size())))];
}

DqnAgent::DqnAgent(int input_size, int num_actions, const DqnConfig& config,
                   long t_max, std::uint64_t seed)
    : config_(config),
      buffer_(config.buffer_size > 0 ? config.buffer_size
                                     : std::max<long>(t_max / 2, config.batch_size)),
      t_max_(t_max),
      input_size_(input_size),
      num_actions_(num_actions),
      rng_(Rng::mix(seed, "dqn")) {
  config_.validate();
  Rng init_rng(Rng::mix(seed, "dqn-init"));
  DenseLayer::create(store_, "l1", input_size, 128, init_rng);
  DenseLayer::create(store_, "l2", 128, num_actions, init_rng);
  sync_target();
}

Vector DqnAgent::q_forward(const ParameterStore& store,
                           const Vector& state) const {
  const Param& W1 = store.at("l1.W");
  const Param& b1 = store.at("l1.b");
  const Param& W2 = store.at("l2.W");
  const Param& b2 = store.at("l2.b");
  Vector h = relu(W1.value * state + b1.value.col(0));
  return W2.value * h + b2.value.col(0);
}

Vector DqnAgent::q_values(const Vector& state) const {
  return q_forward(store_, state);
}

int DqnAgent::act(const Vector& state, double epsilon) {
  if (rng_.uniform01() < epsilon) return rng_.uniform_int(num_actions_);
  const Vector q = q_values(state);
  int best = 0;
  for (int a = 1; a < num_actions_; ++a)
    if (q(a) > q(best)) best = a;  // ties keep the lowest index
  return best;
}

void DqnAgent::push_transition(DqnTransition t) { buffer_.push(std::move(t)); }

std::optional<double> DqnAgent::update() {
  if (buffer_.size() < config_.batch_size) return std::nullopt;  // underfull

  Param& W1 = store_.at("l1.W");
  Param& b1 = store_.at("l1.b");
  Param& W2 = store_.at("l2.W");
  Param& b2 = store_.at("l2.b");

  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(config_.batch_size);
  for (int k = 0; k < config_.batch_size; ++k) {
    const DqnTransition& tr = buffer_.sample(rng_);
    const Vector target_q = q_forward(target_, tr.next_state);
    const double y =
        dqn_target(tr.reward, tr.done, config_.gamma, target_q.maxCoeff());

    const Vector pre = W1.value * tr.state + b1.value.col(0);
    const Vector h = relu(pre);
    const Vector q = W2.value * h + b2.value.col(0);
    const double err = q(tr.action) - y;
    loss += inv_b * err * err;

    Vector dq = Vector::Zero(num_actions_);
    dq(tr.action) = inv_b * 2.0 * err;
    W2.grad += dq * h.transpose();
    b2.grad.col(0) += dq;
    Vector dh = relu_backward(pre, W2.value.transpose() * dq);
    W1.grad += dh * tr.state.transpose();
    b1.grad.col(0) += dh;
  }
  store_.adam_step(config_.learning_rate);
  return loss;
}

void DqnAgent::sync_target() { target_ = store_; }

void DqnAgent::on_env_step() {
  ++env_steps_;
  if (env_steps_ % config_.target_sync_interval == 0) sync_target();
}

nlohmann::ordered_json DqnAgent::save() const {
  nlohmann::ordered_json j;
  j["kind"] = "dqn";
  j["input_size"] = input_size_;
  j["num_actions"] = num_actions_;
  j["store"] = store_.to_json();
  return j;
}

ActionId random_action(Rng& rng, Mode mode) {
  return static_cast<ActionId>(rng.uniform_int(action_count(mode)));
}

}  // namespace metanas
