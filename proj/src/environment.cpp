#include "metanas/environment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "metanas/errors.hpp"

namespace metanas {

std::string to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::kPointerOutOfBounds: return "PointerOOB";
    case TerminationReason::kTerminal: return "Terminal";
    case TerminationReason::kMaxDepth: return "MaxDepth";
    case TerminationReason::kEpisodeTooLong: return "EpisodeTooLong";
    case TerminationReason::kInvalidArchitecture: return "InvalidArchitecture";
  }
  return "?";
}

std::optional<TerminationReason> termination_reason_from_string(
    const std::string& name) {
  if (name.empty()) return std::nullopt;
  if (name == "PointerOOB") return TerminationReason::kPointerOutOfBounds;
  if (name == "Terminal") return TerminationReason::kTerminal;
  if (name == "MaxDepth") return TerminationReason::kMaxDepth;
  if (name == "EpisodeTooLong") return TerminationReason::kEpisodeTooLong;
  if (name == "InvalidArchitecture")
    return TerminationReason::kInvalidArchitecture;
  throw std::invalid_argument("unknown termination reason: " + name);
}

std::optional<TerminationReason> check_termination(
    TransitionEvent event, const ArchitectureState& state,
    int next_step_number, const EnvironmentConfig& config,
    bool architecture_valid) {
  if (event == TransitionEvent::kPointerOutOfBounds)
    return TerminationReason::kPointerOutOfBounds;
  if (event == TransitionEvent::kTerminalReached)
    return TerminationReason::kTerminal;
  if (state.depth() >= config.max_depth) return TerminationReason::kMaxDepth;
  if (next_step_number > config.max_episode_steps)
    return TerminationReason::kEpisodeTooLong;
  if (!architecture_valid) return TerminationReason::kInvalidArchitecture;
  return std::nullopt;
}

namespace {

// Shortest text that parses back to the exact same double.
std::string format_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

constexpr const char* kInvalidToken = "invalid";

}  // namespace

RewardCache::RewardCache(const std::string& path) : path_(path) {
  std::ifstream in(path_);
  if (in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw ConfigError("bad cache line (no tab): " + line);
      const std::string key = line.substr(0, tab);
      const std::string value = line.substr(tab + 1);
      if (value == kInvalidToken)
        entries_[key] = std::nullopt;
      else
        entries_[key] = std::strtod(value.c_str(), nullptr);
    }
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw ConfigError("cannot open cache file for append: " + path_);
}

std::optional<std::optional<double>> RewardCache::lookup(
    const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void RewardCache::insert(const std::string& key,
                         std::optional<double> accuracy) {
  auto [it, fresh] = entries_.emplace(key, accuracy);
  if (!fresh) return;  // idempotent
  if (out_.is_open()) {
    out_ << key << '\t'
         << (accuracy ? format_double(*accuracy) : kInvalidToken) << '\n';
    out_.flush();
  }
}

CachedEval cached_accuracy(RewardCache& cache, const ArchitectureState& state,
                           const EnvironmentConfig& config,
                           const SurrogateEstimator& estimator,
                           long* estimator_calls) {
  std::string key = canonical_key(state, config.env_id);
  if (auto hit = cache.lookup(key)) return CachedEval{*hit, true, std::move(key)};

  std::optional<double> accuracy;
  try {
    if (estimator_calls) ++*estimator_calls;
    accuracy = estimator.estimate(state, config);
  } catch (const InvalidArchitectureError&) {
    accuracy = std::nullopt;
  }
  cache.insert(key, accuracy);
  return CachedEval{accuracy, false, std::move(key)};
}

NasEnvironment::NasEnvironment(EnvironmentConfig config, NscSpace space)
    : config_(std::move(config)), space_(std::move(space)) {
  config_.validate();
  state_.mode = config_.mode;
}

NasEnvironment::NasEnvironment(EnvironmentConfig config,
                               const std::string& cache_path, NscSpace space)
    : config_(std::move(config)), space_(std::move(space)), cache_(cache_path) {
  config_.validate();
  state_.mode = config_.mode;
}

const ArchitectureState& NasEnvironment::reset() {
  if (episode_dirty_) ++episode_;
  state_.vectors.clear();
  state_.mode = config_.mode;
  pointers_ = Pointers{};
  steps_in_episode_ = 0;
  episode_dirty_ = false;
  needs_reset_ = false;
  return state_;
}

StepOutcome NasEnvironment::step(ActionId action) {
  if (needs_reset_)
    throw std::logic_error("step() on a terminated episode; call reset()");

  Transition tr = apply_action(state_, pointers_, action, config_);
  const int c_seen = steps_in_episode_;
  ++steps_in_episode_;
  episode_dirty_ = true;

  std::optional<double> accuracy;
  bool cache_hit = false;
  if (tr.event != TransitionEvent::kPointerOutOfBounds) {
    CachedEval eval = cached_accuracy(cache_, tr.state, config_, estimator_,
                                      &estimator_calls_);
    accuracy = eval.accuracy;
    cache_hit = eval.cache_hit;
    touched_keys_.insert(std::move(eval.key));
  }

  double reward = 0.0;
  if (tr.event == TransitionEvent::kShifted)
    reward = config_.sigma * accuracy.value_or(0.0);
  else if (tr.event != TransitionEvent::kPointerOutOfBounds)
    reward = accuracy.value_or(0.0);

  const auto reason =
      check_termination(tr.event, tr.state, steps_in_episode_ + 1, config_,
                        accuracy.has_value());

  state_ = std::move(tr.state);
  pointers_ = tr.pointers;
  const bool done = reason.has_value();
  if (done) needs_reset_ = true;
  return StepOutcome{state_, reward, done, reason, c_seen, episode_, cache_hit};
}

}  // namespace metanas
