#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "metanas/actions.hpp"
#include "metanas/estimator.hpp"
#include "metanas/nsc.hpp"

namespace metanas {

enum class TerminationReason {
  kPointerOutOfBounds,  // rule a
  kTerminal,            // rule b
  kMaxDepth,            // rule c
  kEpisodeTooLong,      // rule d
  kInvalidArchitecture, // rule e
};

std::string to_string(TerminationReason reason);
std::optional<TerminationReason> termination_reason_from_string(
    const std::string& name);

struct StepOutcome {
  ArchitectureState state;
  double reward = 0.0;
  bool done = false;
  std::optional<TerminationReason> reason;
  int episode_step = 0;     // c_t the policy saw for this step (0-based)
  long episode_index = 0;
  bool cache_hit = false;
};

// Termination rules checked in order a..e. `next_step_number` is the
// 1-indexed number the *next* action of the episode would take; rule d fires
// once it exceeds tau, which caps episodes at exactly tau actions.
std::optional<TerminationReason> check_termination(
    TransitionEvent event, const ArchitectureState& state,
    int next_step_number, const EnvironmentConfig& config,
    bool architecture_valid);

// Persistent map from canonical key to measured accuracy. Unbuildable
// architectures are memoized too (stored as the token "invalid") so repeat
// encounters never re-run the estimator. File format: one
// "<key>\t<accuracy>" line per entry, flushed after every insert.
class RewardCache {
 public:
  RewardCache() = default;                       // in-memory only
  explicit RewardCache(const std::string& path); // load + append

  // outer nullopt: not cached; inner nullopt: cached as invalid.
  std::optional<std::optional<double>> lookup(const std::string& key) const;
  void insert(const std::string& key, std::optional<double> accuracy);
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::optional<double>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::optional<double>> entries_;
  std::string path_;
  std::ofstream out_;
};

struct CachedEval {
  std::optional<double> accuracy;  // nullopt: invalid architecture
  bool cache_hit = false;
  std::string key;
};

// Cache-first evaluation; on a miss runs the estimator, memoizes and counts
// the call in *estimator_calls.
CachedEval cached_accuracy(RewardCache& cache, const ArchitectureState& state,
                           const EnvironmentConfig& config,
                           const SurrogateEstimator& estimator,
                           long* estimator_calls);

// The architecture-design MDP. Owns state, pointers and episode bookkeeping;
// rewards come from the estimator through the cache, with shift actions
// scaled by sigma. A single instance must not be stepped concurrently;
// independent instances are fine in parallel.
class NasEnvironment {
 public:
  // In-memory cache.
  explicit NasEnvironment(EnvironmentConfig config,
                          NscSpace space = NscSpace{});
  // File-backed cache.
  NasEnvironment(EnvironmentConfig config, const std::string& cache_path,
                 NscSpace space = NscSpace{});

  const ArchitectureState& reset();
  // Applies the action, evaluates the post-action architecture and applies
  // the termination rules. Throws std::logic_error if called after a
  // terminal outcome without an intervening reset().
  StepOutcome step(ActionId action);

  const ArchitectureState& state() const { return state_; }
  Pointers pointers() const { return pointers_; }
  int steps_in_episode() const { return steps_in_episode_; }
  long episode_index() const { return episode_; }
  bool needs_reset() const { return needs_reset_; }
  const EnvironmentConfig& config() const { return config_; }
  long estimator_calls() const { return estimator_calls_; }
  const RewardCache& cache() const { return cache_; }
  // Distinct canonical keys evaluated in this instance's lifetime.
  long distinct_states_seen() const {
    return static_cast<long>(touched_keys_.size());
  }

 private:
  EnvironmentConfig config_;
  NscSpace space_;
  SurrogateEstimator estimator_;
  RewardCache cache_;
  ArchitectureState state_;
  Pointers pointers_;
  int steps_in_episode_ = 0;
  long episode_ = 0;
  bool episode_dirty_ = false;
  bool needs_reset_ = true;
  long estimator_calls_ = 0;
  std::set<std::string> touched_keys_;
};

}  // namespace metanas
