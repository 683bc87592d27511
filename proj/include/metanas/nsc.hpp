#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace metanas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Mode { kChain, kMultiBranch };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

// Layer types as encoded in an NSC vector. Type 4 (identity) is not part of
// the space and never occurs in a valid state.
enum class LayerType : int {
  kEmpty = 0,
  kConvolution = 1,
  kMaxPooling = 2,
  kAvgPooling = 3,
  kAddition = 5,
  kConcatenation = 6,
  kTerminal = 7,
};

// One layer of an architecture: (index, type, kernel, pred1, pred2).
// kernel_size holds the conv kernel for convolutions and the pool size for
// pooling layers; it is 0 for everything else. pred == 0 means the network
// input.
struct NscVector {
  int layer_index = 0;
  LayerType type = LayerType::kEmpty;
  int kernel_size = 0;
  int pred1 = 0;
  int pred2 = 0;

  bool operator==(const NscVector&) const = default;
};

// The legal value sets of the NSC space. Defaults match the standard space:
// conv kernels {1,3,5}, pool sizes {2,3}.
struct NscSpace {
  std::set<int> conv_kernels{1, 3, 5};
  std::set<int> pool_sizes{2, 3};

  // Loads "conv_kernels = 1,3,5" / "pool_sizes = 2,3" from a key-value file.
  static NscSpace from_file(const std::string& path);

  int max_kernel() const;
};

// An architecture as an ordered list of NSC vectors with layer indices
// 1..n (no gaps). The terminal vector, when present, is last.
struct ArchitectureState {
  std::vector<NscVector> vectors;
  Mode mode = Mode::kChain;

  int depth() const { return static_cast<int>(vectors.size()); }
  bool empty() const { return vectors.empty(); }
  bool has_terminal() const;
  // Number of non-terminal vectors.
  int content_depth() const;

  bool operator==(const ArchitectureState&) const = default;
};

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  bool operator==(const Shape&) const = default;
};

// Static environment parameters. Owned by the environment but needed by the
// codec (depth bound, kernel bound, mode) so it lives here.
struct EnvironmentConfig {
  std::string env_id;
  int max_depth = 10;          // d
  int max_episode_steps = 10;  // tau
  Mode mode = Mode::kChain;
  double sigma = 0.0;          // shift-reward coefficient
  int max_kernel = 5;          // k
  Shape input_shape{84, 84, 3};
  int conv_channels = 32;      // filters per convolutional cell
  double difficulty = 0.9;     // surrogate difficulty, (0, 1]
  std::uint64_t seed = 0;

  // Throws ConfigError on an out-of-range field.
  void validate() const;
};

enum class NscError {
  kBadType,
  kBadKernel,
  kBadPredecessor,
  kBadTerminalPlacement,
};

std::string to_string(NscError code);

struct ValidationIssue {
  NscError code;
  std::string detail;
};

// Checks a single vector against the space at the given 1-based position.
// Returns nullopt when the vector is valid.
std::optional<ValidationIssue> validate_nsc(const NscVector& vec, int position,
                                            const NscSpace& space,
                                            const EnvironmentConfig& config);

// Checks the whole list: per-vector validity, index contiguity, depth bound,
// chain constraints and terminal placement.
std::optional<ValidationIssue> validate_state(const ArchitectureState& state,
                                              const NscSpace& space,
                                              const EnvironmentConfig& config);

// Width of one encoded row: d+k+10 in chain mode, 2d+k+11 in multi-branch.
int encoding_width(int max_depth, int max_kernel, Mode mode);

// One-hot encoding of a state as a d x width matrix. Row layout: type (8),
// kernel (k+1), pred1 (d+1), pred2 (d+1, multi-branch only). Unoccupied rows
// hold the empty vector's encoding and come first, so content rows are
// bottom-aligned as in the d x 5 array sorted by layer index.
Matrix encode_state(const ArchitectureState& state,
                    const EnvironmentConfig& config);

// "t,ks,p1,p2" tuples joined by ';'. Empty state yields "".
std::string state_signature(const ArchitectureState& state);

// env_id + ";" + state_signature. Stable across runs and platforms.
std::string canonical_key(const ArchitectureState& state,
                          const std::string& env_id);

// Inverse of state_signature. Throws std::invalid_argument on malformed text.
ArchitectureState parse_state_signature(const std::string& signature,
                                        Mode mode);

// Splits a canonical key into (env_id, signature).
std::pair<std::string, std::string> split_canonical_key(const std::string& key);

// 64-bit FNV-1a. Used for surrogate noise and log digests.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace metanas
