#include "metanas/nsc.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "metanas/config.hpp"
#include "metanas/errors.hpp"

namespace metanas {

std::string to_string(Mode mode) {
  return mode == Mode::kChain ? "chain" : "multibranch";
}

Mode mode_from_string(const std::string& name) {
  if (name == "chain") return Mode::kChain;
  if (name == "multibranch" || name == "multi-branch" || name == "multi_branch")
    return Mode::kMultiBranch;
  throw ConfigError("unknown mode: " + name);
}

NscSpace NscSpace::from_file(const std::string& path) {
  KeyValueConfig kv = KeyValueConfig::from_file(path);
  NscSpace space;
  if (kv.has("conv_kernels")) {
    space.conv_kernels.clear();
    for (const std::string& tok : kv.get_list("conv_kernels"))
      space.conv_kernels.insert(std::stoi(tok));
  }
  if (kv.has("pool_sizes")) {
    space.pool_sizes.clear();
    for (const std::string& tok : kv.get_list("pool_sizes"))
      space.pool_sizes.insert(std::stoi(tok));
  }
  if (space.conv_kernels.empty() || space.pool_sizes.empty())
    throw ConfigError("NSC space must define at least one kernel and one pool size");
  return space;
}

int NscSpace::max_kernel() const {
  int k = 0;
  for (int v : conv_kernels) k = std::max(k, v);
  for (int v : pool_sizes) k = std::max(k, v);
  return k;
}

bool ArchitectureState::has_terminal() const {
  return !vectors.empty() && vectors.back().type == LayerType::kTerminal;
}

int ArchitectureState::content_depth() const {
  int n = 0;
  for (const NscVector& v : vectors)
    if (v.type != LayerType::kTerminal) ++n;
  return n;
}

void EnvironmentConfig::validate() const {
  if (env_id.empty()) throw ConfigError("env_id must not be empty");
  if (max_depth < 1) throw ConfigError("max depth d must be >= 1");
  if (max_episode_steps < 1) throw ConfigError("tau must be >= 1");
  if (sigma < 0.0 || sigma > 1.0) throw ConfigError("sigma must be in [0, 1]");
  if (max_kernel < 1) throw ConfigError("max kernel k must be >= 1");
  if (input_shape.height < 1 || input_shape.width < 1 || input_shape.channels < 1)
    throw ConfigError("input shape dims must be >= 1");
  if (conv_channels < 1) throw ConfigError("conv channels must be >= 1");
  if (difficulty <= 0.0 || difficulty > 1.0)
    throw ConfigError("difficulty must be in (0, 1]");
}

std::string to_string(NscError code) {
  switch (code) {
    case NscError::kBadType: return "BadType";
    case NscError::kBadKernel: return "BadKernel";
    case NscError::kBadPredecessor: return "BadPredecessor";
    case NscError::kBadTerminalPlacement: return "BadTerminalPlacement";
  }
  return "?";
}

namespace {

bool is_space_type(LayerType t) {
  switch (t) {
    case LayerType::kConvolution:
    case LayerType::kMaxPooling:
    case LayerType::kAvgPooling:
    case LayerType::kAddition:
    case LayerType::kConcatenation:
    case LayerType::kTerminal:
      return true;
    default:
      return false;
  }
}

bool is_merge(LayerType t) {
  return t == LayerType::kAddition || t == LayerType::kConcatenation;
}

std::optional<ValidationIssue> issue(NscError code, const std::string& detail) {
  return ValidationIssue{code, detail};
}

}  // namespace

std::optional<ValidationIssue> validate_nsc(const NscVector& vec, int position,
                                            const NscSpace& space,
                                            const EnvironmentConfig& config) {
  if (!is_space_type(vec.type))
    return issue(NscError::kBadType,
                 "layer type " + std::to_string(static_cast<int>(vec.type)) +
                     " is not in the NSC space");
  if (config.mode == Mode::kChain && is_merge(vec.type))
    return issue(NscError::kBadType,
                 "merge layers are not representable in chain mode");
  if (position < 1 || position > config.max_depth)
    return issue(NscError::kBadPredecessor,
                 "position " + std::to_string(position) + " outside 1..d");
  if (vec.layer_index != position)
    return issue(NscError::kBadPredecessor,
                 "layer index " + std::to_string(vec.layer_index) +
                     " does not match position " + std::to_string(position));

  switch (vec.type) {
    case LayerType::kConvolution:
      if (!space.conv_kernels.count(vec.kernel_size))
        return issue(NscError::kBadKernel,
                     "conv kernel " + std::to_string(vec.kernel_size) +
                         " not in the kernel set");
      break;
    case LayerType::kMaxPooling:
    case LayerType::kAvgPooling:
      if (!space.pool_sizes.count(vec.kernel_size))
        return issue(NscError::kBadKernel,
                     "pool size " + std::to_string(vec.kernel_size) +
                         " not in the pool set");
      break;
    default:
      if (vec.kernel_size != 0)
        return issue(NscError::kBadKernel,
                     "kernel must be 0 for this layer type");
      break;
  }

  if (vec.pred1 < 0 || vec.pred1 >= vec.layer_index)
    return issue(NscError::kBadPredecessor, "pred1 out of range");
  if (vec.pred2 < 0 || vec.pred2 >= vec.layer_index)
    return issue(NscError::kBadPredecessor, "pred2 out of range");
  if (!is_merge(vec.type) && vec.pred2 != 0)
    return issue(NscError::kBadPredecessor,
                 "pred2 must be 0 for non-merge layers");
  if (vec.type == LayerType::kTerminal && (vec.pred1 != 0 || vec.pred2 != 0))
    return issue(NscError::kBadPredecessor, "terminal takes no predecessors");
  if (config.mode == Mode::kChain && vec.type != LayerType::kTerminal &&
      vec.pred1 != vec.layer_index - 1)
    return issue(NscError::kBadPredecessor,
                 "chain layers must extend the previous layer");
  return std::nullopt;
}

std::optional<ValidationIssue> validate_state(const ArchitectureState& state,
                                              const NscSpace& space,
                                              const EnvironmentConfig& config) {
  if (state.depth() > config.max_depth)
    return issue(NscError::kBadPredecessor, "state deeper than d");
  for (int i = 0; i < state.depth(); ++i) {
    const NscVector& vec = state.vectors[static_cast<size_t>(i)];
    if (vec.type == LayerType::kTerminal && i + 1 != state.depth())
      return issue(NscError::kBadTerminalPlacement,
                   "terminal must be the last vector");
    if (auto bad = validate_nsc(vec, i + 1, space, config)) return bad;
  }
  return std::nullopt;
}

int encoding_width(int max_depth, int max_kernel, Mode mode) {
  int width = 8 + (max_kernel + 1) + (max_depth + 1);
  if (mode == Mode::kMultiBranch) width += max_depth + 1;
  return width;
}

Matrix encode_state(const ArchitectureState& state,
                    const EnvironmentConfig& config) {
  const int d = config.max_depth;
  const int k = config.max_kernel;
  const int width = encoding_width(d, k, config.mode);
  Matrix out = Matrix::Zero(d, width);

  const int pad = d - state.depth();
  for (int row = 0; row < d; ++row) {
    // Empty (index 0) vectors sort before the content, so padding rows come
    // first and the encoding of an empty slot is the index-0 one-hots.
    NscVector vec;
    if (row >= pad) vec = state.vectors[static_cast<size_t>(row - pad)];
    int col = 0;
    out(row, col + static_cast<int>(vec.type)) = 1.0;
    col += 8;
    out(row, col + vec.kernel_size) = 1.0;
    col += k + 1;
    out(row, col + vec.pred1) = 1.0;
    col += d + 1;
    if (config.mode == Mode::kMultiBranch) out(row, col + vec.pred2) = 1.0;
  }
  return out;
}

std::string state_signature(const ArchitectureState& state) {
  std::string sig;
  for (size_t i = 0; i < state.vectors.size(); ++i) {
    const NscVector& v = state.vectors[i];
    if (i > 0) sig += ';';
    sig += std::to_string(static_cast<int>(v.type));
    sig += ',';
    sig += std::to_string(v.kernel_size);
    sig += ',';
    sig += std::to_string(v.pred1);
    sig += ',';
    sig += std::to_string(v.pred2);
  }
  return sig;
}

std::string canonical_key(const ArchitectureState& state,
                          const std::string& env_id) {
  return env_id + ";" + state_signature(state);
}

ArchitectureState parse_state_signature(const std::string& signature,
                                        Mode mode) {
  ArchitectureState state;
  state.mode = mode;
  if (signature.empty()) return state;

  std::stringstream ss(signature);
  std::string tuple;
  int index = 0;
  while (std::getline(ss, tuple, ';')) {
    std::array<int, 4> fields{};
    size_t pos = 0;
    for (int f = 0; f < 4; ++f) {
      size_t comma = tuple.find(',', pos);
      std::string tok = tuple.substr(pos, comma == std::string::npos
                                              ? std::string::npos
                                              : comma - pos);
      auto [ptr, ec] =
          std::from_chars(tok.data(), tok.data() + tok.size(), fields[f]);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw std::invalid_argument("bad state signature tuple: " + tuple);
      if (f < 3) {
        if (comma == std::string::npos)
          throw std::invalid_argument("bad state signature tuple: " + tuple);
        pos = comma + 1;
      } else if (comma != std::string::npos) {
        throw std::invalid_argument("bad state signature tuple: " + tuple);
      }
    }
    state.vectors.push_back(NscVector{++index, static_cast<LayerType>(fields[0]),
                                      fields[1], fields[2], fields[3]});
  }
  return state;
}

std::pair<std::string, std::string> split_canonical_key(const std::string& key) {
  size_t sep = key.find(';');
  if (sep == std::string::npos)
    throw std::invalid_argument("canonical key has no env separator: " + key);
  return {key.substr(0, sep), key.substr(sep + 1)};
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace metanas
