#pragma once

#include <stdexcept>
#include <string>

namespace metanas {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Graph construction on a state with no non-terminal vectors.
struct EmptyArchitectureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A spatial dimension fell below 1, or a pool is larger than its input map.
struct ShapeUnderflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Estimator-facing wrapper for any state that cannot be built/shaped.
struct InvalidArchitectureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedResponseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AccuracyOutOfRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IncompatibleCheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace metanas
