#pragma once

#include <string>
#include <vector>

#include "metanas/nsc.hpp"

namespace metanas {

// The discrete action set. A0-A6 append a layer using predecessor p1,
// A7 appends the terminal marker, A8/A9 append merges of p1 and p2,
// A10-A13 move the predecessor pointers. Chain mode exposes A0-A7 only.
enum class ActionId : int {
  kConv1 = 0,
  kConv3 = 1,
  kConv5 = 2,
  kMaxPool2 = 3,
  kMaxPool3 = 4,
  kAvgPool2 = 5,
  kAvgPool3 = 6,
  kTerminal = 7,
  kAdd = 8,
  kConcat = 9,
  kP1Up = 10,
  kP1Down = 11,
  kP2Up = 12,
  kP2Down = 13,
};

std::string to_string(ActionId action);

int action_count(Mode mode);  // 8 or 14
std::vector<ActionId> enumerate_actions(Mode mode);
bool is_shift(ActionId action);

// Predecessor pointers; 0 refers to the network input and values are bounded
// by the current number of layers.
struct Pointers {
  int p1 = 0;
  int p2 = 0;

  bool operator==(const Pointers&) const = default;
};

enum class TransitionEvent {
  kAppended,
  kTerminalReached,
  kShifted,
  kPointerOutOfBounds,
  kDepthExceeded,
};

std::string to_string(TransitionEvent event);

struct Transition {
  ArchitectureState state;
  Pointers pointers;
  TransitionEvent event;
};

// Pure transition: never mutates its inputs. Appends use pred1 = p1 (chain
// mode always extends the previous layer), merges use (p1, p2), and after any
// append p1 moves to the new layer's index. Shifts leaving [0, depth] report
// kPointerOutOfBounds with the state unchanged; appends beyond depth d report
// kDepthExceeded.
Transition apply_action(const ArchitectureState& state, Pointers pointers,
                        ActionId action, const EnvironmentConfig& config);

}  // namespace metanas
