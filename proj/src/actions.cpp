#include "metanas/actions.hpp"

#include <stdexcept>

namespace metanas {

std::string to_string(ActionId action) {
  return "A" + std::to_string(static_cast<int>(action));
}

int action_count(Mode mode) { return mode == Mode::kChain ? 8 : 14; }

std::vector<ActionId> enumerate_actions(Mode mode) {
  std::vector<ActionId> actions;
  for (int i = 0; i < action_count(mode); ++i)
    actions.push_back(static_cast<ActionId>(i));
  return actions;
}

bool is_shift(ActionId action) {
  return action >= ActionId::kP1Up && action <= ActionId::kP2Down;
}

std::string to_string(TransitionEvent event) {
  switch (event) {
    case TransitionEvent::kAppended: return "Appended";
    case TransitionEvent::kTerminalReached: return "TerminalReached";
    case TransitionEvent::kShifted: return "Shifted";
    case TransitionEvent::kPointerOutOfBounds: return "PointerOutOfBounds";
    case TransitionEvent::kDepthExceeded: return "DepthExceeded";
  }
  return "?";
}

namespace {

struct AppendSpec {
  LayerType type;
  int kernel;
};

AppendSpec append_spec(ActionId action) {
  switch (action) {
    case ActionId::kConv1: return {LayerType::kConvolution, 1};
    case ActionId::kConv3: return {LayerType::kConvolution, 3};
    case ActionId::kConv5: return {LayerType::kConvolution, 5};
    case ActionId::kMaxPool2: return {LayerType::kMaxPooling, 2};
    case ActionId::kMaxPool3: return {LayerType::kMaxPooling, 3};
    case ActionId::kAvgPool2: return {LayerType::kAvgPooling, 2};
    case ActionId::kAvgPool3: return {LayerType::kAvgPooling, 3};
    case ActionId::kTerminal: return {LayerType::kTerminal, 0};
    case ActionId::kAdd: return {LayerType::kAddition, 0};
    case ActionId::kConcat: return {LayerType::kConcatenation, 0};
    default: throw std::invalid_argument("not an append action");
  }
}

}  // namespace

Transition apply_action(const ArchitectureState& state, Pointers pointers,
                        ActionId action, const EnvironmentConfig& config) {
  if (config.mode == Mode::kChain &&
      static_cast<int>(action) >= action_count(Mode::kChain))
    throw std::invalid_argument("action " + to_string(action) +
                                " is not available in chain mode");

  if (is_shift(action)) {
    Pointers moved = pointers;
    int* p = (action == ActionId::kP1Up || action == ActionId::kP1Down)
                 ? &moved.p1
                 : &moved.p2;
    *p += (action == ActionId::kP1Up || action == ActionId::kP2Up) ? 1 : -1;
    if (*p < 0 || *p > state.depth())
      return Transition{state, pointers, TransitionEvent::kPointerOutOfBounds};
    return Transition{state, moved, TransitionEvent::kShifted};
  }

  if (state.depth() >= config.max_depth)
    return Transition{state, pointers, TransitionEvent::kDepthExceeded};

  const AppendSpec spec = append_spec(action);
  const int index = state.depth() + 1;
  NscVector vec;
  vec.layer_index = index;
  vec.type = spec.type;
  vec.kernel_size = spec.kernel;
  if (spec.type == LayerType::kTerminal) {
    // no predecessors
  } else if (spec.type == LayerType::kAddition ||
             spec.type == LayerType::kConcatenation) {
    vec.pred1 = pointers.p1;
    vec.pred2 = pointers.p2;
  } else if (config.mode == Mode::kChain) {
    vec.pred1 = index - 1;
  } else {
    vec.pred1 = pointers.p1;
  }

  ArchitectureState next = state;
  next.vectors.push_back(vec);
  Pointers advanced = pointers;
  advanced.p1 = index;  // appends move p1 onto the new layer
  const TransitionEvent event = spec.type == LayerType::kTerminal
                                    ? TransitionEvent::kTerminalReached
                                    : TransitionEvent::kAppended;
  return Transition{std::move(next), advanced, event};
}

}  // namespace metanas
