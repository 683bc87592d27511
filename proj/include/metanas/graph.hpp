#pragma once

#include <string>
#include <vector>

#include "metanas/nsc.hpp"

namespace metanas {

enum class OpKind {
  kInput,
  kPcc,      // ReLU -> convolution -> batch norm, one node
  kMaxPool,
  kAvgPool,
  kAdd,
  kConcat,
};

std::string to_string(OpKind op);

struct GraphNode {
  int id = 0;
  OpKind op = OpKind::kInput;
  int arg = 0;  // conv kernel or pool size, 0 otherwise
  std::vector<int> preds;
  Shape out{};

  bool operator==(const GraphNode&) const = default;
};

// The computational graph of a built architecture. Node 0 is the input;
// NSC vectors keep their layer index as node id; an auto-inserted leaf merge
// (when present) takes the next id and does not count toward depth d.
struct NetworkGraph {
  std::vector<GraphNode> nodes;
  int output_id = -1;
  bool has_auto_merge = false;

  const GraphNode& node(int id) const;
  int count(OpKind op) const;

  bool operator==(const NetworkGraph&) const = default;
};

// Applies the building rules: convolutions become PCC nodes, merges pad
// mismatched inputs, and if more than one leaf remains all leaves are joined
// by a single concatenation. The terminal vector contributes no node.
// Throws EmptyArchitectureError when the state has no non-terminal vectors.
NetworkGraph build_graph(const ArchitectureState& state,
                         const EnvironmentConfig& config);

// Fills every node's output shape. PCC: out = in - k + 1, channels = the
// configured filter count. Pooling: out = floor(in / p), channels unchanged.
// Add: spatial and channels are the elementwise max of the (zero-padded)
// inputs. Concat: spatial max, channels summed.
// Throws ShapeUnderflowError when a spatial dim would drop below 1 or a pool
// exceeds its input map.
NetworkGraph infer_shapes(NetworkGraph graph, Shape input_shape,
                          int conv_channels);

// build_graph + infer_shapes with the config's input shape and channels.
NetworkGraph build_and_shape(const ArchitectureState& state,
                             const EnvironmentConfig& config);

// GraphViz text with op labels and inferred shapes.
std::string to_dot(const NetworkGraph& graph, const std::string& name = "net");

}  // namespace metanas
