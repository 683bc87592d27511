#include "metanas/graph.hpp"

#include <algorithm>
#include <sstream>

#include "metanas/errors.hpp"

namespace metanas {

std::string to_string(OpKind op) {
  switch (op) {
    case OpKind::kInput: return "Input";
    case OpKind::kPcc: return "PCC";
    case OpKind::kMaxPool: return "MaxPool";
    case OpKind::kAvgPool: return "AvgPool";
    case OpKind::kAdd: return "Add";
    case OpKind::kConcat: return "Concat";
  }
  return "?";
}

const GraphNode& NetworkGraph::node(int id) const {
  for (const GraphNode& n : nodes)
    if (n.id == id) return n;
  throw std::out_of_range("no node with id " + std::to_string(id));
}

int NetworkGraph::count(OpKind op) const {
  int n = 0;
  for (const GraphNode& node : nodes)
    if (node.op == op) ++n;
  return n;
}

NetworkGraph build_graph(const ArchitectureState& state,
                         const EnvironmentConfig& config) {
  (void)config;
  NetworkGraph graph;
  graph.nodes.push_back(GraphNode{0, OpKind::kInput, 0, {}, {}});

  for (const NscVector& vec : state.vectors) {
    switch (vec.type) {
      case LayerType::kConvolution:
        graph.nodes.push_back(
            GraphNode{vec.layer_index, OpKind::kPcc, vec.kernel_size, {vec.pred1}, {}});
        break;
      case LayerType::kMaxPooling:
        graph.nodes.push_back(GraphNode{vec.layer_index, OpKind::kMaxPool,
                                        vec.kernel_size, {vec.pred1}, {}});
        break;
      case LayerType::kAvgPooling:
        graph.nodes.push_back(GraphNode{vec.layer_index, OpKind::kAvgPool,
                                        vec.kernel_size, {vec.pred1}, {}});
        break;
      case LayerType::kAddition:
        graph.nodes.push_back(
            GraphNode{vec.layer_index, OpKind::kAdd, 0, {vec.pred1, vec.pred2}, {}});
        break;
      case LayerType::kConcatenation:
        graph.nodes.push_back(GraphNode{vec.layer_index, OpKind::kConcat, 0,
                                        {vec.pred1, vec.pred2}, {}});
        break;
      case LayerType::kTerminal:
        break;
      case LayerType::kEmpty:
        throw std::invalid_argument("empty vector inside a state");
    }
  }

  if (graph.nodes.size() == 1)
    throw EmptyArchitectureError("architecture has no layers to build");

  // Leaf-merge rule: nodes nobody consumes get joined by one concatenation.
  std::vector<int> consumed(graph.nodes.size(), 0);
  for (const GraphNode& n : graph.nodes)
    for (int p : n.preds) consumed[static_cast<size_t>(p)] = 1;
  std::vector<int> leaves;
  for (const GraphNode& n : graph.nodes)
    if (n.op != OpKind::kInput && !consumed[static_cast<size_t>(n.id)])
      leaves.push_back(n.id);
  std::sort(leaves.begin(), leaves.end());

  if (leaves.size() > 1) {
    int merge_id = static_cast<int>(graph.nodes.size());
    graph.nodes.push_back(GraphNode{merge_id, OpKind::kConcat, 0, leaves, {}});
    graph.has_auto_merge = true;
    graph.output_id = merge_id;
  } else {
    graph.output_id = leaves.front();
  }
  return graph;
}

namespace {

Shape padded_max(const Shape& a, const Shape& b) {
  return Shape{std::max(a.height, b.height), std::max(a.width, b.width),
               std::max(a.channels, b.channels)};
}

}  // namespace

NetworkGraph infer_shapes(NetworkGraph graph, Shape input_shape,
                          int conv_channels) {
  for (GraphNode& n : graph.nodes) {
    switch (n.op) {
      case OpKind::kInput:
        n.out = input_shape;
        break;
      case OpKind::kPcc: {
        const Shape in = graph.node(n.preds[0]).out;
        const int h = in.height - n.arg + 1;
        const int w = in.width - n.arg + 1;
        if (h < 1 || w < 1)
          throw ShapeUnderflowError("conv k=" + std::to_string(n.arg) +
                                    " underflows a " + std::to_string(in.height) +
                                    "x" + std::to_string(in.width) + " map");
        n.out = Shape{h, w, conv_channels};
        break;
      }
      case OpKind::kMaxPool:
      case OpKind::kAvgPool: {
        const Shape in = graph.node(n.preds[0]).out;
        if (n.arg > in.height || n.arg > in.width)
          throw ShapeUnderflowError("pool p=" + std::to_string(n.arg) +
                                    " larger than a " + std::to_string(in.height) +
                                    "x" + std::to_string(in.width) + " map");
        n.out = Shape{in.height / n.arg, in.width / n.arg, in.channels};
        break;
      }
      case OpKind::kAdd: {
        // Smaller inputs are zero-padded spatially and across channels.
        Shape s = graph.node(n.preds[0]).out;
        for (size_t i = 1; i < n.preds.size(); ++i)
          s = padded_max(s, graph.node(n.preds[i]).out);
        n.out = s;
        break;
      }
      case OpKind::kConcat: {
        Shape s = graph.node(n.preds[0]).out;
        int channels = s.channels;
        for (size_t i = 1; i < n.preds.size(); ++i) {
          const Shape in = graph.node(n.preds[i]).out;
          s = padded_max(s, in);
          channels += in.channels;
        }
        s.channels = channels;
        n.out = s;
        break;
      }
    }
  }
  return graph;
}

NetworkGraph build_and_shape(const ArchitectureState& state,
                             const EnvironmentConfig& config) {
  return infer_shapes(build_graph(state, config), config.input_shape,
                      config.conv_channels);
}

std::string to_dot(const NetworkGraph& graph, const std::string& name) {
  std::ostringstream out;
  out << "digraph " << name << " {\n";
  for (const GraphNode& n : graph.nodes) {
    out << "  n" << n.id << " [label=\"" << to_string(n.op);
    if (n.arg > 0) out << " " << n.arg;
    if (n.out.height > 0)
      out << "\\n" << n.out.height << "x" << n.out.width << "x" << n.out.channels;
    out << "\"];\n";
  }
  for (const GraphNode& n : graph.nodes)
    for (int p : n.preds) out << "  n" << p << " -> n" << n.id << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace metanas
