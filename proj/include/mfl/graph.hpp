#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfl/tensor.hpp"
#include "mfl/types.hpp"

namespace mfl {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

enum class NodeKind {
  Embedding,           // y = b
  Dense,               // y = b + L x
  TensorMFL,           // per-axis factored tensor flattening
  ProductInteraction,  // b + Σ L v + Σ C(v, v) + ... truncated at max_order
  SumDispatch,         // selects the branch named by the value's tag
  MultisetPool,        // n b + Σ L v   (or b + mean L v when normalized)
  EnumTable,           // y = b_tag
  RecurrentCell,       // unrolled per value; body reaches back through SelfPort
  SelfPort,            // re-enters its RecurrentCell on a sub-value
  Activation,          // pointwise map
};

enum class ActivationFn { None, Tanh, Relu, Sigmoid };

enum class SlotRole { Bias, Matrix, Weight, Interaction };

struct SlotDecl {
  std::string name;
  Shape shape;
  SlotRole role;

  std::size_t size() const { return element_count(shape); }
};

/// One architecture node. Leaves with no inputs read their data directly from
/// the value they are applied to (Dense and MultisetPool over raw vectors,
/// TensorMFL over raw tensors); every other node consumes child yectors.
struct Node {
  NodeKind kind = NodeKind::Embedding;
  std::vector<NodeId> inputs;
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;       // Dense, MultisetPool
  Shape shape;                  // TensorMFL axes; ProductInteraction field dims
  std::size_t max_order = 0;    // ProductInteraction
  std::size_t cases = 0;        // EnumTable
  bool normalized = false;      // MultisetPool
  ActivationFn activation = ActivationFn::None;
  NodeId target = kNoNode;      // SelfPort -> RecurrentCell
  std::vector<SlotDecl> slots;
  /// ProductInteraction: field subsets (0-based), aligned with slots[1..].
  std::vector<std::vector<std::size_t>> subsets;
  std::string source;    // printed type the node was compiled from
  std::string semantic;  // user definition name, when compiled from one

  bool raw_input() const { return inputs.empty(); }
  std::size_t slot_index(std::string_view name) const;
  std::size_t param_count() const;
};

Node make_embedding(std::size_t out);
Node make_dense(std::size_t in, std::size_t out, NodeId child = kNoNode);
Node make_tensor_mfl(Shape shape, std::size_t out);
Node make_product(Shape field_dims, std::size_t out, std::size_t max_order,
                  std::vector<NodeId> children);
Node make_sum_dispatch(std::vector<NodeId> branches, std::size_t out);
Node make_pool(std::size_t in, std::size_t out, bool normalized, NodeId child = kNoNode);
Node make_enum_table(std::size_t cases, std::size_t out);
Node make_cell(std::size_t out);
Node make_self_port(NodeId cell, std::size_t out);
Node make_activation(ActivationFn fn, std::size_t dim, NodeId child);

std::string_view kind_name(NodeKind kind);
std::string_view activation_name(ActivationFn fn);
ActivationFn parse_activation(std::string_view name);

class EncoderGraph {
 public:
  NodeId add(Node node);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  Node& node(NodeId id) { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  NodeId output() const { return output_; }
  void set_output(NodeId id) { output_ = id; }
  std::size_t out_dim() const { return nodes_.at(output_).out_dim; }

  /// Number of nodes that list id among their inputs (SelfPort targets
  /// are back-references and not counted).
  std::size_t consumers(NodeId id) const;

  /// Drops nodes unreachable from the output and renumbers the rest in a
  /// deterministic post-order (children before parents). When old_ids is
  /// given it receives the original id of every surviving node.
  EncoderGraph compacted(std::vector<NodeId>* old_ids = nullptr) const;

  /// Verifies edge dims, slot shapes, acyclicity outside SelfPort.
  void validate() const;

 private:
  std::vector<Node> nodes_;
  NodeId output_ = kNoNode;
};

struct CompileOptions {
  std::size_t out_dim = 4;
  /// Width of the yectors that nested composites are flattened to (0 means
  /// use out_dim).
  std::size_t intermediate_width = 0;
  std::size_t max_order = 2;
  bool normalized_pool = false;
  ActivationFn activation = ActivationFn::None;
  /// Occurrences of the same user-named type share one subgraph.
  bool share_named_types = true;

  std::size_t width() const { return intermediate_width ? intermediate_width : out_dim; }
};

/// Lowers a type to its flattening architecture, mirroring the type tree.
EncoderGraph compile(const TypeExpr& t, const CompileOptions& opts, const SchemaEnv& env);

/// Sum of slot sizes over reachable nodes.
std::size_t param_count(const EncoderGraph& g);

/// Makes each (keep, drop) pair share keep's subgraph: consumers of drop are
/// rewired to keep and the orphaned copy is removed. Both subgraphs must have
/// the same structure and slot shapes. old_ids works as in compacted().
EncoderGraph share_weights(const EncoderGraph& g,
                           const std::vector<std::pair<NodeId, NodeId>>& pairs,
                           std::vector<NodeId>* old_ids = nullptr);

/// Human-readable manifest with stable ordering.
std::string graph_manifest(const EncoderGraph& g);

/// Graphviz export; self-ports are drawn as dashed back-edges.
std::string graph_dot(const EncoderGraph& g, std::string_view title = "encoder");

}  // namespace mfl
