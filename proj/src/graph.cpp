#include "mfl/graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "mfl/error.hpp"

namespace mfl {

namespace {

std::string shape_text(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

void choose(std::size_t n, std::size_t k, std::size_t start, std::vector<std::size_t>& cur,
            std::vector<std::vector<std::size_t>>& out) {
  if (cur.size() == k) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = start; i < n; ++i) {
    cur.push_back(i);
    choose(n, k, i + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::size_t Node::slot_index(std::string_view name) const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name == name) return i;
  }
  throw ShapeError(std::string(kind_name(kind)) + " node has no slot '" + std::string(name) + "'");
}

std::size_t Node::param_count() const {
  std::size_t n = 0;
  for (const auto& s : slots) n += s.size();
  return n;
}

Node make_embedding(std::size_t out) {
  Node n;
  n.kind = NodeKind::Embedding;
  n.out_dim = out;
  n.slots = {{"b", {out}, SlotRole::Bias}};
  return n;
}

Node make_dense(std::size_t in, std::size_t out, NodeId child) {
  Node n;
  n.kind = NodeKind::Dense;
  n.in_dim = in;
  n.out_dim = out;
  if (child != kNoNode) n.inputs = {child};
  n.slots = {{"L", {out, in}, SlotRole::Matrix}, {"b", {out}, SlotRole::Bias}};
  return n;
}

Node make_tensor_mfl(Shape shape, std::size_t out) {
  Node n;
  n.kind = NodeKind::TensorMFL;
  n.out_dim = out;
  n.slots.push_back({"b", {out}, SlotRole::Bias});
  for (std::size_t r = 0; r < shape.size(); ++r) {
    n.slots.push_back({"L" + std::to_string(r + 1), {out, shape[r]}, SlotRole::Matrix});
  }
  // A single axis has no companion axes to weight.
  if (shape.size() >= 2) {
    for (std::size_t r = 0; r < shape.size(); ++r) {
      n.slots.push_back({"w" + std::to_string(r + 1), {shape[r]}, SlotRole::Weight});
    }
  }
  n.shape = std::move(shape);
  return n;
}

Node make_product(Shape field_dims, std::size_t out, std::size_t max_order,
                  std::vector<NodeId> children) {
  if (max_order < 1) throw ShapeError("product interaction order must be at least 1");
  Node n;
  n.kind = NodeKind::ProductInteraction;
  n.out_dim = out;
  n.max_order = std::min(max_order, field_dims.size());
  n.inputs = std::move(children);
  n.slots.push_back({"b", {out}, SlotRole::Bias});
  for (std::size_t k = 1; k <= n.max_order; ++k) {
    std::vector<std::size_t> cur;
    std::vector<std::vector<std::size_t>> subsets;
    choose(field_dims.size(), k, 0, cur, subsets);
    for (auto& s : subsets) {
      Shape shape{out};
      std::string name = k == 1 ? "L" : "C";
      for (std::size_t i = 0; i < s.size(); ++i) {
        shape.push_back(field_dims[s[i]]);
        name += (i ? "," : "") + std::to_string(s[i] + 1);
      }
      n.slots.push_back({name, shape, k == 1 ? SlotRole::Matrix : SlotRole::Interaction});
      n.subsets.push_back(std::move(s));
    }
  }
  n.shape = std::move(field_dims);
  return n;
}

Node make_sum_dispatch(std::vector<NodeId> branches, std::size_t out) {
  Node n;
  n.kind = NodeKind::SumDispatch;
  n.out_dim = out;
  n.inputs = std::move(branches);
  return n;
}

Node make_pool(std::size_t in, std::size_t out, bool normalized, NodeId child) {
  Node n;
  n.kind = NodeKind::MultisetPool;
  n.in_dim = in;
  n.out_dim = out;
  n.normalized = normalized;
  if (child != kNoNode) n.inputs = {child};
  n.slots = {{"L", {out, in}, SlotRole::Matrix}, {"b", {out}, SlotRole::Bias}};
  return n;
}

Node make_enum_table(std::size_t cases, std::size_t out) {
  Node n;
  n.kind = NodeKind::EnumTable;
  n.out_dim = out;
  n.cases = cases;
  for (std::size_t i = 1; i <= cases; ++i) {
    n.slots.push_back({"b" + std::to_string(i), {out}, SlotRole::Bias});
  }
  return n;
}

Node make_cell(std::size_t out) {
  Node n;
  n.kind = NodeKind::RecurrentCell;
  n.out_dim = out;
  return n;
}

Node make_self_port(NodeId cell, std::size_t out) {
  Node n;
  n.kind = NodeKind::SelfPort;
  n.out_dim = out;
  n.target = cell;
  return n;
}

Node make_activation(ActivationFn fn, std::size_t dim, NodeId child) {
  Node n;
  n.kind = NodeKind::Activation;
  n.activation = fn;
  n.in_dim = dim;
  n.out_dim = dim;
  n.inputs = {child};
  return n;
}

std::string_view kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Embedding: return "Embedding";
    case NodeKind::Dense: return "Dense";
    case NodeKind::TensorMFL: return "TensorMFL";
    case NodeKind::ProductInteraction: return "ProductInteraction";
    case NodeKind::SumDispatch: return "SumDispatch";
    case NodeKind::MultisetPool: return "MultisetPool";
    case NodeKind::EnumTable: return "EnumTable";
    case NodeKind::RecurrentCell: return "RecurrentCell";
    case NodeKind::SelfPort: return "SelfPort";
    case NodeKind::Activation: return "Activation";
  }
  return "?";
}

std::string_view activation_name(ActivationFn fn) {
  switch (fn) {
    case ActivationFn::None: return "none";
    case ActivationFn::Tanh: return "tanh";
    case ActivationFn::Relu: return "relu";
    case ActivationFn::Sigmoid: return "sigmoid";
  }
  return "?";
}

ActivationFn parse_activation(std::string_view name) {
  if (name == "none") return ActivationFn::None;
  if (name == "tanh") return ActivationFn::Tanh;
  if (name == "relu") return ActivationFn::Relu;
  if (name == "sigmoid") return ActivationFn::Sigmoid;
  throw ValueError("unknown activation '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// EncoderGraph

NodeId EncoderGraph::add(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t EncoderGraph::consumers(NodeId id) const {
  std::size_t n = 0;
  for (const auto& node : nodes_) {
    n += static_cast<std::size_t>(std::count(node.inputs.begin(), node.inputs.end(), id));
  }
  return n;
}

EncoderGraph EncoderGraph::compacted(std::vector<NodeId>* old_ids) const {
  std::vector<NodeId> order;
  std::vector<char> seen(nodes_.size(), 0);
  std::function<void(NodeId)> visit = [&](NodeId id) {
    if (seen[id]) return;
    seen[id] = 1;
    for (NodeId c : nodes_[id].inputs) visit(c);
    order.push_back(id);
  };
  visit(output_);

  std::vector<NodeId> remap(nodes_.size(), kNoNode);
  for (std::size_t i = 0; i < order.size(); ++i) remap[order[i]] = i;

  EncoderGraph out;
  for (NodeId old : order) {
    Node n = nodes_[old];
    for (auto& c : n.inputs) c = remap[c];
    if (n.target != kNoNode) n.target = remap[n.target];
    out.add(std::move(n));
  }
  out.output_ = remap[output_];
  if (old_ids) *old_ids = order;
  return out;
}

void EncoderGraph::validate() const {
  auto fail = [](NodeId id, const std::string& what) {
    throw ShapeError("node " + std::to_string(id) + ": " + what);
  };
  if (output_ >= nodes_.size()) throw ShapeError("graph has no output node");
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    for (NodeId c : n.inputs) {
      if (c >= nodes_.size()) fail(id, "input out of range");
    }
    auto child_out = [&](std::size_t i) { return nodes_[n.inputs[i]].out_dim; };
    switch (n.kind) {
      case NodeKind::Dense:
      case NodeKind::MultisetPool:
        if (n.inputs.size() > 1) fail(id, "at most one input");
        if (!n.inputs.empty() && child_out(0) != n.in_dim) fail(id, "input width mismatch");
        break;
      case NodeKind::ProductInteraction:
        if (n.inputs.size() != n.shape.size()) fail(id, "one input per field expected");
        for (std::size_t r = 0; r < n.inputs.size(); ++r) {
          if (child_out(r) != n.shape[r]) fail(id, "field width mismatch");
        }
        break;
      case NodeKind::SumDispatch:
        for (std::size_t r = 0; r < n.inputs.size(); ++r) {
          if (child_out(r) != n.out_dim) fail(id, "branch width mismatch");
        }
        break;
      case NodeKind::RecurrentCell:
      case NodeKind::Activation:
        if (n.inputs.size() != 1 || child_out(0) != n.out_dim) fail(id, "body width mismatch");
        break;
      case NodeKind::SelfPort:
        if (n.target >= nodes_.size() || nodes_[n.target].kind != NodeKind::RecurrentCell) {
          fail(id, "self-port must target a recurrent cell");
        }
        if (nodes_[n.target].out_dim != n.out_dim) fail(id, "self-port width mismatch");
        break;
      default:
        if (!n.inputs.empty()) fail(id, "leaf node with inputs");
        break;
    }
  }
  // Acyclic apart from self-port back-references.
  std::vector<int> color(nodes_.size(), 0);
  std::function<void(NodeId)> dfs = [&](NodeId id) {
    color[id] = 1;
    for (NodeId c : nodes_[id].inputs) {
      if (color[c] == 1) fail(id, "cycle outside a recurrent self-port");
      if (color[c] == 0) dfs(c);
    }
    color[id] = 2;
  };
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (color[id] == 0) dfs(id);
  }
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

class Compiler {
 public:
  Compiler(const SchemaEnv& env, const CompileOptions& opts) : env_(env), opts_(opts) {}

  EncoderGraph run(const TypeExpr& t) {
    if (opts_.out_dim == 0 || opts_.width() == 0) {
      throw SchemaError("zero-width output requested");
    }
    if (opts_.max_order < 1) throw SchemaError("max_order must be at least 1");
    env_.check_resolved(t);
    NodeId root = at(t, opts_.out_dim);
    g_.set_output(root);
    return g_;
  }

 private:
  NodeId add(Node n, const TypeExpr& t) {
    if (n.source.empty()) n.source = t.to_string();
    return g_.add(std::move(n));
  }

  // Whether t mentions a recursive type whose cell is currently open.
  bool mentions_open_cell(const TypeExpr& t) const {
    if (t.kind() == TypeExpr::Kind::Ref) {
      for (const auto& [name, _] : cells_) {
        if (name == t.name()) return true;
      }
      if (env_.is_recursive(t.name())) return false;
      return mentions_open_cell(env_.definition(t.name()));
    }
    for (const auto& a : t.args()) {
      if (mentions_open_cell(a)) return true;
    }
    return false;
  }

  NodeId open_cell(const std::string& name) const {
    for (const auto& [n, id] : cells_) {
      if (n == name) return id;
    }
    return kNoNode;
  }

  NodeId child(const TypeExpr& t) {
    NodeId id = at(t, opts_.width());
    if (opts_.activation != ActivationFn::None) {
      id = add(make_activation(opts_.activation, opts_.width(), id), t);
    }
    return id;
  }

  // A product field or multiset element: recursive positions feed the open
  // cell's hidden state in directly.
  NodeId field(const TypeExpr& t) {
    if (t.kind() == TypeExpr::Kind::Ref) {
      if (NodeId cell = open_cell(t.name()); cell != kNoNode) {
        return add(make_self_port(cell, g_.node(cell).out_dim), t);
      }
    }
    return child(t);
  }

  NodeId at(const TypeExpr& t, std::size_t width) {
    switch (t.kind()) {
      case TypeExpr::Kind::Ref:
        return at_ref(t, width);
      case TypeExpr::Kind::Tensor: {
        const Shape& s = t.shape();
        if (s == Shape{0}) return add(make_embedding(width), t);
        if (s.size() == 1) return add(make_dense(s[0], width), t);
        return add(make_tensor_mfl(s, width), t);
      }
      case TypeExpr::Kind::Sum:
        return at_sum(t, width);
      case TypeExpr::Kind::Prod: {
        if (t.args().empty()) return add(make_embedding(width), t);
        std::vector<NodeId> children;
        Shape dims;
        bool recursive = false;
        for (const auto& a : t.args()) {
          recursive = recursive || mentions_open_cell(a);
          children.push_back(field(a));
          dims.push_back(g_.node(children.back()).out_dim);
        }
        // The recurrence map is the full multilinear form over its fields.
        std::size_t order = recursive ? t.args().size() : opts_.max_order;
        return add(make_product(dims, width, order, std::move(children)), t);
      }
      case TypeExpr::Kind::MSet: {
        const TypeExpr& elem = t.args()[0];
        const TypeExpr& r = env_.resolve(elem);
        if (r.is_vector() && !mentions_open_cell(elem)) {
          return add(make_pool(r.shape()[0], width, opts_.normalized_pool), t);
        }
        NodeId c = field(elem);
        return add(make_pool(g_.node(c).out_dim, width, opts_.normalized_pool, c), t);
      }
    }
    throw SchemaError("cannot compile type " + t.to_string());
  }

  NodeId at_ref(const TypeExpr& t, std::size_t width) {
    const std::string& name = t.name();
    if (NodeId cell = open_cell(name); cell != kNoNode) {
      std::size_t h = g_.node(cell).out_dim;
      NodeId port = add(make_self_port(cell, h), t);
      if (h == width) return port;
      return add(make_dense(h, width, port), t);
    }
    const TypeExpr& body = env_.definition(name);
    if (env_.is_recursive(name)) {
      NodeId cell = add(make_cell(width), t);
      cells_.emplace_back(name, cell);
      NodeId inner = at(body, width);
      if (opts_.activation != ActivationFn::None) {
        inner = add(make_activation(opts_.activation, width, inner), t);
      }
      cells_.pop_back();
      g_.node(cell).inputs = {inner};
      tag(cell, name);
      return cell;
    }
    NodeId id = at(body, width);
    tag(id, name);
    return id;
  }

  void tag(NodeId id, const std::string& name) {
    Node& n = g_.node(id);
    if (n.semantic.empty() && env_.is_user_name(name)) n.semantic = name;
  }

  NodeId at_sum(const TypeExpr& t, std::size_t width) {
    const auto& args = t.args();
    if (args.empty()) {
      throw SchemaError("cannot compile the uninhabited type Sum[]");
    }
    bool all_unit = true;
    for (const auto& a : args) {
      all_unit = all_unit && env_.resolve(a).is_unit() && !mentions_open_cell(a);
    }
    if (all_unit) return add(make_enum_table(args.size(), width), t);

    std::vector<NodeId> branches;
    for (const auto& a : args) {
      const TypeExpr& r = env_.resolve(a);
      if (mentions_open_cell(a) || r.is_vector()) {
        // Unit and vector alternatives get their own affine layer; recursive
        // alternatives map straight into the hidden space.
        branches.push_back(at(a, width));
      } else {
        NodeId c = child(a);
        branches.push_back(add(make_dense(opts_.width(), width, c), a));
      }
    }
    return add(make_sum_dispatch(std::move(branches), width), t);
  }

  const SchemaEnv& env_;
  CompileOptions opts_;
  EncoderGraph g_;
  std::vector<std::pair<std::string, NodeId>> cells_;
};

// Structural identity of two subgraphs, including slot shapes; self-port
// targets must correspond under the same pairing.
bool same_structure(const EncoderGraph& g, NodeId a, NodeId b, std::map<NodeId, NodeId>& pairing) {
  if (auto it = pairing.find(a); it != pairing.end()) return it->second == b;
  const Node& x = g.node(a);
  const Node& y = g.node(b);
  if (x.kind != y.kind || x.out_dim != y.out_dim || x.in_dim != y.in_dim ||
      x.shape != y.shape || x.max_order != y.max_order || x.cases != y.cases ||
      x.normalized != y.normalized || x.activation != y.activation ||
      x.inputs.size() != y.inputs.size() || x.slots.size() != y.slots.size()) {
    return false;
  }
  for (std::size_t i = 0; i < x.slots.size(); ++i) {
    if (x.slots[i].name != y.slots[i].name || x.slots[i].shape != y.slots[i].shape) return false;
  }
  pairing[a] = b;
  if (x.kind == NodeKind::SelfPort) {
    if (x.target == y.target) return true;
    auto it = pairing.find(x.target);
    return it != pairing.end() && it->second == y.target;
  }
  for (std::size_t i = 0; i < x.inputs.size(); ++i) {
    if (!same_structure(g, x.inputs[i], y.inputs[i], pairing)) return false;
  }
  return true;
}

std::vector<std::pair<NodeId, NodeId>> named_pairs(const EncoderGraph& g) {
  std::map<std::pair<std::string, std::size_t>, std::vector<NodeId>> groups;
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (!n.semantic.empty()) groups[{n.semantic, n.out_dim}].push_back(id);
  }
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const auto& [_, ids] : groups) {
    for (std::size_t i = 1; i < ids.size(); ++i) {
      std::map<NodeId, NodeId> pairing;
      if (same_structure(g, ids[0], ids[i], pairing)) pairs.emplace_back(ids[0], ids[i]);
    }
  }
  return pairs;
}

}  // namespace

EncoderGraph compile(const TypeExpr& t, const CompileOptions& opts, const SchemaEnv& env) {
  EncoderGraph g = Compiler(env, opts).run(t);
  if (opts.share_named_types) {
    auto pairs = named_pairs(g);
    if (!pairs.empty()) g = share_weights(g, pairs);
  }
  g = g.compacted();
  g.validate();
  return g;
}

std::size_t param_count(const EncoderGraph& g) {
  const EncoderGraph live = g.compacted();
  std::size_t n = 0;
  for (const auto& node : live.nodes()) n += node.param_count();
  return n;
}

EncoderGraph share_weights(const EncoderGraph& g,
                           const std::vector<std::pair<NodeId, NodeId>>& pairs,
                           std::vector<NodeId>* old_ids) {
  std::vector<NodeId> rep(g.size());
  std::iota(rep.begin(), rep.end(), 0);
  std::function<NodeId(NodeId)> find = [&](NodeId x) {
    while (rep[x] != x) x = rep[x] = rep[rep[x]];
    return x;
  };
  for (const auto& [keep, drop] : pairs) {
    if (keep >= g.size() || drop >= g.size()) throw ShapeError("share_weights: node out of range");
    std::map<NodeId, NodeId> pairing;
    if (!same_structure(g, keep, drop, pairing)) {
      const Node& a = g.node(keep);
      const Node& b = g.node(drop);
      throw ShapeError("cannot share weights between " + std::string(kind_name(a.kind)) + " " +
                       std::to_string(a.in_dim) + "->" + std::to_string(a.out_dim) + " (node " +
                       std::to_string(keep) + ") and " + std::string(kind_name(b.kind)) + " " +
                       std::to_string(b.in_dim) + "->" + std::to_string(b.out_dim) + " (node " +
                       std::to_string(drop) + "): shapes differ");
    }
    NodeId k = find(keep);
    NodeId d = find(drop);
    if (k != d) rep[d] = k;
  }
  EncoderGraph out = g;
  for (NodeId id = 0; id < out.size(); ++id) {
    for (auto& c : out.node(id).inputs) c = find(c);
  }
  out.set_output(find(g.output()));
  return out.compacted(old_ids);
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string node_summary(const Node& n) {
  std::ostringstream out;
  out << kind_name(n.kind);
  switch (n.kind) {
    case NodeKind::Dense:
    case NodeKind::MultisetPool:
      out << " in=" << n.in_dim;
      if (n.raw_input()) out << " raw";
      if (n.kind == NodeKind::MultisetPool && n.normalized) out << " normalized";
      break;
    case NodeKind::TensorMFL:
      out << " shape=" << shape_text(n.shape);
      break;
    case NodeKind::ProductInteraction:
      out << " fields=" << shape_text(n.shape) << " order=" << n.max_order;
      break;
    case NodeKind::EnumTable:
      out << " cases=" << n.cases;
      break;
    case NodeKind::Activation:
      out << " fn=" << activation_name(n.activation);
      break;
    default:
      break;
  }
  out << " out=" << n.out_dim;
  return out.str();
}

}  // namespace

std::string graph_manifest(const EncoderGraph& g) {
  std::ostringstream out;
  out << "graph\n";
  out << "nodes: " << g.size() << "\n";
  out << "output: " << g.output() << "\n";
  out << "out_dim: " << g.out_dim() << "\n";
  out << "param_count: " << param_count(g) << "\n";
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    out << "node " << id << ": " << node_summary(n);
    if (!n.inputs.empty()) {
      out << " inputs=[";
      for (std::size_t i = 0; i < n.inputs.size(); ++i) out << (i ? "," : "") << n.inputs[i];
      out << "]";
    }
    if (n.target != kNoNode) out << " target=" << n.target;
    out << " params=" << n.param_count() << "\n";
    out << "  type: " << n.source << "\n";
    if (!n.semantic.empty()) out << "  shared-as: " << n.semantic << "\n";
    for (const auto& s : n.slots) out << "  slot " << s.name << " " << shape_text(s.shape) << "\n";
  }
  return out.str();
}

std::string graph_dot(const EncoderGraph& g, std::string_view title) {
  std::ostringstream out;
  out << "digraph \"" << title << "\" {\n";
  out << "  rankdir=BT;\n";
  out << "  node [shape=box, fontname=\"monospace\"];\n";
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    out << "  n" << id << " [label=\"" << node_summary(n);
    for (const auto& s : n.slots) out << "\\n" << s.name << shape_text(s.shape);
    out << "\"";
    if (id == g.output()) out << ", peripheries=2";
    out << "];\n";
  }
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      out << "  n" << n.inputs[i] << " -> n" << id;
      if (n.kind == NodeKind::ProductInteraction || n.kind == NodeKind::SumDispatch) {
        out << " [label=\"" << i + 1 << "\"]";
      }
      out << ";\n";
    }
    if (n.kind == NodeKind::SelfPort) {
      out << "  n" << n.target << " -> n" << id << " [style=dashed, constraint=false];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace mfl
