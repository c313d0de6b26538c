#include "mfl/passes.hpp"

#include "mfl/error.hpp"

namespace mfl {

namespace {

// A[m,k] * B[k,n]
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  DenseTensor c({m, n});
  auto ad = a.data();
  auto bd = b.data();
  auto cd = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = ad[i * k + p];
      for (std::size_t j = 0; j < n; ++j) cd[i * n + j] += x * bd[p * n + j];
    }
  }
  return c;
}

// b2 + L2 b1
DenseTensor affine(const DenseTensor& l2, const DenseTensor& b2, const DenseTensor& b1) {
  DenseTensor out = b2;
  const std::size_t rows = l2.shape()[0];
  const std::size_t cols = l2.shape()[1];
  auto l = l2.data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) o[r] += l[r * cols + c] * b1.data()[c];
  }
  return out;
}

bool mergeable_leaf(const Node& n) {
  return n.kind == NodeKind::Dense || n.kind == NodeKind::Embedding ||
         n.kind == NodeKind::EnumTable;
}

// Applies one merge if any is available; returns false at the fixpoint.
bool merge_once(EncoderGraph& g, ParamStore& p) {
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& d = g.node(id);
    if (d.kind != NodeKind::Dense || d.raw_input()) continue;
    const NodeId cid = d.inputs[0];
    const Node& c = g.node(cid);
    if (g.consumers(cid) != 1) continue;

    const DenseTensor l2 = p.node(id)[0];
    const DenseTensor b2 = p.node(id)[1];
    Node merged;
    std::vector<DenseTensor> slots;
    switch (c.kind) {
      case NodeKind::Dense:
        merged = make_dense(c.in_dim, d.out_dim, c.raw_input() ? kNoNode : c.inputs[0]);
        slots = {matmul(l2, p.node(cid)[0]), affine(l2, b2, p.node(cid)[1])};
        break;
      case NodeKind::Embedding:
        merged = make_embedding(d.out_dim);
        slots = {affine(l2, b2, p.node(cid)[0])};
        break;
      case NodeKind::EnumTable:
        merged = make_enum_table(c.cases, d.out_dim);
        for (const auto& bi : p.node(cid)) slots.push_back(affine(l2, b2, bi));
        break;
      case NodeKind::SumDispatch: {
        bool all = true;
        for (NodeId b : c.inputs) {
          all = all && mergeable_leaf(g.node(b)) && g.consumers(b) == 1;
        }
        if (!all) continue;
        // Push a copy of the outer layer into every branch; the copies fold
        // into the branches on later rounds.
        const Node dispatch = c;
        const Node outer = d;
        std::vector<NodeId> branches;
        for (NodeId b : dispatch.inputs) {
          Node copy = make_dense(g.node(b).out_dim, outer.out_dim, b);
          copy.source = g.node(b).source;
          branches.push_back(g.add(std::move(copy)));
          p.append({l2, b2});
        }
        merged = make_sum_dispatch(std::move(branches), outer.out_dim);
        merged.source = dispatch.source;
        merged.semantic = dispatch.semantic;
        g.node(id) = std::move(merged);
        p.node(id).clear();
        return true;
      }
      default:
        continue;
    }
    merged.source = c.source;
    g.node(id) = std::move(merged);
    p.node(id) = std::move(slots);
    return true;
  }
  return false;
}

}  // namespace

Model simplify(const EncoderGraph& g, const ParamStore& params) {
  params.check_against(g);
  EncoderGraph work = g;
  ParamStore p = params;
  while (merge_once(work, p)) {
    std::vector<NodeId> old_ids;
    EncoderGraph next = work.compacted(&old_ids);
    p = p.select(old_ids);
    work = std::move(next);
  }
  work.validate();
  p.check_against(work);
  return {std::move(work), std::move(p)};
}

Model share_weights(const Model& m, const std::vector<std::pair<NodeId, NodeId>>& pairs) {
  std::vector<NodeId> old_ids;
  EncoderGraph g = share_weights(m.graph, pairs, &old_ids);
  return {std::move(g), m.params.select(old_ids)};
}

}  // namespace mfl
