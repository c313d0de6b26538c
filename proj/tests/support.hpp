#pragma once

// Independent reference implementations used as test oracles. None of these
// call the library's kernels; they work from slot arrays with plain loops.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mfl/graph.hpp"
#include "mfl/params.hpp"
#include "mfl/tensor.hpp"
#include "mfl/types.hpp"
#include "mfl/value.hpp"

namespace mfl::test {

inline double rel_dev(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

inline double rel_dev(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_dev(a[i], b[i]));
  return worst;
}

inline double rel_dev(const Yector& a, const Yector& b) { return rel_dev(a.data(), b.data()); }

inline std::vector<double> normals(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline DenseTensor random_tensor(Shape shape, std::mt19937_64& rng) {
  const std::size_t n = element_count(shape);
  return DenseTensor(std::move(shape), normals(n, rng));
}

/// Overwrites every parameter with N(0, sd) draws.
inline void randomize(ParamStore& p, std::mt19937_64& rng, double sd = 0.7) {
  std::normal_distribution<double> d(0.0, sd);
  for (std::size_t id = 0; id < p.node_count(); ++id) {
    for (auto& t : p.node(id)) {
      for (double& x : t.data()) x = d(rng);
    }
  }
}

inline Model random_model(const EncoderGraph& g, std::uint64_t seed) {
  Model m{g, init_params(g, seed)};
  std::mt19937_64 rng(seed * 7919 + 13);
  randomize(m.params, rng);
  return m;
}

inline NodeId find_kind(const EncoderGraph& g, NodeKind kind, std::size_t nth = 0) {
  for (NodeId id = 0; id < g.size(); ++id) {
    if (g.node(id).kind == kind && nth-- == 0) return id;
  }
  return kNoNode;
}

inline std::size_t count_kind(const EncoderGraph& g, NodeKind kind) {
  return static_cast<std::size_t>(std::count_if(g.nodes().begin(), g.nodes().end(),
                                                [&](const Node& n) { return n.kind == kind; }));
}

/// y = b + L x by a plain loop.
inline std::vector<double> affine(const DenseTensor& l, const DenseTensor& b,
                                  std::span<const double> x) {
  const std::size_t out = l.shape()[0], in = l.shape()[1];
  std::vector<double> y(b.values());
  for (std::size_t k = 0; k < out; ++k) {
    for (std::size_t j = 0; j < in; ++j) y[k] += l.values()[k * in + j] * x[j];
  }
  return y;
}

/// Iterates every multi-index of a shape in row-major order.
inline void for_each_index(const Shape& shape, const std::function<void(const Shape&)>& f) {
  if (element_count(shape) == 0) return;
  Shape idx(shape.size(), 0);
  while (true) {
    f(idx);
    std::size_t r = shape.size();
    while (r > 0) {
      --r;
      if (++idx[r] < shape[r]) break;
      idx[r] = 0;
      if (r == 0) return;
    }
    if (shape.empty()) return;
  }
}

inline std::size_t flat_index(const Shape& shape, const Shape& idx) {
  std::size_t off = 0;
  for (std::size_t r = 0; r < shape.size(); ++r) off = off * shape[r] + idx[r];
  return off;
}

/// Tensor layer by direct summation of its coefficient formula:
/// y_k = b_k + sum_j N_j sum_r L^(r)_{k j_r} prod_{s != r} w^(s)_{j_s}.
/// slots are b, L1..Ln, then w1..wn when n >= 2.
inline std::vector<double> naive_tensor_layer(const std::vector<DenseTensor>& slots,
                                              const DenseTensor& n) {
  const Shape& shape = n.shape();
  const std::size_t order = shape.size();
  const std::size_t out = slots[0].size();
  std::vector<double> y(slots[0].values());
  for_each_index(shape, [&](const Shape& j) {
    const double nj = n.values()[flat_index(shape, j)];
    for (std::size_t k = 0; k < out; ++k) {
      double coef = 0.0;
      for (std::size_t r = 0; r < order; ++r) {
        double term = slots[1 + r].values()[k * shape[r] + j[r]];
        for (std::size_t s = 0; s < order; ++s) {
          if (s != r) term *= slots[1 + order + s].values()[j[s]];
        }
        coef += term;
      }
      y[k] += coef * nj;
    }
  });
  return y;
}

/// Truncated product interaction by explicit subset loops.
inline std::vector<double> naive_product_layer(const Node& node,
                                               const std::vector<DenseTensor>& slots,
                                               const std::vector<std::vector<double>>& vs) {
  const std::size_t out = node.out_dim;
  std::vector<double> y(slots[0].values());
  for (std::size_t s = 0; s < node.subsets.size(); ++s) {
    const auto& subset = node.subsets[s];
    Shape dims;
    for (std::size_t f : subset) dims.push_back(node.shape[f]);
    const DenseTensor& c = slots[1 + s];
    for (std::size_t k = 0; k < out; ++k) {
      for_each_index(dims, [&](const Shape& idx) {
        double term = c.values()[k * element_count(dims) + flat_index(dims, idx)];
        for (std::size_t i = 0; i < subset.size(); ++i) term *= vs[subset[i]][idx[i]];
        y[k] += term;
      });
    }
  }
  return y;
}

/// Hand-written recurrence for List[Scal]: h0 = nil embedding, each cons cell
/// combines the element encoding with the encoding of the tail through the
/// order-2 interaction M(y, h) = b + L1 y + L2 h + C(y, h).
struct ListRnn {
  std::vector<double> nil;   // [m]
  DenseTensor elem_l;        // [m,1]
  DenseTensor elem_b;        // [m]
  DenseTensor b, l1, l2, c;  // interaction slots

  std::vector<double> step(std::span<const double> y, std::span<const double> h) const {
    const std::size_t m = b.size();
    std::vector<double> out(b.values());
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        out[k] += l1.values()[k * m + i] * y[i] + l2.values()[k * m + i] * h[i];
        for (std::size_t j = 0; j < m; ++j) {
          out[k] += c.values()[(k * m + i) * m + j] * y[i] * h[j];
        }
      }
    }
    return out;
  }

  std::vector<double> run(const std::vector<double>& xs) const {
    std::vector<double> h = nil;
    for (std::size_t i = xs.size(); i-- > 0;) {
      const double x = xs[i];
      h = step(affine(elem_l, elem_b, std::span<const double>(&x, 1)), h);
    }
    return h;
  }
};

/// Reads the recurrence weights out of a compiled List[Scal] graph.
inline ListRnn list_rnn_from(const EncoderGraph& g, const ParamStore& p) {
  ListRnn r;
  const NodeId nil = find_kind(g, NodeKind::Embedding);
  const NodeId dense = find_kind(g, NodeKind::Dense);
  const NodeId pi = find_kind(g, NodeKind::ProductInteraction);
  r.nil = p.slot(g, nil, "b").values();
  r.elem_l = p.slot(g, dense, "L");
  r.elem_b = p.slot(g, dense, "b");
  r.b = p.slot(g, pi, "b");
  r.l1 = p.slot(g, pi, "L1");
  r.l2 = p.slot(g, pi, "L2");
  r.c = p.slot(g, pi, "C1,2");
  return r;
}

/// Multiplicity census of a bag.
inline std::map<Value, std::size_t, ValueLess> census(const Value& bag) {
  std::map<Value, std::size_t, ValueLess> m;
  for (const auto& x : bag.items()) ++m[x];
  return m;
}

/// Graphs covering every node kind, used by the gradient and rewrite suites.
struct CorpusEntry {
  std::string name;
  std::string type;
  CompileOptions opts;
};

inline std::vector<CorpusEntry> graph_corpus() {
  auto o = [](std::size_t out, std::size_t order = 2, bool norm = false,
              ActivationFn act = ActivationFn::None) {
    CompileOptions c;
    c.out_dim = out;
    c.max_order = order;
    c.normalized_pool = norm;
    c.activation = act;
    return c;
  };
  return {
      {"unit", "Unit", o(3)},
      {"vector", "Vector[3]", o(4)},
      {"tensor2", "Tensor[2,3]", o(4)},
      {"tensor3", "Tensor[2,2,3]", o(3)},
      {"enum", "Enum[3]", o(3)},
      {"option_scal", "Option[Scal]", o(3)},
      {"sum_composite", "Sum[Tensor[2,2], Prod[Scal, Bool]]", o(3)},
      {"product_order1", "Prod[Vector[2], Scal, Bool]", o(3, 1)},
      {"product_order3", "Prod[Vector[2], Scal, Bool]", o(3, 3)},
      {"pool", "MSet[Vector[2]]", o(3)},
      {"pool_normalized", "MSet[Vector[2]]", o(3, 2, true)},
      {"pool_composite", "MSet[Prod[Scal, Bool]]", o(3)},
      {"option_feature", "Prod[Option[Scal], Option[Bool]]", o(3)},
      {"list", "List[Scal]", o(3)},
      {"list_tanh", "List[Vector[2]]", o(3, 2, false, ActivationFn::Tanh)},
      {"nested_sigmoid", "Prod[MSet[Scal], Option[Tensor[2,2]]]", o(3, 2, false, ActivationFn::Sigmoid)},
  };
}

struct Compiled {
  SchemaEnv env;
  TypeExpr type;
  EncoderGraph graph;
};

inline Compiled compile_text(const std::string& type, const CompileOptions& opts) {
  Compiled c;
  c.type = parse_type(type, c.env);
  c.graph = compile(c.type, opts, c.env);
  return c;
}

}  // namespace mfl::test
