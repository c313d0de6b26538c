#include "mfl/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mfl/error.hpp"

namespace mfl {

namespace {

// y += A x for A of shape [rows, cols].
void matvec_add(const DenseTensor& a, std::span<const double> x, std::span<double> y,
                double scale = 1.0) {
  const std::size_t rows = a.shape()[0];
  const std::size_t cols = a.shape()[1];
  auto d = a.data();
  for (std::size_t k = 0; k < rows; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += d[k * cols + j] * x[j];
    y[k] += scale * s;
  }
}

// x += scale * A^T c
void matvec_t_add(const DenseTensor& a, std::span<const double> c, std::span<double> x,
                  double scale = 1.0) {
  const std::size_t rows = a.shape()[0];
  const std::size_t cols = a.shape()[1];
  auto d = a.data();
  for (std::size_t k = 0; k < rows; ++k) {
    double ck = scale * c[k];
    for (std::size_t j = 0; j < cols; ++j) x[j] += d[k * cols + j] * ck;
  }
}

// G += scale * c x^T
void outer_add(DenseTensor& g, std::span<const double> c, std::span<const double> x,
               double scale = 1.0) {
  const std::size_t rows = g.shape()[0];
  const std::size_t cols = g.shape()[1];
  auto d = g.data();
  for (std::size_t k = 0; k < rows; ++k) {
    double ck = scale * c[k];
    for (std::size_t j = 0; j < cols; ++j) d[k * cols + j] += ck * x[j];
  }
}

void axpy(std::span<double> y, std::span<const double> x, double a = 1.0) {
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

void check_dim(std::size_t got, std::size_t want, const Node& node, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(kind_name(node.kind)) + ": " + what + " has dimension " +
                     std::to_string(got) + ", expected " + std::to_string(want));
  }
}

// Odometer over a multi-index.
bool next_index(std::vector<std::size_t>& idx, const Shape& shape) {
  for (std::size_t a = idx.size(); a-- > 0;) {
    if (++idx[a] < shape[a]) return true;
    idx[a] = 0;
  }
  return false;
}

// Slot layout of a TensorMFL node: b, L1..Ln, w1..wn.
const DenseTensor& tensor_l(std::span<const DenseTensor> slots, std::size_t r) {
  return slots[1 + r];
}

std::span<const double> tensor_w(const Node& node, std::span<const DenseTensor> slots,
                                 std::size_t r) {
  return slots[1 + node.shape.size() + r].data();
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels

double activate(ActivationFn fn, double x) {
  switch (fn) {
    case ActivationFn::None: return x;
    case ActivationFn::Tanh: return std::tanh(x);
    case ActivationFn::Relu: return x > 0.0 ? x : 0.0;
    case ActivationFn::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

namespace {

double activate_grad(ActivationFn fn, double x, double y) {
  switch (fn) {
    case ActivationFn::None: return 1.0;
    case ActivationFn::Tanh: return 1.0 - y * y;
    case ActivationFn::Relu: return x > 0.0 ? 1.0 : 0.0;
    case ActivationFn::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

}  // namespace

std::vector<double> contract_vectors(const DenseTensor& n,
                                     const std::vector<std::span<const double>>& vecs,
                                     std::size_t keep) {
  Shape shape = n.shape();
  std::vector<double> cur(n.values());
  // Contracting from the last axis down leaves every lower axis in place, so
  // axis t still sits at position t when its turn comes.
  for (std::size_t t = shape.size(); t-- > 0;) {
    if (t == keep) continue;
    const std::size_t axis = t;
    std::size_t outer = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
    std::size_t len = shape[axis];
    std::size_t inner = 1;
    for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
    std::vector<double> next(outer * inner, 0.0);
    auto v = vecs[t];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < len; ++j) {
        const double vj = v[j];
        const double* src = cur.data() + (o * len + j) * inner;
        double* dst = next.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += vj * src[i];
      }
    }
    cur = std::move(next);
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return cur;
}

Yector embedding_forward(const Node&, std::span<const DenseTensor> slots) {
  return Yector(slots[0].values());
}

Yector dense_forward(const Node& node, std::span<const DenseTensor> slots,
                     std::span<const double> x) {
  check_dim(x.size(), node.in_dim, node, "input");
  Yector y(slots[1].values());
  matvec_add(slots[0], x, y.data());
  return y;
}

Yector tensor_mfl_forward(const Node& node, std::span<const DenseTensor> slots,
                          const DenseTensor& n, std::vector<Yector>* partials) {
  if (n.shape() != node.shape) throw ShapeError("TensorMFL: input shape mismatch");
  const std::size_t order = node.shape.size();
  Yector y(slots[0].values());
  if (partials) partials->clear();
  if (order == 1) {
    matvec_add(tensor_l(slots, 0), n.data(), y.data());
    if (partials) partials->emplace_back(n.values());
    return y;
  }
  std::vector<std::span<const double>> ws;
  for (std::size_t r = 0; r < order; ++r) ws.push_back(tensor_w(node, slots, r));
  for (std::size_t r = 0; r < order; ++r) {
    Yector u(contract_vectors(n, ws, r));
    matvec_add(tensor_l(slots, r), u.data(), y.data());
    if (partials) partials->push_back(std::move(u));
  }
  return y;
}

Yector product_mfl_forward(const Node& node, std::span<const DenseTensor> slots,
                           std::span<const Yector> ys) {
  check_dim(ys.size(), node.shape.size(), node, "field count");
  for (std::size_t r = 0; r < ys.size(); ++r) check_dim(ys[r].dim(), node.shape[r], node, "field");
  Yector y(slots[0].values());
  const std::size_t out = node.out_dim;
  for (std::size_t s = 0; s < node.subsets.size(); ++s) {
    const auto& subset = node.subsets[s];
    const DenseTensor& c = slots[1 + s];
    if (subset.size() == 1) {
      matvec_add(c, ys[subset[0]].data(), y.data());
      continue;
    }
    Shape inner(c.shape().begin() + 1, c.shape().end());
    const std::size_t block = element_count(inner);
    if (block == 0) continue;
    // Coefficient of each inner multi-index: product of the field components.
    std::vector<double> coef(block);
    std::vector<std::size_t> idx(inner.size(), 0);
    std::size_t flat = 0;
    do {
      double p = 1.0;
      for (std::size_t m = 0; m < subset.size(); ++m) p *= ys[subset[m]][idx[m]];
      coef[flat++] = p;
    } while (next_index(idx, inner));
    auto d = c.data();
    for (std::size_t k = 0; k < out; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < block; ++j) acc += d[k * block + j] * coef[j];
      y[k] += acc;
    }
  }
  return y;
}

Yector multiset_pool_forward(const Node& node, std::span<const DenseTensor> slots,
                             std::span<const Yector> ys) {
  const std::size_t n = ys.size();
  Yector y(node.out_dim);
  if (n == 0) {
    if (node.normalized) y = Yector(slots[1].values());
    return y;
  }
  Yector sum(node.in_dim);
  for (const auto& v : ys) {
    check_dim(v.dim(), node.in_dim, node, "element");
    axpy(sum.data(), v.data());
  }
  if (node.normalized) {
    y = Yector(slots[1].values());
    matvec_add(slots[0], sum.data(), y.data(), 1.0 / static_cast<double>(n));
  } else {
    axpy(y.data(), slots[1].data(), static_cast<double>(n));
    matvec_add(slots[0], sum.data(), y.data());
  }
  return y;
}

Yector enum_table_forward(const Node& node, std::span<const DenseTensor> slots,
                          std::size_t tag) {
  if (tag < 1 || tag > node.cases) {
    throw ValueError("tag " + std::to_string(tag) + " out of range for " +
                     std::to_string(node.cases) + " cases");
  }
  return Yector(slots[tag - 1].values());
}

// ---------------------------------------------------------------------------
// Forward

namespace {

const char* value_kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::Tensor: return "tensor";
    case Value::Kind::Tagged: return "tagged value";
    case Value::Kind::Tuple: return "tuple";
    case Value::Kind::Bag: return "bag";
  }
  return "?";
}

void expect_kind(const Value& v, Value::Kind k, const Node& node) {
  if (v.kind() != k) {
    throw ValueError(std::string(kind_name(node.kind)) + " expects a " + value_kind_name(k) +
                     ", got a " + value_kind_name(v.kind()));
  }
}

std::span<const double> raw_vector(const Value& v, const Node& node) {
  expect_kind(v, Value::Kind::Tensor, node);
  if (v.shape().size() != 1 || v.shape()[0] != node.in_dim) {
    throw ValueError(std::string(kind_name(node.kind)) + " expects a vector of length " +
                     std::to_string(node.in_dim));
  }
  return v.data();
}

// Output of a record given the outputs of its children.
Yector run_node(const Node& node, std::span<const DenseTensor> slots, const TapeRecord& rec,
                const std::vector<const Yector*>& kids, std::vector<Yector>* partials) {
  switch (node.kind) {
    case NodeKind::Embedding:
      return embedding_forward(node, slots);
    case NodeKind::Dense:
      return dense_forward(node, slots, kids.empty() ? std::span<const double>(rec.raw)
                                                     : kids[0]->data());
    case NodeKind::TensorMFL:
      return tensor_mfl_forward(node, slots, DenseTensor(rec.raw_shape, rec.raw), partials);
    case NodeKind::ProductInteraction: {
      std::vector<Yector> ys;
      for (const auto* k : kids) ys.push_back(*k);
      return product_mfl_forward(node, slots, ys);
    }
    case NodeKind::MultisetPool: {
      std::vector<Yector> ys;
      if (node.raw_input()) {
        for (std::size_t r = 0; r < rec.count; ++r) {
          ys.emplace_back(std::vector<double>(rec.raw.begin() + static_cast<std::ptrdiff_t>(r * node.in_dim),
                                              rec.raw.begin() + static_cast<std::ptrdiff_t>((r + 1) * node.in_dim)));
        }
      } else {
        for (const auto* k : kids) ys.push_back(*k);
      }
      return multiset_pool_forward(node, slots, ys);
    }
    case NodeKind::EnumTable:
      return enum_table_forward(node, slots, rec.tag);
    case NodeKind::SumDispatch:
    case NodeKind::RecurrentCell:
    case NodeKind::SelfPort:
      return *kids.at(0);
    case NodeKind::Activation:
      return yector_map([&](double x) { return activate(node.activation, x); }, *kids.at(0));
  }
  throw ShapeError("unknown node kind");
}

class Evaluator {
 public:
  Evaluator(const EncoderGraph& g, const ParamStore& p, Tape& tape) : g_(g), p_(p), tape_(tape) {}

  std::size_t eval(NodeId id, const Value& v) {
    const Node& node = g_.node(id);
    TapeRecord rec;
    rec.node = id;
    switch (node.kind) {
      case NodeKind::Embedding:
      case NodeKind::EnumTable:
        if (node.kind == NodeKind::EnumTable) rec.tag = tag_of(v, node, node.cases);
        break;
      case NodeKind::Dense:
        if (node.raw_input()) {
          auto x = raw_vector(v, node);
          rec.raw.assign(x.begin(), x.end());
        } else {
          rec.children.push_back(eval(node.inputs[0], v));
        }
        break;
      case NodeKind::TensorMFL:
        expect_kind(v, Value::Kind::Tensor, node);
        if (v.shape() != node.shape) throw ValueError("TensorMFL: value shape mismatch");
        rec.raw.assign(v.data().begin(), v.data().end());
        rec.raw_shape = v.shape();
        break;
      case NodeKind::ProductInteraction: {
        expect_kind(v, Value::Kind::Tuple, node);
        if (v.items().size() != node.inputs.size()) {
          throw ValueError("ProductInteraction: tuple has " + std::to_string(v.items().size()) +
                           " fields, expected " + std::to_string(node.inputs.size()));
        }
        for (std::size_t r = 0; r < node.inputs.size(); ++r) {
          rec.children.push_back(eval(node.inputs[r], v.items()[r]));
        }
        break;
      }
      case NodeKind::SumDispatch:
        rec.tag = tag_of(v, node, node.inputs.size());
        rec.children.push_back(eval(node.inputs[rec.tag - 1], v.payload()));
        break;
      case NodeKind::MultisetPool:
        expect_kind(v, Value::Kind::Bag, node);
        if (node.raw_input()) {
          for (const auto& item : v.items()) {
            auto x = raw_vector(item, node);
            rec.raw.insert(rec.raw.end(), x.begin(), x.end());
          }
          rec.count = v.items().size();
        } else {
          for (const auto& item : v.items()) rec.children.push_back(eval(node.inputs[0], item));
        }
        break;
      case NodeKind::RecurrentCell:
      case NodeKind::Activation:
        rec.children.push_back(eval(node.inputs.at(0), v));
        break;
      case NodeKind::SelfPort:
        rec.children.push_back(eval(node.target, v));
        break;
    }
    std::vector<const Yector*> kids;
    for (std::size_t c : rec.children) kids.push_back(&tape_.records[c].output);
    rec.output = run_node(node, p_.node(id), rec, kids,
                          node.kind == NodeKind::TensorMFL ? &rec.partials : nullptr);
    tape_.records.push_back(std::move(rec));
    return tape_.records.size() - 1;
  }

 private:
  static std::size_t tag_of(const Value& v, const Node& node, std::size_t cases) {
    expect_kind(v, Value::Kind::Tagged, node);
    if (v.tag() < 1 || v.tag() > cases) {
      throw ValueError("tag " + std::to_string(v.tag()) + " out of range for " +
                       std::to_string(cases) + " alternatives");
    }
    return v.tag();
  }

  const EncoderGraph& g_;
  const ParamStore& p_;
  Tape& tape_;
};

}  // namespace

Evaluation forward(const EncoderGraph& g, const ParamStore& params, const Value& v) {
  if (params.node_count() != g.size()) throw ShapeError("parameters do not match the graph");
  Evaluation e;
  Evaluator(g, params, e.tape).eval(g.output(), v);
  e.output = e.tape.output();
  return e;
}

Yector evaluate(const EncoderGraph& g, const ParamStore& params, const Value& v) {
  return forward(g, params, v).output;
}

Yector replay(const EncoderGraph& g, const ParamStore& params, const Tape& tape) {
  std::vector<Yector> out(tape.records.size());
  for (std::size_t i = 0; i < tape.records.size(); ++i) {
    const TapeRecord& rec = tape.records[i];
    std::vector<const Yector*> kids;
    for (std::size_t c : rec.children) kids.push_back(&out.at(c));
    std::vector<Yector> partials;
    out[i] = run_node(g.node(rec.node), params.node(rec.node), rec, kids, &partials);
  }
  return out.back();
}

// ---------------------------------------------------------------------------
// Backward

ParamStore backward(const EncoderGraph& g, const ParamStore& params, const Tape& tape,
                    const Yector& cotangent) {
  if (tape.records.empty()) throw ShapeError("empty tape");
  if (cotangent.dim() != tape.output().dim()) {
    throw ShapeError("cotangent has dimension " + std::to_string(cotangent.dim()) +
                     ", output has " + std::to_string(tape.output().dim()));
  }
  ParamStore grads = ParamStore::zeros(g);
  std::vector<std::vector<double>> cot(tape.records.size());
  cot.back() = cotangent.values();

  for (std::size_t i = tape.records.size(); i-- > 0;) {
    const TapeRecord& rec = tape.records[i];
    const Node& node = g.node(rec.node);
    std::span<const DenseTensor> w = params.node(rec.node);
    std::vector<DenseTensor>& gw = grads.node(rec.node);
    std::vector<double>& c = cot[i];
    if (c.empty()) c.assign(node.out_dim, 0.0);

    auto child_cot = [&](std::size_t k) -> std::vector<double>& {
      auto& v = cot[rec.children[k]];
      if (v.empty()) v.assign(g.node(tape.records[rec.children[k]].node).out_dim, 0.0);
      return v;
    };
    auto child_out = [&](std::size_t k) -> std::span<const double> {
      return tape.records[rec.children[k]].output.data();
    };

    switch (node.kind) {
      case NodeKind::Embedding:
        axpy(gw[0].data(), c);
        break;
      case NodeKind::EnumTable:
        axpy(gw[rec.tag - 1].data(), c);
        break;
      case NodeKind::Dense: {
        std::span<const double> x = node.raw_input() ? std::span<const double>(rec.raw) : child_out(0);
        outer_add(gw[0], c, x);
        axpy(gw[1].data(), c);
        if (!node.raw_input()) matvec_t_add(w[0], c, child_cot(0));
        break;
      }
      case NodeKind::TensorMFL: {
        axpy(gw[0].data(), c);
        const std::size_t order = node.shape.size();
        for (std::size_t r = 0; r < order; ++r) outer_add(gw[1 + r], c, rec.partials[r].data());
        if (order >= 2) {
          DenseTensor n(rec.raw_shape, rec.raw);
          std::vector<std::vector<double>> a(order);
          for (std::size_t r = 0; r < order; ++r) {
            a[r].assign(node.shape[r], 0.0);
            matvec_t_add(w[1 + r], c, a[r]);
          }
          for (std::size_t s = 0; s < order; ++s) {
            auto dst = gw[1 + order + s].data();
            for (std::size_t r = 0; r < order; ++r) {
              if (r == s) continue;
              std::vector<std::span<const double>> vecs;
              for (std::size_t t = 0; t < order; ++t) {
                vecs.push_back(t == r ? std::span<const double>(a[r]) : w[1 + order + t].data());
              }
              auto part = contract_vectors(n, vecs, s);
              axpy(dst, part);
            }
          }
        }
        break;
      }
      case NodeKind::ProductInteraction: {
        axpy(gw[0].data(), c);
        for (std::size_t s = 0; s < node.subsets.size(); ++s) {
          const auto& subset = node.subsets[s];
          if (subset.size() == 1) {
            outer_add(gw[1 + s], c, child_out(subset[0]));
            matvec_t_add(w[1 + s], c, child_cot(subset[0]));
            continue;
          }
          const DenseTensor& cw = w[1 + s];
          Shape inner(cw.shape().begin() + 1, cw.shape().end());
          const std::size_t block = element_count(inner);
          if (block == 0) continue;
          std::vector<std::span<const double>> vs;
          for (std::size_t m : subset) vs.push_back(child_out(m));
          // Contract the weight with the cotangent over the output axis.
          std::vector<double> t(block, 0.0);
          auto d = cw.data();
          for (std::size_t k = 0; k < node.out_dim; ++k) {
            for (std::size_t j = 0; j < block; ++j) t[j] += c[k] * d[k * block + j];
          }
          auto gd = gw[1 + s].data();
          std::vector<std::vector<double>*> gv;
          for (std::size_t m : subset) gv.push_back(&child_cot(m));
          std::vector<std::size_t> idx(inner.size(), 0);
          std::size_t flat = 0;
          do {
            double p = 1.0;
            for (std::size_t m = 0; m < subset.size(); ++m) p *= vs[m][idx[m]];
            for (std::size_t k = 0; k < node.out_dim; ++k) gd[k * block + flat] += c[k] * p;
            for (std::size_t m = 0; m < subset.size(); ++m) {
              double q = t[flat];
              for (std::size_t m2 = 0; m2 < subset.size(); ++m2) {
                if (m2 != m) q *= vs[m2][idx[m2]];
              }
              (*gv[m])[idx[m]] += q;
            }
            ++flat;
          } while (next_index(idx, inner));
        }
        break;
      }
      case NodeKind::MultisetPool: {
        const std::size_t n = node.raw_input() ? rec.count : rec.children.size();
        if (n == 0) {
          if (node.normalized) axpy(gw[1].data(), c);
          break;
        }
        const double scale = node.normalized ? 1.0 / static_cast<double>(n) : 1.0;
        axpy(gw[1].data(), c, node.normalized ? 1.0 : static_cast<double>(n));
        for (std::size_t r = 0; r < n; ++r) {
          std::span<const double> x =
              node.raw_input() ? std::span<const double>(rec.raw).subspan(r * node.in_dim, node.in_dim)
                               : child_out(r);
          outer_add(gw[0], c, x, scale);
          if (!node.raw_input()) matvec_t_add(w[0], c, child_cot(r), scale);
        }
        break;
      }
      case NodeKind::SumDispatch:
      case NodeKind::RecurrentCell:
      case NodeKind::SelfPort:
        axpy(child_cot(0), c);
        break;
      case NodeKind::Activation: {
        auto x = child_out(0);
        auto& dst = child_cot(0);
        for (std::size_t k = 0; k < c.size(); ++k) {
          dst[k] += c[k] * activate_grad(node.activation, x[k], rec.output[k]);
        }
        break;
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(const EncoderGraph& g, const ParamStore& params,
                           std::span<const Value> values, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ValueError("epsilon must lie in [1e-7, 1e-3]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Yector> probes;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Yector c(g.out_dim());
    for (double& x : c.data()) x = normal(rng);
    probes.push_back(std::move(c));
  }

  auto loss = [&](const ParamStore& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      total += yector_dot(probes[i], evaluate(g, p, values[i]));
    }
    return total;
  };

  ParamStore analytic = ParamStore::zeros(g);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto e = forward(g, params, values[i]);
    analytic.axpy(1.0, backward(g, params, e.tape, probes[i]));
  }

  GradCheckReport report;
  ParamStore probe = params;
  for (NodeId id = 0; id < g.size(); ++id) {
    const auto& decl = g.node(id).slots;
    for (std::size_t s = 0; s < decl.size(); ++s) {
      SlotCheck check{id, decl[s].name, 0.0, 0.0, 0.0};
      auto data = probe.node(id)[s].data();
      auto grad = analytic.node(id)[s].data();
      for (std::size_t k = 0; k < data.size(); ++k) {
        const double orig = data[k];
        data[k] = orig + epsilon;
        const double up = loss(probe);
        data[k] = orig - epsilon;
        const double down = loss(probe);
        data[k] = orig;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = grad[k];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
        if (err > check.max_error || k == 0) {
          check.max_error = std::max(check.max_error, err);
          check.analytic = a;
          check.numeric = numeric;
        }
      }
      report.slots.push_back(check);
      if (check.max_error >= report.max_error) {
        if (check.max_error > report.max_error || report.slots.size() == 1) {
          report.worst = report.slots.size() - 1;
        }
        report.max_error = check.max_error;
      }
    }
  }
  return report;
}

}  // namespace mfl
