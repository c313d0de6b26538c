#include "mfl/relations.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mfl/error.hpp"
#include "mfl/runtime.hpp"
#include "mfl/types.hpp"

namespace mfl {

namespace {

Model compile_model(const TypeExpr& t, const CompileOptions& opts) {
  SchemaEnv env;
  EncoderGraph g = compile(t, opts, env);
  ParamStore p = ParamStore::zeros(g);
  return {std::move(g), std::move(p)};
}

NodeId find_kind(const EncoderGraph& g, NodeKind kind) {
  for (NodeId id = 0; id < g.size(); ++id) {
    if (g.node(id).kind == kind) return id;
  }
  throw ShapeError("model has no " + std::string(kind_name(kind)) + " node");
}

void fill(DenseTensor& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : t.data()) x = u(rng);
}

Value random_vector(std::size_t l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(l);
  for (double& x : v) x = u(rng);
  return Value::vector(std::move(v));
}

Value random_tuple(std::size_t n, std::size_t l, std::mt19937_64& rng) {
  std::vector<Value> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back(random_vector(l, rng));
  return Value::tuple(std::move(items));
}

}  // namespace

double max_relative_deviation(const Yector& a, const Yector& b) {
  if (a.dim() != b.dim()) throw ShapeError("outputs differ in dimension");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = std::abs(a[k] - b[k]) / std::max({std::abs(a[k]), std::abs(b[k]), 1.0});
    worst = std::max(worst, d);
  }
  return worst;
}

Model tensor_side(std::size_t l_prime, std::size_t l, std::size_t out) {
  CompileOptions opts;
  opts.out_dim = out;
  return compile_model(TypeExpr::tensor({l_prime, l}), opts);
}

Model product_side(std::size_t n, std::size_t l, std::size_t out) {
  CompileOptions opts;
  opts.out_dim = out;
  opts.intermediate_width = l;
  opts.max_order = 1;
  opts.share_named_types = false;
  Model m = compile_model(TypeExpr::prod(std::vector<TypeExpr>(n, TypeExpr::vec(l))), opts);
  for (NodeId id = 0; id < m.graph.size(); ++id) {
    if (m.graph.node(id).kind == NodeKind::Dense) m.params.node(id)[0] = DenseTensor::identity(l);
  }
  return m;
}

Model multiset_side(std::size_t l, std::size_t out) {
  CompileOptions opts;
  opts.out_dim = out;
  return compile_model(TypeExpr::mset(TypeExpr::vec(l)), opts);
}

Model relate_product_to_tensor(const Model& tensor) {
  const NodeId tid = find_kind(tensor.graph, NodeKind::TensorMFL);
  const Node& tn = tensor.graph.node(tid);
  if (tn.shape.size() != 2) throw ShapeError("expected an order-2 tensor layer");
  const std::size_t l_prime = tn.shape[0], l = tn.shape[1], out = tn.out_dim;
  const auto& ts = tensor.params.node(tid);
  const DenseTensor &b = ts[0], &l1 = ts[1], &l2 = ts[2], &w1 = ts[3], &w2 = ts[4];

  Model prod = product_side(l_prime, l, out);
  const NodeId pid = find_kind(prod.graph, NodeKind::ProductInteraction);
  auto& ps = prod.params.node(pid);
  ps[0] = b;
  for (std::size_t i = 0; i < l_prime; ++i) {
    DenseTensor& li = ps[1 + i];
    for (std::size_t k = 0; k < out; ++k) {
      for (std::size_t j = 0; j < l; ++j) {
        li.at({k, j}) = l1.at({k, i}) * w2.at({j}) + w1.at({i}) * l2.at({k, j});
      }
    }
  }
  return prod;
}

Model relate_tensor_to_multiset(const Model& mset, std::size_t l_prime) {
  const NodeId mid = find_kind(mset.graph, NodeKind::MultisetPool);
  const Node& mn = mset.graph.node(mid);
  if (mn.normalized) throw ShapeError("the construction needs the unnormalised pool");
  const auto& ms = mset.params.node(mid);
  Model t = tensor_side(l_prime, mn.in_dim, mn.out_dim);
  const NodeId tid = find_kind(t.graph, NodeKind::TensorMFL);
  auto& ts = t.params.node(tid);
  ts[0] = ms[1];
  for (double& x : ts[0].data()) x *= static_cast<double>(l_prime);
  ts[1] = DenseTensor({mn.out_dim, l_prime});
  ts[2] = ms[0];
  ts[3] = DenseTensor(Shape{l_prime}, std::vector<double>(l_prime, 1.0));
  ts[4] = DenseTensor(Shape{mn.in_dim});
  return t;
}

Model relate_product_to_multiset(const Model& mset, std::size_t n) {
  const NodeId mid = find_kind(mset.graph, NodeKind::MultisetPool);
  const Node& mn = mset.graph.node(mid);
  if (mn.normalized) throw ShapeError("the construction needs the unnormalised pool");
  const auto& ms = mset.params.node(mid);
  Model prod = product_side(n, mn.in_dim, mn.out_dim);
  const NodeId pid = find_kind(prod.graph, NodeKind::ProductInteraction);
  auto& ps = prod.params.node(pid);
  ps[0] = ms[1];
  for (double& x : ps[0].data()) x *= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) ps[1 + r] = ms[0];
  return prod;
}

Value tuple_to_tensor(const Value& tuple) {
  if (tuple.kind() != Value::Kind::Tuple || tuple.items().empty()) {
    throw ValueError("expected a nonempty tuple of vectors");
  }
  const std::size_t l = tuple.items()[0].shape().at(0);
  std::vector<double> data;
  for (const auto& v : tuple.items()) {
    if (!v.is_tensor() || v.shape() != Shape{l}) throw ValueError("tuple fields must be equal-length vectors");
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  return Value::tensor({tuple.items().size(), l}, std::move(data));
}

Value tensor_to_bag(const Value& tensor) {
  if (!tensor.is_tensor() || tensor.shape().size() != 2) throw ValueError("expected an order-2 tensor");
  const std::size_t rows = tensor.shape()[0], cols = tensor.shape()[1];
  std::vector<Value> items;
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = tensor.data().subspan(i * cols, cols);
    items.push_back(Value::vector(std::vector<double>(row.begin(), row.end())));
  }
  return Value::bag(std::move(items));
}

Value tuple_to_bag(const Value& tuple) {
  if (tuple.kind() != Value::Kind::Tuple) throw ValueError("expected a tuple");
  return Value::bag(tuple.items());
}

RelationCase parse_relation_case(std::string_view name) {
  if (name == "product-tensor") return RelationCase::ProductTensor;
  if (name == "tensor-multiset") return RelationCase::TensorMultiset;
  if (name == "product-multiset") return RelationCase::ProductMultiset;
  throw ValueError("unknown relation case '" + std::string(name) + "'");
}

std::string_view relation_case_name(RelationCase c) {
  switch (c) {
    case RelationCase::ProductTensor: return "product-tensor";
    case RelationCase::TensorMultiset: return "tensor-multiset";
    case RelationCase::ProductMultiset: return "product-multiset";
  }
  return "?";
}

RelationReport run_relation(RelationCase which, std::uint64_t seed, std::size_t trials,
                            std::size_t l_prime, std::size_t l, std::size_t out) {
  std::mt19937_64 rng(seed);
  RelationReport report;
  report.which = which;
  report.trials = trials;

  switch (which) {
    case RelationCase::ProductTensor: {
      Model tensor = tensor_side(l_prime, l, out);
      const NodeId tid = find_kind(tensor.graph, NodeKind::TensorMFL);
      for (auto& t : tensor.params.node(tid)) fill(t, rng);
      Model prod = relate_product_to_tensor(tensor);
      for (std::size_t i = 0; i < trials; ++i) {
        Value x = random_tuple(l_prime, l, rng);
        report.max_deviation = std::max(
            report.max_deviation, max_relative_deviation(evaluate(prod.graph, prod.params, x),
                                                         evaluate(tensor.graph, tensor.params,
                                                                  tuple_to_tensor(x))));
      }
      // With L1 = 0 each field matrix is w1[i] L2.
      Model zeroed = tensor;
      zeroed.params.node(tid)[1] = DenseTensor({out, l_prime});
      Model p2 = relate_product_to_tensor(zeroed);
      const NodeId pid = find_kind(p2.graph, NodeKind::ProductInteraction);
      double worst = 0.0;
      const auto& l2 = zeroed.params.node(tid)[2];
      const auto& w1 = zeroed.params.node(tid)[3];
      for (std::size_t i = 0; i < l_prime; ++i) {
        const auto& li = p2.params.node(pid)[1 + i];
        for (std::size_t k = 0; k < li.size(); ++k) {
          worst = std::max(worst, std::abs(li.data()[k] - w1.data()[i] * l2.data()[k]));
        }
      }
      report.witness_ok = worst <= 1e-12;
      report.witness = "L1 = 0 leaves field matrices w1[i] * L2 (max deviation " +
                       std::to_string(worst) + ")";
      break;
    }
    case RelationCase::TensorMultiset: {
      Model mset = multiset_side(l, out);
      const NodeId mid = find_kind(mset.graph, NodeKind::MultisetPool);
      for (auto& t : mset.params.node(mid)) fill(t, rng);
      Model tensor = relate_tensor_to_multiset(mset, l_prime);
      double perm = 0.0;
      for (std::size_t i = 0; i < trials; ++i) {
        Value n = tuple_to_tensor(random_tuple(l_prime, l, rng));
        const Yector yt = evaluate(tensor.graph, tensor.params, n);
        report.max_deviation = std::max(
            report.max_deviation,
            max_relative_deviation(yt, evaluate(mset.graph, mset.params, tensor_to_bag(n))));
        // Row permutation of the tensor input.
        std::vector<Value> rows = tensor_to_bag(n).items();
        std::shuffle(rows.begin(), rows.end(), rng);
        const Value permuted = tuple_to_tensor(Value::tuple(rows));
        perm = std::max(perm, max_relative_deviation(yt, evaluate(tensor.graph, tensor.params, permuted)));
      }
      report.witness_ok = perm <= 1e-12;
      report.witness = "row permutations move the tensor output by " + std::to_string(perm);
      break;
    }
    case RelationCase::ProductMultiset: {
      Model mset = multiset_side(l, out);
      const NodeId mid = find_kind(mset.graph, NodeKind::MultisetPool);
      for (auto& t : mset.params.node(mid)) fill(t, rng);
      const std::size_t n = l_prime;
      Model prod = relate_product_to_multiset(mset, n);
      Model untied = prod;
      const NodeId pid = find_kind(untied.graph, NodeKind::ProductInteraction);
      fill(untied.params.node(pid)[1], rng);
      double swap_tied = 0.0, swap_untied = 0.0;
      for (std::size_t i = 0; i < trials; ++i) {
        Value x = random_tuple(n, l, rng);
        const Yector yp = evaluate(prod.graph, prod.params, x);
        report.max_deviation = std::max(
            report.max_deviation,
            max_relative_deviation(yp, evaluate(mset.graph, mset.params, tuple_to_bag(x))));
        std::vector<Value> items = x.items();
        std::swap(items[0], items[n - 1]);
        const Value swapped = Value::tuple(items);
        swap_tied = std::max(swap_tied,
                             max_relative_deviation(yp, evaluate(prod.graph, prod.params, swapped)));
        swap_untied = std::max(
            swap_untied, max_relative_deviation(evaluate(untied.graph, untied.params, x),
                                                evaluate(untied.graph, untied.params, swapped)));
      }
      report.witness_ok = n >= 2 && swap_tied <= 1e-12 && swap_untied > 1e-6;
      report.witness = "field swap moves the tied layer by " + std::to_string(swap_tied) +
                       " and the untied layer by " + std::to_string(swap_untied);
      break;
    }
  }
  return report;
}

}  // namespace mfl
