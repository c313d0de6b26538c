#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "mfl/error.hpp"
#include "mfl/relations.hpp"
#include "mfl/runtime.hpp"
#include "support.hpp"

namespace mfl {
namespace {

using test::rel_dev;

Value random_rows(std::size_t rows, std::size_t l, std::mt19937_64& rng) {
  std::vector<Value> items;
  for (std::size_t i = 0; i < rows; ++i) items.push_back(Value::vector(test::normals(l, rng)));
  return Value::tuple(items);
}

Model randomized(Model m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  test::randomize(m.params, rng);
  return m;
}

TEST(Relations, ValueConverters) {
  const Value t = Value::tuple({Value::vector({1, 2}), Value::vector({3, 4}), Value::vector({5, 6})});
  const Value n = tuple_to_tensor(t);
  EXPECT_EQ(n.shape(), (Shape{3, 2}));
  EXPECT_EQ(std::vector<double>(n.data().begin(), n.data().end()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(tensor_to_bag(n), Value::bag(t.items()));
  EXPECT_EQ(tuple_to_bag(t), Value::bag(t.items()));
}

TEST(Relations, ProductFromTensorIsPointwiseEqual) {
  std::mt19937_64 rng(1);
  for (auto [lp, l] : {std::pair<std::size_t, std::size_t>{3, 4}, {1, 3}, {2, 2}}) {
    const Model tensor = randomized(tensor_side(lp, l, 5), 2 + lp);
    const Model prod = relate_product_to_tensor(tensor);
    for (int i = 0; i < 100; ++i) {
      const Value tup = random_rows(lp, l, rng);
      EXPECT_LE(rel_dev(evaluate(prod.graph, prod.params, tup),
                        evaluate(tensor.graph, tensor.params, tuple_to_tensor(tup))),
                1e-12);
    }
  }
}

// Field matrices of the constructed product layer.
std::vector<DenseTensor> field_matrices(const Model& prod) {
  const NodeId pi = test::find_kind(prod.graph, NodeKind::ProductInteraction);
  const auto& slots = prod.params.node(pi);
  return std::vector<DenseTensor>(slots.begin() + 1, slots.end());
}

TEST(Relations, ProductFromTensorWithOneMatrixZero) {
  Model tensor = randomized(tensor_side(3, 4, 5), 3);
  const NodeId t = test::find_kind(tensor.graph, NodeKind::TensorMFL);
  tensor.params.slot(tensor.graph, t, "L1") = DenseTensor({5, 3});
  const auto& l2 = tensor.params.slot(tensor.graph, t, "L2");
  const auto& w1 = tensor.params.slot(tensor.graph, t, "w1");
  const auto mats = field_matrices(relate_product_to_tensor(tensor));
  ASSERT_EQ(mats.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t e = 0; e < l2.size(); ++e) {
      EXPECT_LE(rel_dev(mats[i].values()[e], w1.values()[i] * l2.values()[e]), 1e-15);
    }
  }
}

TEST(Relations, ProductFromTensorSingleRowIsDensePlusRankOne) {
  const Model tensor = randomized(tensor_side(1, 4, 5), 4);
  const NodeId t = test::find_kind(tensor.graph, NodeKind::TensorMFL);
  const auto& l2 = tensor.params.slot(tensor.graph, t, "L2");
  const double w1 = tensor.params.slot(tensor.graph, t, "w1").values()[0];
  const auto mats = field_matrices(relate_product_to_tensor(tensor));
  ASSERT_EQ(mats.size(), 1u);
  Eigen::MatrixXd correction(5, 4);
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t j = 0; j < 4; ++j) correction(k, j) = mats[0].at({k, j}) - w1 * l2.at({k, j});
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(correction);
  lu.setThreshold(1e-8);
  EXPECT_EQ(lu.rank(), 1);
}

TEST(Relations, TensorFromMultisetIsPointwiseEqual) {
  std::mt19937_64 rng(5);
  for (std::size_t lp : {3, 1, 5}) {
    const Model mset = randomized(multiset_side(4, 5), 6 + lp);
    const Model tensor = relate_tensor_to_multiset(mset, lp);
    for (int i = 0; i < 100; ++i) {
      const Value n = tuple_to_tensor(random_rows(lp, 4, rng));
      EXPECT_LE(rel_dev(evaluate(tensor.graph, tensor.params, n),
                        evaluate(mset.graph, mset.params, tensor_to_bag(n))),
                1e-12);
    }
  }
}

TEST(Relations, TensorFromMultisetSingleRowIsAffine) {
  const Model mset = randomized(multiset_side(3, 2), 9);
  const Model tensor = relate_tensor_to_multiset(mset, 1);
  const NodeId p = test::find_kind(mset.graph, NodeKind::MultisetPool);
  const std::vector<double> v = {0.3, -1.2, 2.0};
  const auto expect = test::affine(mset.params.slot(mset.graph, p, "L"), mset.params.slot(mset.graph, p, "b"), v);
  EXPECT_LE(rel_dev(evaluate(tensor.graph, tensor.params, Value::tensor({1, 3}, v)).data(), expect), 1e-12);
}

TEST(Relations, TensorFromMultisetForgetsRowOrder) {
  std::mt19937_64 rng(10);
  const Model tensor = relate_tensor_to_multiset(randomized(multiset_side(4, 5), 11), 4);
  for (int i = 0; i < 20; ++i) {
    auto rows = random_rows(4, 4, rng).items();
    const Yector ref = evaluate(tensor.graph, tensor.params, tuple_to_tensor(Value::tuple(rows)));
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_LE(rel_dev(evaluate(tensor.graph, tensor.params, tuple_to_tensor(Value::tuple(rows))), ref), 1e-12);
  }
}

TEST(Relations, ProductFromMultisetIsPointwiseEqual) {
  std::mt19937_64 rng(12);
  for (std::size_t n : {2, 3}) {
    const Model mset = randomized(multiset_side(4, 5), 13 + n);
    const Model prod = relate_product_to_multiset(mset, n);
    for (int i = 0; i < 100; ++i) {
      const Value tup = random_rows(n, 4, rng);
      EXPECT_LE(rel_dev(evaluate(prod.graph, prod.params, tup),
                        evaluate(mset.graph, mset.params, tuple_to_bag(tup))),
                1e-12);
    }
  }
}

TEST(Relations, TiedWeightsAreSwapSymmetricUntiedAreNot) {
  std::mt19937_64 rng(16);
  Model prod = relate_product_to_multiset(randomized(multiset_side(3, 4), 17), 2);
  const Value tup = random_rows(2, 3, rng);
  const Value swapped = Value::tuple({tup.items()[1], tup.items()[0]});
  EXPECT_LE(rel_dev(evaluate(prod.graph, prod.params, tup), evaluate(prod.graph, prod.params, swapped)), 1e-12);
  const NodeId pi = test::find_kind(prod.graph, NodeKind::ProductInteraction);
  for (double& x : prod.params.slot(prod.graph, pi, "L2").data()) x += 0.5;
  EXPECT_GT(rel_dev(evaluate(prod.graph, prod.params, tup), evaluate(prod.graph, prod.params, swapped)), 1e-6);
}

TEST(Relations, SuiteReportsAllCases) {
  for (auto which : {RelationCase::ProductTensor, RelationCase::TensorMultiset, RelationCase::ProductMultiset}) {
    const RelationReport r = run_relation(which, 7);
    EXPECT_EQ(r.trials, 100u);
    EXPECT_LE(r.max_deviation, 1e-12) << relation_case_name(which);
    EXPECT_TRUE(r.witness_ok) << r.witness;
    EXPECT_EQ(parse_relation_case(relation_case_name(which)), which);
  }
  EXPECT_THROW(parse_relation_case("tensor-product"), ValueError);
}

TEST(Relations, NormalizedPoolRejected) {
  Model m = multiset_side(2, 2);
  m.graph.node(test::find_kind(m.graph, NodeKind::MultisetPool)).normalized = true;
  EXPECT_THROW(relate_product_to_multiset(m, 2), ShapeError);
  EXPECT_THROW(relate_tensor_to_multiset(m, 2), ShapeError);
}

}  // namespace
}  // namespace mfl
