#include <gtest/gtest.h>

#include "mfl/error.hpp"
#include "mfl/tensor.hpp"
#include "support.hpp"

namespace mfl {
namespace {

using test::rel_dev;

TEST(TensorProduct, OuterProductOfTwoVectors) {
  const auto t = tensor_product(DenseTensor::vector({1, 2}), DenseTensor::vector({3, 4}));
  EXPECT_EQ(t.shape(), (Shape{2, 2}));
  EXPECT_EQ(t.values(), (std::vector<double>{3, 4, 6, 8}));
}

TEST(TensorProduct, ScalarFactorRescales) {
  std::mt19937_64 rng(1);
  const auto t = test::random_tensor({2, 3}, rng);
  const auto s = tensor_product(DenseTensor(Shape{}, {2.0}), t);
  EXPECT_EQ(s.shape(), t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(s.values()[i], 2.0 * t.values()[i]);
}

TEST(TensorProduct, UnitFactorGivesEmptyTensor) {
  const auto t = tensor_product(DenseTensor::vector({1, 2}), DenseTensor(Shape{0}));
  EXPECT_EQ(t.shape(), (Shape{2, 0}));
  EXPECT_EQ(t.size(), 0u);
}

TEST(TensorProduct, AssociativeUpToShape) {
  std::mt19937_64 rng(2);
  const auto p = test::random_tensor({2}, rng);
  const auto q = test::random_tensor({3, 2}, rng);
  const auto r = test::random_tensor({2}, rng);
  const auto a = tensor_product(tensor_product(p, q), r);
  const auto b = tensor_product(p, tensor_product(q, r));
  EXPECT_EQ(a.shape(), b.shape());
  EXPECT_LE(test::rel_dev(a.values(), b.values()), 1e-15);
}

TEST(Contract, IdentityPairingTakesTrace) {
  const DenseTensor n({2, 2}, {1, 2, 3, 4});
  const auto t = contract(DenseTensor::identity(2), n, 0, 1);
  EXPECT_TRUE(t.shape().empty());
  EXPECT_EQ(t.values()[0], 5.0);
}

TEST(Contract, IdentityOnOuterProductIsDot) {
  std::mt19937_64 rng(3);
  const auto v = test::random_tensor({4}, rng);
  const auto w = test::random_tensor({4}, rng);
  const auto t = contract(DenseTensor::identity(4), tensor_product(v, w), 0, 1);
  double dot = 0.0;
  for (std::size_t i = 0; i < 4; ++i) dot += v.values()[i] * w.values()[i];
  EXPECT_LE(rel_dev(t.values()[0], dot), 1e-12);
}

TEST(Contract, MatchesTripleLoop) {
  std::mt19937_64 rng(4);
  const auto g = test::random_tensor({3, 3}, rng);
  const auto n = test::random_tensor({3, 3, 2}, rng);
  const auto t = contract(g, n, 0, 1);
  ASSERT_EQ(t.shape(), (Shape{2}));
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) s += g.at({a, b}) * n.at({a, b, c});
    }
    EXPECT_LE(rel_dev(t.values()[c], s), 1e-12);
  }
}

TEST(Contract, NonAdjacentAxesAndReversedPairing) {
  std::mt19937_64 rng(5);
  const auto g = test::random_tensor({2, 4}, rng);
  const auto n = test::random_tensor({4, 3, 2}, rng);
  const auto t = contract(g, n, 2, 0);
  ASSERT_EQ(t.shape(), (Shape{3}));
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 4; ++b) s += g.at({a, b}) * n.at({b, c, a});
    }
    EXPECT_LE(rel_dev(t.values()[c], s), 1e-12);
  }
}

TEST(Contract, AxisMismatchThrows) {
  const DenseTensor n({2, 3});
  EXPECT_THROW(contract(DenseTensor::identity(2), n, 0, 1), ShapeError);
  EXPECT_THROW(contract(DenseTensor::identity(2), n, 0, 0), ShapeError);
  EXPECT_THROW(contract(DenseTensor::identity(2), n, 0, 5), ShapeError);
}

TEST(Add, IdentityInverseCommutative) {
  std::mt19937_64 rng(6);
  const auto p = test::random_tensor({2, 3}, rng);
  const auto q = test::random_tensor({2, 3}, rng);
  EXPECT_EQ(add(p, DenseTensor({2, 3})), p);
  std::vector<double> neg(p.values());
  for (double& x : neg) x = -x;
  const DenseTensor zero = add(p, DenseTensor({2, 3}, neg));
  for (double x : zero.values()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(add(p, q), add(q, p));
  EXPECT_THROW(add(p, DenseTensor({3, 2})), ShapeError);
}

TEST(BiasAugment, Vector) {
  const auto t = bias_augment(DenseTensor::vector({5, 7}));
  EXPECT_EQ(t.values(), (std::vector<double>{1, 5, 7}));
}

TEST(BiasAugment, OneByOne) {
  const auto t = bias_augment(DenseTensor({1, 1}, {9}));
  EXPECT_EQ(t.shape(), (Shape{2, 2}));
  EXPECT_EQ(t.values(), (std::vector<double>{1, 1, 1, 9}));
}

TEST(BiasAugment, InteriorAndHyperplanes) {
  std::mt19937_64 rng(7);
  const auto n = test::random_tensor({2, 3, 2}, rng);
  const auto a = bias_augment(n);
  ASSERT_EQ(a.shape(), (Shape{3, 4, 3}));
  test::for_each_index(a.shape(), [&](const Shape& i) {
    const bool edge = i[0] == 0 || i[1] == 0 || i[2] == 0;
    if (edge) {
      EXPECT_EQ(a.at(i), 1.0);
    } else {
      EXPECT_EQ(a.at(i), n.at({i[0] - 1, i[1] - 1, i[2] - 1}));
    }
  });
}

TEST(Yector, MapDotAdd) {
  const Yector v{1, 2};
  EXPECT_EQ(yector_map([](double x) { return x; }, v), v);
  EXPECT_EQ(yector_dot(v, Yector{3, 4}), 11.0);
  EXPECT_EQ(yector_dot(Yector{4, -1, 6}, Yector{0, 1, 0}), -1.0);
  EXPECT_EQ(yector_add(v, Yector{3, 4}), (Yector{4, 6}));
  EXPECT_THROW(yector_dot(v, Yector{1}), ShapeError);
  EXPECT_THROW(yector_add(v, Yector{1}), ShapeError);
}

TEST(DenseTensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(DenseTensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_EQ(element_count({}), 1u);
  EXPECT_EQ(element_count({3, 0, 2}), 0u);
  EXPECT_EQ(row_major_strides({2, 3, 4}), (Shape{12, 4, 1}));
}

}  // namespace
}  // namespace mfl
