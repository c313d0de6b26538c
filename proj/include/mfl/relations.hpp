#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mfl/params.hpp"
#include "mfl/value.hpp"

namespace mfl {

// Constrained-weight constructions exhibiting one flattening layer as a
// special case of another, for Prod[Vector[l] x l'] <: Tensor[l', l] <:
// MSet[Vector[l]].

/// Tensor layer for Tensor[l', l] with zero parameters.
Model tensor_side(std::size_t l_prime, std::size_t l, std::size_t out);
/// Order-1 product layer over n fields of Vector[l]; the per-field Dense
/// children are the identity.
Model product_side(std::size_t n, std::size_t l, std::size_t out);
/// Raw pool over MSet[Vector[l]] with zero parameters.
Model multiset_side(std::size_t l, std::size_t out);

/// Product layer with per-field matrices w1[i] L2 + L1[:, i] w2^T, equal to
/// the tensor layer once the tuple is stacked into rows.
Model relate_product_to_tensor(const Model& tensor);

/// Tensor layer with b = l' b', L1 = 0, w1 = 1, L2 = L, w2 = 0, equal to the
/// pool once the tensor's rows are read as a bag.
Model relate_tensor_to_multiset(const Model& mset, std::size_t l_prime);

/// Tied order-1 product layer with b = n b' and every field matrix L.
Model relate_product_to_multiset(const Model& mset, std::size_t n);

/// (v_1, ..., v_l') -> N with rows v_i.
Value tuple_to_tensor(const Value& tuple);
/// Rows of an order-2 tensor as a bag.
Value tensor_to_bag(const Value& tensor);
/// Fields of a tuple as a bag.
Value tuple_to_bag(const Value& tuple);

enum class RelationCase { ProductTensor, TensorMultiset, ProductMultiset };

RelationCase parse_relation_case(std::string_view name);
std::string_view relation_case_name(RelationCase c);

struct RelationReport {
  RelationCase which = RelationCase::ProductTensor;
  std::size_t trials = 0;
  /// Largest relative deviation between the two sides over all trials.
  double max_deviation = 0.0;
  /// Case-specific structural check (see run_relation).
  bool witness_ok = false;
  std::string witness;
};

/// Draws random source parameters and inputs, builds the constrained side,
/// and compares both on `trials` inputs. Witnesses:
///  product-tensor: with L1 = 0 every field matrix is w1[i] times one matrix;
///  tensor-multiset: permuting the tensor's rows leaves the output unchanged;
///  product-multiset: swapping fields leaves the tied layer unchanged and
///  changes an untied one.
RelationReport run_relation(RelationCase which, std::uint64_t seed, std::size_t trials = 100,
                            std::size_t l_prime = 3, std::size_t l = 4, std::size_t out = 5);

/// |a - b| / max(|a|, |b|, 1), maximised over components.
double max_relative_deviation(const Yector& a, const Yector& b);

}  // namespace mfl
