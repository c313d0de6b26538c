#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mfl/graph.hpp"
#include "mfl/tensor.hpp"

namespace mfl {

// Bias-augmented (purely multilinear) forms of the flattening layers and
// their collapse to the explicit-bias slots the runtime evaluates.

/// Prepends a constant 1 to v.
std::vector<double> augment_vector(std::span<const double> v);

/// [out, in+1] matrix whose column 0 is the bias.
DenseTensor augment_affine(const DenseTensor& l, const DenseTensor& b);
/// Inverse of augment_affine: (L, b).
std::pair<DenseTensor, DenseTensor> collapse_affine(const DenseTensor& l_aug);
/// y = L' v' with v' the bias-augmented input.
Yector linear_forward(const DenseTensor& l_aug, std::span<const double> v);
/// y = sum_r L' v'_r; the unnormalised pool in linear form.
Yector linear_pool_forward(const DenseTensor& l_aug, std::span<const Yector> vs);

/// Weights of the tensor layer over the bias-augmented input: l[r] has shape
/// [out, l_r + 1]; w[r] has shape [l_r + 1] and is absent for one axis.
struct AugmentedTensorForm {
  std::vector<DenseTensor> l;
  std::vector<DenseTensor> w;
};

/// Direct sum over every index of bias_augment(n).
Yector augmented_tensor_forward(const AugmentedTensorForm& form, const DenseTensor& n);

/// Explicit-bias slots (b, L1..Ln, w1..wn): the bias collects every term that
/// touches a bias index, computed as the full sum minus the interior sum.
std::vector<DenseTensor> collapse_tensor_form(const AugmentedTensorForm& form);

/// The single coefficient tensor M [out, l_1+1, ..., l_n+1] of a product
/// node: M at all-zero field indices is b, one nonzero field gives L, several
/// give the interaction tensor of that field subset (zero past max_order).
DenseTensor assemble_product_tensor(const Node& node, std::span<const DenseTensor> slots);

/// Inverse renaming: reads the node's slots back out of M. Entries for
/// subsets the node truncates are dropped.
std::vector<DenseTensor> collapse_product_tensor(const Node& node, const DenseTensor& m);

/// y_k = sum over augmented indices of M[k, i_1..i_n] v'_1[i_1] ... v'_n[i_n].
Yector multilinear_forward(const DenseTensor& m, std::span<const Yector> vs);

}  // namespace mfl
