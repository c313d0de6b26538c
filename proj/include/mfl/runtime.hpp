#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfl/graph.hpp"
#include "mfl/params.hpp"
#include "mfl/tensor.hpp"
#include "mfl/value.hpp"

namespace mfl {

// ---------------------------------------------------------------------------
// Layer kernels. `slots` holds the node's arrays in declaration order.

Yector embedding_forward(const Node& node, std::span<const DenseTensor> slots);
Yector dense_forward(const Node& node, std::span<const DenseTensor> slots,
                     std::span<const double> x);

/// Axis-factored tensor layer. When partials is given it receives, per axis r,
/// the contraction of the input with every weight vector except w^(r).
Yector tensor_mfl_forward(const Node& node, std::span<const DenseTensor> slots,
                          const DenseTensor& n, std::vector<Yector>* partials = nullptr);

/// Truncated product interaction over the field yectors.
Yector product_mfl_forward(const Node& node, std::span<const DenseTensor> slots,
                           std::span<const Yector> ys);

/// Pooling over element encodings; the element count is ys.size().
Yector multiset_pool_forward(const Node& node, std::span<const DenseTensor> slots,
                             std::span<const Yector> ys);

/// Case embedding selected by a 1-based tag.
Yector enum_table_forward(const Node& node, std::span<const DenseTensor> slots,
                          std::size_t tag);

double activate(ActivationFn fn, double x);

/// Contracts every axis of n except keep with the given vectors (vecs[keep]
/// is ignored), one axis at a time from the last.
std::vector<double> contract_vectors(const DenseTensor& n,
                                     const std::vector<std::span<const double>>& vecs,
                                     std::size_t keep);

// ---------------------------------------------------------------------------
// Graph evaluation.

/// One node invocation. Children are recorded before their parents, so the
/// record list is a topological order of the unrolled computation.
struct TapeRecord {
  NodeId node = kNoNode;
  std::vector<std::size_t> children;  // record indices
  std::size_t tag = 0;                // SumDispatch and EnumTable case
  std::vector<double> raw;            // raw leaf input; bag elements concatenated
  std::size_t count = 0;              // raw pool element count
  Shape raw_shape;                    // TensorMFL input shape
  std::vector<Yector> partials;       // TensorMFL per-axis contractions
  Yector output;
};

struct Tape {
  std::vector<TapeRecord> records;

  const Yector& output() const { return records.back().output; }
};

struct Evaluation {
  Yector output;
  Tape tape;
};

/// Evaluates g on v, unrolling recurrent cells over the value.
Evaluation forward(const EncoderGraph& g, const ParamStore& params, const Value& v);

/// Output only.
Yector evaluate(const EncoderGraph& g, const ParamStore& params, const Value& v);

/// Recomputes every record from the tape's cached inputs.
Yector replay(const EncoderGraph& g, const ParamStore& params, const Tape& tape);

/// Reverse-mode gradient of <cotangent, output> with respect to every slot.
ParamStore backward(const EncoderGraph& g, const ParamStore& params, const Tape& tape,
                    const Yector& cotangent);

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct SlotCheck {
  NodeId node = kNoNode;
  std::string slot;
  double max_error = 0.0;
  double analytic = 0.0;  // at the worst element
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<SlotCheck> slots;
  double max_error = 0.0;
  std::size_t worst = 0;  // index into slots

  const SlotCheck& worst_slot() const { return slots.at(worst); }
};

/// Compares backward against central differences of the probe loss
/// sum_v <c_v, f(v)>, with the c_v drawn from seed. The per-element error is
/// |a - n| / max(|a|, |n|, 1).
GradCheckReport grad_check(const EncoderGraph& g, const ParamStore& params,
                           std::span<const Value> values, double epsilon,
                           std::uint64_t seed = 1);

}  // namespace mfl
