#pragma once

#include <utility>
#include <vector>

#include "mfl/graph.hpp"
#include "mfl/params.hpp"

namespace mfl {

/// Merges affine chains: a Dense whose only producer feeds nothing else is
/// folded into that producer when it is a Dense, an Embedding, or an
/// EnumTable (L' = L2 L1, b' = b2 + L2 b1), and is pushed into the branches
/// of a SumDispatch whose branches are all mergeable. Activations and
/// multilinear nodes stop a chain. The computed function is unchanged.
Model simplify(const EncoderGraph& g, const ParamStore& params);

/// share_weights carrying parameters along: each surviving node keeps the
/// arrays it had before (the kept copy's arrays for shared pairs).
Model share_weights(const Model& m, const std::vector<std::pair<NodeId, NodeId>>& pairs);

}  // namespace mfl
