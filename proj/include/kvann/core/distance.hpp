#pragma once

#include <span>

#include "kvann/core/types.hpp"

namespace kvann {

/// Distance between two embeddings of the same dimension.
///
/// euclidean      -> squared L2 (monotone equivalent of the true distance)
/// inner_product  -> negated dot product
/// cosine         -> 1 - cos(a, b)
///
/// Throws ErrorCode::kConfig on dimension mismatch.
Distance distance(std::span<const float> a, std::span<const float> b,
                  Metric metric);

/// Converts an internal distance to the user-visible one: sqrt for
/// euclidean, identity otherwise.
Distance user_distance(Distance d, Metric metric);

/// True if any coordinate is NaN or infinite. Such vectors are rejected
/// at ingest; a poisoned distance corrupts the graph silently.
bool has_non_finite(std::span<const float> v);

float l2_norm(std::span<const float> v);

/// In-place L2 normalization; throws ErrorCode::kConfig on a zero vector.
void l2_normalize(std::span<float> v);

}  // namespace kvann
