#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kvann/core/types.hpp"

namespace kvann {

inline constexpr std::uint32_t kPqCentroidsPerSubspace = 256;

/// Row-major sample matrix, one embedding per row.
using SampleMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Versioned product-quantization codebooks. Immutable after training.
struct PqSchema {
  std::uint32_t version = 0;
  std::uint32_t num_subspaces = 0;  // m; encoded size in bytes
  std::vector<std::uint32_t> subspace_dims;
  /// One codebook per subspace: 256 x subspace_dim, row per centroid.
  std::vector<SampleMatrix> codebooks;
  std::optional<std::uint32_t> parent_version;

  std::uint32_t dimension() const;
  /// Offset of subspace s within a full embedding.
  std::uint32_t subspace_offset(std::uint32_t s) const;

  std::string serialize() const;
  static PqSchema deserialize(std::string_view blob);
};

struct QuantizedVector {
  std::vector<std::uint8_t> codes;  // length m
  std::uint32_t schema_version = 0;
};

/// Precomputed query-to-centroid partial distances; asymmetric distance of
/// any code is the sum of m table lookups.
struct QueryDistanceTable {
  std::uint32_t schema_version = 0;
  Metric metric = Metric::kEuclidean;
  std::uint32_t num_subspaces = 0;
  std::vector<float> partials;  // m * 256, subspace-major
  float bias = 0.0f;            // added once (cosine constant term)
  /// Cosine only: per-centroid squared norms, so the reconstruction norm is
  /// itself a sum of m lookups.
  std::vector<float> sq_norms;
};

/// Default subspace count for a dimension: max(D/12, 8) rounded to the
/// nearest power of two, capped at D. Sized so one schema serves both
/// navigation and pruning.
std::uint32_t default_num_subspaces(std::uint32_t dimension);

struct PqTrainParams {
  std::uint32_t num_subspaces = 0;
  std::uint32_t version = 1;
  std::uint32_t kmeans_iters = 25;
  std::uint64_t seed = 0x5eed;
};

/// Lloyd k-means with k-means++ seeding; empty clusters are re-seeded from
/// the point farthest from its assigned centroid. Also used by the harness
/// for clustered runbooks.
struct KmeansResult {
  SampleMatrix centroids;                // k x dim
  std::vector<std::uint32_t> assignment;  // per input row
};
KmeansResult kmeans(const Eigen::Ref<const SampleMatrix>& points,
                    std::uint32_t k, std::uint32_t iters, std::uint64_t seed,
                    const SampleMatrix* warm_start = nullptr);

/// Trains a schema over the sample (one k-means per subspace slice).
/// warm_start, when given, must share num_subspaces and subspace_dims; its
/// centroids seed the iteration and its version is recorded as parent.
/// Throws ErrorCode::kDegenerateTraining when the sample has fewer than 256
/// rows (callers fall back to a flat scan).
PqSchema train_schema(const Eigen::Ref<const SampleMatrix>& sample,
                      const PqTrainParams& params,
                      const PqSchema* warm_start = nullptr);

/// Per subspace, the index of the nearest centroid (ties to the lower index).
QuantizedVector encode(std::span<const float> v, const PqSchema& schema);

/// Batch encode, one row per vector. Much faster than repeated encode().
std::vector<QuantizedVector> encode_batch(
    const Eigen::Ref<const SampleMatrix>& rows, const PqSchema& schema);

/// Reconstruction: concatenated centroid rows selected by the codes.
std::vector<float> decode(const QuantizedVector& x, const PqSchema& schema);

QueryDistanceTable build_query_table(std::span<const float> q,
                                     const PqSchema& schema, Metric metric);

/// Table-lookup asymmetric distance; code must carry the table's version.
Distance asymmetric_distance(const QueryDistanceTable& table,
                             const QuantizedVector& x);

/// Owns every schema version seen by one logical index; the highest version
/// is active. Immutable schemas, so concurrent readers are safe.
class SchemaRegistry {
 public:
  void add(PqSchema schema);
  bool empty() const { return schemas_.empty(); }
  const PqSchema* find(std::uint32_t version) const;
  const PqSchema& active() const;
  /// Parent/child in either direction counts as related.
  bool related(std::uint32_t a, std::uint32_t b) const;
  std::vector<std::uint32_t> versions() const;

 private:
  std::map<std::uint32_t, PqSchema> schemas_;
};

/// Per-query scorer over quantized codes. Codes under the active schema use
/// the lookup table; codes under a related older/newer schema are decoded
/// with their own codebooks and scored exactly (cross-schema distance).
/// Unknown or unrelated versions throw ErrorCode::kStaleSchema.
class QuantScorer {
 public:
  QuantScorer(const SchemaRegistry& registry, Metric metric,
              std::span<const float> query);

  Distance operator()(const QuantizedVector& x) const;
  Metric metric() const { return metric_; }
  std::span<const float> query() const { return query_; }

 private:
  const SchemaRegistry& registry_;
  Metric metric_;
  std::span<const float> query_;
  QueryDistanceTable table_;
};

/// Cross-schema distance: decodes x with its own (related) schema and
/// computes the exact distance to q. Standalone form of the scorer fallback.
Distance cross_schema_distance(std::span<const float> q,
                               const QuantizedVector& x,
                               const SchemaRegistry& registry, Metric metric);

}  // namespace kvann
