#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kvann {

/// 8-byte unsigned document id. Unique within a partition; never reused
/// after deletion within one runbook execution.
using VectorId = std::uint64_t;

/// Metric-dependent distance value: squared L2, negated inner product,
/// or cosine distance.
using Distance = float;

enum class Metric {
  kEuclidean,
  kInnerProduct,
  kCosine,
};

const char* metric_name(Metric m);
Metric metric_from_name(const std::string& name);

enum class ErrorCode {
  kConfig,
  kContract,
  kNotFound,
  kStaleSchema,
  kDegenerateTraining,
  kParse,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// One indexed document: id, full-precision embedding, optional shard key
/// and optional label bitmap used by filtered queries.
struct VectorRecord {
  VectorId id = 0;
  std::vector<float> embedding;
  std::optional<std::string> shard_key;
  std::optional<std::uint64_t> labels;
};

struct IndexConfig {
  std::uint32_t dimension = 0;
  Metric metric = Metric::kEuclidean;
  std::uint32_t degree_bound = 32;      // R
  std::uint32_t build_list_size = 100;  // L used during construction
  float alpha = 1.2f;
  float degree_slack = 1.3f;            // out-degree may reach ceil(slack*R)
  std::uint32_t minibatch_max = 100;
  std::uint32_t replace_closest = 3;    // c, in-place delete splice width

  /// Hard out-degree cap: ceil(degree_slack * degree_bound).
  std::uint32_t max_degree() const;

  /// Throws ErrorCode::kConfig on violated invariants
  /// (L_build >= R, alpha >= 1, degree_slack >= 1, dimension > 0).
  void validate() const;
};

}  // namespace kvann
