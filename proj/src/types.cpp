#include "kvann/core/types.hpp"

#include <cmath>

namespace kvann {

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kEuclidean:
      return "euclidean";
    case Metric::kInnerProduct:
      return "inner_product";
    case Metric::kCosine:
      return "cosine";
  }
  return "unknown";
}

Metric metric_from_name(const std::string& name) {
  if (name == "euclidean") return Metric::kEuclidean;
  if (name == "inner_product") return Metric::kInnerProduct;
  if (name == "cosine") return Metric::kCosine;
  throw Error(ErrorCode::kConfig, "unknown metric: " + name);
}

std::uint32_t IndexConfig::max_degree() const {
  return static_cast<std::uint32_t>(
      std::ceil(degree_slack * static_cast<double>(degree_bound)));
}

void IndexConfig::validate() const {
  if (dimension == 0) {
    throw Error(ErrorCode::kConfig, "dimension must be positive");
  }
  if (degree_bound == 0) {
    throw Error(ErrorCode::kConfig, "degree_bound must be positive");
  }
  if (build_list_size < degree_bound) {
    throw Error(ErrorCode::kConfig, "build_list_size must be >= degree_bound");
  }
  if (alpha < 1.0f) {
    throw Error(ErrorCode::kConfig, "alpha must be >= 1.0");
  }
  if (degree_slack < 1.0f) {
    throw Error(ErrorCode::kConfig, "degree_slack must be >= 1.0");
  }
  if (minibatch_max == 0) {
    throw Error(ErrorCode::kConfig, "minibatch_max must be positive");
  }
  if (replace_closest == 0) {
    throw Error(ErrorCode::kConfig, "replace_closest must be positive");
  }
}

}  // namespace kvann
