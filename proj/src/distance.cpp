#include "kvann/core/distance.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace kvann {

namespace {

using ConstVec = Eigen::Map<const Eigen::VectorXf>;

}  // namespace

Distance distance(std::span<const float> a, std::span<const float> b,
                  Metric metric) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kConfig, "distance: dimension mismatch (" +
                                        std::to_string(a.size()) + " vs " +
                                        std::to_string(b.size()) + ")");
  }
  ConstVec va(a.data(), static_cast<Eigen::Index>(a.size()));
  ConstVec vb(b.data(), static_cast<Eigen::Index>(b.size()));
  switch (metric) {
    case Metric::kEuclidean:
      return (va - vb).squaredNorm();
    case Metric::kInnerProduct:
      return -va.dot(vb);
    case Metric::kCosine: {
      const float na = va.norm();
      const float nb = vb.norm();
      if (na == 0.0f || nb == 0.0f) {
        throw Error(ErrorCode::kConfig, "cosine distance on zero vector");
      }
      return 1.0f - va.dot(vb) / (na * nb);
    }
  }
  throw Error(ErrorCode::kConfig, "unknown metric");
}

Distance user_distance(Distance d, Metric metric) {
  if (metric == Metric::kEuclidean) {
    return std::sqrt(std::max(0.0f, d));
  }
  return d;
}

bool has_non_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return true;
  }
  return false;
}

float l2_norm(std::span<const float> v) {
  return ConstVec(v.data(), static_cast<Eigen::Index>(v.size())).norm();
}

void l2_normalize(std::span<float> v) {
  const float n = l2_norm(v);
  if (n == 0.0f) {
    throw Error(ErrorCode::kConfig, "cannot normalize zero vector");
  }
  Eigen::Map<Eigen::VectorXf>(v.data(), static_cast<Eigen::Index>(v.size())) /=
      n;
}

}  // namespace kvann
