#pragma once

#include <functional>
#include <map>
#include <optional>

#include "kvann/core/types.hpp"

namespace kvann {

/// Full-precision record store, one record per live id. Plain container;
/// typed read counting happens in the provider layer.
class DocumentStore {
 public:
  /// Throws ErrorCode::kContract if the id is already live.
  void put(VectorRecord record);

  /// Replaces an existing record; throws ErrorCode::kNotFound otherwise.
  void overwrite(VectorRecord record);

  const VectorRecord* get(VectorId id) const;

  /// Throws ErrorCode::kNotFound for unknown ids.
  void erase(VectorId id);

  bool contains(VectorId id) const { return docs_.count(id) != 0; }
  std::size_t size() const { return docs_.size(); }

  /// Visits records in ascending id order; return false to stop.
  void for_each(const std::function<bool(const VectorRecord&)>& visit) const;

  void clear() { docs_.clear(); }

 private:
  std::map<VectorId, VectorRecord> docs_;
};

}  // namespace kvann
