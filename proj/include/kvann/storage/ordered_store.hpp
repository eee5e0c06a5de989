#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kvann/core/types.hpp"

namespace kvann {

/// A blind update to one key. Appends carry an 8-byte-aligned id array
/// (adjacency semantics); overwrites replace the whole value; deletes
/// remove the key.
struct Patch {
  enum class Kind { kAppend, kOverwrite, kDelete };

  Kind kind = Kind::kOverwrite;
  std::string bytes;

  static Patch append(std::string b) {
    return Patch{Kind::kAppend, std::move(b)};
  }
  static Patch overwrite(std::string b) {
    return Patch{Kind::kOverwrite, std::move(b)};
  }
  static Patch del() { return Patch{Kind::kDelete, {}}; }
};

/// Base value plus pending patches; replaying the patches over the base in
/// order yields the logical value.
struct DeltaChain {
  std::optional<std::string> base;
  std::vector<Patch> patches;

  std::size_t chain_length() const { return patches.size(); }
  std::optional<std::string> replay() const;
};

/// In-memory ordered key-value store with explicit delta chains: the
/// Bw-Tree contract the index algorithms depend on (blind patches, merge on
/// read, prefix seek, bounded chain length), without the disk mechanics.
///
/// Not internally synchronized; callers hold the storage engine's
/// read/write guards around logical operations.
class OrderedStore {
 public:
  explicit OrderedStore(std::size_t max_chain_length = 15)
      : max_chain_length_(max_chain_length) {}

  /// Appends one patch to the key's chain. Contract violations — an append
  /// duplicating an id already pending for the key, or a delete of a key
  /// with no logical value — throw ErrorCode::kContract before any state
  /// changes. Consolidates the chain when it exceeds the maximum length.
  void put_patch(std::string_view key, Patch patch);

  /// Applies a group of patches atomically: every patch is validated
  /// against the staged result of the ones before it, and either all apply
  /// or none do.
  void apply_batch(const std::vector<std::pair<std::string, Patch>>& batch);

  /// Logical value: base merged with pending patches. Read-only.
  std::optional<std::string> get(std::string_view key) const;

  bool contains(std::string_view key) const { return get(key).has_value(); }

  /// Visits (key, logical value) pairs whose key starts with prefix, in
  /// ascending key order. Return false from the visitor to stop early.
  void prefix_seek(
      std::string_view prefix,
      const std::function<bool(std::string_view, std::string_view)>& visit)
      const;

  /// Visits keys in [lo, hi] inclusive, ascending.
  void range_seek(
      std::string_view lo, std::string_view hi,
      const std::function<bool(std::string_view, std::string_view)>& visit)
      const;

  std::size_t count_prefix(std::string_view prefix) const;

  void consolidate(std::string_view key);
  void consolidate_all();

  std::size_t chain_length(std::string_view key) const;
  std::size_t key_count() const { return map_.size(); }
  std::size_t max_chain_length() const { return max_chain_length_; }

  void clear() { map_.clear(); }

 private:
  void check_patch(const DeltaChain* chain, const Patch& patch) const;
  void apply_unchecked(const std::string& key, Patch patch);
  static bool consolidate_chain(DeltaChain& chain);

  std::size_t max_chain_length_;
  std::map<std::string, DeltaChain, std::less<>> map_;
};

/// Ids pending in append patches since the last overwrite or delete;
/// the scope of the no-duplicate-append contract.
std::vector<std::uint64_t> pending_append_ids(const DeltaChain& chain);

}  // namespace kvann
