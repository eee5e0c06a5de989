#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "kvann/core/types.hpp"
#include "kvann/quantization/pq.hpp"
#include "kvann/storage/counters.hpp"
#include "kvann/storage/term_codec.hpp"

namespace kvann {

/// Result of a provider read: either the value itself or a deferred
/// completion handle. Callers must tolerate both; take() resolves either
/// way. The single-language analog of returning "the actual data or a
/// future".
template <class T>
class Fetch {
 public:
  static Fetch ready(T value) {
    Fetch f;
    f.state_.template emplace<1>(std::move(value));
    return f;
  }

  static Fetch deferred(std::function<T()> thunk) {
    Fetch f;
    f.state_.template emplace<2>(std::move(thunk));
    return f;
  }

  bool is_ready() const { return state_.index() == 1; }

  T take() && {
    if (state_.index() == 1) return std::get<1>(std::move(state_));
    return std::get<2>(state_)();
  }

 private:
  Fetch() = default;
  std::variant<std::monostate, T, std::function<T()>> state_;
};

/// Identifies the target logical index for each provider call; one provider
/// instantiation serves every logical index behind one store. Carries the
/// per-operation counter sink.
struct Context {
  PathPrefix path{};
  std::optional<ShardPrefix> shard;
  OpCounters* counters = nullptr;

  Context with_counters(OpCounters* c) const {
    Context ctx = *this;
    ctx.counters = c;
    return ctx;
  }
};

class QuantVectorProvider {
 public:
  virtual ~QuantVectorProvider() = default;

  virtual Fetch<std::optional<QuantizedVector>> get(const Context& ctx,
                                                    VectorId id) = 0;
  virtual void put(const Context& ctx, VectorId id,
                   const QuantizedVector& value) = 0;
  virtual void remove(const Context& ctx, VectorId id) = 0;
  /// Ascending id order; return false to stop. Each visited entry counts
  /// as one quantized read.
  virtual void scan(
      const Context& ctx,
      const std::function<bool(VectorId, const QuantizedVector&)>& visit) = 0;
  /// Ascending scan limited to ids in [lo, hi].
  virtual void scan_id_range(
      const Context& ctx, VectorId lo, VectorId hi,
      const std::function<bool(VectorId, const QuantizedVector&)>& visit) = 0;
};

class FullVectorProvider {
 public:
  virtual ~FullVectorProvider() = default;

  virtual Fetch<std::optional<VectorRecord>> get(const Context& ctx,
                                                 VectorId id) = 0;
  /// Ascending id order over records visible to the context (shard-filtered
  /// when the context names a shard).
  virtual void scan(
      const Context& ctx,
      const std::function<bool(const VectorRecord&)>& visit) = 0;
};

/// One adjacency-list mutation. Appends must not duplicate pending appends
/// for the key; overwrites replace the list; deletes drop the term.
struct NeighborPatch {
  enum class Kind { kAppend, kOverwrite, kDelete };

  VectorId target = 0;
  Kind kind = Kind::kOverwrite;
  std::vector<VectorId> neighbors;

  static NeighborPatch append(VectorId target, std::vector<VectorId> ids) {
    return {target, Kind::kAppend, std::move(ids)};
  }
  static NeighborPatch overwrite(VectorId target, std::vector<VectorId> ids) {
    return {target, Kind::kOverwrite, std::move(ids)};
  }
  static NeighborPatch del(VectorId target) {
    return {target, Kind::kDelete, {}};
  }
};

class NeighborProvider {
 public:
  virtual ~NeighborProvider() = default;

  /// Out-neighbors of id; absent when the term does not exist.
  virtual Fetch<std::optional<std::vector<VectorId>>> get(const Context& ctx,
                                                          VectorId id) = 0;
  /// Applies all patches as one atomic storage batch.
  virtual void apply(const Context& ctx,
                     std::span<const NeighborPatch> patches) = 0;
  /// Ascending scan starting at id `from`; each visited list counts as one
  /// adjacency read. Return false to stop.
  virtual void scan_from(
      const Context& ctx, VectorId from,
      const std::function<bool(VectorId, const std::vector<VectorId>&)>&
          visit) = 0;
};

struct ProviderSuite {
  QuantVectorProvider* quant = nullptr;
  FullVectorProvider* vectors = nullptr;
  NeighborProvider* neighbors = nullptr;
};

}  // namespace kvann
