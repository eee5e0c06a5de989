#pragma once

#include <memory>
#include <unordered_map>

#include "kvann/graph/providers.hpp"
#include "kvann/storage/storage_engine.hpp"

namespace kvann {

/// Storage-backed providers for one engine. Term values are mirrored in
/// write-through id-keyed maps (the desk-scale analog of Bw-Tree term
/// caching); the ordered store stays authoritative for scans, snapshots and
/// the patch contract. Read counting is logical: every get/scan entry bumps
/// the context sink and the engine totals, cache hit or not.
///
/// Mirrors are only mutated on write paths, which callers serialize through
/// the engine's write guard, so read paths are safe to share.
class StorageProviderSuite {
 public:
  explicit StorageProviderSuite(StorageEngine& engine);
  ~StorageProviderSuite();

  ProviderSuite suite();

  /// Rebuilds one context's mirrors from the store (after restore()).
  /// Restored quant terms are tagged with `quant_version`; snapshots are
  /// taken quiesced, so the version is uniform.
  void reload_mirrors(const Context& ctx);
  void reload_mirrors(const Context& ctx, std::uint32_t quant_version);

  StorageEngine& engine() { return engine_; }

 private:
  StorageEngine& engine_;
  class QuantImpl;
  class VectorImpl;
  class NeighborImpl;
  std::unique_ptr<QuantImpl> quant_;
  std::unique_ptr<VectorImpl> vectors_;
  std::unique_ptr<NeighborImpl> neighbors_;
};

}  // namespace kvann
