#pragma once

#include <map>
#include <shared_mutex>
#include <string>

#include "kvann/storage/counters.hpp"
#include "kvann/storage/document_store.hpp"
#include "kvann/storage/ordered_store.hpp"
#include "kvann/storage/term_codec.hpp"

namespace kvann {

/// One partition's storage: the ordered term store, the document store, a
/// small meta section (graph metadata, schema registry state), and the
/// typed read counters.
///
/// Concurrency: single writer, many readers. Callers take read_guard()
/// around query-side operations and write_guard() around mutations, so
/// readers observe pre- or post-batch state, never a torn batch.
class StorageEngine {
 public:
  using ReadGuard = std::shared_lock<std::shared_mutex>;
  using WriteGuard = std::unique_lock<std::shared_mutex>;

  explicit StorageEngine(std::size_t max_chain_length = 15)
      : terms_(max_chain_length) {}

  ReadGuard read_guard() const { return ReadGuard(mu_); }
  WriteGuard write_guard() { return WriteGuard(mu_); }

  OrderedStore& terms() { return terms_; }
  const OrderedStore& terms() const { return terms_; }
  DocumentStore& docs() { return docs_; }
  const DocumentStore& docs() const { return docs_; }
  ReadCounters& counters() const { return counters_; }

  void set_meta(const std::string& key, std::string value);
  std::optional<std::string> get_meta(const std::string& key) const;
  void erase_meta(const std::string& key);

  /// Versioned snapshot of terms (consolidated logical values), documents,
  /// and meta, with a trailing checksum.
  void snapshot(const std::string& path) const;

  /// Restores a snapshot; a corrupt or truncated file throws and leaves the
  /// engine unchanged.
  void restore(const std::string& path);

  std::string counters_csv() const { return counters_.to_csv(); }

 private:
  mutable std::shared_mutex mu_;
  OrderedStore terms_;
  DocumentStore docs_;
  std::map<std::string, std::string> meta_;
  mutable ReadCounters counters_;
};

}  // namespace kvann
