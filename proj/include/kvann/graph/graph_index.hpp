#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>

#include "kvann/core/types.hpp"
#include "kvann/graph/providers.hpp"
#include "kvann/graph/search.hpp"

namespace kvann {

/// Full-dimension vectors for prune-side distance computations:
/// reconstructions in quantized mode, stored vectors in full-precision
/// mode. Lookups are cached for the lifetime of one operation; a null
/// return means the node's term is gone (stale edge).
class PruneVecSource {
 public:
  virtual ~PruneVecSource() = default;
  virtual const std::vector<float>* vec(VectorId id) = 0;
};

std::unique_ptr<PruneVecSource> make_prune_source(NavigationMode mode,
                                                  const ProviderSuite& providers,
                                                  const Context& ctx,
                                                  const SchemaRegistry* registry);

/// RobustPrune over the library's Distance values: merges the node's
/// current out-neighbors into the candidate pool, sorts by distance to p,
/// then keeps a candidate q unless some already-kept r has
/// alpha * dist(r, p) < dist(q, r). Returns at most degree_bound nodes,
/// sorted by distance to p. Candidates whose terms are gone drop out here,
/// which is what cleans up stale edges lazily.
std::vector<ScoredNode> robust_prune(VectorId p,
                                     std::vector<ScoredNode> candidates,
                                     std::span<const VectorId> current_out,
                                     float alpha, std::uint32_t degree_bound,
                                     PruneVecSource& source, Metric metric,
                                     OpCounters* counters);

/// Mutable state of one logical graph index.
struct GraphMeta {
  std::optional<VectorId> start;
  std::uint64_t live_count = 0;
  std::set<VectorId> deleted_pending;

  // Background consolidation cycle state. An id leaves deleted_pending
  // once a full scan cycle that began after its deletion finds no
  // references.
  bool cycle_in_progress = false;
  VectorId cursor = 0;
  std::set<VectorId> seen_this_cycle;
  std::set<VectorId> added_this_cycle;

  std::string serialize() const;
  static GraphMeta deserialize(std::string_view blob);
};

struct ConsolidateReport {
  std::uint64_t lists_scanned = 0;
  std::uint64_t lists_rewritten = 0;
  std::uint64_t ids_released = 0;
  bool cycle_completed = false;
};

enum class DeletePolicy { kInplace, kDrop };

/// One paginated query bound to a graph; owns the query vector, scorer and
/// search state across pages.
class PagedQuery {
 public:
  PagedQuery(const ProviderSuite& providers, Context ctx,
             std::vector<float> query, NavigationMode mode,
             const SchemaRegistry* registry, Metric metric, VectorId start,
             const SearchParams& params);

  std::vector<ScoredNode> next_page(std::uint32_t page_size) {
    return search_->next_page(page_size);
  }
  bool exhausted() const { return search_->exhausted(); }
  std::uint32_t pages() const { return search_->pages(); }
  const std::vector<ScoredNode>& visited_scored() const {
    return search_->visited_scored();
  }

 private:
  std::vector<float> query_;
  std::unique_ptr<NodeScorer> scorer_;
  std::unique_ptr<PaginatedSearch> search_;
};

/// The Vamana-style graph algorithms, expressed purely against providers;
/// index layout is invisible here. One instance per logical index (one
/// shard or the unsharded collection), sharing providers with every other
/// logical index behind the same store.
///
/// Concurrency contract: searches may run concurrently with each other and
/// with mini-batch phase 1; phase 2 and all other mutations require
/// exclusive access (the collection layer holds the storage guards).
class GraphIndex {
 public:
  GraphIndex(const ProviderSuite& providers, const Context& ctx,
             const IndexConfig& config, const SchemaRegistry* registry,
             GraphMeta* meta, NavigationMode mode);

  bool empty() const { return !meta_->start.has_value(); }
  const GraphMeta& meta() const { return *meta_; }

  /// Alg. 2: greedy search for the vector, prune the visited set into the
  /// node's out-list, then append the node to its new neighbors (pruning
  /// any list that would exceed ceil(slack*R)). First insert seeds the
  /// start node.
  void insert(VectorId id, std::span<const float> embedding,
              OpCounters* counters = nullptr);

  struct BatchItem {
    VectorId id;
    std::span<const float> embedding;
  };
  struct Phase1Result {
    struct Node {
      VectorId id;
      std::vector<ScoredNode> out;
    };
    std::vector<Node> nodes;
  };

  /// Phase 1 computes every new node's out-list against the pre-batch
  /// graph (read-only; may fan out across threads). Phase 2 groups
  /// back-edges by target, prunes at most once per target, and applies
  /// everything as one atomic storage batch.
  Phase1Result minibatch_phase1(std::span<const BatchItem> batch,
                                unsigned parallelism,
                                OpCounters* counters = nullptr);
  void minibatch_phase2(const Phase1Result& phase1,
                        OpCounters* counters = nullptr);
  void minibatch_insert(std::span<const BatchItem> batch, unsigned parallelism,
                        OpCounters* counters = nullptr);

  /// Re-insert for a live id whose vector was overwritten: the out-list is
  /// rebuilt from a fresh search (merged with the old list through the
  /// prune), stale in-edges are left for later prunes.
  void replace(VectorId id, std::span<const float> embedding,
               OpCounters* counters = nullptr);

  /// Alg. 6: splices in-neighbors (found within the two-hop set) to the c
  /// closest members of the deleted node's out-list, cross-links the
  /// out-list, removes the node's terms and queues it for background edge
  /// cleanup. Reassigns the start node if needed.
  void inplace_delete(VectorId id, OpCounters* counters = nullptr);

  /// Drop policy baseline: removes the node's terms only.
  void drop_delete(VectorId id, OpCounters* counters = nullptr);

  /// Scans up to budget adjacency lists from the cycle cursor, stripping
  /// ids pending deletion.
  ConsolidateReport consolidate_deleted(std::uint64_t budget,
                                        OpCounters* counters = nullptr);

  SearchResult greedy_search(std::span<const float> query, std::uint32_t k,
                             std::uint32_t list_size,
                             OpCounters* counters = nullptr);

  /// Alg. 7: navigation distances scaled by beta for filter matches;
  /// returns the closest k matching visited nodes.
  SearchResult beta_search(std::span<const float> query, const IdFilter* filter,
                           std::uint32_t k, std::uint32_t list_size, float beta,
                           OpCounters* counters = nullptr);

  /// Paginated search handle; filtered_results makes pages return matching
  /// ids only (filter-aware mode). Returns nullptr on an empty graph.
  std::unique_ptr<PagedQuery> open_query(std::span<const float> query,
                                         std::uint32_t list_size, float beta,
                                         const IdFilter* filter,
                                         bool filtered_results,
                                         OpCounters* counters = nullptr);

 private:
  std::vector<ScoredNode> compute_out_list(VectorId id,
                                           std::span<const float> embedding,
                                           const Context& ctx);
  void reinsert(VectorId id, std::span<const float> embedding,
                OpCounters* counters, bool count_live);
  void remove_node_terms(VectorId id, const Context& ctx,
                         std::vector<NeighborPatch>& patches);
  void reassign_start(VectorId deleted, std::span<const VectorId> former_out,
                      PruneVecSource& source, const Context& ctx);

  ProviderSuite providers_;
  Context ctx_;
  IndexConfig config_;
  const SchemaRegistry* registry_;
  GraphMeta* meta_;
  NavigationMode mode_;
};

}  // namespace kvann
