#pragma once

#include <memory>
#include <queue>
#include <span>
#include <vector>

#include "kvann/graph/providers.hpp"
#include "kvann/quantization/pq.hpp"

namespace kvann {

struct ScoredNode {
  VectorId id = 0;
  Distance dist = 0;
};

/// Canonical ordering: distance ascending, ties toward the lower id.
inline bool scored_less(const ScoredNode& a, const ScoredNode& b) {
  if (a.dist != b.dist) return a.dist < b.dist;
  return a.id < b.id;
}

/// Membership predicate over ids; the query layer backs this with the
/// filter bitmap.
class IdFilter {
 public:
  virtual ~IdFilter() = default;
  virtual bool matches(VectorId id) const = 0;
};

enum class NavigationMode { kQuantized, kFullPrecision };

/// Distance from the current query to one graph node; absent when the
/// node's term no longer exists (deleted). Implementations count their
/// reads and comparisons through the context sink.
class NodeScorer {
 public:
  virtual ~NodeScorer() = default;
  virtual std::optional<Distance> score(VectorId id) = 0;
};

std::unique_ptr<NodeScorer> make_node_scorer(NavigationMode mode,
                                             const ProviderSuite& providers,
                                             const Context& ctx,
                                             const SchemaRegistry* registry,
                                             Metric metric,
                                             std::span<const float> query);

/// Open-addressing id set; the visited set is the hottest structure in the
/// search loop.
class IdSet {
 public:
  explicit IdSet(std::size_t expected = 64);

  /// True when newly inserted.
  bool insert(VectorId id);
  bool contains(VectorId id) const;
  std::size_t size() const { return count_ + (has_max_ ? 1 : 0); }

 private:
  void grow();

  static constexpr VectorId kEmpty = ~VectorId{0};
  std::vector<VectorId> slots_;
  std::size_t mask_ = 0;
  std::size_t count_ = 0;
  bool has_max_ = false;  // kEmpty doubles as the sentinel
};

struct SearchParams {
  std::uint32_t list_size = 100;  // L
  float beta = 1.0f;              // navigation scale for filter matches
  const IdFilter* filter = nullptr;
  bool filtered_results = false;  // pages return matching ids only
};

/// Greedy search with pagination. `best` is bounded to L entries ordered by
/// the (beta-scaled) navigation key; evictions spill into an unbounded
/// backup heap. Exploration expands the closest unexpanded entry until all
/// of best has been expanded. Pages consume entries from the front of best;
/// the next page refills best from backup up to L and continues. The
/// visited set persists, so no id is ever returned twice.
class PaginatedSearch {
 public:
  PaginatedSearch(const ProviderSuite& providers, const Context& ctx,
                  NodeScorer& scorer, VectorId start,
                  const SearchParams& params);

  /// Seeds, refills and explores to quiescence without consuming results.
  void run();

  /// Returns up to page_size result ids (matching ids only, under
  /// filtered_results). An empty page with exhausted() is terminal.
  std::vector<ScoredNode> next_page(std::uint32_t page_size);

  bool exhausted() const { return exhausted_; }
  std::uint32_t pages() const { return pages_; }

  /// Every scored node with its raw distance, in visit order.
  const std::vector<ScoredNode>& visited_scored() const {
    return visited_scored_;
  }

  /// The k closest visited nodes (optionally restricted to filter matches).
  std::vector<ScoredNode> top_visited(std::uint32_t k,
                                      const IdFilter* filter) const;

 private:
  struct Entry {
    VectorId id;
    Distance dist;  // raw metric distance
    Distance key;   // beta-scaled navigation key
  };

  void seed();
  void refill();
  void explore();
  void insert_best(const Entry& e);

  const ProviderSuite& providers_;
  Context ctx_;
  NodeScorer& scorer_;
  VectorId start_;
  SearchParams params_;

  std::vector<Entry> best_;  // ascending by (key, id)
  struct EntryGreater {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.key != b.key) return a.key > b.key;
      return a.id > b.id;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, EntryGreater> backup_;
  IdSet visited_;
  IdSet expanded_;
  std::vector<ScoredNode> visited_scored_;
  bool seeded_ = false;
  bool exhausted_ = false;
  std::uint32_t pages_ = 0;
};

struct SearchResult {
  std::vector<ScoredNode> results;
  std::vector<ScoredNode> visited;
  OpCounters counters;
};

}  // namespace kvann
