#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kvann/core/types.hpp"
#include "kvann/graph/search.hpp"
#include "kvann/storage/counters.hpp"

namespace kvann {

/// Predicate over label bitmaps.
struct LabelFilter {
  enum class Mode { kAny, kAll, kExact };

  std::uint64_t mask = 0;
  Mode mode = Mode::kAny;

  bool matches(std::optional<std::uint64_t> labels) const {
    const std::uint64_t value = labels.value_or(0);
    switch (mode) {
      case Mode::kAny:
        return (value & mask) != 0;
      case Mode::kAll:
        return (value & mask) == mask;
      case Mode::kExact:
        return value == mask;
    }
    return false;
  }
};

enum class FilterMode {
  kAware,  // beta-biased graph search, pages return matches only
  kPost,   // unmodified search, matches filtered from returned pages
};

struct VectorQuery {
  std::vector<float> query_vector;
  std::uint32_t k = 10;
  bool exact = false;
  float search_list_multiplier = 10.0f;  // L = ceil(slm * k)
  float quant_list_multiplier = 7.0f;    // rerank pool = ceil(qlm * k)
  std::optional<LabelFilter> filter;
  std::optional<std::string> shard_key;
  float beta = 0.3f;
  FilterMode filter_mode = FilterMode::kAware;
  bool verbose_plan = false;

  std::uint32_t list_size() const {
    return static_cast<std::uint32_t>(
        std::max(1.0, std::ceil(static_cast<double>(search_list_multiplier) *
                                k)));
  }
  std::uint32_t rerank_pool() const {
    return static_cast<std::uint32_t>(
        std::max(1.0, std::ceil(static_cast<double>(quant_list_multiplier) *
                                k)));
  }
};

enum class PlanPath {
  kBruteForce,
  kFlatScan,
  kQflatScan,
  kDiskann,
  kDiskannFilterAware,
  kRangeFetch,
};

const char* plan_path_name(PlanPath path);

/// Sorted-id set; the compressed filter bitmap stand-in.
class IdBitmap : public IdFilter {
 public:
  IdBitmap() = default;
  explicit IdBitmap(std::vector<VectorId> sorted_ids)
      : ids_(std::move(sorted_ids)) {}

  bool matches(VectorId id) const override {
    return std::binary_search(ids_.begin(), ids_.end(), id);
  }
  const std::vector<VectorId>& ids() const { return ids_; }
  std::uint64_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

 private:
  std::vector<VectorId> ids_;
};

struct QueryPlan {
  PlanPath path = PlanPath::kBruteForce;
  std::optional<std::string> shard_key;  // resolved shard routing
  std::shared_ptr<const IdBitmap> filter_bitmap;
  std::uint64_t selectivity = 0;
  bool contiguous_range = false;  // range_fetch: scan vs per-id fetches
  std::uint32_t list_size = 0;
  std::uint32_t rerank_pool = 0;
  std::uint32_t k = 0;
};

/// Everything plan() needs about the collection; computing it is the
/// collection's job so the planner stays a pure function.
struct PlanInputs {
  std::uint64_t live_count = 0;
  bool has_schema = false;
  bool graph_ready = false;
  bool sharded = false;
  bool shard_known = false;
  std::shared_ptr<const IdBitmap> matched;  // set when a predicate applies
};

struct CostReport {
  std::uint64_t quant_reads = 0;
  std::uint64_t adj_reads = 0;
  std::uint64_t fullprec_reads = 0;
  std::uint64_t distance_ops = 0;
  std::uint64_t pages = 0;

  static CostReport from(const OpCounters& c) {
    return {c.quant_reads, c.adj_reads, c.fullprec_reads, c.cmps, c.pages};
  }
  CostReport& operator+=(const CostReport& o) {
    quant_reads += o.quant_reads;
    adj_reads += o.adj_reads;
    fullprec_reads += o.fullprec_reads;
    distance_ops += o.distance_ops;
    pages += o.pages;
    return *this;
  }
};

struct QueryResult {
  std::vector<ScoredNode> hits;  // ascending distance, ties by lower id
  CostReport cost;
  QueryPlan plan;
};

/// Pure plan selection; identical (query, inputs) yield identical plans.
QueryPlan plan(const VectorQuery& query, const PlanInputs& inputs);

}  // namespace kvann
