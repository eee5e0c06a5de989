#include "kvann/query/query_types.hpp"

namespace kvann {

const char* plan_path_name(PlanPath path) {
  switch (path) {
    case PlanPath::kBruteForce:
      return "brute_force";
    case PlanPath::kFlatScan:
      return "flat_scan";
    case PlanPath::kQflatScan:
      return "qflat_scan";
    case PlanPath::kDiskann:
      return "diskann";
    case PlanPath::kDiskannFilterAware:
      return "diskann_filter_aware";
    case PlanPath::kRangeFetch:
      return "range_fetch";
  }
  return "unknown";
}

namespace {

constexpr std::uint64_t kBruteForceBelow = 1000;
constexpr std::uint64_t kGraphSelectivityFloor = 5000;
constexpr double kRangeDensityRatio = 4.0;

bool range_is_contiguous(const IdBitmap& matched) {
  if (matched.size() < 2) return true;
  const auto& ids = matched.ids();
  const std::uint64_t span = ids.back() - ids.front() + 1;
  return static_cast<double>(span) <=
         kRangeDensityRatio * static_cast<double>(matched.size());
}

}  // namespace

QueryPlan plan(const VectorQuery& query, const PlanInputs& inputs) {
  QueryPlan out;
  out.k = query.k;
  out.list_size = query.list_size();
  out.rerank_pool = query.rerank_pool();
  out.filter_bitmap = inputs.matched;
  out.selectivity = inputs.matched ? inputs.matched->size() : 0;

  const bool has_predicate = inputs.matched != nullptr;

  // Shard routing: a known shard on a sharded index narrows the plan; an
  // unknown shard value yields an empty range-fetch; a shard key on an
  // unsharded index was already folded into the predicate bitmap.
  if (query.shard_key && inputs.sharded) {
    out.shard_key = query.shard_key;
    if (!inputs.shard_known) {
      out.path = PlanPath::kRangeFetch;
      out.contiguous_range = false;
      out.filter_bitmap = std::make_shared<IdBitmap>();
      out.selectivity = 0;
      return out;
    }
  }

  if (inputs.live_count < kBruteForceBelow) {
    out.path = PlanPath::kBruteForce;
    return out;
  }
  if (query.exact) {
    out.path = PlanPath::kFlatScan;
    return out;
  }
  if (has_predicate) {
    if (out.selectivity < kGraphSelectivityFloor) {
      out.path = PlanPath::kRangeFetch;
      out.contiguous_range =
          inputs.has_schema && range_is_contiguous(*inputs.matched);
      return out;
    }
    if (inputs.graph_ready) {
      out.path = PlanPath::kDiskannFilterAware;
      return out;
    }
    out.path = inputs.has_schema ? PlanPath::kQflatScan : PlanPath::kFlatScan;
    return out;
  }
  if (inputs.graph_ready) {
    out.path = PlanPath::kDiskann;
    return out;
  }
  out.path = inputs.has_schema ? PlanPath::kQflatScan : PlanPath::kFlatScan;
  return out;
}

}  // namespace kvann
