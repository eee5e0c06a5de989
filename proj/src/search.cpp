#include "kvann/graph/search.hpp"

#include <algorithm>

#include "kvann/core/distance.hpp"

namespace kvann {

namespace {

class QuantNodeScorer : public NodeScorer {
 public:
  QuantNodeScorer(QuantVectorProvider& provider, const Context& ctx,
                  const SchemaRegistry& registry, Metric metric,
                  std::span<const float> query)
      : provider_(provider), ctx_(ctx), scorer_(registry, metric, query) {}

  std::optional<Distance> score(VectorId id) override {
    auto code = provider_.get(ctx_, id);
    auto value = std::move(code).take();
    if (!value.has_value()) return std::nullopt;
    if (ctx_.counters) ctx_.counters->cmps++;
    return scorer_(*value);
  }

 private:
  QuantVectorProvider& provider_;
  Context ctx_;
  QuantScorer scorer_;
};

class FullPrecNodeScorer : public NodeScorer {
 public:
  FullPrecNodeScorer(FullVectorProvider& provider, const Context& ctx,
                     Metric metric, std::span<const float> query)
      : provider_(provider), ctx_(ctx), metric_(metric), query_(query) {}

  std::optional<Distance> score(VectorId id) override {
    auto rec = provider_.get(ctx_, id);
    auto value = std::move(rec).take();
    if (!value.has_value()) return std::nullopt;
    if (ctx_.counters) ctx_.counters->cmps++;
    return distance(query_, value->embedding, metric_);
  }

 private:
  FullVectorProvider& provider_;
  Context ctx_;
  Metric metric_;
  std::span<const float> query_;
};

}  // namespace

std::unique_ptr<NodeScorer> make_node_scorer(NavigationMode mode,
                                             const ProviderSuite& providers,
                                             const Context& ctx,
                                             const SchemaRegistry* registry,
                                             Metric metric,
                                             std::span<const float> query) {
  if (mode == NavigationMode::kQuantized) {
    if (registry == nullptr || registry->empty()) {
      throw Error(ErrorCode::kStaleSchema,
                  "quantized navigation requires a trained schema");
    }
    return std::make_unique<QuantNodeScorer>(*providers.quant, ctx, *registry,
                                             metric, query);
  }
  return std::make_unique<FullPrecNodeScorer>(*providers.vectors, ctx, metric,
                                              query);
}

IdSet::IdSet(std::size_t expected) {
  std::size_t cap = 16;
  while (cap < expected * 2) cap <<= 1;
  slots_.assign(cap, kEmpty);
  mask_ = cap - 1;
}

bool IdSet::insert(VectorId id) {
  if (id == kEmpty) {
    if (has_max_) return false;
    has_max_ = true;
    return true;
  }
  if ((count_ + 1) * 10 >= slots_.size() * 7) grow();
  std::size_t i = (id * 0x9e3779b97f4a7c15ULL) & mask_;
  while (slots_[i] != kEmpty) {
    if (slots_[i] == id) return false;
    i = (i + 1) & mask_;
  }
  slots_[i] = id;
  ++count_;
  return true;
}

bool IdSet::contains(VectorId id) const {
  if (id == kEmpty) return has_max_;
  std::size_t i = (id * 0x9e3779b97f4a7c15ULL) & mask_;
  while (slots_[i] != kEmpty) {
    if (slots_[i] == id) return true;
    i = (i + 1) & mask_;
  }
  return false;
}

void IdSet::grow() {
  std::vector<VectorId> old = std::move(slots_);
  slots_.assign(old.size() * 2, kEmpty);
  mask_ = slots_.size() - 1;
  for (VectorId v : old) {
    if (v == kEmpty) continue;
    std::size_t i = (v * 0x9e3779b97f4a7c15ULL) & mask_;
    while (slots_[i] != kEmpty) i = (i + 1) & mask_;
    slots_[i] = v;
  }
}

PaginatedSearch::PaginatedSearch(const ProviderSuite& providers,
                                 const Context& ctx, NodeScorer& scorer,
                                 VectorId start, const SearchParams& params)
    : providers_(providers),
      ctx_(ctx),
      scorer_(scorer),
      start_(start),
      params_(params),
      visited_(params.list_size * 8),
      expanded_(params.list_size * 2) {
  if (params_.list_size == 0) {
    throw Error(ErrorCode::kConfig, "search list size must be positive");
  }
  if (params_.beta <= 0.0f || params_.beta > 1.0f) {
    throw Error(ErrorCode::kConfig, "beta must be in (0, 1]");
  }
  best_.reserve(params_.list_size + 1);
}

void PaginatedSearch::seed() {
  seeded_ = true;
  visited_.insert(start_);
  auto d = scorer_.score(start_);
  if (!d.has_value()) {
    exhausted_ = true;
    return;
  }
  visited_scored_.push_back({start_, *d});
  const bool match = params_.filter && params_.filter->matches(start_);
  insert_best({start_, *d, match ? params_.beta * *d : *d});
}

void PaginatedSearch::insert_best(const Entry& e) {
  auto pos = std::lower_bound(best_.begin(), best_.end(), e,
                              [](const Entry& a, const Entry& b) {
                                if (a.key != b.key) return a.key < b.key;
                                return a.id < b.id;
                              });
  best_.insert(pos, e);
  while (best_.size() > params_.list_size) {
    backup_.push(best_.back());
    best_.pop_back();
  }
}

void PaginatedSearch::refill() {
  while (best_.size() < params_.list_size && !backup_.empty()) {
    best_.push_back(backup_.top());
    backup_.pop();
  }
  std::sort(best_.begin(), best_.end(), [](const Entry& a, const Entry& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.id < b.id;
  });
}

void PaginatedSearch::explore() {
  while (true) {
    std::size_t idx = best_.size();
    for (std::size_t i = 0; i < best_.size(); ++i) {
      if (!expanded_.contains(best_[i].id)) {
        idx = i;
        break;
      }
    }
    if (idx == best_.size()) break;

    const VectorId p = best_[idx].id;
    expanded_.insert(p);
    if (ctx_.counters) ctx_.counters->hops++;
    auto fetched = providers_.neighbors->get(ctx_, p);
    auto nbrs = std::move(fetched).take();
    if (!nbrs.has_value()) continue;
    for (VectorId n : *nbrs) {
      if (!visited_.insert(n)) continue;
      auto d = scorer_.score(n);
      if (!d.has_value()) continue;
      visited_scored_.push_back({n, *d});
      const bool match = params_.filter && params_.filter->matches(n);
      insert_best({n, *d, match ? params_.beta * *d : *d});
    }
  }
}

void PaginatedSearch::run() {
  if (exhausted_) return;
  if (!seeded_) seed();
  refill();
  explore();
}

std::vector<ScoredNode> PaginatedSearch::next_page(std::uint32_t page_size) {
  std::vector<ScoredNode> out;
  run();
  ++pages_;
  if (ctx_.counters) ctx_.counters->pages++;
  while (out.size() < page_size && !best_.empty()) {
    const Entry e = best_.front();
    best_.erase(best_.begin());
    if (!params_.filtered_results ||
        (params_.filter && params_.filter->matches(e.id))) {
      out.push_back({e.id, e.dist});
    }
  }
  if (best_.empty() && backup_.empty()) exhausted_ = true;
  return out;
}

std::vector<ScoredNode> PaginatedSearch::top_visited(
    std::uint32_t k, const IdFilter* filter) const {
  std::vector<ScoredNode> pool;
  pool.reserve(visited_scored_.size());
  for (const auto& s : visited_scored_) {
    if (filter && !filter->matches(s.id)) continue;
    pool.push_back(s);
  }
  const std::size_t take = std::min<std::size_t>(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + take, pool.end(),
                    scored_less);
  pool.resize(take);
  return pool;
}

}  // namespace kvann
