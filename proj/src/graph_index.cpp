#include "kvann/graph/graph_index.hpp"

#include <algorithm>
#include <cstring>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "kvann/core/distance.hpp"

namespace kvann {

namespace {

class QuantPruneSource : public PruneVecSource {
 public:
  QuantPruneSource(QuantVectorProvider& provider, const Context& ctx,
                   const SchemaRegistry& registry)
      : provider_(provider), ctx_(ctx), registry_(registry) {}

  const std::vector<float>* vec(VectorId id) override {
    auto it = cache_.find(id);
    if (it == cache_.end()) {
      auto fetched = provider_.get(ctx_, id);
      auto code = std::move(fetched).take();
      std::optional<std::vector<float>> rec;
      if (code.has_value()) {
        const PqSchema* schema = registry_.find(code->schema_version);
        if (schema != nullptr) rec = decode(*code, *schema);
      }
      it = cache_.emplace(id, std::move(rec)).first;
    }
    return it->second.has_value() ? &*it->second : nullptr;
  }

 private:
  QuantVectorProvider& provider_;
  Context ctx_;
  const SchemaRegistry& registry_;
  std::unordered_map<VectorId, std::optional<std::vector<float>>> cache_;
};

class FullPruneSource : public PruneVecSource {
 public:
  FullPruneSource(FullVectorProvider& provider, const Context& ctx)
      : provider_(provider), ctx_(ctx) {}

  const std::vector<float>* vec(VectorId id) override {
    auto it = cache_.find(id);
    if (it == cache_.end()) {
      auto fetched = provider_.get(ctx_, id);
      auto rec = std::move(fetched).take();
      std::optional<std::vector<float>> emb;
      if (rec.has_value()) emb = std::move(rec->embedding);
      it = cache_.emplace(id, std::move(emb)).first;
    }
    return it->second.has_value() ? &*it->second : nullptr;
  }

 private:
  FullVectorProvider& provider_;
  Context ctx_;
  std::unordered_map<VectorId, std::optional<std::vector<float>>> cache_;
};

std::vector<VectorId> ids_of(const std::vector<ScoredNode>& nodes) {
  std::vector<VectorId> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.id);
  return out;
}

}  // namespace

std::unique_ptr<PruneVecSource> make_prune_source(
    NavigationMode mode, const ProviderSuite& providers, const Context& ctx,
    const SchemaRegistry* registry) {
  if (mode == NavigationMode::kQuantized) {
    if (registry == nullptr || registry->empty()) {
      throw Error(ErrorCode::kStaleSchema,
                  "quantized pruning requires a trained schema");
    }
    return std::make_unique<QuantPruneSource>(*providers.quant, ctx,
                                              *registry);
  }
  return std::make_unique<FullPruneSource>(*providers.vectors, ctx);
}

std::vector<ScoredNode> robust_prune(VectorId p,
                                     std::vector<ScoredNode> candidates,
                                     std::span<const VectorId> current_out,
                                     float alpha, std::uint32_t degree_bound,
                                     PruneVecSource& source, Metric metric,
                                     OpCounters* counters) {
  std::unordered_set<VectorId> seen;
  seen.reserve(candidates.size() + current_out.size() + 1);
  seen.insert(p);

  std::vector<ScoredNode> pool;
  pool.reserve(candidates.size() + current_out.size());
  for (const auto& c : candidates) {
    if (!seen.insert(c.id).second) continue;
    pool.push_back(c);
  }
  const std::vector<float>* vp = nullptr;
  for (VectorId x : current_out) {
    if (!seen.insert(x).second) continue;
    if (vp == nullptr) {
      vp = source.vec(p);
      if (vp == nullptr) break;
    }
    const std::vector<float>* vx = source.vec(x);
    if (vx == nullptr) continue;  // stale edge, dropped here
    if (counters) counters->cmps++;
    pool.push_back({x, distance(*vp, *vx, metric)});
  }

  std::sort(pool.begin(), pool.end(), scored_less);

  std::vector<ScoredNode> kept;
  std::vector<const std::vector<float>*> kept_vecs;
  kept.reserve(degree_bound);
  kept_vecs.reserve(degree_bound);
  for (const auto& cand : pool) {
    const std::vector<float>* vq = source.vec(cand.id);
    if (vq == nullptr) continue;
    bool add = true;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (counters) counters->cmps++;
      const Distance d_qr = distance(*vq, *kept_vecs[i], metric);
      if (alpha * kept[i].dist < d_qr) {
        add = false;
        break;
      }
    }
    if (add) {
      kept.push_back(cand);
      kept_vecs.push_back(vq);
      if (kept.size() == degree_bound) break;
    }
  }
  return kept;
}

std::string GraphMeta::serialize() const {
  std::string out;
  auto put64 = [&out](std::uint64_t v) {
    out.append(reinterpret_cast<const char*>(&v), 8);
  };
  out.push_back(start.has_value() ? 1 : 0);
  put64(start.value_or(0));
  put64(live_count);
  put64(deleted_pending.size());
  for (VectorId id : deleted_pending) put64(id);
  out.push_back(cycle_in_progress ? 1 : 0);
  put64(cursor);
  put64(seen_this_cycle.size());
  for (VectorId id : seen_this_cycle) put64(id);
  put64(added_this_cycle.size());
  for (VectorId id : added_this_cycle) put64(id);
  return out;
}

GraphMeta GraphMeta::deserialize(std::string_view blob) {
  std::size_t off = 0;
  auto get8 = [&]() -> std::uint8_t {
    if (off + 1 > blob.size()) {
      throw Error(ErrorCode::kParse, "graph meta truncated");
    }
    return static_cast<std::uint8_t>(blob[off++]);
  };
  auto get64 = [&]() -> std::uint64_t {
    if (off + 8 > blob.size()) {
      throw Error(ErrorCode::kParse, "graph meta truncated");
    }
    std::uint64_t v;
    std::memcpy(&v, blob.data() + off, 8);
    off += 8;
    return v;
  };
  GraphMeta meta;
  const bool has_start = get8() != 0;
  const VectorId start = get64();
  if (has_start) meta.start = start;
  meta.live_count = get64();
  const auto pending = get64();
  for (std::uint64_t i = 0; i < pending; ++i) meta.deleted_pending.insert(get64());
  meta.cycle_in_progress = get8() != 0;
  meta.cursor = get64();
  const auto seen = get64();
  for (std::uint64_t i = 0; i < seen; ++i) meta.seen_this_cycle.insert(get64());
  const auto added = get64();
  for (std::uint64_t i = 0; i < added; ++i) meta.added_this_cycle.insert(get64());
  return meta;
}

PagedQuery::PagedQuery(const ProviderSuite& providers, Context ctx,
                       std::vector<float> query, NavigationMode mode,
                       const SchemaRegistry* registry, Metric metric,
                       VectorId start, const SearchParams& params)
    : query_(std::move(query)) {
  scorer_ = make_node_scorer(mode, providers, ctx, registry, metric, query_);
  search_ = std::make_unique<PaginatedSearch>(providers, ctx, *scorer_, start,
                                              params);
}

GraphIndex::GraphIndex(const ProviderSuite& providers, const Context& ctx,
                       const IndexConfig& config,
                       const SchemaRegistry* registry, GraphMeta* meta,
                       NavigationMode mode)
    : providers_(providers),
      ctx_(ctx),
      config_(config),
      registry_(registry),
      meta_(meta),
      mode_(mode) {
  config_.validate();
}

std::vector<ScoredNode> GraphIndex::compute_out_list(
    VectorId id, std::span<const float> embedding, const Context& ctx) {
  auto scorer = make_node_scorer(mode_, providers_, ctx, registry_,
                                 config_.metric, embedding);
  SearchParams params;
  params.list_size = config_.build_list_size;
  PaginatedSearch search(providers_, ctx, *scorer, *meta_->start, params);
  search.run();

  auto fetched = providers_.neighbors->get(ctx, id);
  auto current = std::move(fetched).take();
  auto source = make_prune_source(mode_, providers_, ctx, registry_);
  return robust_prune(id, search.visited_scored(),
                      current ? std::span<const VectorId>(*current)
                              : std::span<const VectorId>(),
                      config_.alpha, config_.degree_bound, *source,
                      config_.metric, ctx.counters);
}

void GraphIndex::reinsert(VectorId id, std::span<const float> embedding,
                          OpCounters* counters, bool count_live) {
  const Context ctx = ctx_.with_counters(counters);
  if (!meta_->start.has_value()) {
    std::vector<NeighborPatch> patches;
    patches.push_back(NeighborPatch::overwrite(id, {}));
    providers_.neighbors->apply(ctx, patches);
    meta_->start = id;
    meta_->live_count += count_live ? 1 : 0;
    return;
  }

  auto out = compute_out_list(id, embedding, ctx);
  auto source = make_prune_source(mode_, providers_, ctx, registry_);

  std::vector<NeighborPatch> patches;
  patches.push_back(NeighborPatch::overwrite(id, ids_of(out)));
  const std::uint32_t max_degree = config_.max_degree();
  for (const auto& j : out) {
    auto fetched = providers_.neighbors->get(ctx, j.id);
    auto nj = std::move(fetched).take();
    std::vector<VectorId> list = nj.value_or(std::vector<VectorId>{});
    if (std::find(list.begin(), list.end(), id) != list.end()) continue;
    if (list.size() + 1 > max_degree) {
      std::vector<ScoredNode> cands;
      cands.reserve(list.size() + 1);
      const std::vector<float>* vj = source->vec(j.id);
      if (vj == nullptr) continue;
      for (VectorId x : list) {
        const std::vector<float>* vx = source->vec(x);
        if (vx == nullptr) continue;
        if (counters) counters->cmps++;
        cands.push_back({x, distance(*vj, *vx, config_.metric)});
      }
      const std::vector<float>* vid = source->vec(id);
      if (vid != nullptr) {
        if (counters) counters->cmps++;
        cands.push_back({id, distance(*vj, *vid, config_.metric)});
      }
      auto pruned = robust_prune(j.id, std::move(cands), {}, config_.alpha,
                                 config_.degree_bound, *source, config_.metric,
                                 counters);
      patches.push_back(NeighborPatch::overwrite(j.id, ids_of(pruned)));
    } else {
      patches.push_back(NeighborPatch::append(j.id, {id}));
    }
  }
  providers_.neighbors->apply(ctx, patches);
  if (count_live) meta_->live_count++;
}

void GraphIndex::insert(VectorId id, std::span<const float> embedding,
                        OpCounters* counters) {
  reinsert(id, embedding, counters, /*count_live=*/true);
}

void GraphIndex::replace(VectorId id, std::span<const float> embedding,
                         OpCounters* counters) {
  if (!meta_->start.has_value()) {
    throw Error(ErrorCode::kNotFound, "replace on an empty index");
  }
  reinsert(id, embedding, counters, /*count_live=*/false);
}

GraphIndex::Phase1Result GraphIndex::minibatch_phase1(
    std::span<const BatchItem> batch, unsigned parallelism,
    OpCounters* counters) {
  if (batch.size() > config_.minibatch_max) {
    throw Error(ErrorCode::kContract,
                "batch exceeds minibatch_max (" + std::to_string(batch.size()) +
                    " > " + std::to_string(config_.minibatch_max) + ")");
  }
  {
    std::unordered_set<VectorId> ids;
    for (const auto& item : batch) {
      if (!ids.insert(item.id).second) {
        throw Error(ErrorCode::kContract,
                    "duplicate id " + std::to_string(item.id) + " in batch");
      }
    }
  }
  if (!meta_->start.has_value()) {
    throw Error(ErrorCode::kContract,
                "minibatch phase 1 requires a non-empty graph");
  }

  Phase1Result result;
  result.nodes.resize(batch.size());
  const unsigned workers =
      std::max(1u, std::min<unsigned>(parallelism,
                                      static_cast<unsigned>(batch.size())));
  std::vector<OpCounters> worker_counters(workers);

  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < batch.size(); i += workers) {
      const Context ctx = ctx_.with_counters(&worker_counters[w]);
      result.nodes[i].id = batch[i].id;
      result.nodes[i].out = compute_out_list(batch[i].id, batch[i].embedding,
                                             ctx);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  if (counters) {
    for (const auto& wc : worker_counters) *counters += wc;
  }
  return result;
}

void GraphIndex::minibatch_phase2(const Phase1Result& phase1,
                                  OpCounters* counters) {
  const Context ctx = ctx_.with_counters(counters);
  std::vector<NeighborPatch> patches;
  patches.reserve(phase1.nodes.size() * 2);
  for (const auto& node : phase1.nodes) {
    patches.push_back(NeighborPatch::overwrite(node.id, ids_of(node.out)));
  }

  // Group back-edges by target; one patch per target.
  std::map<VectorId, std::vector<VectorId>> back;
  for (const auto& node : phase1.nodes) {
    for (const auto& j : node.out) back[j.id].push_back(node.id);
  }

  auto source = make_prune_source(mode_, providers_, ctx, registry_);
  const std::uint32_t max_degree = config_.max_degree();
  for (auto& [target, incoming] : back) {
    auto fetched = providers_.neighbors->get(ctx, target);
    auto existing = std::move(fetched).take();
    std::vector<VectorId> list = existing.value_or(std::vector<VectorId>{});
    std::unordered_set<VectorId> present(list.begin(), list.end());
    std::vector<VectorId> added;
    for (VectorId x : incoming) {
      if (present.insert(x).second) added.push_back(x);
    }
    if (added.empty()) continue;
    if (list.size() + added.size() > max_degree) {
      const std::vector<float>* vt = source->vec(target);
      if (vt == nullptr) continue;
      std::vector<ScoredNode> cands;
      cands.reserve(list.size() + added.size());
      for (VectorId x : list) {
        const std::vector<float>* vx = source->vec(x);
        if (vx == nullptr) continue;
        if (counters) counters->cmps++;
        cands.push_back({x, distance(*vt, *vx, config_.metric)});
      }
      for (VectorId x : added) {
        const std::vector<float>* vx = source->vec(x);
        if (vx == nullptr) continue;
        if (counters) counters->cmps++;
        cands.push_back({x, distance(*vt, *vx, config_.metric)});
      }
      auto pruned = robust_prune(target, std::move(cands), {}, config_.alpha,
                                 config_.degree_bound, *source, config_.metric,
                                 counters);
      patches.push_back(NeighborPatch::overwrite(target, ids_of(pruned)));
    } else if (added.size() == 1) {
      patches.push_back(NeighborPatch::append(target, std::move(added)));
    } else {
      std::vector<VectorId> merged = std::move(list);
      merged.insert(merged.end(), added.begin(), added.end());
      patches.push_back(NeighborPatch::overwrite(target, std::move(merged)));
    }
  }

  providers_.neighbors->apply(ctx, patches);
  meta_->live_count += phase1.nodes.size();
}

void GraphIndex::minibatch_insert(std::span<const BatchItem> batch,
                                  unsigned parallelism, OpCounters* counters) {
  std::size_t first = 0;
  if (!meta_->start.has_value() && !batch.empty()) {
    insert(batch[0].id, batch[0].embedding, counters);
    first = 1;
  }
  if (first >= batch.size()) return;
  auto phase1 = minibatch_phase1(batch.subspan(first), parallelism, counters);
  minibatch_phase2(phase1, counters);
}

void GraphIndex::remove_node_terms(VectorId id, const Context& ctx,
                                   std::vector<NeighborPatch>& patches) {
  auto fetched = providers_.neighbors->get(ctx, id);
  auto list = std::move(fetched).take();
  if (list.has_value()) patches.push_back(NeighborPatch::del(id));
}

void GraphIndex::reassign_start(VectorId deleted,
                                std::span<const VectorId> former_out,
                                PruneVecSource& source, const Context& ctx) {
  if (meta_->start != deleted) return;
  meta_->start.reset();
  if (meta_->live_count == 0) return;

  const std::vector<float>* vd = source.vec(deleted);
  ScoredNode best{0, 0};
  bool found = false;
  for (VectorId x : former_out) {
    if (x == deleted) continue;
    const std::vector<float>* vx = source.vec(x);
    if (vx == nullptr) continue;  // not live
    Distance d = 0;
    if (vd != nullptr) {
      if (ctx.counters) ctx.counters->cmps++;
      d = distance(*vd, *vx, config_.metric);
    }
    ScoredNode cand{x, d};
    if (!found || scored_less(cand, best)) {
      best = cand;
      found = true;
    }
  }
  if (!found) {
    // Disconnected start; fall back to the first live vector.
    providers_.quant->scan(ctx, [&](VectorId vid, const QuantizedVector&) {
      if (vid != deleted) {
        best = {vid, 0};
        found = true;
        return false;
      }
      return true;
    });
  }
  if (found) meta_->start = best.id;
}

void GraphIndex::inplace_delete(VectorId id, OpCounters* counters) {
  const Context ctx = ctx_.with_counters(counters);
  auto fetched = providers_.neighbors->get(ctx, id);
  auto out_opt = std::move(fetched).take();
  std::vector<VectorId> out_p = out_opt.value_or(std::vector<VectorId>{});

  auto source = make_prune_source(mode_, providers_, ctx, registry_);
  // Pin the deleted node's vector before its terms disappear.
  source->vec(id);

  // Working copies of every adjacency list this operation touches; one
  // overwrite patch per dirty list at the end keeps the batch free of
  // append-after-overwrite interleavings.
  std::map<VectorId, std::vector<VectorId>> work;
  std::set<VectorId> dirty;
  auto load = [&](VectorId v) -> std::vector<VectorId>& {
    auto it = work.find(v);
    if (it == work.end()) {
      auto f = providers_.neighbors->get(ctx, v);
      auto lst = std::move(f).take();
      it = work.emplace(v, lst.value_or(std::vector<VectorId>{})).first;
    }
    return it->second;
  };

  // Two-hop neighborhood; in-neighbors B live inside it.
  std::set<VectorId> two_hop(out_p.begin(), out_p.end());
  for (VectorId x : out_p) {
    const auto& lx = load(x);
    two_hop.insert(lx.begin(), lx.end());
  }
  two_hop.erase(id);

  std::vector<VectorId> in_neighbors;
  for (VectorId b : two_hop) {
    const auto& lb = load(b);
    if (std::find(lb.begin(), lb.end(), id) != lb.end()) {
      in_neighbors.push_back(b);
    }
  }

  auto pair_dist = [&](VectorId a, VectorId b) -> std::optional<Distance> {
    const std::vector<float>* va = source->vec(a);
    const std::vector<float>* vb = source->vec(b);
    if (va == nullptr || vb == nullptr) return std::nullopt;
    if (counters) counters->cmps++;
    return distance(*va, *vb, config_.metric);
  };

  // The c closest members of N_out(id) to b, excluding b itself.
  auto closest_c = [&](VectorId b) {
    std::vector<ScoredNode> scored;
    for (VectorId x : out_p) {
      if (x == b || x == id) continue;
      auto d = pair_dist(b, x);
      if (!d.has_value()) continue;
      scored.push_back({x, *d});
    }
    std::sort(scored.begin(), scored.end(), scored_less);
    if (scored.size() > config_.replace_closest) {
      scored.resize(config_.replace_closest);
    }
    return scored;
  };

  auto prune_list = [&](VectorId owner, std::vector<VectorId>& list) {
    if (list.size() <= config_.degree_bound) return;
    std::vector<ScoredNode> cands;
    cands.reserve(list.size());
    for (VectorId x : list) {
      auto d = pair_dist(owner, x);
      if (!d.has_value()) continue;
      cands.push_back({x, *d});
    }
    auto pruned = robust_prune(owner, std::move(cands), {}, config_.alpha,
                               config_.degree_bound, *source, config_.metric,
                               counters);
    list = ids_of(pruned);
  };

  for (VectorId b : in_neighbors) {
    auto& list = load(b);
    list.erase(std::remove(list.begin(), list.end(), id), list.end());
    for (const auto& c : closest_c(b)) {
      if (std::find(list.begin(), list.end(), c.id) == list.end()) {
        list.push_back(c.id);
      }
    }
    prune_list(b, list);
    dirty.insert(b);
  }

  // Cross-link the out-list so the deleted node's neighborhood stays
  // mutually reachable.
  for (VectorId b : out_p) {
    for (const auto& c : closest_c(b)) {
      auto& list = load(c.id);
      if (c.id != b &&
          std::find(list.begin(), list.end(), b) == list.end()) {
        list.push_back(b);
        prune_list(c.id, list);
        dirty.insert(c.id);
      }
    }
  }

  std::vector<NeighborPatch> patches;
  for (VectorId v : dirty) {
    patches.push_back(NeighborPatch::overwrite(v, work[v]));
  }
  remove_node_terms(id, ctx, patches);
  providers_.neighbors->apply(ctx, patches);
  providers_.quant->remove(ctx, id);

  meta_->live_count--;
  meta_->deleted_pending.insert(id);
  if (meta_->cycle_in_progress) meta_->added_this_cycle.insert(id);
  reassign_start(id, out_p, *source, ctx);
}

void GraphIndex::drop_delete(VectorId id, OpCounters* counters) {
  const Context ctx = ctx_.with_counters(counters);
  auto fetched = providers_.neighbors->get(ctx, id);
  auto out_opt = std::move(fetched).take();
  std::vector<VectorId> out_p = out_opt.value_or(std::vector<VectorId>{});

  auto source = make_prune_source(mode_, providers_, ctx, registry_);
  source->vec(id);

  std::vector<NeighborPatch> patches;
  if (out_opt.has_value()) patches.push_back(NeighborPatch::del(id));
  providers_.neighbors->apply(ctx, patches);
  providers_.quant->remove(ctx, id);

  meta_->live_count--;
  meta_->deleted_pending.insert(id);
  if (meta_->cycle_in_progress) meta_->added_this_cycle.insert(id);
  reassign_start(id, out_p, *source, ctx);
}

ConsolidateReport GraphIndex::consolidate_deleted(std::uint64_t budget,
                                                  OpCounters* counters) {
  ConsolidateReport report;
  if (meta_->deleted_pending.empty()) {
    meta_->cycle_in_progress = false;
    meta_->cursor = 0;
    meta_->seen_this_cycle.clear();
    meta_->added_this_cycle.clear();
    return report;
  }
  const Context ctx = ctx_.with_counters(counters);
  if (!meta_->cycle_in_progress) {
    meta_->cycle_in_progress = true;
    meta_->cursor = 0;
    meta_->seen_this_cycle.clear();
    meta_->added_this_cycle.clear();
  }

  std::vector<NeighborPatch> patches;
  bool wrapped = true;
  VectorId next_cursor = meta_->cursor;
  providers_.neighbors->scan_from(
      ctx, meta_->cursor,
      [&](VectorId vid, const std::vector<VectorId>& list) {
        if (report.lists_scanned >= budget) {
          next_cursor = vid;
          wrapped = false;
          return false;
        }
        report.lists_scanned++;
        std::vector<VectorId> clean;
        clean.reserve(list.size());
        bool changed = false;
        for (VectorId n : list) {
          if (meta_->deleted_pending.count(n) != 0) {
            meta_->seen_this_cycle.insert(n);
            changed = true;
          } else {
            clean.push_back(n);
          }
        }
        if (changed) {
          patches.push_back(NeighborPatch::overwrite(vid, std::move(clean)));
          report.lists_rewritten++;
        }
        return true;
      });
  if (!patches.empty()) providers_.neighbors->apply(ctx, patches);

  if (wrapped) {
    for (auto it = meta_->deleted_pending.begin();
         it != meta_->deleted_pending.end();) {
      if (meta_->seen_this_cycle.count(*it) == 0 &&
          meta_->added_this_cycle.count(*it) == 0) {
        it = meta_->deleted_pending.erase(it);
        report.ids_released++;
      } else {
        ++it;
      }
    }
    report.cycle_completed = true;
    meta_->cycle_in_progress = false;
    meta_->cursor = 0;
    meta_->seen_this_cycle.clear();
    meta_->added_this_cycle.clear();
  } else {
    meta_->cursor = next_cursor;
  }
  return report;
}

SearchResult GraphIndex::greedy_search(std::span<const float> query,
                                       std::uint32_t k,
                                       std::uint32_t list_size,
                                       OpCounters* counters) {
  SearchResult result;
  if (!meta_->start.has_value()) return result;
  OpCounters local;
  const Context ctx = ctx_.with_counters(&local);
  auto scorer = make_node_scorer(mode_, providers_, ctx, registry_,
                                 config_.metric, query);
  SearchParams params;
  params.list_size = list_size;
  PaginatedSearch search(providers_, ctx, *scorer, *meta_->start, params);
  search.run();
  result.results = search.top_visited(k, nullptr);
  result.visited = search.visited_scored();
  result.counters = local;
  if (counters) *counters += local;
  return result;
}

SearchResult GraphIndex::beta_search(std::span<const float> query,
                                     const IdFilter* filter, std::uint32_t k,
                                     std::uint32_t list_size, float beta,
                                     OpCounters* counters) {
  SearchResult result;
  if (!meta_->start.has_value()) return result;
  OpCounters local;
  const Context ctx = ctx_.with_counters(&local);
  auto scorer = make_node_scorer(mode_, providers_, ctx, registry_,
                                 config_.metric, query);
  SearchParams params;
  params.list_size = list_size;
  params.beta = beta;
  params.filter = filter;
  PaginatedSearch search(providers_, ctx, *scorer, *meta_->start, params);
  search.run();
  result.results = search.top_visited(k, filter);
  result.visited = search.visited_scored();
  result.counters = local;
  if (counters) *counters += local;
  return result;
}

std::unique_ptr<PagedQuery> GraphIndex::open_query(
    std::span<const float> query, std::uint32_t list_size, float beta,
    const IdFilter* filter, bool filtered_results, OpCounters* counters) {
  if (!meta_->start.has_value()) return nullptr;
  const Context ctx = ctx_.with_counters(counters);
  SearchParams params;
  params.list_size = list_size;
  params.beta = beta;
  params.filter = filter;
  params.filtered_results = filtered_results;
  return std::make_unique<PagedQuery>(
      providers_, ctx, std::vector<float>(query.begin(), query.end()), mode_,
      registry_, config_.metric, *meta_->start, params);
}

}  // namespace kvann
