#include "kvann/collection.hpp"

#include <algorithm>
#include <random>

#include "kvann/core/distance.hpp"

namespace kvann {

Collection::Collection(CollectionConfig config)
    : config_(std::move(config)), engine_(config_.max_chain_length) {
  config_.index.validate();
  path_prefix_ = hash_path(config_.vector_path);
  providers_ = std::make_unique<StorageProviderSuite>(engine_);
}

std::uint64_t Collection::live_count() const { return engine_.docs().size(); }

Context Collection::context(
    const std::optional<std::string>& shard_key) const {
  Context ctx;
  ctx.path = path_prefix_;
  if (config_.sharded && shard_key) ctx.shard = hash_shard_key(*shard_key);
  return ctx;
}

GraphIndex Collection::graph_handle(
    const std::optional<std::string>& shard_key) {
  const std::optional<std::string> key =
      config_.sharded ? shard_key : std::nullopt;
  return GraphIndex(providers_->suite(), context(key), config_.index,
                    &schemas_, &metas_[key], NavigationMode::kQuantized);
}

GraphIndex Collection::query_graph(
    const std::optional<std::string>& shard_key) {
  const std::optional<std::string> key =
      config_.sharded ? shard_key : std::nullopt;
  auto it = metas_.find(key);
  if (it == metas_.end()) {
    throw Error(ErrorCode::kNotFound, "no graph for the requested shard");
  }
  return GraphIndex(providers_->suite(), context(key), config_.index,
                    &schemas_, &it->second, NavigationMode::kQuantized);
}

void Collection::validate_record(VectorRecord& record) const {
  if (record.embedding.size() != config_.index.dimension) {
    throw Error(ErrorCode::kConfig,
                "record " + std::to_string(record.id) + " has dimension " +
                    std::to_string(record.embedding.size()) + ", expected " +
                    std::to_string(config_.index.dimension));
  }
  if (has_non_finite(record.embedding)) {
    throw Error(ErrorCode::kConfig,
                "record " + std::to_string(record.id) +
                    " has NaN or infinite coordinates");
  }
  if (config_.index.metric == Metric::kCosine) {
    l2_normalize(record.embedding);
  }
  if (config_.sharded && !record.shard_key.has_value()) {
    throw Error(ErrorCode::kConfig,
                "sharded index requires a shard key on every record");
  }
}

void Collection::index_labels(const VectorRecord& record) {
  if (record.labels) {
    for (int b = 0; b < 64; ++b) {
      if (*record.labels & (1ULL << b)) label_postings_[b].insert(record.id);
    }
    exact_postings_[*record.labels].insert(record.id);
  }
  if (record.shard_key) shard_members_[*record.shard_key].insert(record.id);
}

void Collection::unindex_labels(const VectorRecord& record) {
  if (record.labels) {
    for (int b = 0; b < 64; ++b) {
      if (*record.labels & (1ULL << b)) label_postings_[b].erase(record.id);
    }
    auto it = exact_postings_.find(*record.labels);
    if (it != exact_postings_.end()) {
      it->second.erase(record.id);
      if (it->second.empty()) exact_postings_.erase(it);
    }
  }
  if (record.shard_key) {
    auto it = shard_members_.find(*record.shard_key);
    if (it != shard_members_.end()) {
      it->second.erase(record.id);
      if (it->second.empty()) shard_members_.erase(it);
    }
  }
}

void Collection::write_quant_term(const VectorRecord& record,
                                  OpCounters* counters) {
  const auto code = encode(record.embedding, schemas_.active());
  providers_->suite().quant->put(
      context(record.shard_key).with_counters(counters), record.id, code);
}

void Collection::insert(VectorRecord record) {
  validate_record(record);
  auto guard = engine_.write_guard();
  engine_.docs().put(record);
  index_labels(record);
  if (!has_schema()) {
    pending_.insert(record.id);
    return;
  }
  const VectorRecord* stored = engine_.docs().get(record.id);
  write_quant_term(*stored, &mutation_counters_);
  if (config_.build_graph) {
    graph_handle(stored->shard_key)
        .insert(stored->id, stored->embedding, &mutation_counters_);
  }
}

void Collection::insert_batch(std::vector<VectorRecord> records) {
  for (auto& r : records) validate_record(r);

  if (!has_schema()) {
    auto guard = engine_.write_guard();
    for (auto& r : records) {
      engine_.docs().put(r);
      index_labels(r);
      pending_.insert(r.id);
    }
    return;
  }

  // Group by shard: each shard is an independent logical index.
  std::map<std::optional<std::string>, std::vector<const VectorRecord*>>
      groups;
  {
    auto guard = engine_.write_guard();
    for (auto& r : records) {
      engine_.docs().put(r);
      index_labels(r);
      const VectorRecord* stored = engine_.docs().get(r.id);
      write_quant_term(*stored, &mutation_counters_);
      groups[config_.sharded ? stored->shard_key : std::nullopt].push_back(
          stored);
    }
  }
  if (!config_.build_graph) return;

  for (auto& [shard, members] : groups) {
    std::size_t offset = 0;
    while (offset < members.size()) {
      const std::size_t n = std::min<std::size_t>(
          config_.index.minibatch_max, members.size() - offset);
      std::vector<GraphIndex::BatchItem> batch;
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const VectorRecord* r = members[offset + i];
        batch.push_back({r->id, r->embedding});
      }
      GraphIndex graph = graph_handle(shard);
      std::size_t first = 0;
      if (graph.empty()) {
        auto guard = engine_.write_guard();
        graph.insert(batch[0].id, batch[0].embedding, &mutation_counters_);
        first = 1;
      }
      if (first < batch.size()) {
        GraphIndex::Phase1Result phase1;
        {
          auto guard = engine_.read_guard();
          phase1 = graph.minibatch_phase1(
              std::span<const GraphIndex::BatchItem>(batch).subspan(first),
              config_.effective_parallelism(), &mutation_counters_);
        }
        {
          auto guard = engine_.write_guard();
          graph.minibatch_phase2(phase1, &mutation_counters_);
        }
      }
      offset += n;
    }
  }
}

void Collection::remove(VectorId id, DeletePolicy policy) {
  auto guard = engine_.write_guard();
  const VectorRecord* stored = engine_.docs().get(id);
  if (stored == nullptr) {
    throw Error(ErrorCode::kNotFound,
                "document id " + std::to_string(id) + " not found");
  }
  const VectorRecord record = *stored;  // survives the erase below

  if (pending_.count(id) != 0) {
    pending_.erase(id);
  } else if (has_schema()) {
    if (config_.build_graph) {
      GraphIndex graph = graph_handle(record.shard_key);
      if (policy == DeletePolicy::kInplace) {
        graph.inplace_delete(id, &mutation_counters_);
      } else {
        graph.drop_delete(id, &mutation_counters_);
      }
    } else {
      providers_->suite().quant->remove(
          context(record.shard_key).with_counters(&mutation_counters_), id);
    }
  }
  unindex_labels(record);
  engine_.docs().erase(id);
}

void Collection::replace(VectorRecord record) {
  validate_record(record);
  auto guard = engine_.write_guard();
  const VectorRecord* stored = engine_.docs().get(record.id);
  if (stored == nullptr) {
    throw Error(ErrorCode::kNotFound,
                "document id " + std::to_string(record.id) + " not found");
  }
  if (config_.sharded && stored->shard_key != record.shard_key) {
    throw Error(ErrorCode::kContract,
                "replace cannot move a record across shards");
  }
  unindex_labels(*stored);
  engine_.docs().overwrite(record);
  const VectorRecord* now = engine_.docs().get(record.id);
  index_labels(*now);
  if (pending_.count(record.id) != 0 || !has_schema()) return;
  write_quant_term(*now, &mutation_counters_);
  if (config_.build_graph) {
    graph_handle(now->shard_key)
        .replace(now->id, now->embedding, &mutation_counters_);
  }
}

std::vector<ConsolidateReport> Collection::consolidate(std::uint64_t budget) {
  auto guard = engine_.write_guard();
  std::vector<ConsolidateReport> reports;
  for (auto& [shard, meta] : metas_) {
    GraphIndex graph(providers_->suite(), context(shard), config_.index,
                     &schemas_, &meta, NavigationMode::kQuantized);
    reports.push_back(graph.consolidate_deleted(budget, &mutation_counters_));
  }
  return reports;
}

void Collection::train_initial_schema(std::uint64_t sample_limit) {
  std::vector<const VectorRecord*> sample;
  {
    auto guard = engine_.read_guard();
    engine_.docs().for_each([&](const VectorRecord& r) {
      sample.push_back(&r);
      return sample.size() < sample_limit;
    });
  }
  SampleMatrix rows(sample.size(), config_.index.dimension);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (std::uint32_t d = 0; d < config_.index.dimension; ++d) {
      rows(static_cast<Eigen::Index>(i), d) = sample[i]->embedding[d];
    }
  }
  PqTrainParams params;
  params.num_subspaces = config_.pq_subspaces;
  params.version = 1;
  params.kmeans_iters = config_.pq_train_iters;
  params.seed = config_.pq_seed;
  PqSchema schema = train_schema(rows, params, nullptr);

  auto guard = engine_.write_guard();
  engine_.terms().put_patch(schema_term_key(path_prefix_, schema.version),
                            Patch::overwrite(schema.serialize()));
  schemas_.add(std::move(schema));
  guard.unlock();
  graph_insert_backlog();
}

void Collection::graph_insert_backlog() {
  // Quant terms for everything pending, then graph inserts in id order.
  std::vector<VectorId> backlog(pending_.begin(), pending_.end());
  {
    auto guard = engine_.write_guard();
    for (VectorId id : backlog) {
      const VectorRecord* r = engine_.docs().get(id);
      if (r != nullptr) write_quant_term(*r, &mutation_counters_);
    }
    pending_.clear();
  }
  if (!config_.build_graph) return;

  std::map<std::optional<std::string>, std::vector<const VectorRecord*>>
      groups;
  {
    auto guard = engine_.read_guard();
    for (VectorId id : backlog) {
      const VectorRecord* r = engine_.docs().get(id);
      if (r == nullptr) continue;
      groups[config_.sharded ? r->shard_key : std::nullopt].push_back(r);
    }
  }
  for (auto& [shard, members] : groups) {
    std::size_t offset = 0;
    while (offset < members.size()) {
      const std::size_t n = std::min<std::size_t>(
          config_.index.minibatch_max, members.size() - offset);
      std::vector<GraphIndex::BatchItem> batch;
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch.push_back(
            {members[offset + i]->id, members[offset + i]->embedding});
      }
      GraphIndex graph = graph_handle(shard);
      std::size_t first = 0;
      if (graph.empty()) {
        auto guard = engine_.write_guard();
        graph.insert(batch[0].id, batch[0].embedding, &mutation_counters_);
        first = 1;
      }
      if (first < batch.size()) {
        GraphIndex::Phase1Result phase1;
        {
          auto guard = engine_.read_guard();
          phase1 = graph.minibatch_phase1(
              std::span<const GraphIndex::BatchItem>(batch).subspan(first),
              config_.effective_parallelism(), &mutation_counters_);
        }
        {
          auto guard = engine_.write_guard();
          graph.minibatch_phase2(phase1, &mutation_counters_);
        }
      }
      offset += n;
    }
  }
}

void Collection::requantize(std::uint64_t sample_limit) {
  if (!has_schema()) {
    throw Error(ErrorCode::kStaleSchema,
                "requantize before initial schema training");
  }
  // Seeded resample of the live set.
  std::vector<VectorId> ids;
  {
    auto guard = engine_.read_guard();
    ids.reserve(engine_.docs().size());
    engine_.docs().for_each([&](const VectorRecord& r) {
      ids.push_back(r.id);
      return true;
    });
  }
  const std::uint32_t next_version = schemas_.active().version + 1;
  std::vector<VectorId> sample_ids;
  if (ids.size() <= sample_limit) {
    sample_ids = ids;
  } else {
    std::mt19937_64 rng(config_.pq_seed + next_version);
    std::sample(ids.begin(), ids.end(), std::back_inserter(sample_ids),
                sample_limit, rng);
  }

  SampleMatrix rows(sample_ids.size(), config_.index.dimension);
  {
    auto guard = engine_.read_guard();
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
      const VectorRecord* r = engine_.docs().get(sample_ids[i]);
      for (std::uint32_t d = 0; d < config_.index.dimension; ++d) {
        rows(static_cast<Eigen::Index>(i), d) = r->embedding[d];
      }
    }
  }

  PqTrainParams params;
  params.num_subspaces = config_.pq_subspaces;
  params.version = next_version;
  params.kmeans_iters = config_.pq_train_iters;
  params.seed = config_.pq_seed;
  PqSchema schema = train_schema(rows, params, &schemas_.active());

  auto guard = engine_.write_guard();
  engine_.terms().put_patch(schema_term_key(path_prefix_, schema.version),
                            Patch::overwrite(schema.serialize()));
  schemas_.add(std::move(schema));

  // Re-generate every quant term in place under the new schema.
  QuantVectorProvider* quant = providers_->suite().quant;
  engine_.docs().for_each([&](const VectorRecord& r) {
    if (pending_.count(r.id) != 0) return true;
    const auto code = encode(r.embedding, schemas_.active());
    quant->put(context(r.shard_key).with_counters(&mutation_counters_), r.id,
               code);
    return true;
  });
}

std::shared_ptr<const IdBitmap> Collection::materialize_filter(
    const LabelFilter& filter) const {
  std::vector<VectorId> out;
  switch (filter.mode) {
    case LabelFilter::Mode::kAny: {
      std::set<VectorId> merged;
      for (int b = 0; b < 64; ++b) {
        if (filter.mask & (1ULL << b)) {
          merged.insert(label_postings_[b].begin(), label_postings_[b].end());
        }
      }
      out.assign(merged.begin(), merged.end());
      break;
    }
    case LabelFilter::Mode::kAll: {
      bool first = true;
      std::vector<VectorId> acc;
      for (int b = 0; b < 64; ++b) {
        if (!(filter.mask & (1ULL << b))) continue;
        std::vector<VectorId> bits(label_postings_[b].begin(),
                                   label_postings_[b].end());
        if (first) {
          acc = std::move(bits);
          first = false;
        } else {
          std::vector<VectorId> tmp;
          std::set_intersection(acc.begin(), acc.end(), bits.begin(),
                                bits.end(), std::back_inserter(tmp));
          acc = std::move(tmp);
        }
      }
      out = std::move(acc);
      break;
    }
    case LabelFilter::Mode::kExact: {
      auto it = exact_postings_.find(filter.mask);
      if (it != exact_postings_.end()) {
        out.assign(it->second.begin(), it->second.end());
      }
      break;
    }
  }
  return std::make_shared<IdBitmap>(std::move(out));
}

std::shared_ptr<const IdBitmap> Collection::shard_members(
    const std::string& value) const {
  auto it = shard_members_.find(value);
  if (it == shard_members_.end()) return std::make_shared<IdBitmap>();
  return std::make_shared<IdBitmap>(
      std::vector<VectorId>(it->second.begin(), it->second.end()));
}

PlanInputs Collection::plan_inputs(const VectorQuery& query) const {
  PlanInputs inputs;
  inputs.live_count = live_count();
  inputs.has_schema = has_schema();
  inputs.sharded = config_.sharded;

  std::optional<std::string> routed_shard;
  std::shared_ptr<const IdBitmap> matched;
  if (query.filter) matched = materialize_filter(*query.filter);

  if (query.shard_key) {
    if (config_.sharded) {
      routed_shard = query.shard_key;
      inputs.shard_known =
          shard_members_.find(*query.shard_key) != shard_members_.end();
    } else {
      // Shard predicate folded into the filter bitmap.
      auto members = shard_members(*query.shard_key);
      if (matched) {
        std::vector<VectorId> merged;
        std::set_intersection(matched->ids().begin(), matched->ids().end(),
                              members->ids().begin(), members->ids().end(),
                              std::back_inserter(merged));
        matched = std::make_shared<IdBitmap>(std::move(merged));
      } else {
        matched = members;
      }
    }
  }
  inputs.matched = matched;

  const std::optional<std::string> meta_key =
      config_.sharded ? routed_shard : std::nullopt;
  auto it = metas_.find(meta_key);
  inputs.graph_ready = it != metas_.end() && it->second.start.has_value() &&
                       pending_.empty();
  return inputs;
}

void Collection::persist_meta() {
  for (const auto& [shard, meta] : metas_) {
    const std::string key = "graphmeta:" + shard.value_or("\x01*");
    engine_.set_meta(key, meta.serialize());
  }
  std::string pending_blob;
  for (VectorId id : pending_) {
    pending_blob.append(reinterpret_cast<const char*>(&id), 8);
  }
  engine_.set_meta("pending", pending_blob);
}

void Collection::save(const std::string& path) {
  persist_meta();
  engine_.snapshot(path);
}

void Collection::load(const std::string& path) {
  engine_.restore(path);

  // Schema registry from schema terms.
  schemas_ = SchemaRegistry();
  engine_.terms().prefix_seek(
      schema_term_prefix(path_prefix_),
      [&](std::string_view, std::string_view value) {
        schemas_.add(PqSchema::deserialize(value));
        return true;
      });

  // Graph metas from the meta section.
  metas_.clear();
  const std::string unsharded_key = std::string("graphmeta:") + "\x01*";
  if (auto blob = engine_.get_meta(unsharded_key)) {
    metas_[std::nullopt] = GraphMeta::deserialize(*blob);
  }

  // Postings and shard members from the document store.
  for (auto& p : label_postings_) p.clear();
  exact_postings_.clear();
  shard_members_.clear();
  engine_.docs().for_each([&](const VectorRecord& r) {
    index_labels(r);
    return true;
  });
  for (const auto& [value, members] : shard_members_) {
    if (!config_.sharded) break;
    const std::string key = "graphmeta:" + value;
    if (auto blob = engine_.get_meta(key)) {
      metas_[value] = GraphMeta::deserialize(*blob);
    }
  }

  pending_.clear();
  if (auto blob = engine_.get_meta("pending")) {
    for (std::size_t i = 0; i + 8 <= blob->size(); i += 8) {
      VectorId id;
      std::memcpy(&id, blob->data() + i, 8);
      pending_.insert(id);
    }
  }

  // Rebuild provider mirrors for every logical index. On a sharded
  // collection all terms carry shard prefixes; an unsharded reload would
  // misparse them.
  const std::uint32_t version = schemas_.empty() ? 0 : schemas_.active().version;
  if (config_.sharded) {
    for (const auto& [value, members] : shard_members_) {
      providers_->reload_mirrors(context(value), version);
    }
  } else {
    providers_->reload_mirrors(context(std::nullopt), version);
  }
}

OpCounters Collection::take_mutation_counters() {
  OpCounters out = mutation_counters_;
  mutation_counters_ = OpCounters{};
  return out;
}

}  // namespace kvann
