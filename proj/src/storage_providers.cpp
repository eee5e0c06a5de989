#include "kvann/graph/storage_providers.hpp"

#include <cstring>

namespace kvann {

namespace {

struct TermKey {
  std::uint64_t shard = 0;
  bool has_shard = false;
  VectorId id = 0;

  bool operator==(const TermKey&) const = default;
};

struct TermKeyHash {
  std::size_t operator()(const TermKey& k) const {
    std::uint64_t h = k.id * 0x9e3779b97f4a7c15ULL;
    h ^= k.shard + 0x517cc1b727220a95ULL + (h << 6) + (h >> 2);
    h ^= k.has_shard ? 0x2545f4914f6cdd1dULL : 0;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

TermKey term_key(const Context& ctx, VectorId id) {
  TermKey k;
  k.id = id;
  if (ctx.shard) {
    k.has_shard = true;
    std::memcpy(&k.shard, ctx.shard->data(), 8);
  }
  return k;
}

void count_quant(const Context& ctx, ReadCounters& totals, std::uint64_t n = 1) {
  if (ctx.counters) ctx.counters->quant_reads += n;
  totals.quant_reads.fetch_add(n, std::memory_order_relaxed);
}

void count_adj(const Context& ctx, ReadCounters& totals, std::uint64_t n = 1) {
  if (ctx.counters) ctx.counters->adj_reads += n;
  totals.adj_reads.fetch_add(n, std::memory_order_relaxed);
}

void count_fullprec(const Context& ctx, ReadCounters& totals,
                    std::uint64_t n = 1) {
  if (ctx.counters) ctx.counters->fullprec_reads += n;
  totals.fullprec_reads.fetch_add(n, std::memory_order_relaxed);
}

}  // namespace

class StorageProviderSuite::QuantImpl : public QuantVectorProvider {
 public:
  explicit QuantImpl(StorageEngine& engine) : engine_(engine) {}

  Fetch<std::optional<QuantizedVector>> get(const Context& ctx,
                                            VectorId id) override {
    count_quant(ctx, engine_.counters());
    auto it = mirror_.find(term_key(ctx, id));
    if (it == mirror_.end()) {
      return Fetch<std::optional<QuantizedVector>>::ready(std::nullopt);
    }
    return Fetch<std::optional<QuantizedVector>>::ready(it->second);
  }

  void put(const Context& ctx, VectorId id,
           const QuantizedVector& value) override {
    std::vector<std::pair<std::string, Patch>> batch;
    const auto mk = term_key(ctx, id);
    auto it = mirror_.find(mk);
    if (it != mirror_.end()) {
      batch.emplace_back(
          quant_term_key(ctx.path, ctx.shard, id, it->second.codes),
          Patch::del());
    }
    batch.emplace_back(quant_term_key(ctx.path, ctx.shard, id, value.codes),
                       Patch::overwrite(std::string(quant_dummy_value())));
    engine_.terms().apply_batch(batch);
    mirror_[mk] = value;
  }

  void remove(const Context& ctx, VectorId id) override {
    const auto mk = term_key(ctx, id);
    auto it = mirror_.find(mk);
    if (it == mirror_.end()) return;
    engine_.terms().put_patch(
        quant_term_key(ctx.path, ctx.shard, id, it->second.codes),
        Patch::del());
    mirror_.erase(it);
  }

  void scan(const Context& ctx,
            const std::function<bool(VectorId, const QuantizedVector&)>& visit)
      override {
    scan_range_impl(ctx, quant_term_prefix(ctx.path, ctx.shard), visit);
  }

  void scan_id_range(
      const Context& ctx, VectorId lo, VectorId hi,
      const std::function<bool(VectorId, const QuantizedVector&)>& visit)
      override {
    const std::string lo_key = quant_term_id_prefix(ctx.path, ctx.shard, lo);
    std::string hi_key = quant_term_id_prefix(ctx.path, ctx.shard, hi);
    hi_key.append(256, '\xff');  // cover any code suffix for the hi id
    const bool has_shard = ctx.shard.has_value();
    engine_.terms().range_seek(
        lo_key, hi_key, [&](std::string_view key, std::string_view) {
          auto parts = parse_quant_term_key(key, has_shard);
          count_quant(ctx, engine_.counters());
          QuantizedVector qv;
          qv.codes = std::move(parts.codes);
          qv.schema_version = mirror_version(ctx, parts.id);
          return visit(parts.id, qv);
        });
  }

  void reload(const Context& ctx, std::uint32_t version) {
    // Drop this context's entries, then rebuild from the store.
    const bool has_shard = ctx.shard.has_value();
    const TermKey probe = term_key(ctx, 0);
    for (auto it = mirror_.begin(); it != mirror_.end();) {
      if (it->first.has_shard == has_shard &&
          (!has_shard || it->first.shard == probe.shard)) {
        it = mirror_.erase(it);
      } else {
        ++it;
      }
    }
    engine_.terms().prefix_seek(
        quant_term_prefix(ctx.path, ctx.shard),
        [&](std::string_view key, std::string_view) {
          auto parts = parse_quant_term_key(key, has_shard);
          QuantizedVector qv;
          qv.codes = std::move(parts.codes);
          qv.schema_version = version;
          TermKey mk = term_key(ctx, parts.id);
          mirror_[mk] = std::move(qv);
          return true;
        });
  }

 private:
  std::uint32_t mirror_version(const Context& ctx, VectorId id) const {
    auto it = mirror_.find(term_key(ctx, id));
    return it == mirror_.end() ? 0 : it->second.schema_version;
  }

  void scan_range_impl(
      const Context& ctx, const std::string& prefix,
      const std::function<bool(VectorId, const QuantizedVector&)>& visit) {
    const bool has_shard = ctx.shard.has_value();
    engine_.terms().prefix_seek(
        prefix, [&](std::string_view key, std::string_view) {
          auto parts = parse_quant_term_key(key, has_shard);
          count_quant(ctx, engine_.counters());
          QuantizedVector qv;
          qv.codes = std::move(parts.codes);
          qv.schema_version = mirror_version(ctx, parts.id);
          return visit(parts.id, qv);
        });
  }

  StorageEngine& engine_;
  std::unordered_map<TermKey, QuantizedVector, TermKeyHash> mirror_;
};

class StorageProviderSuite::VectorImpl : public FullVectorProvider {
 public:
  explicit VectorImpl(StorageEngine& engine) : engine_(engine) {}

  Fetch<std::optional<VectorRecord>> get(const Context& ctx,
                                         VectorId id) override {
    count_fullprec(ctx, engine_.counters());
    const VectorRecord* rec = engine_.docs().get(id);
    if (rec == nullptr) {
      return Fetch<std::optional<VectorRecord>>::ready(std::nullopt);
    }
    return Fetch<std::optional<VectorRecord>>::ready(*rec);
  }

  void scan(const Context& ctx,
            const std::function<bool(const VectorRecord&)>& visit) override {
    engine_.docs().for_each([&](const VectorRecord& rec) {
      if (ctx.shard) {
        if (!rec.shard_key ||
            hash_shard_key(*rec.shard_key) != *ctx.shard) {
          return true;
        }
      }
      count_fullprec(ctx, engine_.counters());
      return visit(rec);
    });
  }

 private:
  StorageEngine& engine_;
};

class StorageProviderSuite::NeighborImpl : public NeighborProvider {
 public:
  explicit NeighborImpl(StorageEngine& engine) : engine_(engine) {}

  Fetch<std::optional<std::vector<VectorId>>> get(const Context& ctx,
                                                  VectorId id) override {
    count_adj(ctx, engine_.counters());
    auto it = mirror_.find(term_key(ctx, id));
    if (it == mirror_.end()) {
      return Fetch<std::optional<std::vector<VectorId>>>::ready(std::nullopt);
    }
    return Fetch<std::optional<std::vector<VectorId>>>::ready(it->second);
  }

  void apply(const Context& ctx,
             std::span<const NeighborPatch> patches) override {
    std::vector<std::pair<std::string, Patch>> batch;
    batch.reserve(patches.size());
    for (const auto& p : patches) {
      std::string key = adjacency_term_key(ctx.path, ctx.shard, p.target);
      switch (p.kind) {
        case NeighborPatch::Kind::kAppend:
          batch.emplace_back(std::move(key),
                             Patch::append(encode_adjacency_value(p.neighbors)));
          break;
        case NeighborPatch::Kind::kOverwrite:
          batch.emplace_back(
              std::move(key),
              Patch::overwrite(encode_adjacency_value(p.neighbors)));
          break;
        case NeighborPatch::Kind::kDelete:
          batch.emplace_back(std::move(key), Patch::del());
          break;
      }
    }
    engine_.terms().apply_batch(batch);
    // Store accepted the whole batch; replay it onto the mirror.
    for (const auto& p : patches) {
      const auto mk = term_key(ctx, p.target);
      switch (p.kind) {
        case NeighborPatch::Kind::kAppend: {
          auto& list = mirror_[mk];
          list.insert(list.end(), p.neighbors.begin(), p.neighbors.end());
          break;
        }
        case NeighborPatch::Kind::kOverwrite:
          mirror_[mk] = p.neighbors;
          break;
        case NeighborPatch::Kind::kDelete:
          mirror_.erase(mk);
          break;
      }
    }
  }

  void scan_from(const Context& ctx, VectorId from,
                 const std::function<bool(VectorId, const std::vector<VectorId>&)>&
                     visit) override {
    const std::string lo = adjacency_term_key(ctx.path, ctx.shard, from);
    const std::string hi =
        adjacency_term_key(ctx.path, ctx.shard, ~VectorId{0});
    const bool has_shard = ctx.shard.has_value();
    engine_.terms().range_seek(
        lo, hi, [&](std::string_view key, std::string_view value) {
          const VectorId id = parse_adjacency_term_key(key, has_shard);
          count_adj(ctx, engine_.counters());
          return visit(id, decode_adjacency_value(value));
        });
  }

  void reload(const Context& ctx) {
    const bool has_shard = ctx.shard.has_value();
    const TermKey probe = term_key(ctx, 0);
    for (auto it = mirror_.begin(); it != mirror_.end();) {
      if (it->first.has_shard == has_shard &&
          (!has_shard || it->first.shard == probe.shard)) {
        it = mirror_.erase(it);
      } else {
        ++it;
      }
    }
    engine_.terms().prefix_seek(
        adjacency_term_prefix(ctx.path, ctx.shard),
        [&](std::string_view key, std::string_view value) {
          const VectorId id = parse_adjacency_term_key(key, has_shard);
          mirror_[term_key(ctx, id)] = decode_adjacency_value(value);
          return true;
        });
  }

 private:
  StorageEngine& engine_;
  std::unordered_map<TermKey, std::vector<VectorId>, TermKeyHash> mirror_;
};

StorageProviderSuite::StorageProviderSuite(StorageEngine& engine)
    : engine_(engine),
      quant_(std::make_unique<QuantImpl>(engine)),
      vectors_(std::make_unique<VectorImpl>(engine)),
      neighbors_(std::make_unique<NeighborImpl>(engine)) {}

StorageProviderSuite::~StorageProviderSuite() = default;

ProviderSuite StorageProviderSuite::suite() {
  return ProviderSuite{quant_.get(), vectors_.get(), neighbors_.get()};
}

void StorageProviderSuite::reload_mirrors(const Context& ctx) {
  reload_mirrors(ctx, 0);
}

void StorageProviderSuite::reload_mirrors(const Context& ctx,
                                          std::uint32_t quant_version) {
  quant_->reload(ctx, quant_version);
  neighbors_->reload(ctx);
}

}  // namespace kvann
