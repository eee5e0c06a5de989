#pragma once

#include <array>
#include <map>
#include <memory>
#include <set>
#include <unordered_map>

#include "kvann/core/types.hpp"
#include "kvann/graph/graph_index.hpp"
#include "kvann/graph/storage_providers.hpp"
#include "kvann/query/query_types.hpp"
#include "kvann/quantization/pq.hpp"
#include "kvann/storage/storage_engine.hpp"

namespace kvann {

struct CollectionConfig {
  IndexConfig index;
  std::string vector_path = "/embedding";
  std::uint32_t pq_subspaces = 0;  // 0 -> default for the dimension
  std::uint32_t pq_train_iters = 25;
  std::uint64_t pq_seed = 0x5eed;
  bool sharded = false;
  bool build_graph = true;
  unsigned insert_parallelism = 8;
  bool deterministic = false;
  std::size_t max_chain_length = 15;

  unsigned effective_parallelism() const {
    return deterministic ? 1 : std::max(1u, insert_parallelism);
  }
};

/// One logical collection in one partition: document store, quantized and
/// adjacency terms, schema registry, and one graph per shard (or a single
/// unsharded graph). Single writer, many readers; every public operation
/// takes the appropriate engine guard.
class Collection {
 public:
  explicit Collection(CollectionConfig config);

  const CollectionConfig& config() const { return config_; }
  StorageEngine& engine() { return engine_; }
  const SchemaRegistry& schemas() const { return schemas_; }

  std::uint64_t live_count() const;
  bool has_schema() const { return !schemas_.empty(); }
  /// Ids inserted before a schema existed, not yet in the graph.
  std::uint64_t pending_count() const { return pending_.size(); }

  // -- mutations ------------------------------------------------------

  void insert(VectorRecord record);
  void insert_batch(std::vector<VectorRecord> records);
  void remove(VectorId id, DeletePolicy policy = DeletePolicy::kInplace);
  void replace(VectorRecord record);

  /// Background edge cleanup over every logical graph, `budget` lists each.
  std::vector<ConsolidateReport> consolidate(std::uint64_t budget);

  // -- quantization lifecycle ------------------------------------------

  /// Trains schema version 1 from the first `sample_limit` live vectors,
  /// then backfills quant terms and graph-inserts the backlog.
  void train_initial_schema(std::uint64_t sample_limit = 1000);

  /// Warm-start retrain from a resample, then re-encode every quant term
  /// in place. The graph is untouched.
  void requantize(std::uint64_t sample_limit = 25000);

  // -- queries ----------------------------------------------------------

  PlanInputs plan_inputs(const VectorQuery& query) const;
  QueryResult query(const VectorQuery& query);

  // -- persistence ------------------------------------------------------

  void save(const std::string& path);
  void load(const std::string& path);

  // -- counters ---------------------------------------------------------

  OpCounters take_mutation_counters();
  std::string counters_csv() const { return engine_.counters_csv(); }

  // Used by the executor; callers hold a read guard.
  Context context(const std::optional<std::string>& shard_key) const;
  /// Lookup-only graph handle; requires the shard's meta to exist (which
  /// PlanInputs::graph_ready guarantees for planned graph paths).
  GraphIndex query_graph(const std::optional<std::string>& shard_key);
  ProviderSuite providers() { return providers_->suite(); }

 private:
  friend QueryResult execute_plan(Collection&, const QueryPlan&,
                                  const VectorQuery&);

  void validate_record(VectorRecord& record) const;
  void index_labels(const VectorRecord& record);
  void unindex_labels(const VectorRecord& record);
  GraphIndex graph_handle(const std::optional<std::string>& shard_key);
  std::shared_ptr<const IdBitmap> materialize_filter(
      const LabelFilter& filter) const;
  std::shared_ptr<const IdBitmap> shard_members(const std::string& value) const;
  void write_quant_term(const VectorRecord& record, OpCounters* counters);
  void graph_insert_backlog();
  void persist_meta();

  CollectionConfig config_;
  StorageEngine engine_;
  std::unique_ptr<StorageProviderSuite> providers_;
  SchemaRegistry schemas_;
  PathPrefix path_prefix_{};

  // One graph meta per shard value (nullopt key = the unsharded graph).
  std::map<std::optional<std::string>, GraphMeta> metas_;

  std::set<VectorId> pending_;
  std::array<std::set<VectorId>, 64> label_postings_;
  std::map<std::uint64_t, std::set<VectorId>> exact_postings_;
  std::map<std::string, std::set<VectorId>> shard_members_;

  OpCounters mutation_counters_;
};

}  // namespace kvann
