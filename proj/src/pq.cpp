#include "kvann/quantization/pq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "kvann/core/distance.hpp"

namespace kvann {

namespace {

void append_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

template <class T>
void append_pod(std::string& out, T v) {
  append_bytes(out, &v, sizeof(v));
}

template <class T>
T read_pod(std::string_view blob, std::size_t& off) {
  if (off + sizeof(T) > blob.size()) {
    throw Error(ErrorCode::kParse, "schema blob truncated at offset " +
                                       std::to_string(off));
  }
  T v;
  std::memcpy(&v, blob.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

constexpr char kSchemaMagic[4] = {'K', 'V', 'P', 'Q'};
constexpr std::uint32_t kSchemaFormatVersion = 1;

}  // namespace

std::uint32_t PqSchema::dimension() const {
  std::uint32_t d = 0;
  for (auto x : subspace_dims) d += x;
  return d;
}

std::uint32_t PqSchema::subspace_offset(std::uint32_t s) const {
  std::uint32_t off = 0;
  for (std::uint32_t i = 0; i < s; ++i) off += subspace_dims[i];
  return off;
}

std::string PqSchema::serialize() const {
  std::string out;
  append_bytes(out, kSchemaMagic, 4);
  append_pod(out, kSchemaFormatVersion);
  append_pod(out, version);
  append_pod(out, num_subspaces);
  for (auto d : subspace_dims) append_pod(out, d);
  append_pod<std::uint8_t>(out, parent_version.has_value() ? 1 : 0);
  append_pod<std::uint32_t>(out, parent_version.value_or(0));
  for (const auto& cb : codebooks) {
    append_bytes(out, cb.data(), sizeof(float) * cb.size());
  }
  return out;
}

PqSchema PqSchema::deserialize(std::string_view blob) {
  std::size_t off = 0;
  char magic[4];
  if (blob.size() < 4) throw Error(ErrorCode::kParse, "schema blob too short");
  std::memcpy(magic, blob.data(), 4);
  off = 4;
  if (std::memcmp(magic, kSchemaMagic, 4) != 0) {
    throw Error(ErrorCode::kParse, "bad schema magic");
  }
  const auto fmt = read_pod<std::uint32_t>(blob, off);
  if (fmt != kSchemaFormatVersion) {
    throw Error(ErrorCode::kParse, "unsupported schema format version");
  }
  PqSchema s;
  s.version = read_pod<std::uint32_t>(blob, off);
  s.num_subspaces = read_pod<std::uint32_t>(blob, off);
  if (s.num_subspaces == 0 || s.num_subspaces > 4096) {
    throw Error(ErrorCode::kParse, "implausible subspace count");
  }
  s.subspace_dims.resize(s.num_subspaces);
  for (auto& d : s.subspace_dims) d = read_pod<std::uint32_t>(blob, off);
  const auto has_parent = read_pod<std::uint8_t>(blob, off);
  const auto parent = read_pod<std::uint32_t>(blob, off);
  if (has_parent) s.parent_version = parent;
  s.codebooks.reserve(s.num_subspaces);
  for (std::uint32_t i = 0; i < s.num_subspaces; ++i) {
    const std::uint32_t dsub = s.subspace_dims[i];
    SampleMatrix cb(kPqCentroidsPerSubspace, dsub);
    const std::size_t bytes = sizeof(float) * cb.size();
    if (off + bytes > blob.size()) {
      throw Error(ErrorCode::kParse, "schema blob truncated in codebook " +
                                         std::to_string(i));
    }
    std::memcpy(cb.data(), blob.data() + off, bytes);
    off += bytes;
    s.codebooks.push_back(std::move(cb));
  }
  if (off != blob.size()) {
    throw Error(ErrorCode::kParse, "trailing bytes in schema blob");
  }
  return s;
}

std::uint32_t default_num_subspaces(std::uint32_t dimension) {
  const double raw = std::max(dimension / 12.0, 8.0);
  const double p = std::round(std::log2(raw));
  auto m = static_cast<std::uint32_t>(std::pow(2.0, p));
  return std::min(m, dimension);
}

namespace {

std::vector<std::uint32_t> split_dims(std::uint32_t dim, std::uint32_t m) {
  // Equal contiguous blocks, remainder to the first subspaces.
  std::vector<std::uint32_t> dims(m, dim / m);
  for (std::uint32_t i = 0; i < dim % m; ++i) dims[i] += 1;
  return dims;
}

// Row index of the nearest centroid for each row of `points`, first index
// on ties. Also fills per-row min squared distances when `dists` given.
void assign_rows(const Eigen::Ref<const SampleMatrix>& points,
                 const SampleMatrix& centroids,
                 std::vector<std::uint32_t>& assignment,
                 Eigen::VectorXf* dists) {
  const Eigen::Index n = points.rows();
  const Eigen::VectorXf cnorm = centroids.rowwise().squaredNorm();
  const Eigen::VectorXf xnorm = points.rowwise().squaredNorm();
  assignment.resize(static_cast<std::size_t>(n));
  if (dists) dists->resize(n);
  // Blocked GEMM keeps the n x k score matrix small.
  constexpr Eigen::Index kBlock = 4096;
  for (Eigen::Index b = 0; b < n; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - b);
    SampleMatrix scores = points.middleRows(b, rows) * centroids.transpose();
    scores *= -2.0f;
    scores.rowwise() += cnorm.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index j = 0;
      const float best = scores.row(i).minCoeff(&j);
      assignment[static_cast<std::size_t>(b + i)] =
          static_cast<std::uint32_t>(j);
      if (dists) (*dists)(b + i) = std::max(0.0f, best + xnorm(b + i));
    }
  }
}

}  // namespace

KmeansResult kmeans(const Eigen::Ref<const SampleMatrix>& points,
                    std::uint32_t k, std::uint32_t iters, std::uint64_t seed,
                    const SampleMatrix* warm_start) {
  const Eigen::Index n = points.rows();
  const Eigen::Index dim = points.cols();
  if (n < static_cast<Eigen::Index>(k)) {
    throw Error(ErrorCode::kDegenerateTraining,
                "kmeans: fewer points than clusters (" + std::to_string(n) +
                    " < " + std::to_string(k) + ")");
  }
  std::mt19937_64 rng(seed);
  SampleMatrix centroids;
  if (warm_start != nullptr) {
    centroids = *warm_start;
  } else {
    // k-means++ seeding.
    centroids.resize(k, dim);
    std::uniform_int_distribution<Eigen::Index> uni(0, n - 1);
    centroids.row(0) = points.row(uni(rng));
    Eigen::VectorXf d2 =
        (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    std::vector<double> weights(static_cast<std::size_t>(n));
    for (std::uint32_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        weights[static_cast<std::size_t>(i)] = std::max(0.0f, d2(i));
        total += weights[static_cast<std::size_t>(i)];
      }
      Eigen::Index pick;
      if (total <= 0.0) {
        pick = uni(rng);
      } else {
        std::discrete_distribution<Eigen::Index> dd(weights.begin(),
                                                    weights.end());
        pick = dd(rng);
      }
      centroids.row(c) = points.row(pick);
      d2 = d2.cwiseMin(
          (points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
  }

  std::vector<std::uint32_t> assignment;
  Eigen::VectorXf assign_d2;
  for (std::uint32_t it = 0; it < iters; ++it) {
    assign_rows(points, centroids, assignment, &assign_d2);
    SampleMatrix sums = SampleMatrix::Zero(k, dim);
    std::vector<std::uint32_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts[assignment[static_cast<std::size_t>(i)]]++;
    }
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (std::uint32_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<float>(counts[c]);
      } else {
        // Re-seed from the point farthest from its assigned centroid.
        Eigen::Index far = 0;
        float far_d = -1.0f;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (taken[static_cast<std::size_t>(i)]) continue;
          if (assign_d2(i) > far_d) {
            far_d = assign_d2(i);
            far = i;
          }
        }
        taken[static_cast<std::size_t>(far)] = 1;
        centroids.row(c) = points.row(far);
      }
    }
  }
  KmeansResult result;
  result.centroids = std::move(centroids);
  assign_rows(points, result.centroids, result.assignment, nullptr);
  return result;
}

PqSchema train_schema(const Eigen::Ref<const SampleMatrix>& sample,
                      const PqTrainParams& params, const PqSchema* warm_start) {
  const auto n = sample.rows();
  const auto dim = static_cast<std::uint32_t>(sample.cols());
  if (n == 0) {
    throw Error(ErrorCode::kDegenerateTraining, "empty training sample");
  }
  if (n < static_cast<Eigen::Index>(kPqCentroidsPerSubspace)) {
    throw Error(ErrorCode::kDegenerateTraining,
                "training sample smaller than 256 per subspace (" +
                    std::to_string(n) + " rows)");
  }
  std::uint32_t m = params.num_subspaces;
  if (m == 0) m = default_num_subspaces(dim);
  if (m > dim) {
    throw Error(ErrorCode::kConfig, "num_subspaces exceeds dimension");
  }

  PqSchema schema;
  schema.version = params.version;
  schema.num_subspaces = m;
  schema.subspace_dims = split_dims(dim, m);
  if (warm_start != nullptr) {
    if (warm_start->num_subspaces != m ||
        warm_start->subspace_dims != schema.subspace_dims) {
      throw Error(ErrorCode::kConfig,
                  "warm start schema has a different subspace layout");
    }
    schema.parent_version = warm_start->version;
  }

  schema.codebooks.reserve(m);
  std::uint32_t off = 0;
  for (std::uint32_t s = 0; s < m; ++s) {
    const std::uint32_t dsub = schema.subspace_dims[s];
    auto result = kmeans(sample.middleCols(off, dsub), kPqCentroidsPerSubspace,
                         params.kmeans_iters, params.seed + s,
                         warm_start ? &warm_start->codebooks[s] : nullptr);
    schema.codebooks.push_back(std::move(result.centroids));
    off += dsub;
  }
  return schema;
}

QuantizedVector encode(std::span<const float> v, const PqSchema& schema) {
  Eigen::Map<const SampleMatrix> row(v.data(), 1,
                                     static_cast<Eigen::Index>(v.size()));
  auto codes = encode_batch(row, schema);
  return std::move(codes.front());
}

std::vector<QuantizedVector> encode_batch(
    const Eigen::Ref<const SampleMatrix>& rows, const PqSchema& schema) {
  if (static_cast<std::uint32_t>(rows.cols()) != schema.dimension()) {
    throw Error(ErrorCode::kConfig, "encode: dimension mismatch");
  }
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<QuantizedVector> out(n);
  for (auto& q : out) {
    q.codes.resize(schema.num_subspaces);
    q.schema_version = schema.version;
  }
  std::vector<std::uint32_t> assignment;
  std::uint32_t off = 0;
  for (std::uint32_t s = 0; s < schema.num_subspaces; ++s) {
    const std::uint32_t dsub = schema.subspace_dims[s];
    assign_rows(rows.middleCols(off, dsub), schema.codebooks[s], assignment,
                nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].codes[s] = static_cast<std::uint8_t>(assignment[i]);
    }
    off += dsub;
  }
  return out;
}

std::vector<float> decode(const QuantizedVector& x, const PqSchema& schema) {
  if (x.codes.size() != schema.num_subspaces) {
    throw Error(ErrorCode::kConfig, "decode: code length mismatch");
  }
  std::vector<float> out(schema.dimension());
  std::uint32_t off = 0;
  for (std::uint32_t s = 0; s < schema.num_subspaces; ++s) {
    const std::uint32_t dsub = schema.subspace_dims[s];
    const auto& cb = schema.codebooks[s];
    std::memcpy(out.data() + off, cb.row(x.codes[s]).data(),
                sizeof(float) * dsub);
    off += dsub;
  }
  return out;
}

QueryDistanceTable build_query_table(std::span<const float> q,
                                     const PqSchema& schema, Metric metric) {
  if (q.size() != schema.dimension()) {
    throw Error(ErrorCode::kConfig, "query table: dimension mismatch");
  }
  QueryDistanceTable table;
  table.schema_version = schema.version;
  table.metric = metric;
  table.num_subspaces = schema.num_subspaces;
  table.partials.resize(static_cast<std::size_t>(schema.num_subspaces) *
                        kPqCentroidsPerSubspace);

  // Cosine works on the normalized query; partials carry the negated dot and
  // the reconstruction norm is folded in via a second lookup table.
  std::vector<float> qn;
  std::span<const float> qq = q;
  if (metric == Metric::kCosine) {
    qn.assign(q.begin(), q.end());
    l2_normalize(qn);
    qq = qn;
    table.bias = 1.0f;
  }

  std::uint32_t off = 0;
  for (std::uint32_t s = 0; s < schema.num_subspaces; ++s) {
    const std::uint32_t dsub = schema.subspace_dims[s];
    const auto& cb = schema.codebooks[s];
    Eigen::Map<const Eigen::RowVectorXf> qs(qq.data() + off, dsub);
    Eigen::Map<Eigen::VectorXf> part(
        table.partials.data() +
            static_cast<std::size_t>(s) * kPqCentroidsPerSubspace,
        kPqCentroidsPerSubspace);
    switch (metric) {
      case Metric::kEuclidean:
        part = (cb.rowwise() - qs).rowwise().squaredNorm();
        break;
      case Metric::kInnerProduct:
      case Metric::kCosine:
        part = -(cb * qs.transpose());
        break;
    }
    off += dsub;
  }
  if (metric == Metric::kCosine) {
    table.sq_norms.resize(table.partials.size());
    std::uint32_t so = 0;
    for (std::uint32_t s = 0; s < schema.num_subspaces; ++s) {
      Eigen::Map<Eigen::VectorXf> norms(
          table.sq_norms.data() +
              static_cast<std::size_t>(s) * kPqCentroidsPerSubspace,
          kPqCentroidsPerSubspace);
      norms = schema.codebooks[s].rowwise().squaredNorm();
      so += schema.subspace_dims[s];
    }
  }
  return table;
}

Distance asymmetric_distance(const QueryDistanceTable& table,
                             const QuantizedVector& x) {
  if (x.schema_version != table.schema_version) {
    throw Error(ErrorCode::kStaleSchema,
                "code version " + std::to_string(x.schema_version) +
                    " does not match table version " +
                    std::to_string(table.schema_version));
  }
  float acc = 0.0f;
  const float* p = table.partials.data();
  for (std::uint32_t s = 0; s < table.num_subspaces; ++s) {
    acc += p[static_cast<std::size_t>(s) * kPqCentroidsPerSubspace +
             x.codes[s]];
  }
  if (table.metric == Metric::kCosine) {
    float nsq = 0.0f;
    const float* nn = table.sq_norms.data();
    for (std::uint32_t s = 0; s < table.num_subspaces; ++s) {
      nsq += nn[static_cast<std::size_t>(s) * kPqCentroidsPerSubspace +
                x.codes[s]];
    }
    if (nsq <= 0.0f) return 1.0f;
    return table.bias + acc / std::sqrt(nsq);
  }
  return table.bias + acc;
}

void SchemaRegistry::add(PqSchema schema) {
  schemas_[schema.version] = std::move(schema);
}

const PqSchema* SchemaRegistry::find(std::uint32_t version) const {
  auto it = schemas_.find(version);
  return it == schemas_.end() ? nullptr : &it->second;
}

const PqSchema& SchemaRegistry::active() const {
  if (schemas_.empty()) {
    throw Error(ErrorCode::kStaleSchema, "no schema trained");
  }
  return schemas_.rbegin()->second;
}

bool SchemaRegistry::related(std::uint32_t a, std::uint32_t b) const {
  if (a == b) return true;
  const PqSchema* sa = find(a);
  const PqSchema* sb = find(b);
  if (!sa || !sb) return false;
  return (sa->parent_version && *sa->parent_version == b) ||
         (sb->parent_version && *sb->parent_version == a);
}

std::vector<std::uint32_t> SchemaRegistry::versions() const {
  std::vector<std::uint32_t> out;
  out.reserve(schemas_.size());
  for (const auto& [v, _] : schemas_) out.push_back(v);
  return out;
}

QuantScorer::QuantScorer(const SchemaRegistry& registry, Metric metric,
                         std::span<const float> query)
    : registry_(registry),
      metric_(metric),
      query_(query),
      table_(build_query_table(query, registry.active(), metric)) {}

Distance QuantScorer::operator()(const QuantizedVector& x) const {
  if (x.schema_version == table_.schema_version) {
    return asymmetric_distance(table_, x);
  }
  return cross_schema_distance(query_, x, registry_, metric_);
}

Distance cross_schema_distance(std::span<const float> q,
                               const QuantizedVector& x,
                               const SchemaRegistry& registry, Metric metric) {
  const PqSchema* own = registry.find(x.schema_version);
  if (own == nullptr) {
    throw Error(ErrorCode::kStaleSchema,
                "unknown schema version " + std::to_string(x.schema_version));
  }
  const PqSchema& act = registry.active();
  if (!registry.related(x.schema_version, act.version)) {
    throw Error(ErrorCode::kStaleSchema,
                "schema versions " + std::to_string(x.schema_version) +
                    " and " + std::to_string(act.version) +
                    " are unrelated");
  }
  const auto rec = decode(x, *own);
  return distance(q, rec, metric);
}

}  // namespace kvann
