#include "kvann/storage/storage_engine.hpp"

#include <cstring>
#include <fstream>

#include "kvann/core/distance.hpp"

namespace kvann {

void DocumentStore::put(VectorRecord record) {
  if (docs_.count(record.id) != 0) {
    throw Error(ErrorCode::kContract,
                "document id " + std::to_string(record.id) + " already live");
  }
  docs_.emplace(record.id, std::move(record));
}

void DocumentStore::overwrite(VectorRecord record) {
  auto it = docs_.find(record.id);
  if (it == docs_.end()) {
    throw Error(ErrorCode::kNotFound,
                "document id " + std::to_string(record.id) + " not found");
  }
  it->second = std::move(record);
}

const VectorRecord* DocumentStore::get(VectorId id) const {
  auto it = docs_.find(id);
  return it == docs_.end() ? nullptr : &it->second;
}

void DocumentStore::erase(VectorId id) {
  if (docs_.erase(id) == 0) {
    throw Error(ErrorCode::kNotFound,
                "document id " + std::to_string(id) + " not found");
  }
}

void DocumentStore::for_each(
    const std::function<bool(const VectorRecord&)>& visit) const {
  for (const auto& [id, record] : docs_) {
    if (!visit(record)) break;
  }
}

void StorageEngine::set_meta(const std::string& key, std::string value) {
  meta_[key] = std::move(value);
}

std::optional<std::string> StorageEngine::get_meta(
    const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) return std::nullopt;
  return it->second;
}

void StorageEngine::erase_meta(const std::string& key) { meta_.erase(key); }

namespace {

constexpr char kSnapshotMagic[4] = {'K', 'V', 'S', 'N'};
constexpr std::uint32_t kSnapshotFormatVersion = 1;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

template <class T>
void put_pod(std::string& out, T v) {
  put_bytes(out, &v, sizeof(v));
}

void put_str(std::string& out, std::string_view s) {
  put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T pod() {
    if (off_ + sizeof(T) > data_.size()) fail();
    T v;
    std::memcpy(&v, data_.data() + off_, sizeof(T));
    off_ += sizeof(T);
    return v;
  }

  std::string_view str() {
    const auto n = pod<std::uint32_t>();
    if (off_ + n > data_.size()) fail();
    std::string_view s = data_.substr(off_, n);
    off_ += n;
    return s;
  }

  std::size_t offset() const { return off_; }
  void expect_consumed(std::size_t upto) const {
    if (off_ != upto) {
      throw Error(ErrorCode::kParse, "snapshot has trailing bytes at offset " +
                                         std::to_string(off_));
    }
  }

 private:
  [[noreturn]] void fail() const {
    throw Error(ErrorCode::kParse,
                "snapshot truncated at offset " + std::to_string(off_));
  }

  std::string_view data_;
  std::size_t off_ = 0;
};

}  // namespace

void StorageEngine::snapshot(const std::string& path) const {
  std::string out;
  put_bytes(out, kSnapshotMagic, 4);
  put_pod(out, kSnapshotFormatVersion);

  // Terms, consolidated form.
  std::uint64_t term_count = 0;
  std::string body;
  terms_.prefix_seek("", [&](std::string_view key, std::string_view value) {
    put_str(body, key);
    put_str(body, value);
    ++term_count;
    return true;
  });
  put_pod(out, term_count);
  out += body;

  put_pod<std::uint64_t>(out, docs_.size());
  docs_.for_each([&](const VectorRecord& record) {
    put_pod(out, record.id);
    put_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(record.embedding.size()));
    put_bytes(out, record.embedding.data(),
              record.embedding.size() * sizeof(float));
    put_pod<std::uint8_t>(out, record.shard_key.has_value() ? 1 : 0);
    if (record.shard_key) put_str(out, *record.shard_key);
    put_pod<std::uint8_t>(out, record.labels.has_value() ? 1 : 0);
    put_pod<std::uint64_t>(out, record.labels.value_or(0));
    return true;
  });

  put_pod<std::uint64_t>(out, meta_.size());
  for (const auto& [k, v] : meta_) {
    put_str(out, k);
    put_str(out, v);
  }

  put_pod<std::uint64_t>(out, fnv1a(out));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw Error(ErrorCode::kIo, "cannot open snapshot file: " + path);
  }
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw Error(ErrorCode::kIo, "short write to snapshot file: " + path);
  }
}

void StorageEngine::restore(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorCode::kIo, "cannot open snapshot file: " + path);
  }
  std::string data((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());

  if (data.size() < 4 + sizeof(std::uint32_t) + sizeof(std::uint64_t)) {
    throw Error(ErrorCode::kParse, "snapshot file too short");
  }
  const std::size_t body_size = data.size() - sizeof(std::uint64_t);
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, data.data() + body_size, sizeof(stored_sum));
  if (fnv1a(std::string_view(data).substr(0, body_size)) != stored_sum) {
    throw Error(ErrorCode::kParse, "snapshot checksum mismatch");
  }

  Reader reader(std::string_view(data).substr(0, body_size));
  char magic[4];
  for (char& c : magic) c = static_cast<char>(reader.pod<std::uint8_t>());
  if (std::memcmp(magic, kSnapshotMagic, 4) != 0) {
    throw Error(ErrorCode::kParse, "bad snapshot magic");
  }
  if (reader.pod<std::uint32_t>() != kSnapshotFormatVersion) {
    throw Error(ErrorCode::kParse, "unsupported snapshot format version");
  }

  // Build into fresh state; swap only on full success.
  OrderedStore terms(terms_.max_chain_length());
  DocumentStore docs;
  std::map<std::string, std::string> meta;

  const auto term_count = reader.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < term_count; ++i) {
    std::string key(reader.str());
    std::string value(reader.str());
    terms.put_patch(key, Patch::overwrite(std::move(value)));
  }

  const auto doc_count = reader.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < doc_count; ++i) {
    VectorRecord record;
    record.id = reader.pod<VectorId>();
    const auto dim = reader.pod<std::uint32_t>();
    record.embedding.resize(dim);
    for (auto& x : record.embedding) x = reader.pod<float>();
    if (reader.pod<std::uint8_t>() != 0) {
      record.shard_key = std::string(reader.str());
    }
    const auto has_labels = reader.pod<std::uint8_t>();
    const auto labels = reader.pod<std::uint64_t>();
    if (has_labels != 0) record.labels = labels;
    docs.put(std::move(record));
  }

  const auto meta_count = reader.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < meta_count; ++i) {
    std::string k(reader.str());
    std::string v(reader.str());
    meta.emplace(std::move(k), std::move(v));
  }
  reader.expect_consumed(body_size);

  WriteGuard guard = write_guard();
  terms_ = std::move(terms);
  docs_ = std::move(docs);
  meta_ = std::move(meta);
}

}  // namespace kvann
