#include "kvann/storage/term_codec.hpp"

#include <cstring>

namespace kvann {

namespace {

inline std::uint64_t rotl64(std::uint64_t x, std::int8_t r) {
  return (x << r) | (x >> (64 - r));
}

inline std::uint64_t fmix64(std::uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

constexpr std::uint64_t kPathHashSeed = 0x1db7;
constexpr std::uint64_t kShardHashSeed = 0x51ab;

void append_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

}  // namespace

std::array<std::uint8_t, 16> murmur3_x64_128(const void* data,
                                             std::size_t len,
                                             std::uint64_t seed) {
  const auto* bytes = static_cast<const std::uint8_t*>(data);
  const std::size_t nblocks = len / 16;

  std::uint64_t h1 = seed;
  std::uint64_t h2 = seed;
  const std::uint64_t c1 = 0x87c37b91114253d5ULL;
  const std::uint64_t c2 = 0x4cf5ad432745937fULL;

  for (std::size_t i = 0; i < nblocks; ++i) {
    std::uint64_t k1, k2;
    std::memcpy(&k1, bytes + i * 16, 8);
    std::memcpy(&k2, bytes + i * 16 + 8, 8);

    k1 *= c1;
    k1 = rotl64(k1, 31);
    k1 *= c2;
    h1 ^= k1;
    h1 = rotl64(h1, 27);
    h1 += h2;
    h1 = h1 * 5 + 0x52dce729;

    k2 *= c2;
    k2 = rotl64(k2, 33);
    k2 *= c1;
    h2 ^= k2;
    h2 = rotl64(h2, 31);
    h2 += h1;
    h2 = h2 * 5 + 0x38495ab5;
  }

  const std::uint8_t* tail = bytes + nblocks * 16;
  std::uint64_t k1 = 0;
  std::uint64_t k2 = 0;
  switch (len & 15) {
    case 15: k2 ^= static_cast<std::uint64_t>(tail[14]) << 48; [[fallthrough]];
    case 14: k2 ^= static_cast<std::uint64_t>(tail[13]) << 40; [[fallthrough]];
    case 13: k2 ^= static_cast<std::uint64_t>(tail[12]) << 32; [[fallthrough]];
    case 12: k2 ^= static_cast<std::uint64_t>(tail[11]) << 24; [[fallthrough]];
    case 11: k2 ^= static_cast<std::uint64_t>(tail[10]) << 16; [[fallthrough]];
    case 10: k2 ^= static_cast<std::uint64_t>(tail[9]) << 8; [[fallthrough]];
    case 9:
      k2 ^= static_cast<std::uint64_t>(tail[8]);
      k2 *= c2;
      k2 = rotl64(k2, 33);
      k2 *= c1;
      h2 ^= k2;
      [[fallthrough]];
    case 8: k1 ^= static_cast<std::uint64_t>(tail[7]) << 56; [[fallthrough]];
    case 7: k1 ^= static_cast<std::uint64_t>(tail[6]) << 48; [[fallthrough]];
    case 6: k1 ^= static_cast<std::uint64_t>(tail[5]) << 40; [[fallthrough]];
    case 5: k1 ^= static_cast<std::uint64_t>(tail[4]) << 32; [[fallthrough]];
    case 4: k1 ^= static_cast<std::uint64_t>(tail[3]) << 24; [[fallthrough]];
    case 3: k1 ^= static_cast<std::uint64_t>(tail[2]) << 16; [[fallthrough]];
    case 2: k1 ^= static_cast<std::uint64_t>(tail[1]) << 8; [[fallthrough]];
    case 1:
      k1 ^= static_cast<std::uint64_t>(tail[0]);
      k1 *= c1;
      k1 = rotl64(k1, 31);
      k1 *= c2;
      h1 ^= k1;
  }

  h1 ^= static_cast<std::uint64_t>(len);
  h2 ^= static_cast<std::uint64_t>(len);
  h1 += h2;
  h2 += h1;
  h1 = fmix64(h1);
  h2 = fmix64(h2);
  h1 += h2;
  h2 += h1;

  std::array<std::uint8_t, 16> out;
  std::memcpy(out.data(), &h1, 8);
  std::memcpy(out.data() + 8, &h2, 8);
  return out;
}

PathPrefix hash_path(std::string_view property_path) {
  return murmur3_x64_128(property_path.data(), property_path.size(),
                         kPathHashSeed);
}

ShardPrefix hash_shard_key(std::string_view shard_value) {
  const auto full = murmur3_x64_128(shard_value.data(), shard_value.size(),
                                    kShardHashSeed);
  ShardPrefix out;
  std::memcpy(out.data(), full.data(), out.size());
  return out;
}

std::array<std::uint8_t, 8> encode_id_be(VectorId id) {
  std::array<std::uint8_t, 8> out;
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(id & 0xff);
    id >>= 8;
  }
  return out;
}

VectorId decode_id_be(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw Error(ErrorCode::kParse, "id field shorter than 8 bytes");
  }
  VectorId id = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    id = (id << 8) | bytes[i];
  }
  return id;
}

namespace {

std::string term_head(const PathPrefix& path, std::uint8_t marker,
                      const std::optional<ShardPrefix>& shard) {
  std::string key;
  key.reserve(16 + 1 + (shard ? 8 : 0) + 16);
  append_bytes(key, path.data(), path.size());
  key.push_back(static_cast<char>(marker));
  if (shard) append_bytes(key, shard->data(), shard->size());
  return key;
}

std::size_t term_head_size(bool has_shard) {
  return 16 + 1 + (has_shard ? 8 : 0);
}

}  // namespace

std::string quant_term_key(const PathPrefix& path,
                           const std::optional<ShardPrefix>& shard,
                           VectorId id, std::span<const std::uint8_t> codes) {
  std::string key = term_head(path, kQuantTermMarker, shard);
  const auto idb = encode_id_be(id);
  append_bytes(key, idb.data(), idb.size());
  append_bytes(key, codes.data(), codes.size());
  return key;
}

std::string quant_term_prefix(const PathPrefix& path,
                              const std::optional<ShardPrefix>& shard) {
  return term_head(path, kQuantTermMarker, shard);
}

std::string quant_term_id_prefix(const PathPrefix& path,
                                 const std::optional<ShardPrefix>& shard,
                                 VectorId id) {
  std::string key = term_head(path, kQuantTermMarker, shard);
  const auto idb = encode_id_be(id);
  append_bytes(key, idb.data(), idb.size());
  return key;
}

QuantTermParts parse_quant_term_key(std::string_view key, bool has_shard) {
  const std::size_t head = term_head_size(has_shard);
  if (key.size() < head + 8) {
    throw Error(ErrorCode::kParse, "quant term key too short");
  }
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(key.data());
  QuantTermParts parts;
  parts.id = decode_id_be({bytes + head, 8});
  parts.codes.assign(bytes + head + 8, bytes + key.size());
  return parts;
}

std::string adjacency_term_key(const PathPrefix& path,
                               const std::optional<ShardPrefix>& shard,
                               VectorId id) {
  std::string key = term_head(path, kAdjacencyTermMarker, shard);
  const auto idb = encode_id_be(id);
  append_bytes(key, idb.data(), idb.size());
  return key;
}

std::string adjacency_term_prefix(const PathPrefix& path,
                                  const std::optional<ShardPrefix>& shard) {
  return term_head(path, kAdjacencyTermMarker, shard);
}

VectorId parse_adjacency_term_key(std::string_view key, bool has_shard) {
  const std::size_t head = term_head_size(has_shard);
  if (key.size() != head + 8) {
    throw Error(ErrorCode::kParse, "adjacency term key has wrong length");
  }
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(key.data());
  return decode_id_be({bytes + head, 8});
}

std::string encode_adjacency_value(std::span<const VectorId> neighbors) {
  std::string out;
  out.reserve(neighbors.size() * 8);
  for (VectorId id : neighbors) {
    const auto idb = encode_id_be(id);
    append_bytes(out, idb.data(), idb.size());
  }
  return out;
}

std::vector<VectorId> decode_adjacency_value(std::string_view bytes) {
  if (bytes.size() % 8 != 0) {
    throw Error(ErrorCode::kParse, "adjacency value is not an id array");
  }
  std::vector<VectorId> out;
  out.reserve(bytes.size() / 8);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
  for (std::size_t i = 0; i < bytes.size(); i += 8) {
    out.push_back(decode_id_be({p + i, 8}));
  }
  return out;
}

std::string schema_term_key(const PathPrefix& path, std::uint32_t version) {
  std::string key;
  key.reserve(16 + 1 + 4);
  append_bytes(key, path.data(), path.size());
  key.push_back(static_cast<char>(kSchemaTermMarker));
  for (int i = 3; i >= 0; --i) {
    key.push_back(static_cast<char>((version >> (8 * i)) & 0xff));
  }
  return key;
}

std::string schema_term_prefix(const PathPrefix& path) {
  std::string key;
  append_bytes(key, path.data(), path.size());
  key.push_back(static_cast<char>(kSchemaTermMarker));
  return key;
}

std::string_view quant_dummy_value() {
  static constexpr char kDummy[1] = {0x01};
  return std::string_view(kDummy, 1);
}

}  // namespace kvann
