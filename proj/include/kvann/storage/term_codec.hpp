#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvann/core/types.hpp"

namespace kvann {

/// 16-byte hash of the indexed property path; shared prefix of every term
/// key of one logical index.
using PathPrefix = std::array<std::uint8_t, 16>;

/// 8-byte hash of a shard-key value; co-locates one shard's terms in a
/// contiguous key range.
using ShardPrefix = std::array<std::uint8_t, 8>;

inline constexpr std::uint8_t kQuantTermMarker = 0x17;
inline constexpr std::uint8_t kAdjacencyTermMarker = 0x18;
inline constexpr std::uint8_t kSchemaTermMarker = 0x01;

/// MurmurHash3 x64 128-bit.
std::array<std::uint8_t, 16> murmur3_x64_128(const void* data,
                                             std::size_t len,
                                             std::uint64_t seed);

PathPrefix hash_path(std::string_view property_path);
ShardPrefix hash_shard_key(std::string_view shard_value);

/// Big-endian id bytes, so numeric order equals byte order inside keys.
std::array<std::uint8_t, 8> encode_id_be(VectorId id);
VectorId decode_id_be(std::span<const std::uint8_t> bytes);

/// Key layouts:
///   quant:     path(16) | 0x17 | [shard(8)] | id(8, BE) | codes
///   adjacency: path(16) | 0x18 | [shard(8)] | id(8, BE)
///   schema:    path(16) | 0x01 | version(4, BE)
/// Quant term values are a shared dummy byte; adjacency values are 8-byte
/// id arrays; schema values are serialized schema blobs.

std::string quant_term_key(const PathPrefix& path,
                           const std::optional<ShardPrefix>& shard,
                           VectorId id, std::span<const std::uint8_t> codes);

/// Prefix covering every quant term of the index (or of one shard).
std::string quant_term_prefix(const PathPrefix& path,
                              const std::optional<ShardPrefix>& shard);

/// Prefix covering the (single) quant term of one id; the code bytes live
/// in the key, so point lookups are prefix seeks.
std::string quant_term_id_prefix(const PathPrefix& path,
                                 const std::optional<ShardPrefix>& shard,
                                 VectorId id);

struct QuantTermParts {
  VectorId id;
  std::vector<std::uint8_t> codes;
};
QuantTermParts parse_quant_term_key(std::string_view key, bool has_shard);

std::string adjacency_term_key(const PathPrefix& path,
                               const std::optional<ShardPrefix>& shard,
                               VectorId id);
std::string adjacency_term_prefix(const PathPrefix& path,
                                  const std::optional<ShardPrefix>& shard);
VectorId parse_adjacency_term_key(std::string_view key, bool has_shard);

std::string encode_adjacency_value(std::span<const VectorId> neighbors);
std::vector<VectorId> decode_adjacency_value(std::string_view bytes);

std::string schema_term_key(const PathPrefix& path, std::uint32_t version);
std::string schema_term_prefix(const PathPrefix& path);

/// The shared dummy value carried by every quant term.
std::string_view quant_dummy_value();

}  // namespace kvann
