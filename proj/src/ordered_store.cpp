#include "kvann/storage/ordered_store.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

namespace kvann {

namespace {

std::vector<std::uint64_t> ids_in(const std::string& bytes) {
  std::vector<std::uint64_t> out;
  out.reserve(bytes.size() / 8);
  for (std::size_t i = 0; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + i, 8);
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::optional<std::string> DeltaChain::replay() const {
  std::optional<std::string> value = base;
  for (const auto& p : patches) {
    switch (p.kind) {
      case Patch::Kind::kAppend:
        if (value.has_value()) {
          value->append(p.bytes);
        } else {
          value = p.bytes;
        }
        break;
      case Patch::Kind::kOverwrite:
        value = p.bytes;
        break;
      case Patch::Kind::kDelete:
        value.reset();
        break;
    }
  }
  return value;
}

std::vector<std::uint64_t> pending_append_ids(const DeltaChain& chain) {
  std::vector<std::uint64_t> out;
  for (const auto& p : chain.patches) {
    switch (p.kind) {
      case Patch::Kind::kAppend: {
        auto ids = ids_in(p.bytes);
        out.insert(out.end(), ids.begin(), ids.end());
        break;
      }
      case Patch::Kind::kOverwrite:
      case Patch::Kind::kDelete:
        out.clear();
        break;
    }
  }
  return out;
}

void OrderedStore::check_patch(const DeltaChain* chain,
                               const Patch& patch) const {
  switch (patch.kind) {
    case Patch::Kind::kAppend: {
      if (patch.bytes.size() % 8 != 0) {
        throw Error(ErrorCode::kContract,
                    "append patch is not an 8-byte id array");
      }
      std::unordered_set<std::uint64_t> pending;
      if (chain != nullptr) {
        for (auto id : pending_append_ids(*chain)) pending.insert(id);
      }
      for (auto id : ids_in(patch.bytes)) {
        if (!pending.insert(id).second) {
          throw Error(ErrorCode::kContract,
                      "duplicate append of id " + std::to_string(id) +
                          " already pending for this key");
        }
      }
      break;
    }
    case Patch::Kind::kDelete: {
      const bool exists =
          chain != nullptr && chain->replay().has_value();
      if (!exists) {
        throw Error(ErrorCode::kContract,
                    "delete patch for a non-existent key");
      }
      break;
    }
    case Patch::Kind::kOverwrite:
      break;
  }
}

void OrderedStore::apply_unchecked(const std::string& key, Patch patch) {
  auto it = map_.try_emplace(key).first;
  it->second.patches.push_back(std::move(patch));
  if (it->second.chain_length() > max_chain_length_) {
    if (!consolidate_chain(it->second)) map_.erase(it);
  }
}

void OrderedStore::put_patch(std::string_view key, Patch patch) {
  auto it = map_.find(key);
  check_patch(it == map_.end() ? nullptr : &it->second, patch);
  apply_unchecked(std::string(key), std::move(patch));
}

void OrderedStore::apply_batch(
    const std::vector<std::pair<std::string, Patch>>& batch) {
  // Validate every patch against a staged view before mutating anything.
  std::map<std::string, DeltaChain, std::less<>> staged;
  for (const auto& [key, patch] : batch) {
    auto it = staged.find(key);
    if (it == staged.end()) {
      auto src = map_.find(key);
      DeltaChain copy =
          src == map_.end() ? DeltaChain{} : src->second;
      it = staged.emplace(key, std::move(copy)).first;
    }
    check_patch(&it->second, patch);
    it->second.patches.push_back(patch);
  }
  for (const auto& [key, patch] : batch) {
    apply_unchecked(key, patch);
  }
}

std::optional<std::string> OrderedStore::get(std::string_view key) const {
  auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second.replay();
}

void OrderedStore::prefix_seek(
    std::string_view prefix,
    const std::function<bool(std::string_view, std::string_view)>& visit)
    const {
  for (auto it = map_.lower_bound(prefix); it != map_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    auto value = it->second.replay();
    if (!value.has_value()) continue;
    if (!visit(it->first, *value)) break;
  }
}

void OrderedStore::range_seek(
    std::string_view lo, std::string_view hi,
    const std::function<bool(std::string_view, std::string_view)>& visit)
    const {
  for (auto it = map_.lower_bound(lo); it != map_.end(); ++it) {
    if (std::string_view(it->first) > hi) break;
    auto value = it->second.replay();
    if (!value.has_value()) continue;
    if (!visit(it->first, *value)) break;
  }
}

std::size_t OrderedStore::count_prefix(std::string_view prefix) const {
  std::size_t n = 0;
  prefix_seek(prefix, [&](std::string_view, std::string_view) {
    ++n;
    return true;
  });
  return n;
}

bool OrderedStore::consolidate_chain(DeltaChain& chain) {
  auto value = chain.replay();
  if (!value.has_value()) return false;
  chain.base = std::move(value);
  chain.patches.clear();
  return true;
}

void OrderedStore::consolidate(std::string_view key) {
  auto it = map_.find(key);
  if (it == map_.end()) return;
  if (!consolidate_chain(it->second)) map_.erase(it);
}

void OrderedStore::consolidate_all() {
  for (auto it = map_.begin(); it != map_.end();) {
    auto value = it->second.replay();
    if (value.has_value()) {
      it->second.base = std::move(value);
      it->second.patches.clear();
      ++it;
    } else {
      it = map_.erase(it);
    }
  }
}

std::size_t OrderedStore::chain_length(std::string_view key) const {
  auto it = map_.find(key);
  return it == map_.end() ? 0 : it->second.chain_length();
}

}  // namespace kvann
