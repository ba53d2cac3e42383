#include "ramstore/placement.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "ramstore/error.hpp"
#include "ramstore/hash.hpp"

namespace ramstore {

std::uint64_t placement_score(OsdId osd_id, std::string_view pool, std::string_view chunk_name) {
  std::uint64_t h = fnv1a64(pool);
  constexpr std::array<std::byte, 1> kSep{std::byte{0}};
  h = fnv1a64(kSep, h);
  h = fnv1a64(chunk_name, h);
  h = fnv1a64(kSep, h);
  std::array<std::byte, 8> id{};
  const auto raw = static_cast<std::uint64_t>(static_cast<std::int64_t>(osd_id));
  for (std::size_t i = 0; i < id.size(); ++i) {
    id[i] = static_cast<std::byte>((raw >> (8 * i)) & 0xffu);
  }
  return fnv1a64(id, h);
}

std::vector<OsdId> rank_osds(std::vector<OsdId> candidates, std::string_view pool,
                             std::string_view chunk_name, std::size_t count) {
  std::vector<std::pair<std::uint64_t, OsdId>> scored;
  scored.reserve(candidates.size());
  for (OsdId id : candidates) scored.emplace_back(placement_score(id, pool, chunk_name), id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<OsdId> out;
  for (std::size_t i = 0; i < std::min(count, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<OsdId> place(const ClusterMap& map, std::string_view pool, std::string_view chunk_name) {
  const PoolSpec* spec = map.find_pool(pool);
  if (spec == nullptr) throw Error(Errc::UnknownPool, std::string(pool));
  auto up = map.up_osds();
  if (up.size() < spec->replication_factor) {
    throw Error(Errc::NotEnoughOsds, "pool " + spec->name + " needs " +
                                         std::to_string(spec->replication_factor) + " up osds, have " +
                                         std::to_string(up.size()));
  }
  return rank_osds(std::move(up), pool, chunk_name, spec->replication_factor);
}

}  // namespace ramstore
