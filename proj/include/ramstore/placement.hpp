#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ramstore/cluster_map.hpp"

namespace ramstore {

/// Highest-random-weight score of one OSD for one chunk.
///
/// FNV-1a 64 over the byte string
///   pool | 0x00 | chunk_name | 0x00 | osd_id as 8-byte little-endian two's complement.
std::uint64_t placement_score(OsdId osd_id, std::string_view pool, std::string_view chunk_name);

/// Ranks the up OSDs by descending score (ties to the lower osd id) and returns
/// the first `replication_factor` of them. Throws UnknownPool or NotEnoughOsds.
std::vector<OsdId> place(const ClusterMap& map, std::string_view pool, std::string_view chunk_name);

/// Same ranking over an explicit candidate set.
std::vector<OsdId> rank_osds(std::vector<OsdId> candidates, std::string_view pool,
                             std::string_view chunk_name, std::size_t count);

}  // namespace ramstore
