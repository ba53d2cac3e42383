#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ramstore {

inline constexpr std::uint64_t kDefaultChunkSize = 4ull << 20;

using OsdId = std::int32_t;
using Timestamp = std::chrono::system_clock::time_point;

enum class OsdState { up, down };

struct OsdInfo {
  OsdId osd_id = 0;
  std::string host;
  std::string address;
  std::uint64_t capacity_bytes = 0;
  OsdState state = OsdState::up;
  Timestamp last_heartbeat{};

  friend bool operator==(const OsdInfo&, const OsdInfo&) = default;
};

struct PoolSpec {
  std::string name;
  std::uint32_t replication_factor = 1;
  std::uint64_t chunk_size_bytes = kDefaultChunkSize;

  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct ClusterMap {
  std::string cluster_id;
  std::uint64_t epoch = 0;
  std::string monitor_address;
  std::vector<OsdInfo> osds;
  std::vector<PoolSpec> pools;

  const PoolSpec* find_pool(std::string_view name) const;
  const OsdInfo* find_osd(OsdId id) const;
  std::vector<OsdId> up_osds() const;

  friend bool operator==(const ClusterMap&, const ClusterMap&) = default;
};

enum class Role { monitor, manager, osd, client, gateway };

inline constexpr std::array<Role, 5> kAllRoles{Role::monitor, Role::manager, Role::osd,
                                               Role::client, Role::gateway};

std::string_view role_name(Role role) noexcept;
std::optional<Role> role_from_name(std::string_view name) noexcept;

/// One secret per role; secrets are 32 random bytes rendered as lowercase hex.
struct Keyring {
  std::map<Role, std::string> secrets;

  const std::string& secret(Role role) const;

  /// Fresh secrets for all five roles from the OS entropy source.
  static Keyring generate();

  friend bool operator==(const Keyring&, const Keyring&) = default;
};

/// 32 bytes from std::random_device, hex encoded (64 characters).
std::string random_secret();

/// Comparison whose running time does not depend on where the inputs differ.
bool secrets_equal(std::string_view a, std::string_view b);

void to_json(nlohmann::json& j, const OsdInfo& osd);
void from_json(const nlohmann::json& j, OsdInfo& osd);
void to_json(nlohmann::json& j, const PoolSpec& pool);
void from_json(const nlohmann::json& j, PoolSpec& pool);
void to_json(nlohmann::json& j, const ClusterMap& map);
void from_json(const nlohmann::json& j, ClusterMap& map);
void to_json(nlohmann::json& j, const Keyring& keyring);
void from_json(const nlohmann::json& j, Keyring& keyring);

}  // namespace ramstore
