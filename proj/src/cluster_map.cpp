#include "ramstore/cluster_map.hpp"

#include <algorithm>
#include <random>

#include "ramstore/error.hpp"

namespace ramstore {

const PoolSpec* ClusterMap::find_pool(std::string_view name) const {
  auto it = std::find_if(pools.begin(), pools.end(), [&](const PoolSpec& p) { return p.name == name; });
  return it == pools.end() ? nullptr : &*it;
}

const OsdInfo* ClusterMap::find_osd(OsdId id) const {
  auto it = std::find_if(osds.begin(), osds.end(), [&](const OsdInfo& o) { return o.osd_id == id; });
  return it == osds.end() ? nullptr : &*it;
}

std::vector<OsdId> ClusterMap::up_osds() const {
  std::vector<OsdId> ids;
  for (const auto& osd : osds) {
    if (osd.state == OsdState::up) ids.push_back(osd.osd_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string_view role_name(Role role) noexcept {
  switch (role) {
    case Role::monitor: return "monitor";
    case Role::manager: return "manager";
    case Role::osd: return "osd";
    case Role::client: return "client";
    case Role::gateway: return "gateway";
  }
  return "unknown";
}

std::optional<Role> role_from_name(std::string_view name) noexcept {
  for (Role r : kAllRoles) {
    if (role_name(r) == name) return r;
  }
  return std::nullopt;
}

const std::string& Keyring::secret(Role role) const {
  auto it = secrets.find(role);
  if (it == secrets.end()) {
    throw Error(Errc::AuthFailure, "keyring has no " + std::string(role_name(role)) + " secret");
  }
  return it->second;
}

bool secrets_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  }
  return diff == 0;
}

std::string random_secret() {
  static constexpr char kHex[] = "0123456789abcdef";
  std::random_device rd;
  std::string out;
  out.reserve(64);
  for (int i = 0; i < 8; ++i) {
    std::uint32_t word = rd();
    for (int b = 0; b < 4; ++b) {
      const unsigned byte = word & 0xffu;
      word >>= 8;
      out.push_back(kHex[byte >> 4]);
      out.push_back(kHex[byte & 0xfu]);
    }
  }
  return out;
}

Keyring Keyring::generate() {
  Keyring k;
  for (Role r : kAllRoles) k.secrets[r] = random_secret();
  return k;
}

void to_json(nlohmann::json& j, const OsdInfo& osd) {
  j = nlohmann::json{
      {"osd_id", osd.osd_id},
      {"host", osd.host},
      {"address", osd.address},
      {"capacity_bytes", osd.capacity_bytes},
      {"state", osd.state == OsdState::up ? "up" : "down"},
      {"last_heartbeat_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(osd.last_heartbeat.time_since_epoch())
           .count()},
  };
}

void from_json(const nlohmann::json& j, OsdInfo& osd) {
  osd.osd_id = j.at("osd_id").get<OsdId>();
  osd.host = j.at("host").get<std::string>();
  osd.address = j.at("address").get<std::string>();
  osd.capacity_bytes = j.at("capacity_bytes").get<std::uint64_t>();
  const auto state = j.value("state", std::string("up"));
  if (state != "up" && state != "down") throw Error(Errc::Protocol, "bad osd state " + state);
  osd.state = state == "up" ? OsdState::up : OsdState::down;
  osd.last_heartbeat = Timestamp(std::chrono::milliseconds(j.value("last_heartbeat_ms", std::int64_t{0})));
}

void to_json(nlohmann::json& j, const PoolSpec& pool) {
  j = nlohmann::json{{"name", pool.name},
                     {"replication_factor", pool.replication_factor},
                     {"chunk_size_bytes", pool.chunk_size_bytes}};
}

void from_json(const nlohmann::json& j, PoolSpec& pool) {
  pool.name = j.at("name").get<std::string>();
  pool.replication_factor = j.value("replication_factor", std::uint32_t{1});
  pool.chunk_size_bytes = j.value("chunk_size_bytes", kDefaultChunkSize);
}

void to_json(nlohmann::json& j, const ClusterMap& map) {
  j = nlohmann::json{{"v", 1},
                     {"cluster_id", map.cluster_id},
                     {"epoch", map.epoch},
                     {"monitor_address", map.monitor_address},
                     {"osds", map.osds},
                     {"pools", map.pools}};
}

void from_json(const nlohmann::json& j, ClusterMap& map) {
  map.cluster_id = j.at("cluster_id").get<std::string>();
  map.epoch = j.at("epoch").get<std::uint64_t>();
  map.monitor_address = j.value("monitor_address", std::string());
  map.osds = j.value("osds", std::vector<OsdInfo>{});
  map.pools = j.value("pools", std::vector<PoolSpec>{});
}

void to_json(nlohmann::json& j, const Keyring& keyring) {
  j = nlohmann::json::object();
  for (const auto& [role, secret] : keyring.secrets) j[std::string(role_name(role))] = secret;
}

void from_json(const nlohmann::json& j, Keyring& keyring) {
  keyring.secrets.clear();
  for (const auto& [name, secret] : j.items()) {
    auto role = role_from_name(name);
    if (!role) throw Error(Errc::Protocol, "unknown role " + name);
    keyring.secrets[*role] = secret.get<std::string>();
  }
}

}  // namespace ramstore
