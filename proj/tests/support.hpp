#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <span>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ramstore/monitor.hpp"
#include "ramstore/object_store.hpp"
#include "ramstore/orchestrator.hpp"
#include "ramstore/osd.hpp"
#include "ramstore/ram_device.hpp"

namespace ramstore::testing {

// Scratch directory under /tmp with a short path (socket paths are limited to 108 bytes).
class TempDir {
 public:
  TempDir() {
    std::string pattern = "/tmp/rst-XXXXXX";
    if (::mkdtemp(pattern.data()) == nullptr) std::abort();
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string unique_id(const std::string& prefix) {
  static std::atomic<int> counter{0};
  return prefix + std::to_string(::getpid()) + "-" + std::to_string(counter++);
}

inline std::vector<std::byte> random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::byte> out(n);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint64_t v = rng();
    std::memcpy(out.data() + i, &v, 8);
  }
  for (; i < n; ++i) out[i] = static_cast<std::byte>(rng());
  return out;
}

inline std::vector<std::byte> bytes_of(std::string_view s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

// Bitwise CRC-32, reflected polynomial 0xEDB88320: no tables, no zlib.
inline std::uint32_t reference_crc32(std::span<const std::byte> data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::byte b : data) {
    crc ^= static_cast<std::uint8_t>(b);
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

// FNV-1a 64 written out byte by byte from the published constants.
inline std::uint64_t reference_fnv1a64(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Placement score rebuilt from the documented key layout.
inline std::uint64_t reference_score(std::int64_t osd_id, const std::string& pool, const std::string& chunk) {
  std::vector<unsigned char> key(pool.begin(), pool.end());
  key.push_back(0);
  key.insert(key.end(), chunk.begin(), chunk.end());
  key.push_back(0);
  const auto id = static_cast<std::uint64_t>(osd_id);
  for (int i = 0; i < 8; ++i) key.push_back(static_cast<unsigned char>(id >> (8 * i)));
  return reference_fnv1a64(key);
}

/// A plan for `hosts` simulated hosts whose files all live under `dir`.
inline DeploymentPlan local_plan(const TempDir& dir, std::size_t hosts, const std::string& prefix = "t") {
  DeploymentPlan plan;
  plan.cluster_id = unique_id(prefix);
  for (std::size_t i = 0; i < hosts; ++i) plan.hosts.push_back("node" + std::to_string(i + 1));
  plan.device_capacity_bytes = 64ull << 20;
  plan.shared_dir = dir / "shared";
  plan.runtime_dir = dir / "run";
  std::filesystem::create_directories(plan.shared_dir);
  return plan;
}

/// Monitor plus OSDs inside this process, talking over real sockets.
class LocalCluster {
 public:
  explicit LocalCluster(int osds, std::uint64_t capacity = 64ull << 20,
                        Monitor::Options options = {}) {
    cluster_id_ = unique_id("local");
    monitor_ = Monitor::bootstrap(cluster_id_, dir_ / "mon.sock", std::move(options));
    keyring_ = monitor_->issue_keyring();
    server_ = std::make_unique<MonitorServer>(*monitor_, std::make_shared<RemoteStatsSource>(osd_secret()));
    monitor_->start_manager(keyring_.secret(Role::manager), std::make_shared<RemoteStatsSource>(osd_secret()));
    for (int i = 0; i < osds; ++i) add_osd(capacity);
  }

  ~LocalCluster() {
    for (auto& s : osd_servers_) s->stop();
    server_->stop();
  }

  OsdId add_osd(std::uint64_t capacity) {
    const OsdId id = static_cast<OsdId>(daemons_.size());
    auto device = registry_.create_device(capacity, 4096);
    daemons_.push_back(std::make_unique<OsdDaemon>(id, device));
    const std::string address = dir_ / ("osd." + std::to_string(id) + ".sock");
    osd_servers_.push_back(std::make_unique<OsdServer>(*daemons_.back(), address, osd_secret(), client_secret()));
    OsdInfo info;
    info.osd_id = id;
    info.host = "host" + std::to_string(id);
    info.address = address;
    info.capacity_bytes = capacity;
    monitor_->register_osd(info, osd_secret());
    return id;
  }

  void create_pool(const std::string& name, std::uint32_t replication = 1, std::uint64_t chunk = kDefaultChunkSize) {
    monitor_->create_pool(PoolSpec{name, replication, chunk}, client_secret());
  }

  ClusterEndpoint endpoint() const { return {cluster_id_, monitor_->address(), client_secret()}; }
  ObjectStore store() const { return ObjectStore(endpoint()); }

  Monitor& monitor() { return *monitor_; }
  OsdDaemon& osd(std::size_t i) { return *daemons_.at(i); }
  std::size_t osd_count() const { return daemons_.size(); }
  DeviceRegistry& registry() { return registry_; }
  const Keyring& keyring() const { return keyring_; }
  std::string osd_secret() const { return keyring_.secret(Role::osd); }
  std::string client_secret() const { return keyring_.secret(Role::client); }
  std::string osd_address(std::size_t i) const { return dir_ / ("osd." + std::to_string(i) + ".sock"); }

 private:
  TempDir dir_;
  std::string cluster_id_;
  std::unique_ptr<Monitor> monitor_;
  Keyring keyring_;
  std::unique_ptr<MonitorServer> server_;
  DeviceRegistry registry_;
  std::vector<std::unique_ptr<OsdDaemon>> daemons_;
  std::vector<std::unique_ptr<OsdServer>> osd_servers_;
};

}  // namespace ramstore::testing
