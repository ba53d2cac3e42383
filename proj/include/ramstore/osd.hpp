#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ramstore/cluster_map.hpp"
#include "ramstore/manifest.hpp"
#include "ramstore/monitor.hpp"
#include "ramstore/ram_device.hpp"
#include "ramstore/wire.hpp"

namespace ramstore {

enum class ChunkKind { data, manifest };

struct ChunkKey {
  std::string pool;
  std::string name;
  std::uint64_t generation = 0;  // always 0 for manifests: one current version per object

  friend auto operator<=>(const ChunkKey&, const ChunkKey&) = default;
};

struct Extent {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct ObjectListing {
  std::string name;
  std::uint64_t total_size_bytes = 0;

  friend bool operator==(const ObjectListing&, const ObjectListing&) = default;
};

/// Object storage daemon: keeps chunks as extents on one RamDevice.
class OsdDaemon {
 public:
  OsdDaemon(OsdId id, std::shared_ptr<RamDevice> device);

  OsdId id() const noexcept { return id_; }
  const std::shared_ptr<RamDevice>& device() const noexcept { return device_; }

  /// Stores a data chunk; replaces an existing chunk with the same key. Throws NoSpace.
  void put_chunk(const ChunkKey& key, std::span<const std::byte> data);
  /// Throws NoSuchObject.
  std::vector<std::byte> get_chunk(const ChunkKey& key) const;
  /// Returns false when the chunk did not exist.
  bool delete_chunk(const ChunkKey& key);

  /// Installs a manifest and returns the bytes of the manifest it replaced.
  std::optional<std::vector<std::byte>> put_manifest(const std::string& pool,
                                                     const std::string& object_name,
                                                     std::span<const std::byte> data);
  std::vector<std::byte> get_manifest(const std::string& pool, const std::string& object_name) const;
  /// Returns the removed manifest; throws NoSuchObject.
  std::vector<std::byte> delete_manifest(const std::string& pool, const std::string& object_name);
  std::vector<ObjectListing> list_manifests(const std::string& pool) const;

  std::uint64_t used_bytes() const { return device_->used_bytes(); }
  std::uint64_t capacity_bytes() const { return device_->capacity_bytes(); }

  /// Snapshot of the index, for scans and fault injection.
  std::vector<std::tuple<ChunkKind, ChunkKey, Extent>> chunks() const;

 private:
  struct Entry {
    Extent extent;
    std::uint64_t object_size = 0;  // manifests only
  };
  using Index = std::map<ChunkKey, Entry>;

  Extent allocate(std::uint64_t length);  // caller holds mu_ exclusively
  void release(Extent extent);            // caller holds mu_ exclusively
  Extent store(std::span<const std::byte> data);
  std::vector<std::byte> load(Extent extent) const;

  const OsdId id_;
  std::shared_ptr<RamDevice> device_;
  mutable std::shared_mutex mu_;
  Index data_;
  Index manifests_;
  std::map<std::uint64_t, std::uint64_t> free_;  // offset -> length
};

/// Serves an OsdDaemon over the OSD wire protocol (put_chunk, get_chunk,
/// delete_chunk, list_manifests, stat). Requests must carry the osd or the
/// client secret.
class OsdServer {
 public:
  OsdServer(OsdDaemon& daemon, std::string address, std::string osd_secret,
            std::string client_secret);

  const std::string& address() const noexcept { return server_.path(); }
  void stop() { server_.stop(); }

 private:
  wire::Message handle(const wire::Message& request);

  OsdDaemon& daemon_;
  std::string osd_secret_;
  std::string client_secret_;
  wire::Server server_;
};

class OsdClient {
 public:
  OsdClient(std::string address, Role role, std::string secret)
      : address_(std::move(address)), role_(role), secret_(std::move(secret)) {}

  void put_chunk(const ChunkKey& key, std::span<const std::byte> data) const;
  std::vector<std::byte> get_chunk(const ChunkKey& key) const;
  bool delete_chunk(const ChunkKey& key) const;

  std::optional<std::vector<std::byte>> put_manifest(const std::string& pool,
                                                     const std::string& object_name,
                                                     std::span<const std::byte> data) const;
  std::vector<std::byte> get_manifest(const std::string& pool, const std::string& object_name) const;
  std::optional<std::vector<std::byte>> delete_manifest(const std::string& pool,
                                                        const std::string& object_name) const;
  std::vector<ObjectListing> list_manifests(const std::string& pool) const;
  OsdUsage stat() const;

 private:
  wire::Message call(nlohmann::json header, std::vector<std::byte> payload = {}) const;

  std::string address_;
  Role role_;
  std::string secret_;
};

/// Manager stats gathered from live OSDs over their wire protocol.
class RemoteStatsSource final : public StatsSource {
 public:
  explicit RemoteStatsSource(std::string osd_secret) : secret_(std::move(osd_secret)) {}
  OsdUsage usage(const OsdInfo& osd) override;
  std::vector<std::string> manifests(const OsdInfo& osd, const std::string& pool) override;

 private:
  std::string secret_;
};

}  // namespace ramstore
