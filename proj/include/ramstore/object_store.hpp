#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ramstore/cluster_map.hpp"
#include "ramstore/manifest.hpp"
#include "ramstore/monitor.hpp"
#include "ramstore/osd.hpp"

namespace ramstore {

/// Where a client finds a running cluster and the secret it presents.
struct ClusterEndpoint {
  std::string cluster_id;
  std::string monitor_address;
  std::string client_secret;
};

struct StoredObject {
  std::vector<std::byte> data;
  Metadata user_metadata;
};

/// Native client for chunked objects. Each call fetches the current map from
/// the monitor, places chunks by rendezvous hashing and talks to OSDs directly.
class ObjectStore {
 public:
  explicit ObjectStore(ClusterEndpoint endpoint);

  /// Writes every chunk (primary first, then replicas) and the manifest last.
  /// On failure everything written so far is rolled back.
  ObjectManifest put_object(const std::string& pool, const std::string& name,
                            std::span<const std::byte> data, const Metadata& user_metadata = {});

  /// Verifies the CRC-32 before returning; throws NoSuchObject or ChecksumMismatch.
  StoredObject get_object(const std::string& pool, const std::string& name) const;

  ObjectManifest stat_object(const std::string& pool, const std::string& name) const;

  void delete_object(const std::string& pool, const std::string& name);

  /// Sorted by name, each object once.
  std::vector<ObjectListing> list_objects(const std::string& pool) const;

  ClusterMap map() const { return monitor_.get_map(); }
  ClusterMap create_pool(const PoolSpec& spec) const { return monitor_.create_pool(spec); }
  ManagerReport metrics() const { return monitor_.metrics(); }

 private:
  OsdClient osd(const ClusterMap& map, OsdId id) const;
  ObjectManifest read_manifest(const ClusterMap& map, const std::string& pool,
                               const std::string& name) const;
  void remove_chunks(const ClusterMap& map, const ObjectManifest& manifest) const;

  ClusterEndpoint endpoint_;
  MonitorClient monitor_;
};

}  // namespace ramstore
