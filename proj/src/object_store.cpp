#include "ramstore/object_store.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "ramstore/error.hpp"
#include "ramstore/hash.hpp"
#include "ramstore/placement.hpp"

namespace ramstore {

namespace {

constexpr int kReadAttempts = 5;

std::uint64_t fresh_generation() {
  thread_local std::mt19937_64 rng{(std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}()};
  std::uint64_t g = 0;
  while (g == 0) g = rng();
  return g;
}

}  // namespace

ObjectStore::ObjectStore(ClusterEndpoint endpoint)
    : endpoint_(std::move(endpoint)),
      monitor_(endpoint_.monitor_address, Role::client, endpoint_.client_secret) {}

OsdClient ObjectStore::osd(const ClusterMap& map, OsdId id) const {
  const OsdInfo* info = map.find_osd(id);
  if (info == nullptr) throw Error(Errc::UnknownOsd, "osd." + std::to_string(id));
  return OsdClient(info->address, Role::client, endpoint_.client_secret);
}

ObjectManifest ObjectStore::put_object(const std::string& pool, const std::string& name,
                                       std::span<const std::byte> data, const Metadata& user_metadata) {
  validate_object_name(name);
  const ClusterMap map = monitor_.get_map();
  const PoolSpec* spec = map.find_pool(pool);
  if (spec == nullptr) throw Error(Errc::UnknownPool, pool);

  ObjectManifest manifest;
  manifest.object_id = {pool, name};
  manifest.total_size_bytes = data.size();
  manifest.chunk_size_bytes = spec->chunk_size_bytes;
  manifest.checksum = crc32(data);
  manifest.user_metadata = user_metadata;
  manifest.generation = fresh_generation();

  const std::uint64_t count = chunk_count(data.size(), spec->chunk_size_bytes);
  std::vector<std::pair<OsdId, ChunkKey>> written;
  auto roll_back_chunks = [&] {
    for (const auto& [id, key] : written) {
      try {
        osd(map, id).delete_chunk(key);
      } catch (const Error&) {
      }
    }
  };

  try {
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::string cname = chunk_name(name, i);
      const std::uint64_t begin = i * spec->chunk_size_bytes;
      const std::uint64_t len = std::min<std::uint64_t>(spec->chunk_size_bytes, data.size() - begin);
      const ChunkKey key{pool, cname, manifest.generation};
      for (OsdId target : place(map, pool, cname)) {
        osd(map, target).put_chunk(key, data.subspan(begin, len));
        written.emplace_back(target, key);
      }
      manifest.chunk_names.push_back(cname);
    }
  } catch (...) {
    roll_back_chunks();
    throw;
  }

  const auto encoded = encode_manifest(manifest);
  const auto manifest_targets = place(map, pool, manifest_name(name));
  std::vector<std::pair<OsdId, std::optional<std::vector<std::byte>>>> installed;
  try {
    for (OsdId target : manifest_targets) {
      installed.emplace_back(target, osd(map, target).put_manifest(pool, name, encoded));
    }
  } catch (...) {
    for (const auto& [id, previous] : installed) {
      try {
        if (previous) {
          osd(map, id).put_manifest(pool, name, *previous);
        } else {
          osd(map, id).delete_manifest(pool, name);
        }
      } catch (const Error&) {
      }
    }
    roll_back_chunks();
    throw;
  }

  // The version this write displaced (as seen by the primary) is now garbage.
  if (!installed.empty() && installed.front().second) {
    try {
      const ObjectManifest old = decode_manifest(*installed.front().second);
      if (old.generation != manifest.generation) remove_chunks(map, old);
    } catch (const Error&) {
    }
  }
  return manifest;
}

ObjectManifest ObjectStore::read_manifest(const ClusterMap& map, const std::string& pool,
                                          const std::string& name) const {
  validate_object_name(name);
  std::optional<Error> last;
  for (OsdId target : place(map, pool, manifest_name(name))) {
    try {
      return decode_manifest(osd(map, target).get_manifest(pool, name));
    } catch (const Error& e) {
      if (e.code() == Errc::NoSuchObject) throw;
      last = e;
    }
  }
  throw last.value_or(Error(Errc::NoSuchObject, pool + "/" + name));
}

ObjectManifest ObjectStore::stat_object(const std::string& pool, const std::string& name) const {
  return read_manifest(monitor_.get_map(), pool, name);
}

StoredObject ObjectStore::get_object(const std::string& pool, const std::string& name) const {
  for (int attempt = 0; attempt < kReadAttempts; ++attempt) {
    const ClusterMap map = monitor_.get_map();
    const ObjectManifest manifest = read_manifest(map, pool, name);

    StoredObject out;
    out.data.reserve(manifest.total_size_bytes);
    bool missing = false;
    for (const auto& cname : manifest.chunk_names) {
      const ChunkKey key{pool, cname, manifest.generation};
      bool fetched = false;
      for (OsdId target : place(map, pool, cname)) {
        try {
          const auto bytes = osd(map, target).get_chunk(key);
          out.data.insert(out.data.end(), bytes.begin(), bytes.end());
          fetched = true;
          break;
        } catch (const Error& e) {
          if (e.code() != Errc::NoSuchObject && e.code() != Errc::BackendUnavailable) throw;
        }
      }
      if (!fetched) {
        missing = true;
        break;
      }
    }

    if (missing) {
      // A concurrent overwrite or delete retires chunks of the version we
      // started from; only a still-current manifest with absent chunks is damage.
      const ObjectManifest now = read_manifest(monitor_.get_map(), pool, name);
      if (now.generation != manifest.generation) continue;
      throw Error(Errc::ChecksumMismatch, pool + "/" + name + ": chunk missing");
    }
    if (out.data.size() != manifest.total_size_bytes || crc32(out.data) != manifest.checksum) {
      throw Error(Errc::ChecksumMismatch, pool + "/" + name);
    }
    out.user_metadata = manifest.user_metadata;
    return out;
  }
  throw Error(Errc::ChecksumMismatch, pool + "/" + name + ": object kept changing during read");
}

void ObjectStore::remove_chunks(const ClusterMap& map, const ObjectManifest& manifest) const {
  for (const auto& cname : manifest.chunk_names) {
    const ChunkKey key{manifest.object_id.pool, cname, manifest.generation};
    for (OsdId target : place(map, manifest.object_id.pool, cname)) {
      try {
        osd(map, target).delete_chunk(key);
      } catch (const Error&) {
      }
    }
  }
}

void ObjectStore::delete_object(const std::string& pool, const std::string& name) {
  const ClusterMap map = monitor_.get_map();
  const ObjectManifest seen = read_manifest(map, pool, name);
  std::optional<ObjectManifest> removed;
  for (OsdId target : place(map, pool, manifest_name(name))) {
    try {
      auto bytes = osd(map, target).delete_manifest(pool, name);
      if (bytes && !removed) removed = decode_manifest(*bytes);
    } catch (const Error&) {
    }
  }
  if (!removed) throw Error(Errc::NoSuchObject, pool + "/" + name);
  remove_chunks(map, *removed);
  if (seen.generation != removed->generation) remove_chunks(map, seen);
}

std::vector<ObjectListing> ObjectStore::list_objects(const std::string& pool) const {
  const ClusterMap map = monitor_.get_map();
  if (map.find_pool(pool) == nullptr) throw Error(Errc::UnknownPool, pool);
  std::map<std::string, std::uint64_t> merged;
  for (OsdId id : map.up_osds()) {
    for (auto& o : osd(map, id).list_manifests(pool)) merged.try_emplace(std::move(o.name), o.total_size_bytes);
  }
  std::vector<ObjectListing> out;
  out.reserve(merged.size());
  for (auto& [n, size] : merged) out.push_back({n, size});
  return out;
}

}  // namespace ramstore
