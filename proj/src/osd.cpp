#include "ramstore/osd.hpp"

#include <algorithm>
#include <mutex>

#include "ramstore/error.hpp"

namespace ramstore {

namespace {

ChunkKey manifest_key(const std::string& pool, const std::string& object_name) {
  return ChunkKey{pool, manifest_name(object_name), 0};
}

std::string describe(const ChunkKey& key) {
  return key.pool + "/" + key.name + "@" + std::to_string(key.generation);
}

}  // namespace

OsdDaemon::OsdDaemon(OsdId id, std::shared_ptr<RamDevice> device)
    : id_(id), device_(std::move(device)) {
  if (!device_) throw Error(Errc::InvalidArgument, "osd needs a device");
  free_.emplace(0, device_->capacity_bytes());
}

Extent OsdDaemon::allocate(std::uint64_t length) {
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second < length) continue;
    const Extent extent{it->first, length};
    const std::uint64_t rest = it->second - length;
    const std::uint64_t rest_offset = it->first + length;
    free_.erase(it);
    if (rest > 0) free_.emplace(rest_offset, rest);
    return extent;
  }
  throw Error(Errc::NoSpace, "osd." + std::to_string(id_) + " has no free extent of " +
                                 std::to_string(length) + " bytes");
}

void OsdDaemon::release(Extent extent) {
  if (extent.length == 0) return;
  device_->discard(extent.offset, extent.length);
  auto [it, inserted] = free_.emplace(extent.offset, extent.length);
  if (auto next = std::next(it); next != free_.end() && it->first + it->second == next->first) {
    it->second += next->second;
    free_.erase(next);
  }
  if (it != free_.begin()) {
    auto prev = std::prev(it);
    if (prev->first + prev->second == it->first) {
      prev->second += it->second;
      free_.erase(it);
    }
  }
}

Extent OsdDaemon::store(std::span<const std::byte> data) {
  Extent extent;
  {
    std::unique_lock lock(mu_);
    extent = allocate(data.size());
  }
  try {
    device_->write_at(extent.offset, data);
  } catch (...) {
    std::unique_lock lock(mu_);
    release(extent);
    throw;
  }
  return extent;
}

std::vector<std::byte> OsdDaemon::load(Extent extent) const {
  return device_->read_at(extent.offset, extent.length);
}

void OsdDaemon::put_chunk(const ChunkKey& key, std::span<const std::byte> data) {
  const Extent extent = store(data);
  std::unique_lock lock(mu_);
  auto [it, inserted] = data_.try_emplace(key, Entry{extent, 0});
  if (!inserted) {
    release(it->second.extent);
    it->second = Entry{extent, 0};
  }
}

std::vector<std::byte> OsdDaemon::get_chunk(const ChunkKey& key) const {
  std::shared_lock lock(mu_);
  auto it = data_.find(key);
  if (it == data_.end()) throw Error(Errc::NoSuchObject, "chunk " + describe(key));
  return load(it->second.extent);
}

bool OsdDaemon::delete_chunk(const ChunkKey& key) {
  std::unique_lock lock(mu_);
  auto it = data_.find(key);
  if (it == data_.end()) return false;
  release(it->second.extent);
  data_.erase(it);
  return true;
}

std::optional<std::vector<std::byte>> OsdDaemon::put_manifest(const std::string& pool,
                                                              const std::string& object_name,
                                                              std::span<const std::byte> data) {
  const ObjectManifest parsed = decode_manifest(data);
  const Extent extent = store(data);
  std::unique_lock lock(mu_);
  const Entry entry{extent, parsed.total_size_bytes};
  auto [it, inserted] = manifests_.try_emplace(manifest_key(pool, object_name), entry);
  if (inserted) return std::nullopt;
  auto previous = load(it->second.extent);
  release(it->second.extent);
  it->second = entry;
  return previous;
}

std::vector<std::byte> OsdDaemon::get_manifest(const std::string& pool,
                                               const std::string& object_name) const {
  std::shared_lock lock(mu_);
  auto it = manifests_.find(manifest_key(pool, object_name));
  if (it == manifests_.end()) throw Error(Errc::NoSuchObject, pool + "/" + object_name);
  return load(it->second.extent);
}

std::vector<std::byte> OsdDaemon::delete_manifest(const std::string& pool,
                                                  const std::string& object_name) {
  std::unique_lock lock(mu_);
  auto it = manifests_.find(manifest_key(pool, object_name));
  if (it == manifests_.end()) throw Error(Errc::NoSuchObject, pool + "/" + object_name);
  auto bytes = load(it->second.extent);
  release(it->second.extent);
  manifests_.erase(it);
  return bytes;
}

std::vector<ObjectListing> OsdDaemon::list_manifests(const std::string& pool) const {
  static const std::string kSuffix = ".manifest";
  std::shared_lock lock(mu_);
  std::vector<ObjectListing> out;
  for (auto it = manifests_.lower_bound(ChunkKey{pool, "", 0});
       it != manifests_.end() && it->first.pool == pool; ++it) {
    const auto& name = it->first.name;
    out.push_back({name.substr(0, name.size() - kSuffix.size()), it->second.object_size});
  }
  return out;
}

std::vector<std::tuple<ChunkKind, ChunkKey, Extent>> OsdDaemon::chunks() const {
  std::shared_lock lock(mu_);
  std::vector<std::tuple<ChunkKind, ChunkKey, Extent>> out;
  for (const auto& [key, entry] : data_) out.emplace_back(ChunkKind::data, key, entry.extent);
  for (const auto& [key, entry] : manifests_) {
    out.emplace_back(ChunkKind::manifest, key, entry.extent);
  }
  return out;
}

// ---------------------------------------------------------------------------

OsdServer::OsdServer(OsdDaemon& daemon, std::string address, std::string osd_secret,
                     std::string client_secret)
    : daemon_(daemon),
      osd_secret_(std::move(osd_secret)),
      client_secret_(std::move(client_secret)),
      server_(std::move(address), [this](const wire::Message& m) { return handle(m); }) {
  server_.start();
}

wire::Message OsdServer::handle(const wire::Message& request) {
  const auto& h = request.header;
  const auto& auth = h.contains("auth") ? h.at("auth") : nlohmann::json::object();
  const auto role = role_from_name(auth.value("role", std::string()));
  const std::string key = auth.value("key", std::string());
  const bool authorized = (role == Role::osd && key == osd_secret_) ||
                          (role == Role::client && key == client_secret_);
  if (!authorized) throw Error(Errc::AuthFailure, "osd." + std::to_string(daemon_.id()));

  const std::string op = h.value("op", std::string());
  const std::string pool = h.value("pool", std::string());
  const std::string name = h.value("name", std::string());
  const bool is_manifest = h.value("kind", std::string("data")) == "manifest";
  const ChunkKey chunk{pool, name, h.value("generation", std::uint64_t{0})};

  wire::Message response = wire::ok_response();
  if (op == "put_chunk") {
    if (is_manifest) {
      auto replaced = daemon_.put_manifest(pool, name, request.payload);
      response.header["replaced"] = replaced.has_value();
      if (replaced) response.payload = std::move(*replaced);
    } else {
      daemon_.put_chunk(chunk, request.payload);
    }
  } else if (op == "get_chunk") {
    response.payload = is_manifest ? daemon_.get_manifest(pool, name) : daemon_.get_chunk(chunk);
  } else if (op == "delete_chunk") {
    if (is_manifest) {
      response.payload = daemon_.delete_manifest(pool, name);
      response.header["deleted"] = true;
    } else {
      response.header["deleted"] = daemon_.delete_chunk(chunk);
    }
  } else if (op == "list_manifests") {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : daemon_.list_manifests(pool)) {
      objects.push_back({{"name", o.name}, {"size", o.total_size_bytes}});
    }
    response.header["objects"] = std::move(objects);
  } else if (op == "stat") {
    response.header["used_bytes"] = daemon_.used_bytes();
    response.header["capacity_bytes"] = daemon_.capacity_bytes();
  } else {
    throw Error(Errc::Protocol, "unknown op '" + op + "'");
  }
  return response;
}

// ---------------------------------------------------------------------------

wire::Message OsdClient::call(nlohmann::json header, std::vector<std::byte> payload) const {
  wire::Message request;
  request.header = std::move(header);
  request.header["auth"] = {{"role", std::string(role_name(role_))}, {"key", secret_}};
  request.payload = std::move(payload);
  return wire::expect_ok(wire::call(address_, request, Errc::BackendUnavailable));
}

void OsdClient::put_chunk(const ChunkKey& key, std::span<const std::byte> data) const {
  call({{"op", "put_chunk"}, {"pool", key.pool}, {"name", key.name}, {"generation", key.generation}},
       {data.begin(), data.end()});
}

std::vector<std::byte> OsdClient::get_chunk(const ChunkKey& key) const {
  return call({{"op", "get_chunk"}, {"pool", key.pool}, {"name", key.name},
               {"generation", key.generation}})
      .payload;
}

bool OsdClient::delete_chunk(const ChunkKey& key) const {
  return call({{"op", "delete_chunk"}, {"pool", key.pool}, {"name", key.name},
               {"generation", key.generation}})
      .header.value("deleted", false);
}

std::optional<std::vector<std::byte>> OsdClient::put_manifest(const std::string& pool,
                                                              const std::string& object_name,
                                                              std::span<const std::byte> data) const {
  auto response = call({{"op", "put_chunk"}, {"kind", "manifest"}, {"pool", pool}, {"name", object_name}},
                       {data.begin(), data.end()});
  if (!response.header.value("replaced", false)) return std::nullopt;
  return std::move(response.payload);
}

std::vector<std::byte> OsdClient::get_manifest(const std::string& pool,
                                               const std::string& object_name) const {
  return call({{"op", "get_chunk"}, {"kind", "manifest"}, {"pool", pool}, {"name", object_name}})
      .payload;
}

std::optional<std::vector<std::byte>> OsdClient::delete_manifest(const std::string& pool,
                                                                 const std::string& object_name) const {
  try {
    return call({{"op", "delete_chunk"}, {"kind", "manifest"}, {"pool", pool}, {"name", object_name}})
        .payload;
  } catch (const Error& e) {
    if (e.code() == Errc::NoSuchObject) return std::nullopt;
    throw;
  }
}

std::vector<ObjectListing> OsdClient::list_manifests(const std::string& pool) const {
  auto response = call({{"op", "list_manifests"}, {"pool", pool}});
  std::vector<ObjectListing> out;
  for (const auto& o : response.header.at("objects")) {
    out.push_back({o.at("name").get<std::string>(), o.at("size").get<std::uint64_t>()});
  }
  return out;
}

OsdUsage OsdClient::stat() const {
  auto response = call({{"op", "stat"}});
  OsdUsage usage;
  usage.used_bytes = response.header.at("used_bytes").get<std::uint64_t>();
  usage.capacity_bytes = response.header.at("capacity_bytes").get<std::uint64_t>();
  return usage;
}

OsdUsage RemoteStatsSource::usage(const OsdInfo& osd) {
  auto usage = OsdClient(osd.address, Role::osd, secret_).stat();
  usage.osd_id = osd.osd_id;
  return usage;
}

std::vector<std::string> RemoteStatsSource::manifests(const OsdInfo& osd, const std::string& pool) {
  std::vector<std::string> names;
  for (auto& o : OsdClient(osd.address, Role::osd, secret_).list_manifests(pool)) {
    names.push_back(std::move(o.name));
  }
  return names;
}

}  // namespace ramstore
