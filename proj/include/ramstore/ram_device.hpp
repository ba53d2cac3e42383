#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

namespace ramstore {

struct DeviceId {
  std::uint64_t value = 0;
  friend auto operator<=>(const DeviceId&, const DeviceId&) = default;
};

enum class DeviceState { active, destroyed };

/// Compression-free RAM block device with a hard capacity quota.
///
/// I/O is byte addressed. Backing memory is allocated lazily in granules and
/// `used_bytes` counts the exact number of distinct bytes currently written,
/// so an all-zero payload and a random payload of the same length account
/// identically. Never-written bytes read back as zeros.
class RamDevice {
 public:
  RamDevice(DeviceId id, std::uint64_t capacity_bytes, std::uint64_t block_size_bytes);

  RamDevice(const RamDevice&) = delete;
  RamDevice& operator=(const RamDevice&) = delete;

  DeviceId id() const noexcept { return id_; }
  std::uint64_t capacity_bytes() const noexcept { return capacity_; }
  std::uint64_t block_size_bytes() const noexcept { return block_size_; }
  std::uint64_t used_bytes() const;
  DeviceState state() const;

  /// Throws NoSpace when the range runs past capacity, DeviceDestroyed after destroy().
  void write_at(std::uint64_t offset, std::span<const std::byte> data);

  /// Throws OutOfRange when the range runs past capacity, DeviceDestroyed after destroy().
  std::vector<std::byte> read_at(std::uint64_t offset, std::uint64_t length) const;
  void read_into(std::uint64_t offset, std::span<std::byte> out) const;

  /// Returns a range to the never-written state and releases fully unused granules.
  void discard(std::uint64_t offset, std::uint64_t length);

  /// Bytes of backing memory currently allocated.
  std::uint64_t resident_bytes() const;

  /// Releases all memory and rejects further I/O.
  void destroy();

 private:
  void check_active() const;
  bool granule_has_data(std::uint64_t granule) const;

  const DeviceId id_;
  const std::uint64_t capacity_;
  const std::uint64_t block_size_;
  const std::uint64_t granule_;

  mutable std::shared_mutex mu_;
  DeviceState state_ = DeviceState::active;
  std::unordered_map<std::uint64_t, std::unique_ptr<std::byte[]>> granules_;
  // Disjoint, non-adjacent written extents: start -> end (exclusive).
  std::map<std::uint64_t, std::uint64_t> written_;
  std::uint64_t used_ = 0;
};

/// Process-wide bookkeeping of RAM devices and the memory they reserve.
class DeviceRegistry {
 public:
  explicit DeviceRegistry(std::optional<std::uint64_t> quota_bytes = std::nullopt)
      : quota_(quota_bytes) {}

  std::shared_ptr<RamDevice> create_device(std::uint64_t capacity_bytes,
                                           std::uint64_t block_size_bytes);

  void write_at(DeviceId id, std::uint64_t offset, std::span<const std::byte> data);
  std::vector<std::byte> read_at(DeviceId id, std::uint64_t offset, std::uint64_t length) const;
  void destroy_device(DeviceId id);

  /// Throws UnknownDevice, or DeviceDestroyed for a device that was destroyed.
  std::shared_ptr<RamDevice> find(DeviceId id) const;

  std::uint64_t total_reserved_bytes() const;
  std::size_t active_count() const;
  std::vector<DeviceId> active_ids() const;

 private:
  std::optional<std::uint64_t> quota_;
  mutable std::mutex mu_;
  std::uint64_t next_id_ = 1;
  std::uint64_t total_reserved_ = 0;
  std::map<DeviceId, std::shared_ptr<RamDevice>> devices_;
  std::set<DeviceId> destroyed_;
};

}  // namespace ramstore
