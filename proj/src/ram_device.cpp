#include "ramstore/ram_device.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "ramstore/error.hpp"

namespace ramstore {

namespace {

constexpr std::uint64_t kMinGranule = 4096;
constexpr std::uint64_t kMaxGranule = 1 << 20;

void validate_geometry(std::uint64_t capacity, std::uint64_t block_size) {
  if (capacity == 0 || block_size == 0) {
    throw Error(Errc::InvalidGeometry, "capacity and block size must be positive");
  }
  if (capacity % block_size != 0) {
    throw Error(Errc::InvalidGeometry, "capacity " + std::to_string(capacity) +
                                           " is not a multiple of block size " +
                                           std::to_string(block_size));
  }
}

bool range_fits(std::uint64_t offset, std::uint64_t length, std::uint64_t capacity) {
  return offset <= capacity && length <= capacity - offset;
}

}  // namespace

RamDevice::RamDevice(DeviceId id, std::uint64_t capacity_bytes, std::uint64_t block_size_bytes)
    : id_(id),
      capacity_(capacity_bytes),
      block_size_(block_size_bytes),
      granule_(std::clamp(block_size_bytes, kMinGranule, kMaxGranule)) {
  validate_geometry(capacity_bytes, block_size_bytes);
}

std::uint64_t RamDevice::used_bytes() const {
  std::shared_lock lock(mu_);
  return used_;
}

DeviceState RamDevice::state() const {
  std::shared_lock lock(mu_);
  return state_;
}

std::uint64_t RamDevice::resident_bytes() const {
  std::shared_lock lock(mu_);
  return granules_.size() * granule_;
}

void RamDevice::check_active() const {
  if (state_ == DeviceState::destroyed) {
    throw Error(Errc::DeviceDestroyed, "device " + std::to_string(id_.value));
  }
}

void RamDevice::write_at(std::uint64_t offset, std::span<const std::byte> data) {
  std::unique_lock lock(mu_);
  check_active();
  if (!range_fits(offset, data.size(), capacity_)) {
    throw Error(Errc::NoSpace, "write of " + std::to_string(data.size()) + " bytes at " +
                                   std::to_string(offset) + " exceeds capacity " +
                                   std::to_string(capacity_));
  }
  if (data.empty()) return;

  std::uint64_t pos = offset;
  std::size_t consumed = 0;
  while (consumed < data.size()) {
    const std::uint64_t g = pos / granule_;
    const std::uint64_t in_granule = pos % granule_;
    const std::size_t n =
        static_cast<std::size_t>(std::min<std::uint64_t>(granule_ - in_granule, data.size() - consumed));
    auto& slot = granules_[g];
    if (!slot) {
      slot = std::make_unique<std::byte[]>(granule_);  // value-initialized: zeros
    }
    std::memcpy(slot.get() + in_granule, data.data() + consumed, n);
    consumed += n;
    pos += n;
  }

  // Merge [s, e) into the written extents and count only newly touched bytes.
  const std::uint64_t s = offset;
  const std::uint64_t e = offset + data.size();
  std::uint64_t added = e - s;
  std::uint64_t merged_s = s;
  std::uint64_t merged_e = e;
  auto it = written_.upper_bound(s);
  if (it != written_.begin()) {
    auto prev = std::prev(it);
    if (prev->second >= s) it = prev;
  }
  while (it != written_.end() && it->first <= merged_e) {
    const std::uint64_t lo = std::max(it->first, s);
    const std::uint64_t hi = std::min(it->second, e);
    if (hi > lo) added -= hi - lo;
    merged_s = std::min(merged_s, it->first);
    merged_e = std::max(merged_e, it->second);
    it = written_.erase(it);
  }
  written_.emplace(merged_s, merged_e);
  used_ += added;
}

std::vector<std::byte> RamDevice::read_at(std::uint64_t offset, std::uint64_t length) const {
  {
    std::shared_lock lock(mu_);
    check_active();
    if (!range_fits(offset, length, capacity_)) {
      throw Error(Errc::OutOfRange, "read of " + std::to_string(length) + " bytes at " +
                                        std::to_string(offset) + " exceeds capacity " +
                                        std::to_string(capacity_));
    }
  }
  std::vector<std::byte> out(static_cast<std::size_t>(length));
  read_into(offset, out);
  return out;
}

void RamDevice::read_into(std::uint64_t offset, std::span<std::byte> out) const {
  std::shared_lock lock(mu_);
  check_active();
  if (!range_fits(offset, out.size(), capacity_)) {
    throw Error(Errc::OutOfRange, "read of " + std::to_string(out.size()) + " bytes at " +
                                      std::to_string(offset) + " exceeds capacity " +
                                      std::to_string(capacity_));
  }
  std::uint64_t pos = offset;
  std::size_t produced = 0;
  while (produced < out.size()) {
    const std::uint64_t g = pos / granule_;
    const std::uint64_t in_granule = pos % granule_;
    const std::size_t n =
        static_cast<std::size_t>(std::min<std::uint64_t>(granule_ - in_granule, out.size() - produced));
    auto found = granules_.find(g);
    if (found == granules_.end()) {
      std::memset(out.data() + produced, 0, n);
    } else {
      std::memcpy(out.data() + produced, found->second.get() + in_granule, n);
    }
    produced += n;
    pos += n;
  }
}

bool RamDevice::granule_has_data(std::uint64_t granule) const {
  const std::uint64_t gs = granule * granule_;
  const std::uint64_t ge = std::min(gs + granule_, capacity_);
  auto it = written_.upper_bound(gs);
  if (it != written_.begin() && std::prev(it)->second > gs) return true;
  return it != written_.end() && it->first < ge;
}

void RamDevice::discard(std::uint64_t offset, std::uint64_t length) {
  std::unique_lock lock(mu_);
  check_active();
  if (!range_fits(offset, length, capacity_)) {
    throw Error(Errc::OutOfRange, "discard range exceeds capacity");
  }
  if (length == 0) return;
  const std::uint64_t s = offset;
  const std::uint64_t e = offset + length;

  auto it = written_.upper_bound(s);
  if (it != written_.begin() && std::prev(it)->second > s) it = std::prev(it);
  while (it != written_.end() && it->first < e) {
    const std::uint64_t is = it->first;
    const std::uint64_t ie = it->second;
    used_ -= std::min(ie, e) - std::max(is, s);
    it = written_.erase(it);
    if (is < s) written_.emplace(is, s);
    if (ie > e) it = written_.emplace(e, ie).first;
  }

  for (std::uint64_t g = s / granule_; g <= (e - 1) / granule_; ++g) {
    auto found = granules_.find(g);
    if (found == granules_.end()) continue;
    if (!granule_has_data(g)) {
      granules_.erase(found);
      continue;
    }
    const std::uint64_t gs = g * granule_;
    const std::uint64_t lo = std::max(gs, s);
    const std::uint64_t hi = std::min(gs + granule_, e);
    std::memset(found->second.get() + (lo - gs), 0, hi - lo);
  }
}

void RamDevice::destroy() {
  std::unique_lock lock(mu_);
  state_ = DeviceState::destroyed;
  granules_.clear();
  written_.clear();
  used_ = 0;
}

std::shared_ptr<RamDevice> DeviceRegistry::create_device(std::uint64_t capacity_bytes,
                                                         std::uint64_t block_size_bytes) {
  validate_geometry(capacity_bytes, block_size_bytes);
  std::lock_guard lock(mu_);
  if (quota_ && capacity_bytes > *quota_ - std::min(*quota_, total_reserved_)) {
    throw Error(Errc::QuotaExceeded, "registry quota of " + std::to_string(*quota_) +
                                         " bytes would be exceeded");
  }
  const DeviceId id{next_id_++};
  auto device = std::make_shared<RamDevice>(id, capacity_bytes, block_size_bytes);
  devices_.emplace(id, device);
  total_reserved_ += capacity_bytes;
  return device;
}

std::shared_ptr<RamDevice> DeviceRegistry::find(DeviceId id) const {
  std::lock_guard lock(mu_);
  if (auto it = devices_.find(id); it != devices_.end()) return it->second;
  if (destroyed_.contains(id)) {
    throw Error(Errc::DeviceDestroyed, "device " + std::to_string(id.value));
  }
  throw Error(Errc::UnknownDevice, "device " + std::to_string(id.value));
}

void DeviceRegistry::write_at(DeviceId id, std::uint64_t offset, std::span<const std::byte> data) {
  find(id)->write_at(offset, data);
}

std::vector<std::byte> DeviceRegistry::read_at(DeviceId id, std::uint64_t offset,
                                               std::uint64_t length) const {
  return find(id)->read_at(offset, length);
}

void DeviceRegistry::destroy_device(DeviceId id) {
  std::shared_ptr<RamDevice> device;
  {
    std::lock_guard lock(mu_);
    auto it = devices_.find(id);
    if (it == devices_.end()) {
      throw Error(Errc::UnknownDevice, "device " + std::to_string(id.value));
    }
    device = std::move(it->second);
    devices_.erase(it);
    destroyed_.insert(id);
    total_reserved_ -= device->capacity_bytes();
  }
  device->destroy();
}

std::uint64_t DeviceRegistry::total_reserved_bytes() const {
  std::lock_guard lock(mu_);
  return total_reserved_;
}

std::size_t DeviceRegistry::active_count() const {
  std::lock_guard lock(mu_);
  return devices_.size();
}

std::vector<DeviceId> DeviceRegistry::active_ids() const {
  std::lock_guard lock(mu_);
  std::vector<DeviceId> ids;
  ids.reserve(devices_.size());
  for (const auto& [id, _] : devices_) ids.push_back(id);
  return ids;
}

}  // namespace ramstore
