#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ramstore {

/// Token bucket shared by every reader and writer of one backend. A transfer of
/// n bytes is charged n / rate seconds; up to `burst` bytes pass unthrottled.
class TokenBucket {
 public:
  explicit TokenBucket(std::uint64_t bytes_per_second, std::uint64_t burst_bytes = 0);

  /// Blocks until `bytes` may pass.
  void consume(std::uint64_t bytes);

  std::uint64_t rate() const noexcept { return rate_; }

 private:
  using Clock = std::chrono::steady_clock;

  std::uint64_t rate_;
  std::chrono::duration<double> burst_;
  std::mutex mu_;
  Clock::time_point next_;
};

/// The central disk store: one file per object under a directory, with an
/// optional throughput cap. Throws BackendUnavailable if the directory is missing.
class CentralStore {
 public:
  explicit CentralStore(std::filesystem::path dir, std::optional<std::uint64_t> throttle_bytes_per_second = {});

  void write(const std::string& name, std::span<const std::byte> data);
  std::vector<std::byte> read(const std::string& name);
  void remove(const std::string& name);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  /// Null when unthrottled.
  TokenBucket* throttle() noexcept { return bucket_ ? &*bucket_ : nullptr; }

 private:
  std::filesystem::path dir_;
  std::optional<TokenBucket> bucket_;
};

}  // namespace ramstore
