#include "ramstore/central_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "ramstore/error.hpp"

namespace ramstore {

namespace {

// Keeps each throttled step small so a large object does not stall peers in one go.
constexpr std::size_t kIoStep = 1u << 20;

std::string os_error(const std::string& what, const std::filesystem::path& path) {
  return what + " " + path.string() + ": " + std::strerror(errno);
}

}  // namespace

TokenBucket::TokenBucket(std::uint64_t bytes_per_second, std::uint64_t burst_bytes)
    : rate_(bytes_per_second),
      burst_(static_cast<double>(burst_bytes) / static_cast<double>(bytes_per_second ? bytes_per_second : 1)),
      next_(Clock::now()) {
  if (bytes_per_second == 0) throw Error(Errc::InvalidArgument, "throttle rate must be positive");
}

void TokenBucket::consume(std::uint64_t bytes) {
  Clock::time_point until;
  {
    std::lock_guard lock(mu_);
    const auto now = Clock::now();
    const auto floor = now - std::chrono::duration_cast<Clock::duration>(burst_);
    if (next_ < floor) next_ = floor;
    next_ += std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(static_cast<double>(bytes) / static_cast<double>(rate_)));
    until = next_;
  }
  std::this_thread::sleep_until(until);
}

CentralStore::CentralStore(std::filesystem::path dir, std::optional<std::uint64_t> throttle_bytes_per_second)
    : dir_(std::move(dir)) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir_, ec)) {
    throw Error(Errc::BackendUnavailable, "central directory " + dir_.string() + " does not exist");
  }
  if (throttle_bytes_per_second) bucket_.emplace(*throttle_bytes_per_second);
}

void CentralStore::write(const std::string& name, std::span<const std::byte> data) {
  const auto path = dir_ / name;
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::BackendUnavailable, os_error("open", path));
  std::size_t done = 0;
  while (done < data.size()) {
    const std::size_t step = std::min(kIoStep, data.size() - done);
    if (bucket_) bucket_->consume(step);
    const ssize_t w = ::write(fd, data.data() + done, step);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      if (err == ENOSPC) throw Error(Errc::NoSpace, path.string());
      errno = err;
      throw Error(Errc::BackendUnavailable, os_error("write", path));
    }
    done += static_cast<std::size_t>(w);
  }
  ::close(fd);
}

std::vector<std::byte> CentralStore::read(const std::string& name) {
  const auto path = dir_ / name;
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) {
    if (errno == ENOENT) throw Error(Errc::NoSuchObject, path.string());
    throw Error(Errc::BackendUnavailable, os_error("open", path));
  }
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  std::vector<std::byte> data(ec ? 0 : size);
  std::size_t done = 0;
  while (done < data.size()) {
    const std::size_t step = std::min(kIoStep, data.size() - done);
    if (bucket_) bucket_->consume(step);
    const ssize_t r = ::read(fd, data.data() + done, step);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) {
      ::close(fd);
      throw Error(Errc::BackendUnavailable, os_error("read", path));
    }
    done += static_cast<std::size_t>(r);
  }
  ::close(fd);
  return data;
}

void CentralStore::remove(const std::string& name) {
  std::error_code ec;
  std::filesystem::remove(dir_ / name, ec);
}

}  // namespace ramstore
