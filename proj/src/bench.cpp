#include "ramstore/bench.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "ramstore/central_store.hpp"
#include "ramstore/error.hpp"
#include "ramstore/ram_device.hpp"

namespace ramstore {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kDeviceBlock = 4096;

std::uint64_t round_up(std::uint64_t n, std::uint64_t to) { return (n + to - 1) / to * to; }

std::vector<std::byte> random_block(std::uint64_t size) {
  std::mt19937_64 rng(size);
  std::vector<std::byte> out(size);
  for (std::size_t i = 0; i < out.size(); i += 8) {
    const std::uint64_t v = rng();
    std::memcpy(out.data() + i, &v, std::min<std::size_t>(8, out.size() - i));
  }
  return out;
}

class RamTarget {
 public:
  explicit RamTarget(std::uint64_t total) : capacity_(round_up(total, kDeviceBlock)) {}

  void reset() { device_ = std::make_unique<RamDevice>(DeviceId{1}, capacity_, kDeviceBlock); }
  void write(std::uint64_t offset, std::span<const std::byte> data) { device_->write_at(offset, data); }
  void read(std::uint64_t offset, std::span<std::byte> out) { device_->read_into(offset, out); }
  void finish() {}

 private:
  std::uint64_t capacity_;
  std::unique_ptr<RamDevice> device_;
};

class FileTarget {
 public:
  FileTarget(const std::string& dir, std::optional<std::uint64_t> throttle) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
      throw Error(Errc::BackendUnavailable, "central directory " + dir + " does not exist");
    }
    path_ = std::filesystem::path(dir) / fmt::format("ramstore-bench-{}.dat", ::getpid());
    if (throttle) bucket_.emplace(*throttle);
  }
  ~FileTarget() {
    close();
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

  void reset() {
    close();
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::BackendUnavailable, path_.string() + ": " + std::strerror(errno));
  }

  void write(std::uint64_t offset, std::span<const std::byte> data) {
    if (bucket_) bucket_->consume(data.size());
    std::size_t done = 0;
    while (done < data.size()) {
      const ssize_t w = ::pwrite(fd_, data.data() + done, data.size() - done, static_cast<off_t>(offset + done));
      if (w < 0) {
        if (errno == EINTR) continue;
        if (errno == ENOSPC) throw Error(Errc::NoSpace, path_.string());
        throw Error(Errc::BackendUnavailable, path_.string() + ": " + std::strerror(errno));
      }
      done += static_cast<std::size_t>(w);
    }
  }

  void read(std::uint64_t offset, std::span<std::byte> out) {
    if (bucket_) bucket_->consume(out.size());
    std::size_t done = 0;
    while (done < out.size()) {
      const ssize_t r = ::pread(fd_, out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) throw Error(Errc::BackendUnavailable, path_.string() + ": short read");
      done += static_cast<std::size_t>(r);
    }
  }

  void finish() {}

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::filesystem::path path_;
  std::optional<TokenBucket> bucket_;
  int fd_ = -1;
};

template <typename Target>
void transfer_all(Target& target, const SweepSpec& spec, std::uint64_t block, std::span<const std::byte> source,
                  std::span<std::byte> sink, Direction direction) {
  for (std::uint64_t offset = 0; offset < spec.total_bytes_per_run; offset += block) {
    const std::uint64_t n = std::min(block, spec.total_bytes_per_run - offset);
    if (direction == Direction::write) {
      target.write(offset, source.first(n));
    } else {
      target.read(offset, sink.first(n));
    }
  }
}

template <typename Target>
std::vector<SweepRow> sweep(Target& target, const SweepSpec& spec) {
  std::vector<SweepRow> rows;
  for (const std::uint64_t block : spec.block_sizes) {
    const auto source = random_block(block);
    std::vector<std::byte> sink(spec.direction == Direction::read ? block : 0);
    SweepRow row;
    row.block_size = block;
    for (unsigned r = 0; r < spec.repeats; ++r) {
      target.reset();
      if (spec.direction == Direction::read) transfer_all(target, spec, block, source, sink, Direction::write);
      const auto t0 = Clock::now();
      transfer_all(target, spec, block, source, sink, spec.direction);
      target.finish();
      const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
      row.samples.push_back(static_cast<double>(spec.total_bytes_per_run) / std::max(elapsed, 1e-9));
      row.bytes_moved += spec.total_bytes_per_run;
    }
    std::tie(row.mean_throughput, row.std_throughput) = aggregate(row.samples);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string rounded(double bytes_per_second) { return fmt::format("{:.3f}", bytes_per_second / 1e9); }

}  // namespace

std::string_view bench_backend_name(BenchBackend backend) {
  return backend == BenchBackend::ram ? "ram" : "central";
}

std::vector<std::uint64_t> default_block_sizes() {
  return {4ull << 10, 40ull << 10, 400ull << 10, 4ull << 20, 40ull << 20, 400ull << 20};
}

std::uint64_t parse_block_size(std::string_view text) {
  std::uint64_t multiplier = 1;
  std::string_view digits = text;
  if (!digits.empty()) {
    const char suffix = digits.back();
    if (suffix == 'K' || suffix == 'k') multiplier = 1ull << 10;
    if (suffix == 'M' || suffix == 'm') multiplier = 1ull << 20;
    if (suffix == 'G' || suffix == 'g') multiplier = 1ull << 30;
    if (multiplier != 1) digits.remove_suffix(1);
  }
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || value == 0) {
    throw Error(Errc::InvalidArgument, "bad block size '" + std::string(text) + "'");
  }
  return value * multiplier;
}

std::string format_block_size(std::uint64_t bytes) {
  if (bytes >= (1ull << 30) && bytes % (1ull << 30) == 0) return std::to_string(bytes >> 30) + "G";
  if (bytes >= (1ull << 20) && bytes % (1ull << 20) == 0) return std::to_string(bytes >> 20) + "M";
  if (bytes >= (1ull << 10) && bytes % (1ull << 10) == 0) return std::to_string(bytes >> 10) + "K";
  return std::to_string(bytes);
}

void SweepSpec::validate() const {
  if (block_sizes.empty()) throw Error(Errc::InvalidArgument, "no block sizes");
  const auto largest = *std::max_element(block_sizes.begin(), block_sizes.end());
  if (*std::min_element(block_sizes.begin(), block_sizes.end()) == 0) {
    throw Error(Errc::InvalidArgument, "block sizes must be positive");
  }
  if (total_bytes_per_run < largest) {
    throw Error(Errc::InvalidArgument, "total_bytes_per_run must be at least the largest block size");
  }
  if (repeats < 2) throw Error(Errc::TooFewSamples, "a standard deviation needs at least two repeats");
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  if (spec.backend == BenchBackend::ram) {
    RamTarget target(spec.total_bytes_per_run);
    return sweep(target, spec);
  }
  FileTarget target(spec.central_dir, spec.central_throttle_bytes_per_second);
  return sweep(target, spec);
}

std::pair<double, double> aggregate(std::span<const double> samples) {
  if (samples.size() < 2) throw Error(Errc::TooFewSamples, "need at least two samples");
  double sum = 0.0;
  for (double s : samples) sum += s;
  const double mean = sum / static_cast<double>(samples.size());
  double squares = 0.0;
  for (double s : samples) squares += (s - mean) * (s - mean);
  return {mean, std::sqrt(squares / static_cast<double>(samples.size() - 1))};
}

std::string format_cell(double mean_bytes_per_second, double std_bytes_per_second) {
  return rounded(mean_bytes_per_second) + " ± " + rounded(std_bytes_per_second);
}

std::string render_table(const std::vector<BenchColumn>& columns) {
  if (columns.empty()) throw Error(Errc::MismatchedRows, "no columns");
  const auto& reference = columns.front().rows;
  for (const auto& c : columns) {
    bool same = c.rows.size() == reference.size();
    for (std::size_t i = 0; same && i < reference.size(); ++i) same = c.rows[i].block_size == reference[i].block_size;
    if (!same) throw Error(Errc::MismatchedRows, "column '" + c.label + "' has different block sizes");
  }

  constexpr int kWidth = 20;
  std::ostringstream out;
  out << fmt::format("{:<12}", "Block Size");
  for (const auto& c : columns) out << fmt::format(" {:>{}}", c.label, kWidth);
  out << '\n';
  for (std::size_t i = 0; i < reference.size(); ++i) {
    // Compare what is printed, so equal-looking cells are marked together.
    double best = -1.0;
    for (const auto& c : columns) best = std::max(best, std::stod(rounded(c.rows[i].mean_throughput)));
    out << fmt::format("{:<12}", format_block_size(reference[i].block_size));
    for (const auto& c : columns) {
      const auto& row = c.rows[i];
      std::string cell = format_cell(row.mean_throughput, row.std_throughput);
      if (std::stod(rounded(row.mean_throughput)) == best) cell += '*';
      out << fmt::format(" {:>{}}", cell, kWidth);
    }
    out << '\n';
  }
  out << "GB/s, mean ± sample std; * marks the row maximum\n";
  return out.str();
}

void to_json(nlohmann::json& j, const SweepRow& row) {
  j = nlohmann::json{{"block_size", row.block_size},
                     {"mean_throughput", row.mean_throughput},
                     {"std_throughput", row.std_throughput},
                     {"samples", row.samples},
                     {"bytes_moved", row.bytes_moved}};
}

void from_json(const nlohmann::json& j, SweepRow& row) {
  row.block_size = j.at("block_size").get<std::uint64_t>();
  row.mean_throughput = j.at("mean_throughput").get<double>();
  row.std_throughput = j.at("std_throughput").get<double>();
  row.samples = j.at("samples").get<std::vector<double>>();
  row.bytes_moved = j.at("bytes_moved").get<std::uint64_t>();
}

}  // namespace ramstore
