#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ramstore {

enum class BenchBackend { ram, central };
enum class Direction { read, write };

std::string_view bench_backend_name(BenchBackend backend);

/// 4K, 40K, 400K, 4M, 40M, 400M (K and M are binary multipliers).
std::vector<std::uint64_t> default_block_sizes();
/// "4K" -> 4096, "40M" -> 41943040, "512" -> 512. Throws InvalidArgument.
std::uint64_t parse_block_size(std::string_view text);
/// Inverse of parse_block_size for exact multiples; plain bytes otherwise.
std::string format_block_size(std::uint64_t bytes);

struct SweepSpec {
  BenchBackend backend = BenchBackend::ram;
  std::vector<std::uint64_t> block_sizes = default_block_sizes();
  std::uint64_t total_bytes_per_run = 0;
  unsigned repeats = 3;
  Direction direction = Direction::write;
  // Central backend only.
  std::string central_dir;
  std::optional<std::uint64_t> central_throttle_bytes_per_second;

  /// InvalidArgument for an empty block list, a zero block or a run smaller
  /// than the largest block; TooFewSamples for fewer than two repeats.
  void validate() const;
};

struct SweepRow {
  std::uint64_t block_size = 0;
  double mean_throughput = 0.0;  // bytes per second
  double std_throughput = 0.0;
  std::vector<double> samples;
  std::uint64_t bytes_moved = 0;  // total_bytes_per_run * repeats
};

/// For each block size, `repeats` timed transfers of total_bytes_per_run.
/// Reads are preceded by an untimed priming write. The RAM backend uses a
/// fresh device per run; the central backend a file in central_dir.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

/// Mean and sample standard deviation (divisor n - 1). TooFewSamples below two.
std::pair<double, double> aggregate(std::span<const double> samples);

/// "m.mmm ± s.sss" in GB/s (10^9 bytes per second).
std::string format_cell(double mean_bytes_per_second, double std_bytes_per_second);

struct BenchColumn {
  std::string label;
  std::vector<SweepRow> rows;
};

/// One row per block size and one column per backend; the largest mean in each
/// row (as printed) carries a trailing '*', ties included. MismatchedRows when
/// the columns disagree on block sizes.
std::string render_table(const std::vector<BenchColumn>& columns);

void to_json(nlohmann::json& j, const SweepRow& row);
void from_json(const nlohmann::json& j, SweepRow& row);

}  // namespace ramstore
