#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramstore/object_store.hpp"
#include "ramstore/orchestrator.hpp"

namespace ramstore {

enum class BackendKind { central, transient };

std::string_view backend_kind_name(BackendKind kind);

struct BackendRef {
  BackendKind kind = BackendKind::central;
  std::string path;                                        // central
  std::optional<std::uint64_t> throttle_bytes_per_second;  // central
  std::string pool;                                        // transient

  static BackendRef central(std::string path, std::optional<std::uint64_t> throttle = {});
  static BackendRef transient(std::string pool);

  friend bool operator==(const BackendRef&, const BackendRef&) = default;
};

struct StageSpec {
  std::string name;
  std::optional<BackendRef> read_from;  // nullopt: the pipeline's initial input
  BackendRef write_to;
  std::uint64_t output_bytes = 0;
  double synthetic_compute_seconds = 0.0;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct PipelineSpec {
  std::uint64_t input_bytes = 0;
  BackendRef input_backend;  // always central
  std::vector<StageSpec> stages;
  unsigned parallelism = 1;
  std::uint64_t seed = 1;

  /// EmptyPipeline for no stages; InvalidArgument for broken chaining, a
  /// non-central input or a final stage that does not write central.
  void validate() const;

  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

struct LedgerRow {
  std::string stage;
  BackendKind backend = BackendKind::central;
  bool initial_input = false;  // the first stage's read of the pipeline input
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;

  friend bool operator==(const LedgerRow&, const LedgerRow&) = default;
};

struct BackendTotals {
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;

  friend bool operator==(const BackendTotals&, const BackendTotals&) = default;
};

/// Exact byte counts per (stage, backend). Safe to record from several threads.
class IoLedger {
 public:
  IoLedger() = default;
  IoLedger(const IoLedger& other);
  IoLedger& operator=(const IoLedger& other);

  void record_read(const std::string& stage, BackendKind backend, std::uint64_t bytes, bool initial_input = false);
  void record_write(const std::string& stage, BackendKind backend, std::uint64_t bytes);

  const std::vector<LedgerRow>& rows() const noexcept { return rows_; }
  BackendTotals totals(BackendKind backend) const;
  /// Central bytes written plus central bytes read, excluding the initial input read.
  std::uint64_t central_overhead() const;
  /// Null when the stage never touched that backend.
  const LedgerRow* find(std::string_view stage, BackendKind backend, bool initial_input = false) const;

  friend bool operator==(const IoLedger& a, const IoLedger& b) { return a.rows_ == b.rows_; }

 private:
  LedgerRow& row(const std::string& stage, BackendKind backend, bool initial_input);

  mutable std::mutex mu_;
  std::vector<LedgerRow> rows_;
};

struct StageTiming {
  std::string name;
  double seconds = 0.0;

  friend bool operator==(const StageTiming&, const StageTiming&) = default;
};

struct PipelineReport {
  IoLedger ledger;
  std::vector<StageTiming> stages;
  std::optional<double> deploy_seconds;  // set when a cluster was deployed inline
  std::optional<double> remove_seconds;
  double total_seconds = 0.0;
};

struct PipelineRunOptions {
  /// A running cluster for transient stages.
  std::optional<ClusterEndpoint> cluster;
  /// Alternatively, deploy this plan before the first stage and remove it after the last.
  std::optional<DeploymentPlan> inline_deploy;
  Orchestrator::Options orchestrator;
  /// Keep the final stage's output in the central directory.
  bool keep_final_output = false;
};

/// Runs the stages in order. Stage k reads every byte stage k-1 wrote, checks
/// its CRC-32, optionally sleeps for the synthetic compute time and writes
/// seeded pseudorandom output. Within a stage, `parallelism` workers each move
/// one disjoint part. The initial input is staged before timing starts and is
/// not counted as a write.
PipelineReport run_pipeline(const PipelineSpec& spec, const PipelineRunOptions& options = {});

/// Every stage reads and writes `central`; stage names default to stage1..n.
PipelineSpec make_baseline_spec(std::uint64_t input_bytes, const std::vector<std::uint64_t>& stage_output_bytes,
                                const BackendRef& central, const std::vector<std::string>& names = {});

/// Stages 1..n-1 write `transient`, stages 2..n read it, the last stage writes
/// `central`. Throws SingleStage for a one-stage pipeline.
PipelineSpec make_transient_spec(std::uint64_t input_bytes, const std::vector<std::uint64_t>& stage_output_bytes,
                                 const BackendRef& central, const BackendRef& transient,
                                 const std::vector<std::string>& names = {});

/// (1 - transient/baseline) * 100 over central overheads. ZeroBaseline if the baseline is 0.
double io_overhead_reduction(const IoLedger& baseline, const IoLedger& transient);
/// (1 - transient/baseline) * 100. ZeroBaseline unless both are positive.
double time_reduction(double baseline_total_seconds, double transient_total_seconds);

/// Tomography workload at 1 MiB per gigabyte of the reference job: 42.346
/// units of input, 121.929 units of intermediate output split across the first
/// three stages in proportion to their reference durations, 57.042 units of
/// final output.
struct ScaledPreset {
  std::uint64_t input_bytes = 0;
  std::vector<std::string> stage_names;
  std::vector<std::uint64_t> stage_output_bytes;
  // Reference total job times in minutes, baseline then transient.
  double reference_baseline_minutes = 0.0;
  double reference_transient_minutes = 0.0;
};

inline constexpr std::uint64_t kScaleUnitBytes = 1ull << 20;

ScaledPreset paper_scaled_preset();

/// Process | seconds table with Deploy and Remove rows (0 when not deployed inline).
std::string render_report(const PipelineReport& report);
/// Both runs side by side, followed by overheads and reduction percentages.
/// `reference_minutes` adds the reduction over externally supplied totals.
std::string render_comparison(const PipelineReport& baseline, const PipelineReport& transient,
                              std::optional<std::pair<double, double>> reference_minutes = {});

void to_json(nlohmann::json& j, const BackendRef& ref);
void from_json(const nlohmann::json& j, BackendRef& ref);
void to_json(nlohmann::json& j, const StageSpec& stage);
void from_json(const nlohmann::json& j, StageSpec& stage);
void to_json(nlohmann::json& j, const PipelineSpec& spec);
void from_json(const nlohmann::json& j, PipelineSpec& spec);
void to_json(nlohmann::json& j, const IoLedger& ledger);
void from_json(const nlohmann::json& j, IoLedger& ledger);
void to_json(nlohmann::json& j, const PipelineReport& report);
void from_json(const nlohmann::json& j, PipelineReport& report);

}  // namespace ramstore
