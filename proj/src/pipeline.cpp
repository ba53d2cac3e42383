#include "ramstore/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "ramstore/central_store.hpp"
#include "ramstore/error.hpp"
#include "ramstore/hash.hpp"

using nlohmann::json;

namespace ramstore {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::uint64_t> split_bytes(std::uint64_t total, unsigned parts) {
  std::vector<std::uint64_t> sizes(parts, total / parts);
  for (std::uint64_t i = 0; i < total % parts; ++i) ++sizes[i];
  return sizes;
}

// Deterministic in (seed, stream, part) and independent of how work is split
// across threads.
std::vector<std::byte> synthetic_payload(std::uint64_t seed, std::uint64_t stream, std::uint64_t part,
                                         std::uint64_t size) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(part)};
  std::mt19937_64 rng(seq);
  std::vector<std::byte> out(size);
  std::size_t i = 0;
  for (; i + 8 <= out.size(); i += 8) {
    const std::uint64_t v = rng();
    std::memcpy(out.data() + i, &v, 8);
  }
  if (i < out.size()) {
    const std::uint64_t v = rng();
    std::memcpy(out.data() + i, &v, out.size() - i);
  }
  return out;
}

struct Part {
  std::string name;
  std::uint64_t size = 0;
  std::uint32_t crc = 0;
};

class Backends {
 public:
  explicit Backends(std::optional<ClusterEndpoint> cluster) {
    if (cluster) store_.emplace(std::move(*cluster));
  }

  void write(const BackendRef& ref, const std::string& name, std::span<const std::byte> data) {
    if (ref.kind == BackendKind::central) {
      central(ref).write(name, data);
    } else {
      transient().put_object(ref.pool, name, data);
    }
  }

  std::vector<std::byte> read(const BackendRef& ref, const std::string& name) {
    if (ref.kind == BackendKind::central) return central(ref).read(name);
    return transient().get_object(ref.pool, name).data;
  }

  void remove(const BackendRef& ref, const std::string& name) {
    try {
      if (ref.kind == BackendKind::central) {
        central(ref).remove(name);
      } else {
        transient().delete_object(ref.pool, name);
      }
    } catch (const Error&) {
    }
  }

  void check(const BackendRef& ref) {
    if (ref.kind == BackendKind::central) {
      central(ref);
    } else if (transient().map().find_pool(ref.pool) == nullptr) {
      throw Error(Errc::UnknownPool, ref.pool);
    }
  }

 private:
  CentralStore& central(const BackendRef& ref) {
    std::lock_guard lock(mu_);
    auto& slot = central_[ref.path];
    if (!slot) slot = std::make_unique<CentralStore>(ref.path, ref.throttle_bytes_per_second);
    return *slot;
  }

  ObjectStore& transient() {
    if (!store_) throw Error(Errc::BackendUnavailable, "no transient cluster attached");
    return *store_;
  }

  std::mutex mu_;
  std::map<std::string, std::unique_ptr<CentralStore>> central_;
  std::optional<ObjectStore> store_;
};

template <typename F>
void run_workers(unsigned count, F&& work) {
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> threads;
  for (unsigned i = 1; i < count; ++i) {
    threads.emplace_back([&, i] {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  try {
    work(0);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string stage_label(const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : "stage" + std::to_string(i + 1);
}

}  // namespace

std::string_view backend_kind_name(BackendKind kind) {
  return kind == BackendKind::central ? "central" : "transient";
}

BackendRef BackendRef::central(std::string path, std::optional<std::uint64_t> throttle) {
  BackendRef ref;
  ref.kind = BackendKind::central;
  ref.path = std::move(path);
  ref.throttle_bytes_per_second = throttle;
  return ref;
}

BackendRef BackendRef::transient(std::string pool) {
  BackendRef ref;
  ref.kind = BackendKind::transient;
  ref.pool = std::move(pool);
  return ref;
}

void PipelineSpec::validate() const {
  if (stages.empty()) throw Error(Errc::EmptyPipeline, "a pipeline needs at least one stage");
  if (parallelism == 0) throw Error(Errc::InvalidArgument, "parallelism must be positive");
  if (input_backend.kind != BackendKind::central) {
    throw Error(Errc::InvalidArgument, "the initial input lives on the central backend");
  }
  if (stages.front().read_from) throw Error(Errc::InvalidArgument, "the first stage reads the initial input");
  for (std::size_t k = 1; k < stages.size(); ++k) {
    if (!stages[k].read_from || !(*stages[k].read_from == stages[k - 1].write_to)) {
      throw Error(Errc::InvalidArgument,
                  "stage '" + stages[k].name + "' must read where '" + stages[k - 1].name + "' wrote");
    }
  }
  if (stages.back().write_to.kind != BackendKind::central) {
    throw Error(Errc::InvalidArgument, "the last stage writes final results to the central backend");
  }
}

// ---------------------------------------------------------------------------

IoLedger::IoLedger(const IoLedger& other) {
  std::lock_guard lock(other.mu_);
  rows_ = other.rows_;
}

IoLedger& IoLedger::operator=(const IoLedger& other) {
  if (this != &other) {
    std::scoped_lock lock(mu_, other.mu_);
    rows_ = other.rows_;
  }
  return *this;
}

LedgerRow& IoLedger::row(const std::string& stage, BackendKind backend, bool initial_input) {
  for (auto& r : rows_) {
    if (r.stage == stage && r.backend == backend && r.initial_input == initial_input) return r;
  }
  rows_.push_back(LedgerRow{stage, backend, initial_input, 0, 0});
  return rows_.back();
}

void IoLedger::record_read(const std::string& stage, BackendKind backend, std::uint64_t bytes, bool initial_input) {
  std::lock_guard lock(mu_);
  row(stage, backend, initial_input).bytes_read += bytes;
}

void IoLedger::record_write(const std::string& stage, BackendKind backend, std::uint64_t bytes) {
  std::lock_guard lock(mu_);
  row(stage, backend, false).bytes_written += bytes;
}

BackendTotals IoLedger::totals(BackendKind backend) const {
  std::lock_guard lock(mu_);
  BackendTotals t;
  for (const auto& r : rows_) {
    if (r.backend != backend) continue;
    t.bytes_read += r.bytes_read;
    t.bytes_written += r.bytes_written;
  }
  return t;
}

std::uint64_t IoLedger::central_overhead() const {
  std::lock_guard lock(mu_);
  std::uint64_t total = 0;
  for (const auto& r : rows_) {
    if (r.backend != BackendKind::central) continue;
    total += r.bytes_written;
    if (!r.initial_input) total += r.bytes_read;
  }
  return total;
}

const LedgerRow* IoLedger::find(std::string_view stage, BackendKind backend, bool initial_input) const {
  std::lock_guard lock(mu_);
  for (const auto& r : rows_) {
    if (r.stage == stage && r.backend == backend && r.initial_input == initial_input) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

PipelineReport run_pipeline(const PipelineSpec& spec, const PipelineRunOptions& options) {
  spec.validate();
  bool needs_transient = false;
  for (const auto& s : spec.stages) needs_transient |= s.write_to.kind == BackendKind::transient;
  if (needs_transient && !options.cluster && !options.inline_deploy) {
    throw Error(Errc::BackendUnavailable, "transient stages need a deployed cluster");
  }

  const unsigned parts = spec.parallelism;
  const std::string prefix = fmt::format("run{:08x}", std::random_device{}());
  auto part_names = [&](const std::string& what) {
    std::vector<std::string> names;
    for (unsigned i = 0; i < parts; ++i) names.push_back(fmt::format("{}.{}.part{}", prefix, what, i));
    return names;
  };

  // Stage the initial input; not timed, not ledgered.
  Backends central_only(std::nullopt);
  std::vector<Part> input(parts);
  {
    const auto names = part_names("input");
    const auto sizes = split_bytes(spec.input_bytes, parts);
    run_workers(parts, [&](unsigned i) {
      const auto data = synthetic_payload(spec.seed, 0, i, sizes[i]);
      input[i] = {names[i], sizes[i], crc32(data)};
      central_only.write(spec.input_backend, names[i], data);
    });
  }

  PipelineReport report;
  const auto started = Clock::now();
  std::optional<Orchestrator> orchestrator;
  std::optional<ClusterEndpoint> cluster = options.cluster;
  if (needs_transient && !cluster) {
    orchestrator.emplace(options.orchestrator);
    const auto t0 = Clock::now();
    try {
      orchestrator->deploy(*options.inline_deploy);
    } catch (...) {
      for (const auto& p : input) central_only.remove(spec.input_backend, p.name);
      throw;
    }
    report.deploy_seconds = seconds_since(t0);
    cluster = connect_cluster(options.inline_deploy->shared_dir, options.inline_deploy->cluster_id);
  }

  Backends backends(cluster);
  std::vector<Part> previous = input;
  BackendRef previous_ref = spec.input_backend;
  std::vector<std::pair<BackendRef, std::string>> leftovers;
  for (const auto& p : input) leftovers.emplace_back(spec.input_backend, p.name);

  auto finish = [&] {
    for (const auto& [ref, name] : leftovers) backends.remove(ref, name);
    if (orchestrator) {
      const auto t0 = Clock::now();
      orchestrator->remove(options.inline_deploy->shared_dir, options.inline_deploy->cluster_id);
      report.remove_seconds = seconds_since(t0);
    }
  };

  try {
    for (const auto& stage : spec.stages) backends.check(stage.write_to);

    for (std::size_t k = 0; k < spec.stages.size(); ++k) {
      const StageSpec& stage = spec.stages[k];
      const auto t0 = Clock::now();
      const BackendRef& source = stage.read_from ? *stage.read_from : spec.input_backend;
      const bool initial = !stage.read_from;
      const auto names = part_names(fmt::format("s{}", k + 1));
      const auto sizes = split_bytes(stage.output_bytes, parts);
      std::vector<Part> output(parts);

      run_workers(parts, [&](unsigned i) {
        const auto in = backends.read(source, previous[i].name);
        report.ledger.record_read(stage.name, source.kind, in.size(), initial);
        if (in.size() != previous[i].size || crc32(in) != previous[i].crc) {
          throw Error(Errc::ChecksumMismatch, "stage '" + stage.name + "' read altered data from " + previous[i].name);
        }
        if (stage.synthetic_compute_seconds > 0) {
          std::this_thread::sleep_for(std::chrono::duration<double>(stage.synthetic_compute_seconds));
        }
        const auto out = synthetic_payload(spec.seed, k + 1, i, sizes[i]);
        output[i] = {names[i], sizes[i], crc32(out)};
        backends.write(stage.write_to, names[i], out);
        report.ledger.record_write(stage.name, stage.write_to.kind, out.size());
      });

      for (const auto& p : output) leftovers.emplace_back(stage.write_to, p.name);
      // Intermediate data is dropped once its consumer has finished.
      if (k > 0) {
        for (const auto& p : previous) backends.remove(previous_ref, p.name);
      }
      previous = std::move(output);
      previous_ref = stage.write_to;
      report.stages.push_back({stage.name, seconds_since(t0)});
    }
  } catch (...) {
    try {
      finish();
    } catch (const std::exception&) {
    }
    throw;
  }

  if (options.keep_final_output) {
    std::erase_if(leftovers, [&](const auto& entry) {
      return entry.first == previous_ref &&
             std::any_of(previous.begin(), previous.end(), [&](const Part& p) { return p.name == entry.second; });
    });
  }
  finish();
  report.total_seconds = seconds_since(started);
  return report;
}

PipelineSpec make_baseline_spec(std::uint64_t input_bytes, const std::vector<std::uint64_t>& stage_output_bytes,
                                const BackendRef& central, const std::vector<std::string>& names) {
  if (stage_output_bytes.empty()) throw Error(Errc::EmptyPipeline, "a pipeline needs at least one stage");
  PipelineSpec spec;
  spec.input_bytes = input_bytes;
  spec.input_backend = central;
  for (std::size_t i = 0; i < stage_output_bytes.size(); ++i) {
    StageSpec stage;
    stage.name = stage_label(names, i);
    if (i > 0) stage.read_from = central;
    stage.write_to = central;
    stage.output_bytes = stage_output_bytes[i];
    spec.stages.push_back(std::move(stage));
  }
  return spec;
}

PipelineSpec make_transient_spec(std::uint64_t input_bytes, const std::vector<std::uint64_t>& stage_output_bytes,
                                 const BackendRef& central, const BackendRef& transient,
                                 const std::vector<std::string>& names) {
  if (stage_output_bytes.empty()) throw Error(Errc::EmptyPipeline, "a pipeline needs at least one stage");
  if (stage_output_bytes.size() == 1) {
    throw Error(Errc::SingleStage, "a single stage has no intermediate data to keep in the transient store");
  }
  PipelineSpec spec;
  spec.input_bytes = input_bytes;
  spec.input_backend = central;
  const std::size_t n = stage_output_bytes.size();
  for (std::size_t i = 0; i < n; ++i) {
    StageSpec stage;
    stage.name = stage_label(names, i);
    if (i > 0) stage.read_from = transient;
    stage.write_to = i + 1 < n ? transient : central;
    stage.output_bytes = stage_output_bytes[i];
    spec.stages.push_back(std::move(stage));
  }
  return spec;
}

double io_overhead_reduction(const IoLedger& baseline, const IoLedger& transient) {
  const auto base = baseline.central_overhead();
  if (base == 0) throw Error(Errc::ZeroBaseline, "baseline central overhead is zero");
  return (1.0 - static_cast<double>(transient.central_overhead()) / static_cast<double>(base)) * 100.0;
}

double time_reduction(double baseline_total_seconds, double transient_total_seconds) {
  if (!(baseline_total_seconds > 0) || !(transient_total_seconds > 0)) {
    throw Error(Errc::ZeroBaseline, "total times must be positive");
  }
  return (1.0 - transient_total_seconds / baseline_total_seconds) * 100.0;
}

ScaledPreset paper_scaled_preset() {
  constexpr double kUnit = static_cast<double>(kScaleUnitBytes);
  // Reference stage durations (minutes) that weight the intermediate split.
  constexpr double kWeights[3] = {10.299, 16.357, 13.393};
  constexpr double kWeightSum = kWeights[0] + kWeights[1] + kWeights[2];

  ScaledPreset preset;
  preset.input_bytes = static_cast<std::uint64_t>(std::llround(42.346 * kUnit));
  const auto intermediate = static_cast<std::uint64_t>(std::llround(243.858 / 2.0 * kUnit));
  const auto first = static_cast<std::uint64_t>(std::llround(static_cast<double>(intermediate) * kWeights[0] / kWeightSum));
  const auto second = static_cast<std::uint64_t>(std::llround(static_cast<double>(intermediate) * kWeights[1] / kWeightSum));
  preset.stage_output_bytes = {first, second, intermediate - first - second,
                               static_cast<std::uint64_t>(std::llround((300.900 - 243.858) * kUnit))};
  preset.stage_names = {"DarkFlatFieldCorrection", "RavenFilter", "PaganinFilter", "AstraReconCpu"};
  preset.reference_baseline_minutes = 173.775;
  preset.reference_transient_minutes = 159.324;
  return preset;
}

// ---------------------------------------------------------------------------

std::string render_report(const PipelineReport& report) {
  std::ostringstream out;
  out << fmt::format("{:<26} {:>12}\n", "Process", "Seconds");
  out << fmt::format("{:<26} {:>12.3f}\n", "Deploy", report.deploy_seconds.value_or(0.0));
  for (const auto& s : report.stages) out << fmt::format("{:<26} {:>12.3f}\n", s.name, s.seconds);
  out << fmt::format("{:<26} {:>12.3f}\n", "Remove", report.remove_seconds.value_or(0.0));
  out << fmt::format("{:<26} {:>12.3f}\n", "Total Job Time", report.total_seconds);
  out << '\n';
  out << fmt::format("{:<26} {:<10} {:>14} {:>14}\n", "Stage", "Backend", "Bytes read", "Bytes written");
  for (const auto& r : report.ledger.rows()) {
    const std::string label = r.initial_input ? r.stage + " (input)" : r.stage;
    out << fmt::format("{:<26} {:<10} {:>14} {:>14}\n", label, backend_kind_name(r.backend), r.bytes_read,
                       r.bytes_written);
  }
  const auto overhead = report.ledger.central_overhead();
  out << fmt::format("Central I/O overhead: {} bytes ({:.3f} MiB)\n", overhead,
                     static_cast<double>(overhead) / static_cast<double>(kScaleUnitBytes));
  return out.str();
}

std::string render_comparison(const PipelineReport& baseline, const PipelineReport& transient,
                              std::optional<std::pair<double, double>> reference_minutes) {
  std::ostringstream out;
  out << fmt::format("{:<26} {:>12} {:>12}\n", "Process", "Baseline", "Transient");
  out << fmt::format("{:<26} {:>12.3f} {:>12.3f}\n", "Deploy", baseline.deploy_seconds.value_or(0.0),
                     transient.deploy_seconds.value_or(0.0));
  const std::size_t rows = std::max(baseline.stages.size(), transient.stages.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string name = i < baseline.stages.size() ? baseline.stages[i].name : transient.stages[i].name;
    const double b = i < baseline.stages.size() ? baseline.stages[i].seconds : 0.0;
    const double t = i < transient.stages.size() ? transient.stages[i].seconds : 0.0;
    out << fmt::format("{:<26} {:>12.3f} {:>12.3f}\n", name, b, t);
  }
  out << fmt::format("{:<26} {:>12.3f} {:>12.3f}\n", "Remove", baseline.remove_seconds.value_or(0.0),
                     transient.remove_seconds.value_or(0.0));
  out << fmt::format("{:<26} {:>12.3f} {:>12.3f}\n", "Total Job Time", baseline.total_seconds,
                     transient.total_seconds);
  const auto unit = static_cast<double>(kScaleUnitBytes);
  out << fmt::format("{:<26} {:>12.3f} {:>12.3f}\n", "Central overhead (MiB)",
                     static_cast<double>(baseline.ledger.central_overhead()) / unit,
                     static_cast<double>(transient.ledger.central_overhead()) / unit);
  out << '\n';
  out << fmt::format("I/O overhead reduction: {:.2f}%\n", io_overhead_reduction(baseline.ledger, transient.ledger));
  out << fmt::format("Time reduction (measured): {:.2f}%\n",
                     time_reduction(baseline.total_seconds, transient.total_seconds));
  if (reference_minutes) {
    out << fmt::format("Time reduction (reference totals {:.3f} vs {:.3f} min): {:.2f}%\n", reference_minutes->first,
                       reference_minutes->second, time_reduction(reference_minutes->first, reference_minutes->second));
  }
  return out.str();
}

// ---------------------------------------------------------------------------

void to_json(json& j, const BackendRef& ref) {
  if (ref.kind == BackendKind::central) {
    j = json{{"kind", "central"}, {"path", ref.path}};
    if (ref.throttle_bytes_per_second) j["throttle_bytes_per_second"] = *ref.throttle_bytes_per_second;
  } else {
    j = json{{"kind", "transient"}, {"pool", ref.pool}};
  }
}

void from_json(const json& j, BackendRef& ref) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "central") {
    std::optional<std::uint64_t> throttle;
    if (j.contains("throttle_bytes_per_second") && !j["throttle_bytes_per_second"].is_null()) {
      throttle = j["throttle_bytes_per_second"].get<std::uint64_t>();
    }
    ref = BackendRef::central(j.at("path").get<std::string>(), throttle);
  } else if (kind == "transient") {
    ref = BackendRef::transient(j.at("pool").get<std::string>());
  } else {
    throw Error(Errc::InvalidArgument, "unknown backend kind '" + kind + "'");
  }
}

void to_json(json& j, const StageSpec& s) {
  j = json{{"name", s.name},
           {"read_from", s.read_from ? json(*s.read_from) : json("input")},
           {"write_to", s.write_to},
           {"output_bytes", s.output_bytes},
           {"synthetic_compute_seconds", s.synthetic_compute_seconds}};
}

void from_json(const json& j, StageSpec& s) {
  s.name = j.at("name").get<std::string>();
  const auto& from = j.at("read_from");
  if (from.is_string() && from.get<std::string>() == "input") {
    s.read_from.reset();
  } else {
    s.read_from = from.get<BackendRef>();
  }
  s.write_to = j.at("write_to").get<BackendRef>();
  s.output_bytes = j.at("output_bytes").get<std::uint64_t>();
  s.synthetic_compute_seconds = j.value("synthetic_compute_seconds", 0.0);
}

void to_json(json& j, const PipelineSpec& s) {
  j = json{{"input_bytes", s.input_bytes}, {"input_backend", s.input_backend}, {"stages", s.stages},
           {"parallelism", s.parallelism}, {"seed", s.seed}};
}

void from_json(const json& j, PipelineSpec& s) {
  s.input_bytes = j.at("input_bytes").get<std::uint64_t>();
  s.input_backend = j.at("input_backend").get<BackendRef>();
  s.stages = j.at("stages").get<std::vector<StageSpec>>();
  s.parallelism = j.value("parallelism", 1u);
  s.seed = j.value("seed", std::uint64_t{1});
}

void to_json(json& j, const IoLedger& ledger) {
  json rows = json::array();
  for (const auto& r : ledger.rows()) {
    rows.push_back({{"stage", r.stage},
                    {"backend", backend_kind_name(r.backend)},
                    {"initial_input", r.initial_input},
                    {"bytes_read", r.bytes_read},
                    {"bytes_written", r.bytes_written}});
  }
  json totals = json::object();
  for (BackendKind kind : {BackendKind::central, BackendKind::transient}) {
    const auto t = ledger.totals(kind);
    totals[std::string(backend_kind_name(kind))] = {{"bytes_read", t.bytes_read}, {"bytes_written", t.bytes_written}};
  }
  j = json{{"rows", std::move(rows)}, {"totals", std::move(totals)}, {"central_overhead", ledger.central_overhead()}};
}

void from_json(const json& j, IoLedger& ledger) {
  IoLedger out;
  for (const auto& r : j.at("rows")) {
    const auto backend = r.at("backend").get<std::string>() == "central" ? BackendKind::central : BackendKind::transient;
    const auto stage = r.at("stage").get<std::string>();
    const bool initial = r.value("initial_input", false);
    out.record_read(stage, backend, r.at("bytes_read").get<std::uint64_t>(), initial);
    if (!initial || r.at("bytes_written").get<std::uint64_t>() > 0) {
      out.record_write(stage, backend, r.at("bytes_written").get<std::uint64_t>());
    }
  }
  ledger = out;
}

void to_json(json& j, const PipelineReport& r) {
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back({{"name", s.name}, {"seconds", s.seconds}});
  j = json{{"ledger", r.ledger},
           {"stages", std::move(stages)},
           {"deploy_seconds", r.deploy_seconds ? json(*r.deploy_seconds) : json(nullptr)},
           {"remove_seconds", r.remove_seconds ? json(*r.remove_seconds) : json(nullptr)},
           {"total_seconds", r.total_seconds}};
}

void from_json(const json& j, PipelineReport& r) {
  r.ledger = j.at("ledger").get<IoLedger>();
  r.stages.clear();
  for (const auto& s : j.at("stages")) r.stages.push_back({s.at("name").get<std::string>(), s.at("seconds").get<double>()});
  r.deploy_seconds.reset();
  r.remove_seconds.reset();
  if (!j.at("deploy_seconds").is_null()) r.deploy_seconds = j["deploy_seconds"].get<double>();
  if (!j.at("remove_seconds").is_null()) r.remove_seconds = j["remove_seconds"].get<double>();
  r.total_seconds = j.at("total_seconds").get<double>();
}

}  // namespace ramstore
