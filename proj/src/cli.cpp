#include "ramstore/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ramstore/bench.hpp"
#include "ramstore/error.hpp"
#include "ramstore/object_store.hpp"
#include "ramstore/orchestrator.hpp"
#include "ramstore/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ramstore {

namespace {

// Bad input from the operator rather than a failed operation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_shared_dir() {
  if (const char* env = std::getenv("RAMSTORE_SHARED_DIR"); env != nullptr && *env != '\0') return env;
  return (fs::temp_directory_path() / ("ramstore-shared-" + std::to_string(::getuid()))).string();
}

json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + what + " '" + path + "'");
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw UsageError(what + " '" + path + "' is not valid JSON");
  return doc;
}

// Converts document errors into usage errors.
template <typename T>
T decode(const json& doc, const std::string& what) {
  try {
    return doc.get<T>();
  } catch (const json::exception& e) {
    throw UsageError(what + ": " + e.what());
  } catch (const Error& e) {
    throw UsageError(what + ": " + e.what());
  }
}

std::vector<std::byte> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidArgument, "cannot read '" + path + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> data(raw.size());
  std::memcpy(data.data(), raw.data(), raw.size());
  return data;
}

void write_file(const std::string& path, std::span<const std::byte> data, std::ostream& out) {
  if (path == "-") {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(Errc::InvalidArgument, "cannot write '" + path + "'");
  file.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!file) throw Error(Errc::NoSpace, "short write to '" + path + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::uint64_t parse_size_flag(const std::string& text, const std::string& flag) {
  try {
    return parse_block_size(text);
  } catch (const Error&) {
    throw UsageError(flag + ": bad size '" + text + "'");
  }
}

/// A scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::string pattern = (fs::temp_directory_path() / ("ramstore-" + tag + "-XXXXXX")).string();
    if (::mkdtemp(pattern.data()) == nullptr) throw Error(Errc::BackendUnavailable, "cannot create a scratch directory");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Context {
  CliConfig config;
  std::ostream& out;
  std::ostream& err;

  void log(const std::string& line) const {
    if (config.verbose) err << "ramstore: " << line << '\n';
  }
};

// --- cluster lifecycle ------------------------------------------------------

int cmd_deploy(const Context& ctx, const std::string& plan_path, bool as_json) {
  json doc = read_json_file(plan_path, "plan");
  if (!doc.is_object()) throw UsageError("plan must be a JSON object");
  if (!doc.contains("shared_dir")) doc["shared_dir"] = ctx.config.shared_dir;
  if (!doc.contains("cluster_id")) doc["cluster_id"] = ctx.config.cluster_id;
  const auto plan = decode<DeploymentPlan>(doc, "plan");
  try {
    plan.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("plan: ") + e.what());
  }
  ctx.log(fmt::format("deploying {} on {} host(s)", plan.cluster_id, plan.hosts.size()));
  const auto report = Orchestrator().deploy(plan);
  if (as_json) {
    ctx.out << json(report).dump(2) << '\n';
  } else {
    ctx.out << render_report(report);
  }
  return kExitOk;
}

int cmd_remove(const Context& ctx, bool as_json) {
  ctx.log("removing " + ctx.config.cluster_id);
  const auto report = Orchestrator().remove(ctx.config.shared_dir, ctx.config.cluster_id);
  if (as_json) {
    ctx.out << json(report).dump(2) << '\n';
  } else {
    ctx.out << render_report(report);
  }
  for (const auto& [host, h] : report.per_host) {
    if (!h.ok) ctx.err << "ramstore: host " << host << ": " << h.error << '\n';
  }
  return kExitOk;
}

int cmd_status(const Context& ctx, bool as_json) {
  const auto status = Orchestrator().status(ctx.config.shared_dir, ctx.config.cluster_id);
  if (as_json) {
    ctx.out << json(status).dump(2) << '\n';
    return kExitOk;
  }
  ctx.out << fmt::format("cluster   {}\n", ctx.config.cluster_id);
  ctx.out << fmt::format("deployed  {}\n", status.deployed ? "yes" : "no");
  if (status.deployed || status.monitor_up) {
    ctx.out << fmt::format("monitor   {}\n", status.monitor_up ? "up" : "down");
    ctx.out << fmt::format("epoch     {}\n", status.epoch);
    ctx.out << fmt::format("osds      {} up, {} down\n", status.up_osds, status.down_osds);
  }
  if (status.gateway_requested) ctx.out << fmt::format("gateway   {}\n", status.gateway_up ? "up" : "down");
  return kExitOk;
}

// --- object access ----------------------------------------------------------

ObjectStore open_store(const Context& ctx) {
  return ObjectStore(connect_cluster(ctx.config.shared_dir, ctx.config.cluster_id));
}

int cmd_put(const Context& ctx, const std::string& pool, const std::string& name, const std::string& file,
            const std::vector<std::string>& meta_flags) {
  Metadata meta;
  for (const auto& kv : meta_flags) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--meta expects key=value, got '" + kv + "'");
    meta[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  const auto data = read_file(file);
  const auto manifest = open_store(ctx).put_object(pool, name, data, meta);
  ctx.out << fmt::format("{}/{}\t{}\t{:08x}\n", pool, name, manifest.total_size_bytes, manifest.checksum);
  return kExitOk;
}

int cmd_get(const Context& ctx, const std::string& pool, const std::string& name, const std::string& file) {
  const auto object = open_store(ctx).get_object(pool, name);
  write_file(file, object.data, ctx.out);
  return kExitOk;
}

int cmd_delete(const Context& ctx, const std::string& pool, const std::string& name) {
  open_store(ctx).delete_object(pool, name);
  return kExitOk;
}

int cmd_ls(const Context& ctx, const std::string& pool) {
  for (const auto& entry : open_store(ctx).list_objects(pool)) {
    ctx.out << entry.name << '\t' << entry.total_size_bytes << '\n';
  }
  return kExitOk;
}

// --- pipeline ---------------------------------------------------------------

struct PipelineFlags {
  std::string spec_path;
  std::string preset;
  std::string mode = "baseline";
  bool compare = false;
  std::string central_dir;
  std::string throttle;
  unsigned parallelism = 1;
  std::uint64_t seed = 1;
  unsigned hosts = 4;
  bool as_json = false;
};

DeploymentPlan inline_plan(const Context& ctx, const PipelineFlags& flags, std::uint64_t intermediate_bytes) {
  DeploymentPlan plan;
  plan.cluster_id = ctx.config.cluster_id + "-pipeline";
  for (unsigned i = 0; i < flags.hosts; ++i) plan.hosts.push_back("node" + std::to_string(i + 1));
  plan.shared_dir = ctx.config.shared_dir;
  // Every intermediate output may be resident at once, placed unevenly.
  const std::uint64_t per_host = 2 * intermediate_bytes / std::max(1u, flags.hosts) + (64ull << 20);
  plan.device_capacity_bytes = std::max<std::uint64_t>(256ull << 20, (per_host + 4095) / 4096 * 4096);
  plan.pool = PoolSpec{"pipeline", 1, kDefaultChunkSize};
  return plan;
}

int cmd_pipeline(const Context& ctx, const PipelineFlags& flags) {
  if (flags.spec_path.empty() == flags.preset.empty()) {
    throw UsageError("give either a pipeline spec file or --preset");
  }
  if (!flags.preset.empty() && flags.preset != "paper-scaled") throw UsageError("unknown preset '" + flags.preset + "'");
  if (flags.compare && flags.preset.empty()) throw UsageError("--compare needs --preset");
  if (flags.mode != "baseline" && flags.mode != "transient") throw UsageError("--mode is baseline or transient");
  if (flags.hosts == 0) throw UsageError("--hosts must be positive");
  if (flags.parallelism == 0) throw UsageError("--parallelism must be positive");

  if (!flags.spec_path.empty()) {
    auto spec = decode<PipelineSpec>(read_json_file(flags.spec_path, "pipeline spec"), "pipeline spec");
    try {
      spec.validate();
    } catch (const Error& e) {
      throw UsageError(std::string("pipeline spec: ") + e.what());
    }
    PipelineRunOptions options;
    options.keep_final_output = true;
    const bool transient = std::any_of(spec.stages.begin(), spec.stages.end(),
                                       [](const StageSpec& s) { return s.write_to.kind == BackendKind::transient; });
    if (transient) options.cluster = connect_cluster(ctx.config.shared_dir, ctx.config.cluster_id);
    const auto report = run_pipeline(spec, options);
    ctx.out << (flags.as_json ? json(report).dump(2) + "\n" : render_report(report));
    return kExitOk;
  }

  const auto preset = paper_scaled_preset();
  std::optional<TempDir> scratch;
  std::string central_dir = flags.central_dir;
  if (central_dir.empty()) {
    scratch.emplace("central");
    central_dir = scratch->path();
  }
  std::optional<std::uint64_t> throttle;
  if (!flags.throttle.empty()) throttle = parse_size_flag(flags.throttle, "--throttle");
  const auto central = BackendRef::central(central_dir, throttle);

  std::uint64_t intermediate = 0;
  for (std::size_t i = 0; i + 1 < preset.stage_output_bytes.size(); ++i) intermediate += preset.stage_output_bytes[i];

  auto run_mode = [&](const std::string& mode) {
    PipelineSpec spec;
    PipelineRunOptions options;
    if (mode == "baseline") {
      spec = make_baseline_spec(preset.input_bytes, preset.stage_output_bytes, central, preset.stage_names);
    } else {
      const auto plan = inline_plan(ctx, flags, intermediate);
      spec = make_transient_spec(preset.input_bytes, preset.stage_output_bytes, central,
                                 BackendRef::transient(plan.pool->name), preset.stage_names);
      options.inline_deploy = plan;
    }
    spec.parallelism = flags.parallelism;
    spec.seed = flags.seed;
    ctx.log("running the " + mode + " pipeline");
    return run_pipeline(spec, options);
  };

  if (!flags.compare) {
    const auto report = run_mode(flags.mode);
    ctx.out << (flags.as_json ? json(report).dump(2) + "\n" : render_report(report));
    return kExitOk;
  }

  const auto baseline = run_mode("baseline");
  const auto transient = run_mode("transient");
  if (flags.as_json) {
    json doc{{"baseline", baseline},
             {"transient", transient},
             {"io_overhead_reduction_percent", io_overhead_reduction(baseline.ledger, transient.ledger)},
             {"time_reduction_percent", time_reduction(baseline.total_seconds, transient.total_seconds)},
             {"reference_time_reduction_percent",
              time_reduction(preset.reference_baseline_minutes, preset.reference_transient_minutes)}};
    ctx.out << doc.dump(2) << '\n';
  } else {
    ctx.out << render_comparison(baseline, transient,
                                 std::pair{preset.reference_baseline_minutes, preset.reference_transient_minutes});
  }
  return kExitOk;
}

// --- bench ------------------------------------------------------------------

struct BenchFlags {
  std::string blocks;
  unsigned repeats = 3;
  std::string backends = "ram,central";
  std::string direction = "write";
  std::string total;
  std::string central_dir;
  std::string throttle;
  std::string samples_path;
  bool as_json = false;
};

int cmd_bench(const Context& ctx, const BenchFlags& flags) {
  std::vector<std::uint64_t> blocks = default_block_sizes();
  if (!flags.blocks.empty()) {
    blocks.clear();
    for (const auto& b : split_list(flags.blocks)) blocks.push_back(parse_size_flag(b, "--blocks"));
    if (blocks.empty()) throw UsageError("--blocks is empty");
  }
  if (flags.direction != "read" && flags.direction != "write") throw UsageError("--direction is read or write");

  std::vector<BenchBackend> backends;
  for (const auto& b : split_list(flags.backends)) {
    if (b == "ram") {
      backends.push_back(BenchBackend::ram);
    } else if (b == "central") {
      backends.push_back(BenchBackend::central);
    } else {
      throw UsageError("unknown backend '" + b + "'");
    }
  }
  if (backends.empty()) throw UsageError("--backends is empty");

  SweepSpec spec;
  spec.block_sizes = blocks;
  spec.repeats = flags.repeats;
  spec.direction = flags.direction == "read" ? Direction::read : Direction::write;
  const auto largest = *std::max_element(blocks.begin(), blocks.end());
  spec.total_bytes_per_run =
      flags.total.empty() ? std::max<std::uint64_t>(64ull << 20, largest) : parse_size_flag(flags.total, "--total");
  if (!flags.throttle.empty()) spec.central_throttle_bytes_per_second = parse_size_flag(flags.throttle, "--throttle");
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  std::optional<TempDir> scratch;
  spec.central_dir = flags.central_dir;
  if (spec.central_dir.empty() && std::count(backends.begin(), backends.end(), BenchBackend::central) > 0) {
    scratch.emplace("bench");
    spec.central_dir = scratch->path();
  }

  std::vector<BenchColumn> columns;
  json raw = json::object();
  for (BenchBackend backend : backends) {
    spec.backend = backend;
    ctx.log(fmt::format("sweeping {} ({} block sizes, {} repeats)", bench_backend_name(backend), blocks.size(),
                        spec.repeats));
    auto rows = run_sweep(spec);
    raw[std::string(bench_backend_name(backend))] = rows;
    columns.push_back({backend == BenchBackend::ram ? "RAM" : "Central", std::move(rows)});
  }
  const json doc{{"direction", flags.direction},
                 {"total_bytes_per_run", spec.total_bytes_per_run},
                 {"repeats", spec.repeats},
                 {"backends", raw}};
  if (!flags.samples_path.empty()) {
    std::ofstream file(flags.samples_path);
    if (!file) throw Error(Errc::InvalidArgument, "cannot write '" + flags.samples_path + "'");
    file << doc.dump(2) << '\n';
  }
  ctx.out << (flags.as_json ? doc.dump(2) + "\n" : render_table(columns));
  return kExitOk;
}

CliConfig resolve_config(const std::string& config_path, const std::string& shared_dir_flag,
                         const std::string& cluster_flag, bool verbose_flag) {
  CliConfig config;
  bool shared_dir_defaulted = true;
  if (!config_path.empty()) {
    const json doc = read_json_file(config_path, "config");
    if (!doc.is_object()) throw UsageError("config must be a JSON object");
    try {
      if (doc.contains("shared_dir")) {
        config.shared_dir = doc["shared_dir"].get<std::string>();
        shared_dir_defaulted = false;
      }
      config.cluster_id = doc.value("cluster_id", config.cluster_id);
      config.verbose = doc.value("verbose", config.verbose);
    } catch (const json::exception& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  }
  if (!shared_dir_flag.empty()) {
    config.shared_dir = shared_dir_flag;
    shared_dir_defaulted = false;
  }
  if (!cluster_flag.empty()) config.cluster_id = cluster_flag;
  config.verbose = config.verbose || verbose_flag;
  if (shared_dir_defaulted) {
    config.shared_dir = default_shared_dir();
    std::error_code ec;
    fs::create_directories(config.shared_dir, ec);
  }
  return config;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transient RAM-backed object store", "ramstore"};
  app.require_subcommand(1);

  std::string config_path, shared_dir_flag, cluster_flag;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON file with shared_dir, cluster_id, verbose");
  app.add_option("--shared-dir", shared_dir_flag, "directory holding keys and cluster state");
  app.add_option("--cluster-id", cluster_flag, "cluster to operate on");
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");

  bool as_json = false;
  auto add_json = [&](CLI::App* sub) { sub->add_flag("--json", as_json, "print the structured document"); };

  std::string plan_path;
  auto* deploy = app.add_subcommand("deploy", "deploy a cluster from a plan document");
  deploy->add_option("plan", plan_path, "plan JSON")->required();
  add_json(deploy);

  auto* remove = app.add_subcommand("remove", "tear a cluster down");
  add_json(remove);
  auto* status = app.add_subcommand("status", "report cluster liveness");
  add_json(status);

  std::string pool, name, file;
  std::vector<std::string> meta;
  auto* put = app.add_subcommand("put", "store a file as an object");
  put->add_option("pool", pool)->required();
  put->add_option("name", name)->required();
  put->add_option("file", file)->required();
  put->add_option("--meta", meta, "user metadata key=value (repeatable)");

  auto* get = app.add_subcommand("get", "fetch an object into a file ('-' for stdout)");
  get->add_option("pool", pool)->required();
  get->add_option("name", name)->required();
  get->add_option("file", file)->required();

  auto* del = app.add_subcommand("delete", "delete an object");
  del->add_option("pool", pool)->required();
  del->add_option("name", name)->required();

  auto* ls = app.add_subcommand("ls", "list a pool as name<TAB>size");
  ls->add_option("pool", pool)->required();

  PipelineFlags pf;
  auto* pipeline = app.add_subcommand("pipeline", "run a staged pipeline and report its I/O ledger");
  pipeline->add_option("spec", pf.spec_path, "pipeline spec JSON");
  pipeline->add_option("--preset", pf.preset, "built-in workload: paper-scaled");
  pipeline->add_option("--mode", pf.mode, "baseline or transient");
  pipeline->add_flag("--compare", pf.compare, "run both modes and report reductions");
  pipeline->add_option("--central-dir", pf.central_dir, "central store directory (default: scratch)");
  pipeline->add_option("--throttle", pf.throttle, "central throughput cap per second, e.g. 200M");
  pipeline->add_option("--parallelism", pf.parallelism, "workers per stage");
  pipeline->add_option("--seed", pf.seed, "payload seed");
  pipeline->add_option("--hosts", pf.hosts, "hosts of the inline transient cluster");
  pipeline->add_flag("--json", pf.as_json, "print the structured report");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "block-size throughput sweep");
  bench->add_option("--blocks", bf.blocks, "comma-separated block sizes, e.g. 4K,40K,4M");
  bench->add_option("--repeats", bf.repeats, "runs per block size (at least 2)")->check(CLI::Range(2u, 1000u));
  bench->add_option("--backends", bf.backends, "ram, central or both");
  bench->add_option("--direction", bf.direction, "read or write");
  bench->add_option("--total", bf.total, "bytes per run (default max(64M, largest block))");
  bench->add_option("--central-dir", bf.central_dir, "directory for the central backend (default: scratch)");
  bench->add_option("--throttle", bf.throttle, "central throughput cap per second, e.g. 200M");
  bench->add_option("--samples", bf.samples_path, "also write raw samples as JSON to this file");
  bench->add_flag("--json", bf.as_json, "print the raw-sample document instead of the table");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Context ctx{resolve_config(config_path, shared_dir_flag, cluster_flag, verbose), out, err};
    if (*deploy) return cmd_deploy(ctx, plan_path, as_json);
    if (*remove) return cmd_remove(ctx, as_json);
    if (*status) return cmd_status(ctx, as_json);
    if (*put) return cmd_put(ctx, pool, name, file, meta);
    if (*get) return cmd_get(ctx, pool, name, file);
    if (*del) return cmd_delete(ctx, pool, name);
    if (*ls) return cmd_ls(ctx, pool);
    if (*pipeline) return cmd_pipeline(ctx, pf);
    if (*bench) return cmd_bench(ctx, bf);
  } catch (const UsageError& e) {
    err << "ramstore: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "ramstore: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ramstore
