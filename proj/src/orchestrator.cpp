#include "ramstore/orchestrator.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ramstore/agent.hpp"
#include "ramstore/bench.hpp"
#include "ramstore/error.hpp"
#include "ramstore/monitor.hpp"
#include "ramstore/shared_dir.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ramstore {

namespace {

using Clock = std::chrono::steady_clock;

bool is_label(const std::string& s) {
  return !s.empty() && s.size() <= 48 && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_';
  });
}

std::string default_runtime_dir(const std::string& cluster_id) {
  return (fs::temp_directory_path() / ("ramstore-" + std::to_string(::getuid())) / cluster_id).string();
}

std::chrono::milliseconds to_ms(double seconds) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(seconds * 1000.0));
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json read_state(const std::string& dir, const std::string& cluster_id) {
  std::ifstream in(shared_dir::state_path(dir, cluster_id));
  if (!in) throw Error(Errc::UnknownCluster, "unknown cluster '" + cluster_id + "' in " + dir);
  auto state = json::parse(in, nullptr, false);
  if (state.is_discarded() || !state.is_object()) {
    // Claimed but not yet written by a deploy in progress.
    return json{{"cluster_id", cluster_id}, {"phase", "claimed"}};
  }
  return state;
}

bool tcp_reachable(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return false;
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &result) != 0) return false;
  bool ok = false;
  for (addrinfo* ai = result; ai != nullptr && !ok; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    ok = ::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0;
    ::close(fd);
  }
  ::freeaddrinfo(result);
  return ok;
}

/// Writes the state document after every step so a separate process can tear down.
class StateFile {
 public:
  StateFile(std::string dir, std::string cluster_id, json initial)
      : dir_(std::move(dir)), cluster_id_(std::move(cluster_id)), state_(std::move(initial)) {}

  template <typename F>
  void update(F&& f) {
    std::lock_guard lock(mu_);
    f(state_);
    shared_dir::write_file_atomic(shared_dir::state_path(dir_, cluster_id_), state_.dump(2) + "\n", false);
  }

 private:
  std::string dir_;
  std::string cluster_id_;
  std::mutex mu_;
  json state_;
};

void claim_cluster(const std::string& dir, const std::string& cluster_id) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::SharedDirUnwritable, dir + " is not a directory");
  const auto path = shared_dir::state_path(dir, cluster_id);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw Error(Errc::AlreadyDeployed, cluster_id + " is already deployed");
    throw Error(Errc::SharedDirUnwritable, path.string() + ": " + std::strerror(errno));
  }
  ::close(fd);
}

std::string lagging_hosts(const std::vector<HostOutcome>& outcomes, const std::set<std::string>& timed_out) {
  std::string out;
  for (const auto& o : outcomes) {
    if (!timed_out.contains(o.host)) continue;
    if (!out.empty()) out += ", ";
    out += o.host;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Plan and report documents

void DeploymentPlan::validate() const {
  if (!is_label(cluster_id)) {
    throw Error(Errc::InvalidArgument, "cluster_id must be 1-48 characters of [A-Za-z0-9_-]");
  }
  if (hosts.empty()) throw Error(Errc::InvalidArgument, "plan needs at least one host");
  std::set<std::string> seen;
  for (const auto& h : hosts) {
    if (!is_label(h)) throw Error(Errc::InvalidArgument, "bad host label '" + h + "'");
    if (!seen.insert(h).second) throw Error(Errc::InvalidArgument, "duplicate host '" + h + "'");
  }
  if (osds_per_host == 0) throw Error(Errc::InvalidArgument, "osds_per_host must be positive");
  if (slots_per_host == 0) throw Error(Errc::InvalidArgument, "slots_per_host must be positive");
  if (device_capacity_bytes == 0 || device_block_size_bytes == 0 ||
      device_capacity_bytes % device_block_size_bytes != 0) {
    throw Error(Errc::InvalidArgument, "device capacity must be a positive multiple of the block size");
  }
  if (pool && gateway) throw Error(Errc::InvalidArgument, "request a pool or a gateway, not both");
  if (replication_factor == 0) throw Error(Errc::InvalidArgument, "replication_factor must be positive");
  if (replication_factor > hosts.size() * osds_per_host) {
    throw Error(Errc::InvalidArgument, "replication_factor exceeds hosts x osds_per_host");
  }
  if (shared_dir.empty()) throw Error(Errc::InvalidArgument, "shared_dir is required");
  if (phase_timeout_seconds <= 0) throw Error(Errc::InvalidArgument, "phase_timeout_seconds must be positive");
  if (liveness_window_ms == 0) throw Error(Errc::InvalidArgument, "liveness_window_ms must be positive");
}

void to_json(json& j, const DeploymentPlan& p) {
  j = json{{"cluster_id", p.cluster_id},
           {"hosts", p.hosts},
           {"osds_per_host", p.osds_per_host},
           {"device_capacity_bytes", p.device_capacity_bytes},
           {"device_block_size_bytes", p.device_block_size_bytes},
           {"replication_factor", p.replication_factor},
           {"pool", p.pool ? json(*p.pool) : json(nullptr)},
           {"gateway", p.gateway ? json{{"listen_address", p.gateway->listen_address}} : json(nullptr)},
           {"shared_dir", p.shared_dir},
           {"phase_timeout_seconds", p.phase_timeout_seconds},
           {"slots_per_host", p.slots_per_host},
           {"liveness_window_ms", p.liveness_window_ms},
           {"runtime_dir", p.runtime_dir}};
}

void from_json(const json& j, DeploymentPlan& p) {
  static const std::set<std::string> kKnown{
      "cluster_id",   "hosts",      "osds_per_host",         "device_capacity_bytes",
      "device_block_size_bytes",    "replication_factor",    "pool",
      "gateway",      "shared_dir", "phase_timeout_seconds", "slots_per_host",
      "liveness_window_ms",         "runtime_dir"};
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "plan must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) throw Error(Errc::InvalidArgument, "unknown plan field '" + key + "'");
  }
  DeploymentPlan plan;
  plan.cluster_id = j.at("cluster_id").get<std::string>();
  plan.hosts = j.at("hosts").get<std::vector<std::string>>();
  plan.osds_per_host = j.value("osds_per_host", plan.osds_per_host);
  plan.device_capacity_bytes = j.value("device_capacity_bytes", plan.device_capacity_bytes);
  plan.device_block_size_bytes = j.value("device_block_size_bytes", plan.device_block_size_bytes);
  plan.replication_factor = j.value("replication_factor", plan.replication_factor);
  if (j.contains("pool") && !j.at("pool").is_null()) {
    const auto& pj = j.at("pool");
    PoolSpec pool;
    pool.name = pj.at("name").get<std::string>();
    pool.replication_factor = pj.value("replication_factor", plan.replication_factor);
    pool.chunk_size_bytes = pj.value("chunk_size_bytes", kDefaultChunkSize);
    plan.pool = pool;
  }
  if (j.contains("gateway") && !j.at("gateway").is_null()) {
    plan.gateway = GatewayRequest{j.at("gateway").at("listen_address").get<std::string>()};
  }
  plan.shared_dir = j.at("shared_dir").get<std::string>();
  plan.phase_timeout_seconds = j.value("phase_timeout_seconds", plan.phase_timeout_seconds);
  plan.slots_per_host = j.value("slots_per_host", plan.slots_per_host);
  plan.liveness_window_ms = j.value("liveness_window_ms", plan.liveness_window_ms);
  plan.runtime_dir = j.value("runtime_dir", std::string());
  p = std::move(plan);
}

void to_json(json& j, const DeploymentReport& r) {
  json phases = json::array();
  for (const auto& p : r.phases) phases.push_back({{"phase_name", p.phase_name}, {"duration_seconds", p.duration_seconds}});
  json hosts = json::object();
  for (const auto& [host, h] : r.per_host) {
    hosts[host] = {{"ok", h.ok},
                   {"error", h.error},
                   {"osd_ids", h.osd_ids},
                   {"reserved_bytes", h.reserved_bytes},
                   {"max_parallelism", h.max_parallelism}};
  }
  j = json{{"cluster_id", r.cluster_id},
           {"operation", r.operation},
           {"phases", std::move(phases)},
           {"per_host", std::move(hosts)},
           {"total_seconds", r.total_seconds}};
}

void from_json(const json& j, DeploymentReport& r) {
  r.cluster_id = j.at("cluster_id").get<std::string>();
  r.operation = j.at("operation").get<std::string>();
  r.phases.clear();
  for (const auto& p : j.at("phases")) {
    r.phases.push_back({p.at("phase_name").get<std::string>(), p.at("duration_seconds").get<double>()});
  }
  r.per_host.clear();
  for (const auto& [host, h] : j.at("per_host").items()) {
    HostReport hr;
    hr.ok = h.at("ok").get<bool>();
    hr.error = h.value("error", std::string());
    hr.osd_ids = h.value("osd_ids", std::vector<OsdId>{});
    hr.reserved_bytes = h.value("reserved_bytes", std::uint64_t{0});
    hr.max_parallelism = h.value("max_parallelism", 0u);
    r.per_host[host] = hr;
  }
  r.total_seconds = j.at("total_seconds").get<double>();
}

std::string render_report(const DeploymentReport& report) {
  std::ostringstream out;
  out << fmt::format("{} {}\n", report.operation, report.cluster_id);
  out << fmt::format("{:<22} {:>12}\n", "Phase", "Seconds");
  for (const auto& p : report.phases) out << fmt::format("{:<22} {:>12.3f}\n", p.phase_name, p.duration_seconds);
  out << fmt::format("{:<22} {:>12.3f}\n", "Total", report.total_seconds);
  for (const auto& [host, h] : report.per_host) {
    if (!h.ok) out << fmt::format("host {}: {}\n", host, h.error);
  }
  return out.str();
}

std::string render_timing_table(const std::vector<DeployTimingRow>& rows) {
  auto cell = [](std::span<const double> xs) {
    const auto [mean, sd] = aggregate(xs);
    return fmt::format("{:.3f} ± {:.3f}", mean, sd);
  };
  std::ostringstream out;
  out << fmt::format("{:<6} {:>18} {:>18} {:>18}\n", "Nodes", "Deploy", "Remove", "Total");
  for (const auto& r : rows) {
    if (r.deploy_seconds.size() != r.remove_seconds.size()) {
      throw Error(Errc::MismatchedRows, "deploy and remove run counts differ");
    }
    std::vector<double> total(r.deploy_seconds.size());
    for (std::size_t i = 0; i < total.size(); ++i) total[i] = r.deploy_seconds[i] + r.remove_seconds[i];
    out << fmt::format("{:<6} {:>18} {:>18} {:>18}\n", r.nodes, cell(r.deploy_seconds), cell(r.remove_seconds),
                       cell(total));
  }
  out << "seconds, mean ± sample std\n";
  return out.str();
}

void to_json(json& j, const ClusterStatus& s) {
  j = json{{"deployed", s.deployed},   {"monitor_up", s.monitor_up}, {"epoch", s.epoch},
           {"up_osds", s.up_osds},     {"down_osds", s.down_osds},
           {"gateway_requested", s.gateway_requested}, {"gateway_up", s.gateway_up}};
}

// ---------------------------------------------------------------------------

Orchestrator::Orchestrator(Options options)
    : daemon_path_(options.daemon_path.empty() ? default_daemon_path() : std::move(options.daemon_path)) {}

DeploymentReport Orchestrator::deploy(const DeploymentPlan& plan) {
  plan.validate();
  const auto started = Clock::now();
  const auto timeout = to_ms(plan.phase_timeout_seconds);
  claim_cluster(plan.shared_dir, plan.cluster_id);

  const std::string runtime = plan.runtime_dir.empty() ? default_runtime_dir(plan.cluster_id) : plan.runtime_dir;
  DeploymentReport report;
  report.cluster_id = plan.cluster_id;
  report.operation = "deploy";

  StateFile state(plan.shared_dir, plan.cluster_id,
                  json{{"cluster_id", plan.cluster_id},
                       {"phase", "deploying"},
                       {"runtime_dir", runtime},
                       {"plan", plan},
                       {"agents", json::object()},
                       {"gateway", nullptr}});

  auto run_phase = [&](const std::string& name, auto&& body) {
    const auto t0 = Clock::now();
    body();
    report.phases.push_back({name, seconds_since(t0)});
  };

  try {
    std::error_code ec;
    fs::remove_all(runtime, ec);
    fs::create_directories(runtime);
    state.update([](json&) {});

    Keyring keyring;
    const std::string monitor_address = (fs::path(runtime) / "mon.sock").string();
    run_phase("bootstrap-monitor", [&] {
      auto monitor = DaemonProcess::spawn({daemon_path_, "monitor", "--cluster-id", plan.cluster_id, "--address",
                                           monitor_address, "--liveness-ms",
                                           std::to_string(plan.liveness_window_ms)});
      state.update([&](json& s) { s["monitor"] = {{"address", monitor_address}, {"pid", monitor.pid()}}; });
      auto ready = monitor.wait_ready(timeout);
      if (!ready) throw Error(Errc::PhaseTimeout, "bootstrap-monitor: lagging host " + plan.hosts.front());
      if (!ready->value("ready", false)) {
        throw Error(errc_from_name(ready->value("error", std::string("AgentFailure"))),
                    "monitor: " + ready->value("message", std::string()));
      }
      keyring = ready->at("keyring").get<Keyring>();
    });

    run_phase("write-keyring", [&] { shared_dir::write_keyring(plan.shared_dir, plan.cluster_id, keyring); });

    run_phase("start-manager", [&] {
      MonitorClient(monitor_address, Role::manager, shared_dir::read_secret(plan.shared_dir, plan.cluster_id, Role::manager))
          .start_manager();
    });

    run_phase("launch-agents", [&] {
      std::map<std::string, std::size_t> index;
      for (std::size_t i = 0; i < plan.hosts.size(); ++i) index[plan.hosts[i]] = i;
      std::mutex timed_out_mu;
      std::set<std::string> timed_out;
      const auto heartbeat = std::chrono::milliseconds(std::max<std::uint32_t>(10, plan.liveness_window_ms / 5));

      auto outcomes = launch_parallel(plan.hosts, [&](const std::string& host) -> json {
        AgentConfig config;
        config.cluster_id = plan.cluster_id;
        config.host = host;
        config.shared_dir = plan.shared_dir;
        config.runtime_dir = runtime;
        config.monitor_address = monitor_address;
        for (std::uint32_t k = 0; k < plan.osds_per_host; ++k) {
          config.osd_ids.push_back(static_cast<OsdId>(index.at(host) * plan.osds_per_host + k));
        }
        config.device_capacity_bytes = plan.device_capacity_bytes;
        config.device_block_size_bytes = plan.device_block_size_bytes;
        config.slots = plan.slots_per_host;
        config.heartbeat_interval = heartbeat;

        auto agent = DaemonProcess::spawn({daemon_path_, "agent", "--config-json", json(config).dump()});
        state.update([&](json& s) {
          s["agents"][host] = {{"pid", agent.pid()},
                               {"control_address", agent_control_address(runtime, host)},
                               {"osd_ids", config.osd_ids}};
        });
        auto ready = agent.wait_ready(timeout);
        if (!ready) {
          std::lock_guard lock(timed_out_mu);
          timed_out.insert(host);
          throw Error(Errc::PhaseTimeout, host + " did not report ready");
        }
        if (!ready->value("ready", false)) {
          throw Error(Errc::AgentFailure, host + ": " + ready->value("message", std::string()));
        }
        return *ready;
      });

      std::string failures;
      for (const auto& o : outcomes) {
        HostReport& h = report.per_host[o.host];
        h.ok = o.ok;
        h.error = o.error;
        if (o.ok) {
          h.osd_ids = o.detail.value("osd_ids", std::vector<OsdId>{});
          h.reserved_bytes = o.detail.value("reserved_bytes", std::uint64_t{0});
          h.max_parallelism = o.detail.value("max_parallelism", 0u);
        } else {
          failures += (failures.empty() ? "" : "; ") + o.host + ": " + o.error;
        }
      }
      if (!timed_out.empty()) {
        throw Error(Errc::PhaseTimeout, "launch-agents: lagging hosts " + lagging_hosts(outcomes, timed_out));
      }
      if (!failures.empty()) throw Error(Errc::AgentFailure, "launch-agents: " + failures);
    });

    const std::string client_key = shared_dir::read_secret(plan.shared_dir, plan.cluster_id, Role::client);
    if (plan.pool) {
      run_phase("create-pool", [&] { MonitorClient(monitor_address, Role::client, client_key).create_pool(*plan.pool); });
    } else if (plan.gateway) {
      run_phase("start-gateway", [&] {
        auto gateway = DaemonProcess::spawn({daemon_path_, "gateway", "--shared-dir", plan.shared_dir, "--cluster-id",
                                             plan.cluster_id, "--listen", plan.gateway->listen_address,
                                             "--replication", std::to_string(plan.replication_factor)});
        state.update([&](json& s) {
          s["gateway"] = {{"address", plan.gateway->listen_address}, {"pid", gateway.pid()}};
        });
        auto ready = gateway.wait_ready(timeout);
        if (!ready) throw Error(Errc::PhaseTimeout, "start-gateway: lagging host " + plan.hosts.front());
        if (!ready->value("ready", false)) {
          throw Error(errc_from_name(ready->value("error", std::string("AgentFailure"))),
                      "gateway: " + ready->value("message", std::string()));
        }
      });
    } else {
      run_phase("no-service", [] {});
    }
    state.update([](json& s) { s["phase"] = "deployed"; });
  } catch (...) {
    try {
      remove(plan.shared_dir, plan.cluster_id);
    } catch (const std::exception&) {
    }
    throw;
  }

  report.total_seconds = seconds_since(started);
  return report;
}

DeploymentReport Orchestrator::remove(const std::string& dir, const std::string& cluster_id) {
  const auto started = Clock::now();
  const json state = read_state(dir, cluster_id);
  DeploymentReport report;
  report.cluster_id = cluster_id;
  report.operation = "remove";

  const json plan_json = state.value("plan", json::object());
  const double timeout_s = plan_json.value("phase_timeout_seconds", 30.0);
  const auto timeout = to_ms(timeout_s);
  const std::string runtime = state.value("runtime_dir", std::string());

  std::optional<Keyring> keyring;
  try {
    keyring = shared_dir::read_keyring(dir, cluster_id);
  } catch (const Error&) {
  }

  struct AgentEntry {
    pid_t pid = -1;
    std::string control;
    std::vector<OsdId> osd_ids;
  };
  std::map<std::string, AgentEntry> agents;
  const json agent_entries = state.value("agents", json::object());
  for (const auto& [host, a] : agent_entries.items()) {
    agents[host] = {a.value("pid", -1), a.value("control_address", std::string()),
                    a.value("osd_ids", std::vector<OsdId>{})};
  }
  std::vector<std::string> hosts;
  for (const auto& [host, _] : agents) hosts.push_back(host);
  for (const auto& host : hosts) report.per_host[host].osd_ids = agents[host].osd_ids;

  const std::string monitor_address = state.contains("monitor") ? state["monitor"].value("address", std::string()) : "";
  const pid_t monitor_pid = state.contains("monitor") ? state["monitor"].value("pid", -1) : -1;

  auto note_failures = [&](const std::vector<HostOutcome>& outcomes) {
    for (const auto& o : outcomes) {
      if (o.ok) continue;
      auto& h = report.per_host[o.host];
      h.ok = false;
      if (h.error.empty()) h.error = o.error;
    }
  };
  auto run_phase = [&](const std::string& name, auto&& body) {
    const auto t0 = Clock::now();
    body();
    report.phases.push_back({name, seconds_since(t0)});
  };

  std::set<std::string> unreachable;
  run_phase("stop-daemons", [&] {
    auto outcomes = launch_parallel(hosts, [&](const std::string& host) -> json {
      if (!keyring) throw Error(Errc::AuthFailure, "no keyring");
      return AgentClient(agents[host].control, keyring->secret(Role::osd)).call("stop_osds", timeout);
    });
    for (const auto& o : outcomes) {
      if (o.ok) continue;
      unreachable.insert(o.host);
      kill_process(agents[o.host].pid);
      std::error_code ec;
      if (!runtime.empty()) fs::remove_all(host_runtime_folder(runtime, o.host), ec);
    }
    note_failures(outcomes);
  });

  run_phase("unregister-osds", [&] {
    auto outcomes = launch_parallel(hosts, [&](const std::string& host) -> json {
      if (!keyring) throw Error(Errc::AuthFailure, "no keyring");
      if (!unreachable.contains(host)) {
        return AgentClient(agents[host].control, keyring->secret(Role::osd)).call("unregister_osds", timeout);
      }
      // The agent is gone; unregister its OSDs on its behalf.
      const MonitorClient monitor(monitor_address, Role::osd, keyring->secret(Role::osd));
      for (OsdId id : agents[host].osd_ids) {
        try {
          monitor.unregister_osd(id);
        } catch (const Error& e) {
          if (e.code() != Errc::UnknownOsd) throw;
        }
      }
      return json::object();
    });
    note_failures(outcomes);
  });

  run_phase("destroy-devices", [&] {
    auto outcomes = launch_parallel(hosts, [&](const std::string& host) -> json {
      const AgentEntry& agent = agents[host];
      json result = json::object();
      if (!unreachable.contains(host) && keyring) {
        try {
          result = AgentClient(agent.control, keyring->secret(Role::osd)).call("destroy_devices", timeout);
        } catch (const Error&) {
          kill_process(agent.pid);
          throw;
        }
      }
      if (!wait_process_exit(agent.pid, timeout)) {
        kill_process(agent.pid);
        throw Error(Errc::PhaseTimeout, "destroy-devices: " + host + " did not exit");
      }
      return result;
    });
    for (const auto& o : outcomes) {
      if (o.detail.is_object()) report.per_host[o.host].reserved_bytes = o.detail.value("reserved_bytes", std::uint64_t{0});
    }
    note_failures(outcomes);
  });

  run_phase("remove-keys", [&] {
    for (const auto& path : shared_dir::cluster_files(dir, cluster_id)) {
      const auto name = path.filename().string();
      if (name.size() > 4 && name.compare(name.size() - 4, 4, ".key") == 0) {
        std::error_code ec;
        fs::remove(path, ec);
      }
    }
    if (state.contains("gateway") && state["gateway"].is_object()) {
      const pid_t pid = state["gateway"].value("pid", -1);
      if (pid > 0) {
        ::kill(pid, SIGTERM);
        if (!wait_process_exit(pid, timeout)) kill_process(pid);
      }
    }
    if (monitor_pid > 0) {
      bool asked = false;
      if (keyring && !monitor_address.empty()) {
        try {
          MonitorClient(monitor_address, Role::monitor, keyring->secret(Role::monitor)).shutdown();
          asked = true;
        } catch (const Error&) {
        }
      }
      if (!asked || !wait_process_exit(monitor_pid, timeout)) kill_process(monitor_pid);
    }
    std::error_code ec;
    if (!runtime.empty()) fs::remove_all(runtime, ec);
    for (const auto& path : shared_dir::cluster_files(dir, cluster_id)) fs::remove(path, ec);
  });

  report.total_seconds = seconds_since(started);
  return report;
}

ClusterStatus Orchestrator::status(const std::string& dir, const std::string& cluster_id) const {
  ClusterStatus status;
  json state;
  try {
    state = read_state(dir, cluster_id);
  } catch (const Error&) {
    return status;
  }
  status.deployed = state.value("phase", std::string()) == "deployed";
  if (state.contains("gateway") && state["gateway"].is_object()) {
    status.gateway_requested = true;
    status.gateway_up = tcp_reachable(state["gateway"].value("address", std::string()));
  }
  if (!state.contains("monitor")) return status;
  try {
    const auto key = shared_dir::read_secret(dir, cluster_id, Role::client);
    const auto map = MonitorClient(state["monitor"].value("address", std::string()), Role::client, key).get_map();
    status.monitor_up = true;
    status.epoch = map.epoch;
    status.up_osds = map.up_osds().size();
    status.down_osds = map.osds.size() - status.up_osds;
  } catch (const Error&) {
  }
  return status;
}

ClusterEndpoint connect_cluster(const std::string& dir, const std::string& cluster_id) {
  json state;
  try {
    state = read_state(dir, cluster_id);
  } catch (const Error&) {
    throw Error(Errc::MonitorUnavailable, "cluster " + cluster_id + " is not deployed in " + dir);
  }
  if (!state.contains("monitor")) throw Error(Errc::MonitorUnavailable, "cluster " + cluster_id + " has no monitor");
  ClusterEndpoint endpoint;
  endpoint.cluster_id = cluster_id;
  endpoint.monitor_address = state["monitor"].value("address", std::string());
  try {
    endpoint.client_secret = shared_dir::read_secret(dir, cluster_id, Role::client);
  } catch (const Error&) {
    throw Error(Errc::MonitorUnavailable, "cluster " + cluster_id + " has no client key");
  }
  return endpoint;
}

}  // namespace ramstore
