#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramstore/cluster_map.hpp"
#include "ramstore/launcher.hpp"
#include "ramstore/object_store.hpp"

namespace ramstore {

struct GatewayRequest {
  std::string listen_address;  // "host:port"

  friend bool operator==(const GatewayRequest&, const GatewayRequest&) = default;
};

/// Input of deploy(); the JSON plan file mirrors it field for field.
struct DeploymentPlan {
  std::string cluster_id;
  std::vector<std::string> hosts;
  std::uint32_t osds_per_host = 1;
  std::uint64_t device_capacity_bytes = 256ull << 20;
  std::uint64_t device_block_size_bytes = 4096;
  std::uint32_t replication_factor = 1;
  std::optional<PoolSpec> pool;
  std::optional<GatewayRequest> gateway;
  std::string shared_dir;
  double phase_timeout_seconds = 30.0;
  // Beyond the core fields: scheduler slots per host agent, the monitor's
  // liveness window, and where sockets live (empty: a per-user temp folder).
  std::uint32_t slots_per_host = 1;
  std::uint32_t liveness_window_ms = 5000;
  std::string runtime_dir;

  /// Throws InvalidArgument for violated plan invariants.
  void validate() const;

  friend bool operator==(const DeploymentPlan&, const DeploymentPlan&) = default;
};

void to_json(nlohmann::json& j, const DeploymentPlan& plan);
void from_json(const nlohmann::json& j, DeploymentPlan& plan);

struct PhaseTiming {
  std::string phase_name;
  double duration_seconds = 0.0;

  friend bool operator==(const PhaseTiming&, const PhaseTiming&) = default;
};

struct HostReport {
  bool ok = true;
  std::string error;
  std::vector<OsdId> osd_ids;
  std::uint64_t reserved_bytes = 0;
  unsigned max_parallelism = 0;

  friend bool operator==(const HostReport&, const HostReport&) = default;
};

struct DeploymentReport {
  std::string cluster_id;
  std::string operation;  // "deploy" or "remove"
  std::vector<PhaseTiming> phases;
  std::map<std::string, HostReport> per_host;
  double total_seconds = 0.0;

  friend bool operator==(const DeploymentReport&, const DeploymentReport&) = default;
};

void to_json(nlohmann::json& j, const DeploymentReport& report);
void from_json(const nlohmann::json& j, DeploymentReport& report);

/// Table-style rendering: one row per phase, then the total.
std::string render_report(const DeploymentReport& report);

/// Repeated deploy/remove timings for one cluster size.
struct DeployTimingRow {
  std::size_t nodes = 0;
  std::vector<double> deploy_seconds;
  std::vector<double> remove_seconds;  // same run order as deploy_seconds
};

/// Nodes | Deploy | Remove | Total, each "mean ± sample std" in seconds.
/// TooFewSamples unless every row has at least two runs of each.
std::string render_timing_table(const std::vector<DeployTimingRow>& rows);

struct ClusterStatus {
  bool deployed = false;
  bool monitor_up = false;
  std::uint64_t epoch = 0;
  std::size_t up_osds = 0;
  std::size_t down_osds = 0;
  bool gateway_requested = false;
  bool gateway_up = false;
};

void to_json(nlohmann::json& j, const ClusterStatus& status);

/// Deploys and removes transient clusters of simulated hosts. Each host is a
/// separate `ramstored agent` process; the monitor and the gateway run as
/// their own daemons. Keys travel through the shared directory.
class Orchestrator {
 public:
  struct Options {
    std::string daemon_path;  // empty: default_daemon_path()
  };

  Orchestrator() : Orchestrator(Options{}) {}
  explicit Orchestrator(Options options);

  /// Phases: bootstrap-monitor, write-keyring, start-manager, launch-agents,
  /// create-pool | start-gateway. Any failure removes the partial cluster and
  /// rethrows.
  DeploymentReport deploy(const DeploymentPlan& plan);

  /// Phases: stop-daemons, unregister-osds, destroy-devices, remove-keys.
  DeploymentReport remove(const std::string& shared_dir, const std::string& cluster_id);

  ClusterStatus status(const std::string& shared_dir, const std::string& cluster_id) const;

 private:
  std::string daemon_path_;
};

/// Client endpoint for a deployed cluster, read from the shared directory.
/// Throws MonitorUnavailable when the cluster is not deployed.
ClusterEndpoint connect_cluster(const std::string& shared_dir, const std::string& cluster_id);

}  // namespace ramstore
