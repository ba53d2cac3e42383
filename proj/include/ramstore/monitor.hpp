#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "ramstore/cluster_map.hpp"
#include "ramstore/wire.hpp"

namespace ramstore {

inline constexpr std::chrono::milliseconds kDefaultLivenessWindow{5000};

struct OsdUsage {
  OsdId osd_id = 0;
  std::uint64_t used_bytes = 0;
  std::uint64_t capacity_bytes = 0;
  bool reachable = true;
};

/// Manager-style cluster report.
struct ManagerReport {
  std::uint64_t epoch = 0;
  std::vector<OsdUsage> osds;
  std::map<std::string, std::uint64_t> objects_per_pool;
};

void to_json(nlohmann::json& j, const ManagerReport& report);
void from_json(const nlohmann::json& j, ManagerReport& report);

/// Supplies live numbers for the manager: device usage and manifest names per pool.
class StatsSource {
 public:
  virtual ~StatsSource() = default;
  virtual OsdUsage usage(const OsdInfo& osd) = 0;
  virtual std::vector<std::string> manifests(const OsdInfo& osd, const std::string& pool) = 0;
};

/// The single cluster authority. There is exactly one per cluster id in a
/// process and nothing ever waits for agreement with a peer monitor.
class Monitor {
 public:
  using Clock = std::function<Timestamp()>;

  struct Options {
    std::chrono::milliseconds liveness_window = kDefaultLivenessWindow;
    Clock clock;  // defaults to system_clock::now
  };

  /// Throws DuplicateCluster if this process already runs a monitor for `cluster_id`.
  static std::unique_ptr<Monitor> bootstrap(const std::string& cluster_id,
                                            const std::string& listen_address,
                                            Options options);
  static std::unique_ptr<Monitor> bootstrap(const std::string& cluster_id,
                                            const std::string& listen_address) {
    return bootstrap(cluster_id, listen_address, Options{});
  }

  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;
  ~Monitor();

  const std::string& cluster_id() const noexcept { return cluster_id_; }
  const std::string& address() const noexcept { return address_; }
  std::chrono::milliseconds liveness_window() const noexcept { return liveness_window_; }

  /// Replaces every role secret with a fresh random one.
  Keyring issue_keyring();
  Keyring keyring() const;

  /// Throws AuthFailure unless `secret` is the current secret of `role`.
  void authenticate(Role role, const std::string& secret) const;

  ClusterMap get_map() const;
  ClusterMap register_osd(OsdInfo osd, const std::string& osd_key);
  ClusterMap unregister_osd(OsdId osd_id, const std::string& osd_key);
  ClusterMap create_pool(const PoolSpec& spec, const std::string& client_key);
  void heartbeat(OsdId osd_id, const std::string& osd_key);
  /// Marks up OSDs whose last heartbeat is older than the liveness window as down.
  ClusterMap liveness_sweep();

  void start_manager(const std::string& manager_key, std::shared_ptr<StatsSource> stats);
  bool manager_running() const;
  /// Throws ManagerUnavailable until start_manager has been called.
  ManagerReport metrics() const;

 private:
  Monitor(std::string cluster_id, std::string listen_address, Options options);

  Timestamp now() const { return clock_(); }

  const std::string cluster_id_;
  const std::string address_;
  const std::chrono::milliseconds liveness_window_;
  const Clock clock_;

  mutable std::shared_mutex mu_;
  ClusterMap map_;
  Keyring keyring_;
  std::shared_ptr<StatsSource> stats_;
};

/// Looks up the monitor bootstrapped for `cluster_id` in this process and
/// issues it a fresh keyring. Throws UnknownCluster if there is none.
Keyring issue_keyring(const std::string& cluster_id);

/// Serves a Monitor over the monitor wire protocol
/// (get_map, register_osd, unregister_osd, create_pool, heartbeat, metrics,
/// start_manager, shutdown) and runs the periodic liveness sweep.
class MonitorServer {
 public:
  /// `stats` backs the manager once a start_manager request arrives.
  MonitorServer(Monitor& monitor, std::shared_ptr<StatsSource> stats);
  MonitorServer(const MonitorServer&) = delete;
  MonitorServer& operator=(const MonitorServer&) = delete;
  ~MonitorServer();

  /// Blocks until a shutdown request arrives or stop() is called.
  void wait_for_shutdown();
  void stop();

 private:
  wire::Message handle(const wire::Message& request);
  void sweep_loop();

  Monitor& monitor_;
  std::shared_ptr<StatsSource> stats_;
  wire::Server server_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool shutdown_requested_ = false;
  bool stopped_ = false;
  std::thread sweeper_;
};

/// Client side of the monitor wire protocol.
class MonitorClient {
 public:
  MonitorClient(std::string address, Role role, std::string secret)
      : address_(std::move(address)), role_(role), secret_(std::move(secret)) {}

  ClusterMap get_map() const;
  ClusterMap register_osd(const OsdInfo& osd) const;
  ClusterMap unregister_osd(OsdId osd_id) const;
  ClusterMap create_pool(const PoolSpec& spec) const;
  void heartbeat(OsdId osd_id) const;
  ManagerReport metrics() const;
  void start_manager() const;
  void shutdown() const;

  const std::string& address() const noexcept { return address_; }

 private:
  wire::Message call(const std::string& op, nlohmann::json args = nlohmann::json::object()) const;

  std::string address_;
  Role role_;
  std::string secret_;
};

}  // namespace ramstore
