#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramstore/cluster_map.hpp"
#include "ramstore/osd.hpp"
#include "ramstore/ram_device.hpp"
#include "ramstore/wire.hpp"

namespace ramstore {

struct AgentConfig {
  std::string cluster_id;
  std::string host;
  std::string shared_dir;
  std::string runtime_dir;
  std::string monitor_address;
  std::vector<OsdId> osd_ids;
  std::uint64_t device_capacity_bytes = 0;
  std::uint64_t device_block_size_bytes = 4096;
  unsigned slots = 1;
  std::chrono::milliseconds heartbeat_interval{1000};
};

void to_json(nlohmann::json& j, const AgentConfig& config);
void from_json(const nlohmann::json& j, AgentConfig& config);

/// <runtime_dir>/agents/<host>.sock
std::string agent_control_address(const std::string& runtime_dir, const std::string& host);
/// <runtime_dir>/hosts/<host>
std::string host_runtime_folder(const std::string& runtime_dir, const std::string& host);

/// Per-host agent: owns the host's RAM devices and OSD daemons.
///
/// Control protocol (osd secret): stop_osds, unregister_osds, destroy_devices, status.
/// destroy_devices is the last step; run() returns after answering it.
class HostAgent {
 public:
  explicit HostAgent(AgentConfig config);
  HostAgent(const HostAgent&) = delete;
  HostAgent& operator=(const HostAgent&) = delete;
  ~HostAgent();

  /// Reads keys from the shared directory, creates devices and OSDs using at
  /// most `slots` concurrent workers, registers every OSD with the monitor and
  /// starts heartbeats. Returns the readiness document.
  nlohmann::json start();

  /// Serves the control socket until destroy_devices has been answered.
  void run();

  void stop_osds();
  void unregister_osds();
  /// Returns the device registry total after destruction (0 when complete).
  std::uint64_t destroy_devices();

  const DeviceRegistry& registry() const noexcept { return registry_; }

 private:
  struct Osd {
    OsdId id;
    std::shared_ptr<RamDevice> device;
    std::unique_ptr<OsdDaemon> daemon;
    std::unique_ptr<OsdServer> server;
  };

  wire::Message handle(const wire::Message& request);
  void heartbeat_loop();
  void stop_heartbeats();

  AgentConfig config_;
  std::string osd_secret_;
  std::string client_secret_;
  DeviceRegistry registry_;
  std::vector<Osd> osds_;
  unsigned max_parallelism_ = 0;

  std::mutex mu_;
  std::condition_variable cv_;
  bool heartbeats_stopped_ = false;
  bool finished_ = false;
  std::thread heartbeat_thread_;
  std::unique_ptr<wire::Server> control_;
};

class AgentClient {
 public:
  AgentClient(std::string address, std::string osd_secret)
      : address_(std::move(address)), secret_(std::move(osd_secret)) {}

  nlohmann::json call(const std::string& op, std::chrono::milliseconds timeout) const;

 private:
  std::string address_;
  std::string secret_;
};

}  // namespace ramstore
