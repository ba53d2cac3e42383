#include "ramstore/agent.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>

#include "ramstore/error.hpp"
#include "ramstore/monitor.hpp"
#include "ramstore/shared_dir.hpp"

namespace fs = std::filesystem;

namespace ramstore {

void to_json(nlohmann::json& j, const AgentConfig& c) {
  j = nlohmann::json{{"cluster_id", c.cluster_id},
                     {"host", c.host},
                     {"shared_dir", c.shared_dir},
                     {"runtime_dir", c.runtime_dir},
                     {"monitor_address", c.monitor_address},
                     {"osd_ids", c.osd_ids},
                     {"device_capacity_bytes", c.device_capacity_bytes},
                     {"device_block_size_bytes", c.device_block_size_bytes},
                     {"slots", c.slots},
                     {"heartbeat_interval_ms", c.heartbeat_interval.count()}};
}

void from_json(const nlohmann::json& j, AgentConfig& c) {
  c.cluster_id = j.at("cluster_id").get<std::string>();
  c.host = j.at("host").get<std::string>();
  c.shared_dir = j.at("shared_dir").get<std::string>();
  c.runtime_dir = j.at("runtime_dir").get<std::string>();
  c.monitor_address = j.at("monitor_address").get<std::string>();
  c.osd_ids = j.at("osd_ids").get<std::vector<OsdId>>();
  c.device_capacity_bytes = j.at("device_capacity_bytes").get<std::uint64_t>();
  c.device_block_size_bytes = j.value("device_block_size_bytes", std::uint64_t{4096});
  c.slots = j.value("slots", 1u);
  c.heartbeat_interval = std::chrono::milliseconds(j.value("heartbeat_interval_ms", 1000));
}

std::string agent_control_address(const std::string& runtime_dir, const std::string& host) {
  return (fs::path(runtime_dir) / "agents" / (host + ".sock")).string();
}

std::string host_runtime_folder(const std::string& runtime_dir, const std::string& host) {
  return (fs::path(runtime_dir) / "hosts" / host).string();
}

HostAgent::HostAgent(AgentConfig config) : config_(std::move(config)) {
  if (config_.slots == 0) throw Error(Errc::InvalidArgument, "an agent needs at least one slot");
}

HostAgent::~HostAgent() {
  stop_heartbeats();
  if (control_) control_->stop();
  for (auto& osd : osds_) {
    if (osd.server) osd.server->stop();
  }
}

nlohmann::json HostAgent::start() {
  osd_secret_ = shared_dir::read_secret(config_.shared_dir, config_.cluster_id, Role::osd);
  client_secret_ = shared_dir::read_secret(config_.shared_dir, config_.cluster_id, Role::client);

  const fs::path folder = host_runtime_folder(config_.runtime_dir, config_.host);
  fs::create_directories(folder);
  fs::create_directories(fs::path(agent_control_address(config_.runtime_dir, config_.host)).parent_path());

  osds_.resize(config_.osd_ids.size());
  const MonitorClient monitor(config_.monitor_address, Role::osd, osd_secret_);

  std::atomic<std::size_t> next{0};
  std::atomic<unsigned> active{0};
  std::atomic<unsigned> peak{0};
  std::mutex error_mu;
  std::optional<std::string> first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config_.osd_ids.size()) return;
      const unsigned now = ++active;
      unsigned seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      try {
        Osd& osd = osds_[i];
        osd.id = config_.osd_ids[i];
        osd.device = registry_.create_device(config_.device_capacity_bytes, config_.device_block_size_bytes);
        osd.daemon = std::make_unique<OsdDaemon>(osd.id, osd.device);
        const std::string address = (folder / ("osd." + std::to_string(osd.id) + ".sock")).string();
        osd.server = std::make_unique<OsdServer>(*osd.daemon, address, osd_secret_, client_secret_);
        OsdInfo info;
        info.osd_id = osd.id;
        info.host = config_.host;
        info.address = address;
        info.capacity_bytes = config_.device_capacity_bytes;
        monitor.register_osd(info);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = e.what();
      }
      --active;
    }
  };

  const unsigned workers = std::min<unsigned>(config_.slots, static_cast<unsigned>(config_.osd_ids.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  max_parallelism_ = peak.load();
  if (first_error) throw Error(Errc::AgentFailure, config_.host + ": " + *first_error);

  control_ = std::make_unique<wire::Server>(
      agent_control_address(config_.runtime_dir, config_.host),
      [this](const wire::Message& m) { return handle(m); });
  control_->start();
  heartbeat_thread_ = std::thread([this] { heartbeat_loop(); });

  nlohmann::json addresses = nlohmann::json::object();
  for (const auto& osd : osds_) addresses[std::to_string(osd.id)] = osd.server->address();
  return {{"ready", true},
          {"host", config_.host},
          {"pid", static_cast<long>(::getpid())},
          {"control_address", control_->path()},
          {"osd_ids", config_.osd_ids},
          {"osd_addresses", addresses},
          {"slots", config_.slots},
          {"max_parallelism", max_parallelism_},
          {"reserved_bytes", registry_.total_reserved_bytes()}};
}

void HostAgent::heartbeat_loop() {
  const MonitorClient monitor(config_.monitor_address, Role::osd, osd_secret_);
  std::unique_lock lock(mu_);
  while (!heartbeats_stopped_) {
    cv_.wait_for(lock, config_.heartbeat_interval, [this] { return heartbeats_stopped_; });
    if (heartbeats_stopped_) break;
    lock.unlock();
    for (const auto& osd : osds_) {
      try {
        monitor.heartbeat(osd.id);
      } catch (const Error&) {
      }
    }
    lock.lock();
  }
}

void HostAgent::stop_heartbeats() {
  {
    std::lock_guard lock(mu_);
    heartbeats_stopped_ = true;
  }
  cv_.notify_all();
  if (heartbeat_thread_.joinable()) heartbeat_thread_.join();
}

void HostAgent::stop_osds() {
  stop_heartbeats();
  for (auto& osd : osds_) {
    if (osd.server) osd.server->stop();
    osd.server.reset();
  }
  std::error_code ec;
  fs::remove_all(host_runtime_folder(config_.runtime_dir, config_.host), ec);
}

void HostAgent::unregister_osds() {
  const MonitorClient monitor(config_.monitor_address, Role::osd, osd_secret_);
  for (const auto& osd : osds_) {
    try {
      monitor.unregister_osd(osd.id);
    } catch (const Error& e) {
      if (e.code() != Errc::UnknownOsd) throw;
    }
  }
}

std::uint64_t HostAgent::destroy_devices() {
  for (auto& osd : osds_) {
    osd.daemon.reset();
    if (osd.device) {
      registry_.destroy_device(osd.device->id());
      osd.device.reset();
    }
  }
  return registry_.total_reserved_bytes();
}

wire::Message HostAgent::handle(const wire::Message& request) {
  const auto& h = request.header;
  const auto& auth = h.contains("auth") ? h.at("auth") : nlohmann::json::object();
  if (auth.value("role", std::string()) != "osd" || !secrets_equal(auth.value("key", std::string()), osd_secret_)) {
    throw Error(Errc::AuthFailure, "agent " + config_.host);
  }
  const std::string op = h.value("op", std::string());
  wire::Message response = wire::ok_response();
  if (op == "stop_osds") {
    stop_osds();
  } else if (op == "unregister_osds") {
    unregister_osds();
  } else if (op == "destroy_devices") {
    response.header["reserved_bytes"] = destroy_devices();
    response.header["active_devices"] = registry_.active_count();
    {
      std::lock_guard lock(mu_);
      finished_ = true;
    }
    cv_.notify_all();
  } else if (op == "status") {
    response.header["host"] = config_.host;
    response.header["reserved_bytes"] = registry_.total_reserved_bytes();
    response.header["max_parallelism"] = max_parallelism_;
  } else {
    throw Error(Errc::Protocol, "unknown op '" + op + "'");
  }
  return response;
}

void HostAgent::run() {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return finished_; });
  }
  stop_heartbeats();
  if (control_) control_->stop();
}

nlohmann::json AgentClient::call(const std::string& op, std::chrono::milliseconds timeout) const {
  wire::Message request;
  request.header["op"] = op;
  request.header["auth"] = {{"role", "osd"}, {"key", secret_}};
  return wire::expect_ok(wire::call(address_, request, Errc::AgentFailure, timeout)).header;
}

}  // namespace ramstore
