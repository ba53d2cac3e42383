#include "ramstore/monitor.hpp"

#include <algorithm>
#include <set>

#include "ramstore/error.hpp"

namespace ramstore {

namespace {

std::mutex& live_monitors_mutex() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, Monitor*>& live_monitors() {
  static std::map<std::string, Monitor*> monitors;
  return monitors;
}

}  // namespace

void to_json(nlohmann::json& j, const ManagerReport& report) {
  nlohmann::json osds = nlohmann::json::array();
  for (const auto& u : report.osds) {
    osds.push_back({{"osd_id", u.osd_id},
                    {"used_bytes", u.used_bytes},
                    {"capacity_bytes", u.capacity_bytes},
                    {"reachable", u.reachable}});
  }
  j = nlohmann::json{{"epoch", report.epoch},
                     {"osds", std::move(osds)},
                     {"objects_per_pool", report.objects_per_pool}};
}

void from_json(const nlohmann::json& j, ManagerReport& report) {
  report.epoch = j.at("epoch").get<std::uint64_t>();
  report.osds.clear();
  for (const auto& o : j.at("osds")) {
    report.osds.push_back({o.at("osd_id").get<OsdId>(), o.at("used_bytes").get<std::uint64_t>(),
                           o.at("capacity_bytes").get<std::uint64_t>(),
                           o.value("reachable", true)});
  }
  report.objects_per_pool = j.at("objects_per_pool").get<std::map<std::string, std::uint64_t>>();
}

Monitor::Monitor(std::string cluster_id, std::string listen_address, Options options)
    : cluster_id_(std::move(cluster_id)),
      address_(std::move(listen_address)),
      liveness_window_(options.liveness_window),
      clock_(options.clock ? std::move(options.clock)
                           : Clock([] { return std::chrono::system_clock::now(); })) {
  map_.cluster_id = cluster_id_;
  map_.epoch = 1;
  map_.monitor_address = address_;
}

std::unique_ptr<Monitor> Monitor::bootstrap(const std::string& cluster_id,
                                            const std::string& listen_address, Options options) {
  if (cluster_id.empty()) throw Error(Errc::InvalidArgument, "empty cluster id");
  std::lock_guard lock(live_monitors_mutex());
  auto& monitors = live_monitors();
  if (monitors.contains(cluster_id)) {
    throw Error(Errc::DuplicateCluster, "a monitor for " + cluster_id + " is already running");
  }
  std::unique_ptr<Monitor> monitor(new Monitor(cluster_id, listen_address, std::move(options)));
  monitor->keyring_ = Keyring::generate();
  monitors.emplace(cluster_id, monitor.get());
  return monitor;
}

Monitor::~Monitor() {
  std::lock_guard lock(live_monitors_mutex());
  auto& monitors = live_monitors();
  if (auto it = monitors.find(cluster_id_); it != monitors.end() && it->second == this) {
    monitors.erase(it);
  }
}

Keyring Monitor::issue_keyring() {
  std::unique_lock lock(mu_);
  keyring_ = Keyring::generate();
  return keyring_;
}

Keyring Monitor::keyring() const {
  std::shared_lock lock(mu_);
  return keyring_;
}

void Monitor::authenticate(Role role, const std::string& secret) const {
  std::shared_lock lock(mu_);
  auto it = keyring_.secrets.find(role);
  if (it == keyring_.secrets.end() || !secrets_equal(it->second, secret)) {
    throw Error(Errc::AuthFailure, "bad " + std::string(role_name(role)) + " secret");
  }
}

ClusterMap Monitor::get_map() const {
  std::shared_lock lock(mu_);
  return map_;
}

ClusterMap Monitor::register_osd(OsdInfo osd, const std::string& osd_key) {
  authenticate(Role::osd, osd_key);
  std::unique_lock lock(mu_);
  if (map_.find_osd(osd.osd_id) != nullptr) {
    throw Error(Errc::DuplicateOsd, "osd." + std::to_string(osd.osd_id) + " already registered");
  }
  osd.state = OsdState::up;
  osd.last_heartbeat = now();
  map_.osds.push_back(std::move(osd));
  std::sort(map_.osds.begin(), map_.osds.end(),
            [](const OsdInfo& a, const OsdInfo& b) { return a.osd_id < b.osd_id; });
  ++map_.epoch;
  return map_;
}

ClusterMap Monitor::unregister_osd(OsdId osd_id, const std::string& osd_key) {
  authenticate(Role::osd, osd_key);
  std::unique_lock lock(mu_);
  auto it = std::find_if(map_.osds.begin(), map_.osds.end(),
                         [&](const OsdInfo& o) { return o.osd_id == osd_id; });
  if (it == map_.osds.end()) throw Error(Errc::UnknownOsd, "osd." + std::to_string(osd_id));
  map_.osds.erase(it);
  ++map_.epoch;
  return map_;
}

ClusterMap Monitor::create_pool(const PoolSpec& spec, const std::string& client_key) {
  authenticate(Role::client, client_key);
  if (spec.name.empty() || spec.name.find('/') != std::string::npos) {
    throw Error(Errc::InvalidName, "pool name '" + spec.name + "'");
  }
  if (spec.replication_factor == 0 || spec.chunk_size_bytes == 0) {
    throw Error(Errc::InvalidArgument, "replication factor and chunk size must be positive");
  }
  std::unique_lock lock(mu_);
  if (map_.find_pool(spec.name) != nullptr) {
    throw Error(Errc::DuplicatePool, "pool " + spec.name + " exists");
  }
  const auto up = map_.up_osds().size();
  if (spec.replication_factor > up) {
    throw Error(Errc::NotEnoughOsds, "replication " + std::to_string(spec.replication_factor) +
                                         " needs more than " + std::to_string(up) + " up osds");
  }
  map_.pools.push_back(spec);
  ++map_.epoch;
  return map_;
}

void Monitor::heartbeat(OsdId osd_id, const std::string& osd_key) {
  authenticate(Role::osd, osd_key);
  std::unique_lock lock(mu_);
  auto it = std::find_if(map_.osds.begin(), map_.osds.end(),
                         [&](const OsdInfo& o) { return o.osd_id == osd_id; });
  if (it == map_.osds.end()) throw Error(Errc::UnknownOsd, "osd." + std::to_string(osd_id));
  it->last_heartbeat = now();
  if (it->state == OsdState::down) {
    it->state = OsdState::up;
    ++map_.epoch;
  }
}

ClusterMap Monitor::liveness_sweep() {
  std::unique_lock lock(mu_);
  const Timestamp t = now();
  for (auto& osd : map_.osds) {
    if (osd.state == OsdState::up && t - osd.last_heartbeat > liveness_window_) {
      osd.state = OsdState::down;
      ++map_.epoch;
    }
  }
  return map_;
}

void Monitor::start_manager(const std::string& manager_key, std::shared_ptr<StatsSource> stats) {
  authenticate(Role::manager, manager_key);
  if (!stats) throw Error(Errc::Internal, "manager needs a stats source");
  std::unique_lock lock(mu_);
  stats_ = std::move(stats);
}

bool Monitor::manager_running() const {
  std::shared_lock lock(mu_);
  return stats_ != nullptr;
}

ManagerReport Monitor::metrics() const {
  ClusterMap map;
  std::shared_ptr<StatsSource> stats;
  {
    std::shared_lock lock(mu_);
    map = map_;
    stats = stats_;
  }
  if (!stats) throw Error(Errc::ManagerUnavailable, "manager not started");

  ManagerReport report;
  report.epoch = map.epoch;
  for (const auto& osd : map.osds) {
    OsdUsage usage{osd.osd_id, 0, osd.capacity_bytes, false};
    if (osd.state == OsdState::up) {
      try {
        usage = stats->usage(osd);
        usage.osd_id = osd.osd_id;
        usage.reachable = true;
      } catch (const Error&) {
        usage.reachable = false;
      }
    }
    report.osds.push_back(usage);
  }
  for (const auto& pool : map.pools) {
    std::set<std::string> names;
    for (const auto& osd : map.osds) {
      if (osd.state != OsdState::up) continue;
      try {
        for (auto& n : stats->manifests(osd, pool.name)) names.insert(std::move(n));
      } catch (const Error&) {
      }
    }
    report.objects_per_pool[pool.name] = names.size();
  }
  return report;
}

Keyring issue_keyring(const std::string& cluster_id) {
  Monitor* monitor = nullptr;
  {
    std::lock_guard lock(live_monitors_mutex());
    auto& monitors = live_monitors();
    auto it = monitors.find(cluster_id);
    if (it == monitors.end()) throw Error(Errc::UnknownCluster, cluster_id);
    monitor = it->second;
  }
  return monitor->issue_keyring();
}

// ---------------------------------------------------------------------------

MonitorServer::MonitorServer(Monitor& monitor, std::shared_ptr<StatsSource> stats)
    : monitor_(monitor),
      stats_(std::move(stats)),
      server_(monitor.address(), [this](const wire::Message& m) { return handle(m); }) {
  server_.start();
  sweeper_ = std::thread([this] { sweep_loop(); });
}

MonitorServer::~MonitorServer() { stop(); }

void MonitorServer::wait_for_shutdown() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return shutdown_requested_ || stopped_; });
}

void MonitorServer::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopped_) return;
    stopped_ = true;
  }
  cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
  server_.stop();
}

void MonitorServer::sweep_loop() {
  const auto interval = std::max(std::chrono::milliseconds(10), monitor_.liveness_window() / 4);
  std::unique_lock lock(mu_);
  while (!stopped_) {
    cv_.wait_for(lock, interval, [this] { return stopped_; });
    if (stopped_) break;
    lock.unlock();
    monitor_.liveness_sweep();
    lock.lock();
  }
}

wire::Message MonitorServer::handle(const wire::Message& request) {
  const auto& h = request.header;
  const std::string op = h.value("op", std::string());
  const auto& auth = h.contains("auth") ? h.at("auth") : nlohmann::json::object();
  const auto role = role_from_name(auth.value("role", std::string()));
  const std::string key = auth.value("key", std::string());
  if (!role) throw Error(Errc::AuthFailure, "missing or unknown role");
  // Every request must carry a currently valid secret for the role it claims.
  monitor_.authenticate(*role, key);

  auto require = [&](std::initializer_list<Role> allowed) {
    if (std::find(allowed.begin(), allowed.end(), *role) == allowed.end()) {
      throw Error(Errc::AuthFailure,
                  "role " + std::string(role_name(*role)) + " may not call " + op);
    }
  };

  wire::Message response = wire::ok_response();
  const auto& args = h.contains("args") ? h.at("args") : nlohmann::json::object();
  if (op == "get_map") {
    response.header["map"] = monitor_.get_map();
  } else if (op == "register_osd") {
    require({Role::osd});
    response.header["map"] = monitor_.register_osd(args.at("osd").get<OsdInfo>(), key);
  } else if (op == "unregister_osd") {
    require({Role::osd});
    response.header["map"] = monitor_.unregister_osd(args.at("osd_id").get<OsdId>(), key);
  } else if (op == "create_pool") {
    require({Role::client});
    response.header["map"] = monitor_.create_pool(args.at("pool").get<PoolSpec>(), key);
  } else if (op == "heartbeat") {
    require({Role::osd});
    monitor_.heartbeat(args.at("osd_id").get<OsdId>(), key);
  } else if (op == "metrics") {
    require({Role::client, Role::manager});
    response.header["report"] = monitor_.metrics();
  } else if (op == "start_manager") {
    require({Role::manager});
    monitor_.start_manager(key, stats_);
  } else if (op == "shutdown") {
    require({Role::monitor});
    {
      std::lock_guard lock(mu_);
      shutdown_requested_ = true;
    }
    cv_.notify_all();
  } else {
    throw Error(Errc::Protocol, "unknown op '" + op + "'");
  }
  return response;
}

// ---------------------------------------------------------------------------

wire::Message MonitorClient::call(const std::string& op, nlohmann::json args) const {
  wire::Message request;
  request.header["op"] = op;
  request.header["auth"] = {{"role", std::string(role_name(role_))}, {"key", secret_}};
  request.header["args"] = std::move(args);
  return wire::expect_ok(wire::call(address_, request, Errc::MonitorUnavailable));
}

ClusterMap MonitorClient::get_map() const {
  return call("get_map").header.at("map").get<ClusterMap>();
}

ClusterMap MonitorClient::register_osd(const OsdInfo& osd) const {
  return call("register_osd", {{"osd", osd}}).header.at("map").get<ClusterMap>();
}

ClusterMap MonitorClient::unregister_osd(OsdId osd_id) const {
  return call("unregister_osd", {{"osd_id", osd_id}}).header.at("map").get<ClusterMap>();
}

ClusterMap MonitorClient::create_pool(const PoolSpec& spec) const {
  return call("create_pool", {{"pool", spec}}).header.at("map").get<ClusterMap>();
}

void MonitorClient::heartbeat(OsdId osd_id) const { call("heartbeat", {{"osd_id", osd_id}}); }

ManagerReport MonitorClient::metrics() const {
  return call("metrics").header.at("report").get<ManagerReport>();
}

void MonitorClient::start_manager() const { call("start_manager"); }

void MonitorClient::shutdown() const { call("shutdown"); }

}  // namespace ramstore
