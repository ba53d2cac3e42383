// Daemon entry points spawned by the orchestrator. Each prints one JSON
// readiness line on stdout and then runs until told to stop.

#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ramstore/agent.hpp"
#include "ramstore/error.hpp"
#include "ramstore/gateway.hpp"
#include "ramstore/launcher.hpp"
#include "ramstore/monitor.hpp"
#include "ramstore/orchestrator.hpp"

using namespace ramstore;
using nlohmann::json;

namespace {

sigset_t termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  return set;
}

int wait_for_signal() {
  const sigset_t set = termination_signals();
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

int not_ready(const std::exception& e) {
  json line{{"ready", false}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) line["error"] = std::string(errc_name(err->code()));
  announce_ready(line);
  std::fprintf(stderr, "ramstored: %s\n", e.what());
  return 1;
}

int run_monitor(const std::string& cluster_id, const std::string& address, unsigned liveness_ms) {
  std::unique_ptr<Monitor> monitor;
  std::unique_ptr<MonitorServer> server;
  Keyring keyring;
  try {
    Monitor::Options options;
    options.liveness_window = std::chrono::milliseconds(liveness_ms);
    monitor = Monitor::bootstrap(cluster_id, address, options);
    keyring = monitor->issue_keyring();
    server = std::make_unique<MonitorServer>(*monitor, std::make_shared<RemoteStatsSource>(keyring.secret(Role::osd)));
  } catch (const std::exception& e) {
    return not_ready(e);
  }
  std::thread([&server] {
    wait_for_signal();
    server->stop();
  }).detach();
  announce_ready({{"ready", true}, {"pid", static_cast<long>(::getpid())}, {"address", address}, {"keyring", keyring}});
  server->wait_for_shutdown();
  server->stop();
  return 0;
}

int run_agent(const std::string& config_json) {
  std::unique_ptr<HostAgent> agent;
  json ready;
  try {
    agent = std::make_unique<HostAgent>(json::parse(config_json).get<AgentConfig>());
    ready = agent->start();
  } catch (const std::exception& e) {
    return not_ready(e);
  }
  std::thread([] {
    wait_for_signal();
    std::_Exit(0);
  }).detach();
  announce_ready(ready);
  agent->run();
  return 0;
}

int run_gateway(const std::string& shared_dir, const std::string& cluster_id, const std::string& listen,
                unsigned replication, std::uint64_t max_body) {
  std::unique_ptr<GatewayServer> gateway;
  try {
    GatewaySpec spec;
    spec.listen_address = listen;
    spec.cluster = connect_cluster(shared_dir, cluster_id);
    spec.bucket_replication_factor = replication;
    spec.max_body_bytes = max_body;
    gateway = std::make_unique<GatewayServer>(std::move(spec));
    gateway->start();
  } catch (const std::exception& e) {
    return not_ready(e);
  }
  announce_ready({{"ready", true}, {"pid", static_cast<long>(::getpid())}, {"address", gateway->address()}});
  wait_for_signal();
  gateway->stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Worker threads inherit the mask, so only sigwait sees these.
  const sigset_t set = termination_signals();
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  signal(SIGPIPE, SIG_IGN);

  CLI::App app{"ramstore daemons"};
  app.require_subcommand(1);

  std::string cluster_id, address, config_json, shared_dir, listen;
  unsigned liveness_ms = 5000;
  unsigned replication = 1;
  std::uint64_t max_body = 256ull << 20;

  auto* monitor = app.add_subcommand("monitor", "cluster monitor and manager");
  monitor->add_option("--cluster-id", cluster_id)->required();
  monitor->add_option("--address", address)->required();
  monitor->add_option("--liveness-ms", liveness_ms);

  auto* agent = app.add_subcommand("agent", "per-host agent owning RAM devices and OSDs");
  agent->add_option("--config-json", config_json)->required();

  auto* gateway = app.add_subcommand("gateway", "HTTP gateway");
  gateway->add_option("--shared-dir", shared_dir)->required();
  gateway->add_option("--cluster-id", cluster_id)->required();
  gateway->add_option("--listen", listen)->required();
  gateway->add_option("--replication", replication);
  gateway->add_option("--max-body-bytes", max_body);

  CLI11_PARSE(app, argc, argv);

  if (*monitor) return run_monitor(cluster_id, address, liveness_ms);
  if (*agent) return run_agent(config_json);
  return run_gateway(shared_dir, cluster_id, listen, replication, max_body);
}
