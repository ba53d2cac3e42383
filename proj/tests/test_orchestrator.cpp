#include <gtest/gtest.h>

#include <signal.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "ramstore/agent.hpp"
#include "ramstore/error.hpp"
#include "ramstore/launcher.hpp"
#include "ramstore/orchestrator.hpp"
#include "ramstore/shared_dir.hpp"
#include "support.hpp"

using namespace ramstore;
using ramstore::testing::bytes_of;
using ramstore::testing::local_plan;
using ramstore::testing::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Internal;
}

nlohmann::json read_state(const DeploymentPlan& plan) {
  std::ifstream in(shared_dir::state_path(plan.shared_dir, plan.cluster_id));
  return nlohmann::json::parse(in);
}

std::vector<std::string> phase_names(const DeploymentReport& r) {
  std::vector<std::string> out;
  for (const auto& p : r.phases) out.push_back(p.phase_name);
  return out;
}

bool runtime_empty(const DeploymentPlan& plan) {
  std::error_code ec;
  return !std::filesystem::exists(plan.runtime_dir, ec);
}

}  // namespace

TEST(LaunchParallel, RunsConcurrently) {
  const std::vector<std::string> hosts{"a", "b", "c", "d", "e", "f", "g", "h"};
  const auto t0 = Clock::now();
  const auto out = launch_parallel(hosts, [](const std::string& h) {
    std::this_thread::sleep_for(std::chrono::seconds(1));
    return nlohmann::json{{"host", h}};
  });
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  EXPECT_LT(wall, 2.0);
  ASSERT_EQ(out.size(), hosts.size());
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    EXPECT_EQ(out[i].host, hosts[i]);
    EXPECT_TRUE(out[i].ok);
    EXPECT_EQ(out[i].detail.at("host"), hosts[i]);
  }
}

TEST(LaunchParallel, NoHosts) {
  EXPECT_TRUE(launch_parallel({}, [](const std::string&) { return nlohmann::json(); }).empty());
}

TEST(LaunchParallel, FailureIsAttributed) {
  const std::vector<std::string> hosts{"a", "b", "c", "d", "e", "f", "g", "h"};
  std::atomic<int> finished{0};
  const auto out = launch_parallel(hosts, [&](const std::string& h) {
    if (h == "e") throw Error(Errc::AgentFailure, "boom");
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ++finished;
    return nlohmann::json();
  });
  EXPECT_EQ(finished, 7);
  int ok = 0;
  for (const auto& o : out) {
    if (o.ok) {
      ++ok;
    } else {
      EXPECT_EQ(o.host, "e");
      EXPECT_NE(o.error.find("boom"), std::string::npos);
    }
  }
  EXPECT_EQ(ok, 7);
}

TEST(DeploymentPlan, Validation) {
  TempDir dir;
  auto plan = local_plan(dir, 2);
  EXPECT_NO_THROW(plan.validate());
  auto bad = plan;
  bad.hosts.clear();
  EXPECT_EQ(error_of([&] { bad.validate(); }), Errc::InvalidArgument);
  bad = plan;
  bad.pool = PoolSpec{"p"};
  bad.gateway = GatewayRequest{"127.0.0.1:0"};
  EXPECT_EQ(error_of([&] { bad.validate(); }), Errc::InvalidArgument);
  bad = plan;
  bad.replication_factor = 3;
  EXPECT_EQ(error_of([&] { bad.validate(); }), Errc::InvalidArgument);
  bad = plan;
  bad.hosts = {"a", "a"};
  EXPECT_EQ(error_of([&] { bad.validate(); }), Errc::InvalidArgument);
}

TEST(DeploymentPlan, JsonRoundTrip) {
  TempDir dir;
  auto plan = local_plan(dir, 3);
  plan.pool = PoolSpec{"p", 2, 1 << 20};
  plan.osds_per_host = 2;
  const nlohmann::json j = plan;
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<DeploymentPlan>(), plan);
  auto extra = j;
  extra["surprise"] = 1;
  EXPECT_THROW(extra.get<DeploymentPlan>(), std::exception);
}

TEST(Orchestrator, SingleHostServesPuts) {
  TempDir dir;
  auto plan = local_plan(dir, 1);
  plan.pool = PoolSpec{"p"};
  Orchestrator orch;
  const auto report = orch.deploy(plan);
  EXPECT_EQ(phase_names(report), (std::vector<std::string>{"bootstrap-monitor", "write-keyring", "start-manager",
                                                           "launch-agents", "create-pool"}));
  double longest = 0;
  for (const auto& p : report.phases) longest = std::max(longest, p.duration_seconds);
  EXPECT_GE(report.total_seconds, longest);
  ASSERT_EQ(report.per_host.size(), 1u);
  EXPECT_TRUE(report.per_host.at("node1").ok);
  EXPECT_EQ(report.per_host.at("node1").reserved_bytes, plan.device_capacity_bytes);

  auto store = ObjectStore(connect_cluster(plan.shared_dir, plan.cluster_id));
  store.put_object("p", "hello", bytes_of("world"));
  EXPECT_EQ(store.get_object("p", "hello").data, bytes_of("world"));

  const auto removal = orch.remove(plan.shared_dir, plan.cluster_id);
  EXPECT_EQ(phase_names(removal),
            (std::vector<std::string>{"stop-daemons", "unregister-osds", "destroy-devices", "remove-keys"}));
  EXPECT_EQ(removal.per_host.at("node1").reserved_bytes, 0u);
  EXPECT_TRUE(shared_dir::cluster_files(plan.shared_dir, plan.cluster_id).empty());
  EXPECT_TRUE(runtime_empty(plan));
  EXPECT_EQ(error_of([&] { store.get_object("p", "hello"); }), Errc::MonitorUnavailable);
  EXPECT_EQ(error_of([&] { connect_cluster(plan.shared_dir, plan.cluster_id); }), Errc::MonitorUnavailable);
}

TEST(Orchestrator, FourHostsUp) {
  TempDir dir;
  auto plan = local_plan(dir, 4);
  Orchestrator orch;
  const auto report = orch.deploy(plan);
  EXPECT_EQ(report.phases.back().phase_name, "no-service");
  const auto status = orch.status(plan.shared_dir, plan.cluster_id);
  EXPECT_TRUE(status.deployed);
  EXPECT_TRUE(status.monitor_up);
  EXPECT_EQ(status.up_osds, 4u);
  EXPECT_EQ(status.down_osds, 0u);
  for (Role r : kAllRoles) {
    EXPECT_TRUE(std::filesystem::exists(shared_dir::key_path(plan.shared_dir, plan.cluster_id, r)));
  }
  const auto map = ObjectStore(connect_cluster(plan.shared_dir, plan.cluster_id)).map();
  std::set<std::string> hosts;
  for (const auto& o : map.osds) hosts.insert(o.host);
  EXPECT_EQ(hosts.size(), 4u);

  // The second deploy of a live cluster id is refused.
  EXPECT_EQ(error_of([&] { orch.deploy(plan); }), Errc::AlreadyDeployed);
  orch.remove(plan.shared_dir, plan.cluster_id);
  EXPECT_FALSE(orch.status(plan.shared_dir, plan.cluster_id).deployed);
}

TEST(Orchestrator, NotEnoughOsdsAutoRemoves) {
  TempDir dir;
  auto plan = local_plan(dir, 2);
  plan.pool = PoolSpec{"p", 3};
  Orchestrator orch;
  try {
    orch.deploy(plan);
    FAIL() << "deploy succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotEnoughOsds);
  }
  EXPECT_TRUE(shared_dir::cluster_files(plan.shared_dir, plan.cluster_id).empty());
  EXPECT_TRUE(runtime_empty(plan));
  EXPECT_FALSE(orch.status(plan.shared_dir, plan.cluster_id).deployed);
}

TEST(Orchestrator, DeployRemoveDeploy) {
  TempDir dir;
  auto plan = local_plan(dir, 2);
  plan.pool = PoolSpec{"p"};
  Orchestrator orch;
  orch.deploy(plan);
  orch.remove(plan.shared_dir, plan.cluster_id);
  EXPECT_NO_THROW(orch.deploy(plan));
  EXPECT_EQ(orch.status(plan.shared_dir, plan.cluster_id).up_osds, 2u);
  orch.remove(plan.shared_dir, plan.cluster_id);
}

TEST(Orchestrator, UnknownCluster) {
  TempDir dir;
  Orchestrator orch;
  const auto status = orch.status(dir.str(), "never-deployed");
  EXPECT_FALSE(status.deployed);
  EXPECT_FALSE(status.monitor_up);
  EXPECT_EQ(error_of([&] { orch.remove(dir.str(), "never-deployed"); }), Errc::UnknownCluster);
}

TEST(Orchestrator, MissingSharedDir) {
  TempDir dir;
  auto plan = local_plan(dir, 1);
  plan.shared_dir = dir / "absent";
  EXPECT_EQ(error_of([&] { Orchestrator().deploy(plan); }), Errc::SharedDirUnwritable);
}

TEST(Orchestrator, KilledAgentGoesDown) {
  TempDir dir;
  auto plan = local_plan(dir, 3);
  plan.liveness_window_ms = 300;
  Orchestrator orch;
  orch.deploy(plan);
  const pid_t victim = read_state(plan).at("agents").at("node2").at("pid").get<pid_t>();
  kill_process(victim);

  ClusterStatus status;
  const auto deadline = Clock::now() + std::chrono::seconds(10);
  do {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    status = orch.status(plan.shared_dir, plan.cluster_id);
  } while (status.down_osds == 0 && Clock::now() < deadline);
  EXPECT_EQ(status.down_osds, 1u);
  EXPECT_EQ(status.up_osds, 2u);

  // Removal still completes without the dead host.
  orch.remove(plan.shared_dir, plan.cluster_id);
  EXPECT_TRUE(shared_dir::cluster_files(plan.shared_dir, plan.cluster_id).empty());
  EXPECT_TRUE(runtime_empty(plan));
}

TEST(Orchestrator, SlotsBoundAgentParallelism) {
  TempDir dir;
  auto plan = local_plan(dir, 2);
  plan.osds_per_host = 4;
  plan.slots_per_host = 2;
  plan.device_capacity_bytes = 8 << 20;
  Orchestrator orch;
  const auto report = orch.deploy(plan);
  for (const auto& [host, h] : report.per_host) {
    EXPECT_GE(h.max_parallelism, 1u) << host;
    EXPECT_LE(h.max_parallelism, 2u) << host;
    EXPECT_EQ(h.osd_ids.size(), 4u);
    EXPECT_EQ(h.reserved_bytes, 4u * plan.device_capacity_bytes);
  }
  EXPECT_EQ(orch.status(plan.shared_dir, plan.cluster_id).up_osds, 8u);
  orch.remove(plan.shared_dir, plan.cluster_id);
}

TEST(AuthMatrix, AgentRejectsWrongSecret) {
  TempDir dir;
  auto plan = local_plan(dir, 1);
  Orchestrator orch;
  orch.deploy(plan);
  const auto address = read_state(plan).at("agents").at("node1").at("control_address").get<std::string>();
  for (const char* op : {"status", "stop_osds", "unregister_osds", "destroy_devices"}) {
    EXPECT_EQ(error_of([&] { AgentClient(address, std::string(64, 'c')).call(op, std::chrono::seconds(5)); }),
              Errc::AuthFailure)
        << op;
  }
  const auto client_key = shared_dir::read_secret(plan.shared_dir, plan.cluster_id, Role::client);
  EXPECT_EQ(error_of([&] { AgentClient(address, client_key).call("status", std::chrono::seconds(5)); }),
            Errc::AuthFailure);
  EXPECT_EQ(orch.status(plan.shared_dir, plan.cluster_id).up_osds, 1u);
  orch.remove(plan.shared_dir, plan.cluster_id);
}

TEST(DeploymentReport, JsonRoundTripAndRender) {
  DeploymentReport r;
  r.cluster_id = "c";
  r.operation = "deploy";
  r.phases = {{"bootstrap-monitor", 0.5}, {"launch-agents", 1.25}};
  r.per_host["n1"] = HostReport{true, "", {0, 1}, 1024, 1};
  r.per_host["n2"] = HostReport{false, "AgentFailure: x", {}, 0, 0};
  r.total_seconds = 2.0;
  const nlohmann::json j = r;
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<DeploymentReport>(), r);
  const auto text = render_report(r);
  EXPECT_NE(text.find("launch-agents"), std::string::npos);
  EXPECT_NE(text.find("host n2: AgentFailure: x"), std::string::npos);
}

TEST(TimingTable, MeanAndSampleStd) {
  const auto text = render_timing_table({{1, {1.0, 2.0, 3.0}, {0.5, 0.5, 0.5}}, {8, {2.0, 2.0}, {1.0, 3.0}}});
  EXPECT_NE(text.find("2.000 ± 1.000"), std::string::npos);
  EXPECT_NE(text.find("0.500 ± 0.000"), std::string::npos);
  EXPECT_NE(text.find("2.500 ± 1.000"), std::string::npos);  // totals 1.5, 2.5, 3.5
  EXPECT_NE(text.find("2.000 ± 1.414"), std::string::npos);
  EXPECT_EQ(error_of([] { render_timing_table({{1, {1.0}, {1.0}}}); }), Errc::TooFewSamples);
}
