// Randomized invariants. Each property draws its cases from a fixed seed so a
// failure replays exactly; the failing seed and case index are in the message.
#include <gtest/gtest.h>

#include <httplib.h>

#include <algorithm>
#include <map>
#include <set>
#include <thread>

#include "ramstore/bench.hpp"
#include "ramstore/error.hpp"
#include "ramstore/gateway.hpp"
#include "ramstore/manifest.hpp"
#include "ramstore/monitor.hpp"
#include "ramstore/orchestrator.hpp"
#include "ramstore/pipeline.hpp"
#include "ramstore/placement.hpp"
#include "ramstore/ram_device.hpp"
#include "support.hpp"

using namespace ramstore;
using ramstore::testing::LocalCluster;
using ramstore::testing::TempDir;

namespace {

// SplitMix64: tiny, seedable, and good enough to drive case generation.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
  bool coin() { return next() & 1; }
  double real(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::vector<std::byte> bytes(std::size_t n) {
    std::vector<std::byte> out(n);
    for (auto& b : out) b = static_cast<std::byte>(next());
    return out;
  }
  std::string label(std::size_t max_len = 12) {
    static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789-_";
    std::string s(between(1, max_len), 'a');
    for (auto& c : s) c = kAlphabet[below(sizeof(kAlphabet) - 1)];
    return s;
  }

 private:
  std::uint64_t state_;
};

constexpr std::uint64_t kSeed = 0x5eed;

}  // namespace

TEST(Property, DeviceRoundTrip) {
  Gen g(kSeed);
  RamDevice dev(DeviceId{1}, 4 << 20, 4096);
  for (int i = 0; i < 300; ++i) {
    const std::uint64_t len = g.coin() ? g.below(5000) : g.below(300000);
    const std::uint64_t off = g.below((4 << 20) - len + 1);
    const auto data = g.bytes(len);
    dev.write_at(off, data);
    ASSERT_EQ(dev.read_at(off, len), data) << "case " << i;
  }
}

TEST(Property, RegistryConservation) {
  Gen g(kSeed + 1);
  DeviceRegistry registry;
  std::map<std::uint64_t, std::uint64_t> model;  // id -> capacity
  for (int i = 0; i < 500; ++i) {
    if (model.empty() || g.below(3) != 0) {
      const std::uint64_t cap = g.between(1, 64) * 4096;
      auto dev = registry.create_device(cap, 4096);
      model[dev->id().value] = cap;
    } else {
      auto it = std::next(model.begin(), static_cast<long>(g.below(model.size())));
      registry.destroy_device(DeviceId{it->first});
      model.erase(it);
    }
    std::uint64_t expected = 0;
    for (const auto& [id, cap] : model) expected += cap;
    ASSERT_EQ(registry.total_reserved_bytes(), expected) << "step " << i;
    ASSERT_EQ(registry.active_count(), model.size());
  }
}

TEST(Property, NoCompression) {
  Gen g(kSeed + 2);
  for (int i = 0; i < 40; ++i) {
    const std::uint64_t n = g.between(1, 2 << 20);
    RamDevice zeros(DeviceId{1}, 2 << 20, 4096), noise(DeviceId{2}, 2 << 20, 4096);
    zeros.write_at(0, std::vector<std::byte>(n));
    noise.write_at(0, g.bytes(n));
    ASSERT_EQ(zeros.used_bytes(), n);
    ASSERT_EQ(noise.used_bytes(), n);
  }
}

TEST(Property, EpochsMonotoneUnderConcurrency) {
  auto mon = Monitor::bootstrap(ramstore::testing::unique_id("prop"), "/unused");
  const auto keys = mon->issue_keyring();
  OsdInfo seed_osd;
  seed_osd.osd_id = 999999;
  const auto start = mon->register_osd(seed_osd, keys.secret(Role::osd)).epoch;
  constexpr int kThreads = 4, kOps = 60;
  std::vector<std::vector<std::uint64_t>> seen(kThreads);
  std::atomic<int> mutations{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      Gen g(kSeed + 3 + static_cast<std::uint64_t>(t));
      for (int i = 0; i < kOps; ++i) {
        const OsdId id = t * 1000 + i;
        switch (g.below(3)) {
          case 0: {
            OsdInfo o;
            o.osd_id = id;
            seen[t].push_back(mon->register_osd(o, keys.secret(Role::osd)).epoch);
            ++mutations;
            break;
          }
          case 1:
            seen[t].push_back(
                mon->create_pool(PoolSpec{"p" + std::to_string(id), 1}, keys.secret(Role::client)).epoch);
            ++mutations;
            break;
          default:
            seen[t].push_back(mon->get_map().epoch);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& s : seen) {
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  }
  // Every mutation advanced the epoch by exactly one.
  EXPECT_EQ(mon->get_map().epoch, start + static_cast<std::uint64_t>(mutations.load()));
}

TEST(Property, MapJsonRoundTrip) {
  Gen g(kSeed + 4);
  for (int i = 0; i < 200; ++i) {
    ClusterMap map;
    map.cluster_id = g.label();
    map.epoch = g.next() >> 12;
    map.monitor_address = "/tmp/" + g.label();
    for (std::uint64_t k = 0, n = g.below(6); k < n; ++k) {
      OsdInfo o;
      o.osd_id = static_cast<OsdId>(g.below(1000));
      o.host = g.label();
      o.address = "/" + g.label();
      o.capacity_bytes = g.next() >> 8;
      o.state = g.coin() ? OsdState::up : OsdState::down;
      o.last_heartbeat = Timestamp(std::chrono::milliseconds(g.below(1ull << 41)));
      map.osds.push_back(o);
    }
    for (std::uint64_t k = 0, n = g.below(4); k < n; ++k) {
      map.pools.push_back(PoolSpec{g.label(), static_cast<std::uint32_t>(g.between(1, 5)), g.between(1, 1ull << 30)});
    }
    const nlohmann::json j = map;
    ASSERT_EQ(nlohmann::json::parse(j.dump()).get<ClusterMap>(), map) << "case " << i;
  }
}

TEST(Property, PlacementDeterministicAndReference) {
  Gen g(kSeed + 5);
  for (int i = 0; i < 300; ++i) {
    std::vector<OsdId> up;
    for (std::uint64_t k = 0, n = g.between(1, 12); k < n; ++k) up.push_back(static_cast<OsdId>(g.below(64)));
    std::sort(up.begin(), up.end());
    up.erase(std::unique(up.begin(), up.end()), up.end());
    const std::string pool = g.label(), chunk = g.label(24);
    const std::size_t r = g.between(1, up.size());

    auto shuffled = up;
    for (std::size_t k = shuffled.size(); k > 1; --k) std::swap(shuffled[k - 1], shuffled[g.below(k)]);
    const auto a = rank_osds(up, pool, chunk, r);
    ASSERT_EQ(a, rank_osds(shuffled, pool, chunk, r)) << "case " << i;

    // Reference ranking from the independent hash.
    std::vector<std::pair<std::uint64_t, OsdId>> scored;
    for (OsdId id : up) scored.emplace_back(ramstore::testing::reference_score(id, pool, chunk), id);
    std::sort(scored.begin(), scored.end(),
              [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    for (std::size_t k = 0; k < r; ++k) ASSERT_EQ(a[k], scored[k].second) << "case " << i;
    ASSERT_EQ(std::set<OsdId>(a.begin(), a.end()).size(), r);
  }
}

TEST(Property, ChunkCountLawAndIntegrity) {
  Gen g(kSeed + 6);
  LocalCluster cluster(3);
  const std::uint64_t chunk = 64 << 10;
  cluster.create_pool("p", 2, chunk);
  auto store = cluster.store();
  for (int i = 0; i < 60; ++i) {
    std::uint64_t size = 0;
    switch (g.below(4)) {
      case 0: size = g.below(3) * chunk; break;  // exact multiples, including 0
      case 1: size = g.below(3) * chunk + 1; break;
      case 2: size = g.below(8); break;
      default: size = g.below(6 * chunk);
    }
    const auto data = g.bytes(size);
    const std::string name = "o" + std::to_string(i);
    const auto m = store.put_object("p", name, data);
    ASSERT_EQ(m.chunk_names.size(), (size + chunk - 1) / chunk) << "size " << size;

    std::size_t stored = 0;
    for (std::size_t k = 0; k < cluster.osd_count(); ++k) {
      for (const auto& [kind, key, extent] : cluster.osd(k).chunks()) {
        if (kind == ChunkKind::data && key.name.rfind(name + ".", 0) == 0) ++stored;
      }
    }
    ASSERT_EQ(stored, 2 * m.chunk_names.size());

    if (size == 0) continue;
    // Damage one replica of one chunk; reads either fail loudly or return the truth.
    const std::size_t victim = g.below(cluster.osd_count());
    for (const auto& [kind, key, extent] : cluster.osd(victim).chunks()) {
      if (kind != ChunkKind::data || key.name.rfind(name + ".", 0) != 0) continue;
      const std::uint64_t pos = extent.offset + g.below(extent.length);
      auto b = cluster.osd(victim).device()->read_at(pos, 1);
      b[0] ^= static_cast<std::byte>(g.between(1, 255));
      cluster.osd(victim).device()->write_at(pos, b);
      break;
    }
    try {
      ASSERT_EQ(store.get_object("p", name).data, data);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), Errc::ChecksumMismatch);
    }
  }
}

TEST(Property, HttpEqualsNative) {
  Gen g(kSeed + 7);
  LocalCluster cluster(2);
  cluster.create_pool("p", 1, 256 << 10);
  GatewaySpec spec;
  spec.listen_address = "127.0.0.1:0";
  spec.cluster = cluster.endpoint();
  GatewayServer gateway(spec);
  gateway.start();
  httplib::Client http("127.0.0.1", gateway.port());
  const httplib::Headers auth{{"Authorization", "Bearer " + cluster.client_secret()}};
  auto store = cluster.store();
  for (int i = 0; i < 30; ++i) {
    const auto data = g.bytes(g.below(1 << 20));
    const std::string body(reinterpret_cast<const char*>(data.data()), data.size());
    const std::string name = "h" + std::to_string(i);
    if (g.coin()) {
      auto r = http.Put("/p/" + name, auth, body, "application/octet-stream");
      ASSERT_TRUE(r);
      ASSERT_EQ(r->status, 201);
      ASSERT_EQ(store.get_object("p", name).data, data);
    } else {
      store.put_object("p", name, data);
      auto r = http.Get("/p/" + name, auth);
      ASSERT_TRUE(r);
      ASSERT_EQ(r->body, body);
    }
  }
  gateway.stop();
}

TEST(Property, StatusMappingTotal) {
  const std::set<int> documented{400, 403, 404, 409, 413, 500, 507};
  for (int i = 0; i <= static_cast<int>(Errc::Internal); ++i) {
    const auto code = static_cast<Errc>(i);
    EXPECT_TRUE(documented.contains(gateway_status(code))) << errc_name(code);
    EXPECT_EQ(errc_from_name(errc_name(code)), code);
  }
}

TEST(Property, LedgerConservation) {
  Gen g(kSeed + 8);
  TempDir dir;
  LocalCluster cluster(2);
  cluster.create_pool("t");
  PipelineRunOptions options;
  options.cluster = cluster.endpoint();
  for (int i = 0; i < 12; ++i) {
    std::vector<std::uint64_t> outs(g.between(2, 5));
    for (auto& o : outs) o = g.below(300000);
    const auto central = BackendRef::central(dir.str());
    auto spec = g.coin() ? make_baseline_spec(g.below(100000), outs, central)
                         : make_transient_spec(g.below(100000), outs, central, BackendRef::transient("t"));
    spec.parallelism = static_cast<unsigned>(g.between(1, 4));
    spec.seed = g.next();
    const auto report = run_pipeline(spec, options);
    for (std::size_t k = 1; k < spec.stages.size(); ++k) {
      std::uint64_t read = 0, written = 0;
      for (const auto& row : report.ledger.rows()) {
        if (row.stage == spec.stages[k].name) read += row.bytes_read;
        if (row.stage == spec.stages[k - 1].name) written += row.bytes_written;
      }
      ASSERT_EQ(read, written) << "case " << i << " stage " << k;
    }
    const bool transient = spec.stages.front().write_to.kind == BackendKind::transient;
    if (transient) {
      ASSERT_EQ(report.ledger.central_overhead(), outs.back());
    } else {
      ASSERT_EQ(report.ledger.totals(BackendKind::transient), (BackendTotals{0, 0}));
    }
  }
}

TEST(Property, AggregateSymmetries) {
  Gen g(kSeed + 9);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> xs(g.between(2, 20));
    for (auto& x : xs) x = g.real(0, 1e10);
    const auto [mean, sd] = aggregate(xs);
    auto perm = xs;
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[g.below(k)]);
    const auto [pm, ps] = aggregate(perm);
    ASSERT_NEAR(pm, mean, 1e-9 * std::abs(mean));
    ASSERT_NEAR(ps, sd, 1e-6 * (sd + 1));
    const double c = g.real(0.001, 1000);
    for (auto& x : perm) x *= c;
    const auto [cm, cs] = aggregate(perm);
    ASSERT_NEAR(cm, c * mean, 1e-9 * std::abs(c * mean));
    ASSERT_NEAR(cs, c * sd, 1e-6 * (c * sd + 1));
  }
}

TEST(Property, BytesMoved) {
  Gen g(kSeed + 10);
  for (int i = 0; i < 5; ++i) {
    SweepSpec spec;
    spec.block_sizes = {g.between(1, 8) * 4096, g.between(1, 4) * 65536};
    spec.total_bytes_per_run = g.between(256 << 10, 1 << 20);
    spec.repeats = static_cast<unsigned>(g.between(2, 4));
    spec.direction = g.coin() ? Direction::read : Direction::write;
    for (const auto& row : run_sweep(spec)) {
      ASSERT_EQ(row.bytes_moved, spec.total_bytes_per_run * spec.repeats);
      ASSERT_EQ(row.samples.size(), spec.repeats);
    }
  }
}

TEST(Property, PlanJsonRoundTrip) {
  Gen g(kSeed + 11);
  for (int i = 0; i < 200; ++i) {
    DeploymentPlan plan;
    plan.cluster_id = g.label();
    for (std::uint64_t k = 0, n = g.between(1, 8); k < n; ++k) plan.hosts.push_back(g.label() + std::to_string(k));
    plan.osds_per_host = static_cast<std::uint32_t>(g.between(1, 4));
    plan.device_capacity_bytes = g.between(1, 1000) * 4096;
    plan.replication_factor = static_cast<std::uint32_t>(g.between(1, 3));
    if (g.coin()) {
      plan.pool = PoolSpec{g.label(), static_cast<std::uint32_t>(g.between(1, 3)), g.between(1, 1 << 24)};
    } else if (g.coin()) {
      plan.gateway = GatewayRequest{"127.0.0.1:" + std::to_string(g.below(65536))};
    }
    plan.shared_dir = "/" + g.label();
    plan.phase_timeout_seconds = static_cast<double>(g.between(1, 120));
    plan.slots_per_host = static_cast<std::uint32_t>(g.between(1, 8));
    plan.liveness_window_ms = static_cast<std::uint32_t>(g.between(10, 10000));
    const nlohmann::json j = plan;
    ASSERT_EQ(nlohmann::json::parse(j.dump()).get<DeploymentPlan>(), plan) << "case " << i;
  }
}
