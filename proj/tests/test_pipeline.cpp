#include <gtest/gtest.h>

#include <cmath>

#include "ramstore/central_store.hpp"
#include "ramstore/error.hpp"
#include "ramstore/pipeline.hpp"
#include "support.hpp"

using namespace ramstore;
using ramstore::testing::bytes_of;
using ramstore::testing::LocalCluster;
using ramstore::testing::TempDir;

namespace {

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

constexpr double kMiB = 1024.0 * 1024.0;

std::uint64_t sum(const std::vector<std::uint64_t>& v) {
  std::uint64_t s = 0;
  for (auto x : v) s += x;
  return s;
}

class PipelineTest : public ::testing::Test {
 protected:
  PipelineTest() : cluster_(4, 128ull << 20) { cluster_.create_pool("scratch"); }

  BackendRef central() const { return BackendRef::central(dir_.str()); }
  BackendRef transient() const { return BackendRef::transient("scratch"); }
  PipelineRunOptions with_cluster() const {
    PipelineRunOptions o;
    o.cluster = cluster_.endpoint();
    return o;
  }
  std::size_t central_files() const {
    return static_cast<std::size_t>(std::distance(std::filesystem::directory_iterator(dir_.path()), {}));
  }

  TempDir dir_;
  LocalCluster cluster_;
};

}  // namespace

TEST(Reductions, HandArithmetic) {
  IoLedger base, trans;
  base.record_write("s", BackendKind::central, 200);
  trans.record_write("s", BackendKind::central, 100);
  EXPECT_DOUBLE_EQ(io_overhead_reduction(base, trans), 50.0);
  EXPECT_DOUBLE_EQ(io_overhead_reduction(base, base), 0.0);
  EXPECT_EQ(error_of([&] { io_overhead_reduction(IoLedger{}, trans); }), Errc::ZeroBaseline);

  EXPECT_NEAR(time_reduction(173.775, 159.324), 8.32, 0.01);
  EXPECT_DOUBLE_EQ(time_reduction(5, 5), 0.0);
  EXPECT_DOUBLE_EQ(time_reduction(100, 25), 75.0);
  EXPECT_EQ(error_of([] { time_reduction(0, 1); }), Errc::ZeroBaseline);
}

TEST(IoLedger, OverheadExcludesInitialInput) {
  IoLedger l;
  l.record_read("a", BackendKind::central, 1000, true);
  l.record_write("a", BackendKind::central, 10);
  l.record_read("b", BackendKind::central, 10);
  l.record_write("b", BackendKind::transient, 7);
  EXPECT_EQ(l.central_overhead(), 20u);
  EXPECT_EQ(l.totals(BackendKind::central), (BackendTotals{1010, 10}));
  EXPECT_EQ(l.totals(BackendKind::transient), (BackendTotals{0, 7}));
  ASSERT_NE(l.find("a", BackendKind::central, true), nullptr);
  EXPECT_EQ(l.find("a", BackendKind::transient), nullptr);
  const nlohmann::json j = l;
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<IoLedger>(), l);
}

TEST(PipelineSpecs, BaselineTopology) {
  const auto spec = make_baseline_spec(100, {10, 20, 30, 40}, BackendRef::central("/c"));
  ASSERT_EQ(spec.stages.size(), 4u);
  EXPECT_FALSE(spec.stages[0].read_from);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(spec.stages[k].write_to.kind, BackendKind::central);
    EXPECT_EQ(spec.stages[k].name, "stage" + std::to_string(k + 1));
    if (k > 0) {
      EXPECT_EQ(spec.stages[k].read_from->kind, BackendKind::central);
    }
  }
  EXPECT_NO_THROW(spec.validate());
  const auto single = make_baseline_spec(100, {10}, BackendRef::central("/c"));
  EXPECT_EQ(single.stages.size(), 1u);
}

TEST(PipelineSpecs, TransientTopology) {
  const auto spec = make_transient_spec(100, {10, 20, 30, 40}, BackendRef::central("/c"), BackendRef::transient("t"));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(spec.stages[k].write_to.kind, BackendKind::transient);
  EXPECT_EQ(spec.stages[3].write_to.kind, BackendKind::central);
  const auto two = make_transient_spec(1, {1, 1}, BackendRef::central("/c"), BackendRef::transient("t"));
  EXPECT_EQ(two.stages[0].write_to.kind, BackendKind::transient);
  EXPECT_EQ(two.stages[1].write_to.kind, BackendKind::central);
  EXPECT_EQ(error_of([] { make_transient_spec(1, {1}, BackendRef::central("/c"), BackendRef::transient("t")); }),
            Errc::SingleStage);
}

TEST(PipelineSpecs, Validation) {
  PipelineSpec empty;
  empty.input_backend = BackendRef::central("/c");
  EXPECT_EQ(error_of([&] { empty.validate(); }), Errc::EmptyPipeline);
  auto broken = make_baseline_spec(1, {1, 1}, BackendRef::central("/c"));
  broken.stages[1].read_from = BackendRef::central("/elsewhere");
  EXPECT_EQ(error_of([&] { broken.validate(); }), Errc::InvalidArgument);
  auto open_end = make_transient_spec(1, {1, 1}, BackendRef::central("/c"), BackendRef::transient("t"));
  open_end.stages[1].write_to = BackendRef::transient("t");
  EXPECT_EQ(error_of([&] { open_end.validate(); }), Errc::InvalidArgument);
}

TEST(PipelineSpecs, JsonRoundTrip) {
  auto spec = make_transient_spec(123, {4, 5, 6}, BackendRef::central("/c", 1000), BackendRef::transient("t"),
                                   {"x", "y", "z"});
  spec.parallelism = 3;
  spec.seed = 99;
  spec.stages[1].synthetic_compute_seconds = 0.25;
  const nlohmann::json j = spec;
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<PipelineSpec>(), spec);
}

TEST(Preset, SizesFollowReferenceTotals) {
  const auto p = paper_scaled_preset();
  ASSERT_EQ(p.stage_output_bytes.size(), 4u);
  EXPECT_NEAR(static_cast<double>(p.input_bytes) / kMiB, 42.346, 1e-6);
  const auto& o = p.stage_output_bytes;
  // Intermediate data is written once and read once: 2 * (o1 + o2 + o3).
  EXPECT_NEAR(2.0 * static_cast<double>(o[0] + o[1] + o[2]) / kMiB, 243.858, 2e-6);
  EXPECT_NEAR(static_cast<double>(o[3]) / kMiB, 300.900 - 243.858, 1e-6);
  EXPECT_GT(o[1], o[2]);
  EXPECT_GT(o[2], o[0]);
  EXPECT_DOUBLE_EQ(p.reference_baseline_minutes, 173.775);
  EXPECT_DOUBLE_EQ(p.reference_transient_minutes, 159.324);
}

TEST_F(PipelineTest, BaselineLedger) {
  const std::vector<std::uint64_t> outs{3000, 5000, 7000, 11000};
  const auto report = run_pipeline(make_baseline_spec(2000, outs, central()));
  const auto& l = report.ledger;
  EXPECT_EQ(l.totals(BackendKind::central).bytes_written, sum(outs));
  EXPECT_EQ(l.totals(BackendKind::central).bytes_read, 2000u + 3000 + 5000 + 7000);
  EXPECT_EQ(l.totals(BackendKind::transient), (BackendTotals{0, 0}));
  EXPECT_EQ(l.central_overhead(), sum(outs) + 3000 + 5000 + 7000);
  EXPECT_FALSE(report.deploy_seconds);
  EXPECT_EQ(report.stages.size(), 4u);
  EXPECT_EQ(central_files(), 0u);  // input, intermediates and output all dropped
  EXPECT_NE(render_report(report).find("Deploy                            0.000"), std::string::npos);
}

TEST_F(PipelineTest, TransientLedger) {
  const std::vector<std::uint64_t> outs{3000, 5000, 7000, 11000};
  const auto report = run_pipeline(make_transient_spec(2000, outs, central(), transient()), with_cluster());
  const auto& l = report.ledger;
  EXPECT_EQ(l.totals(BackendKind::central), (BackendTotals{2000, 11000}));
  EXPECT_EQ(l.totals(BackendKind::transient), (BackendTotals{3000 + 5000 + 7000, 3000 + 5000 + 7000}));
  EXPECT_EQ(l.central_overhead(), 11000u);
  for (const char* s : {"stage1", "stage2", "stage3"}) {
    const auto* row = l.find(s, BackendKind::central);
    EXPECT_TRUE(row == nullptr || row->bytes_written == 0) << s;
  }
  EXPECT_TRUE(cluster_.store().list_objects("scratch").empty());
}

TEST_F(PipelineTest, SingleStageHasNoIntermediateReads) {
  const auto report = run_pipeline(make_baseline_spec(500, {700}, central()));
  EXPECT_EQ(report.ledger.central_overhead(), 700u);
  EXPECT_EQ(report.ledger.totals(BackendKind::central).bytes_read, 500u);
}

TEST_F(PipelineTest, ZeroByteStages) {
  const auto report = run_pipeline(make_transient_spec(0, {0, 0, 0}, central(), transient()), with_cluster());
  EXPECT_EQ(report.ledger.totals(BackendKind::central), (BackendTotals{0, 0}));
  EXPECT_EQ(report.ledger.totals(BackendKind::transient), (BackendTotals{0, 0}));
  EXPECT_EQ(report.stages.size(), 3u);
}

TEST_F(PipelineTest, DeterministicLedgers) {
  auto spec = make_transient_spec(4321, {1234, 99999, 7}, central(), transient());
  spec.parallelism = 3;
  const auto a = run_pipeline(spec, with_cluster());
  const auto b = run_pipeline(spec, with_cluster());
  EXPECT_EQ(a.ledger, b.ledger);
}

TEST_F(PipelineTest, KeepFinalOutput) {
  auto options = with_cluster();
  options.keep_final_output = true;
  run_pipeline(make_baseline_spec(10, {20, 30}, central()), options);
  EXPECT_GE(central_files(), 1u);
}

TEST_F(PipelineTest, TransientNeedsCluster) {
  EXPECT_EQ(error_of([&] { run_pipeline(make_transient_spec(1, {1, 1}, central(), transient())); }),
            Errc::BackendUnavailable);
}

TEST(Pipeline, MissingCentralDir) {
  EXPECT_EQ(error_of([] { run_pipeline(make_baseline_spec(1, {1}, BackendRef::central("/nonexistent/dir"))); }),
            Errc::BackendUnavailable);
}

TEST_F(PipelineTest, PresetReductions) {
  const auto p = paper_scaled_preset();
  const auto base = run_pipeline(make_baseline_spec(p.input_bytes, p.stage_output_bytes, central(), p.stage_names));
  const auto trans = run_pipeline(
      make_transient_spec(p.input_bytes, p.stage_output_bytes, central(), transient(), p.stage_names), with_cluster());
  EXPECT_NEAR(static_cast<double>(base.ledger.central_overhead()) / kMiB, 300.900, 1e-5);
  EXPECT_NEAR(static_cast<double>(trans.ledger.central_overhead()) / kMiB, 57.042, 1e-5);
  EXPECT_NEAR(io_overhead_reduction(base.ledger, trans.ledger), 81.04, 0.01);
  // Independent: (1 - 57.042 / 300.900) * 100 from the reference numbers alone.
  EXPECT_NEAR(io_overhead_reduction(base.ledger, trans.ledger), (1 - 57.042 / 300.900) * 100, 1e-4);
  const auto text = render_comparison(base, trans, std::pair{p.reference_baseline_minutes, p.reference_transient_minutes});
  EXPECT_NE(text.find("I/O overhead reduction: 81.04%"), std::string::npos) << text;
  EXPECT_NE(text.find("8.32%"), std::string::npos) << text;
}

TEST(CentralStore, ThrottleSlowsTransfers) {
  TempDir dir;
  CentralStore store(dir.path(), 20ull << 20);
  const std::vector<std::byte> data(4 << 20);
  const auto t0 = std::chrono::steady_clock::now();
  store.write("x", data);
  EXPECT_EQ(store.read("x"), data);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(s, 0.3);  // 8 MiB at 20 MiB/s is 0.4 s
  store.remove("x");
  EXPECT_EQ(error_of([&] { store.read("x"); }), Errc::NoSuchObject);
  EXPECT_EQ(error_of([] { CentralStore("/nonexistent/dir"); }), Errc::BackendUnavailable);
}
