#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "wrgd/harness.hpp"

using namespace wrgd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

harness::ExperimentSpec small_spec(const std::string& out) {
  harness::ExperimentSpec spec;
  spec.n = 24;
  spec.m_over_n = {8.0};
  spec.trials = 3;
  spec.base_seed = 12345;
  spec.solvers = {"twrgd"};
  spec.iter_cap = 200;
  spec.out_dir = out;
  spec.deterministic_timing = true;
  for (auto& [k, c] : spec.configs) c.power_iters = 60;
  return spec;
}

std::string temp_dir(const char* name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("spec validation rejects malformed experiments") {
  harness::ExperimentSpec spec = small_spec("");
  spec.m_over_n.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec("");
  spec.trials = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec("");
  spec.solvers = {"does-not-exist"};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  CHECK_THROWS_AS(harness::run_sweep(spec), std::invalid_argument);
}

TEST_CASE("repeated runs emit byte-identical files under deterministic timing") {
  const auto dir1 = temp_dir("wrgd_h1");
  const auto dir2 = temp_dir("wrgd_h2");
  auto spec1 = small_spec(dir1);
  auto spec2 = small_spec(dir2);
  harness::run_convergence(spec1);
  harness::run_convergence(spec2);
  CHECK(slurp(dir1 + "/results.csv") == slurp(dir2 + "/results.csv"));
  CHECK(slurp(dir1 + "/summary.json") == slurp(dir2 + "/summary.json"));
  CHECK(slurp(dir1 + "/convergence_twrgd.csv") == slurp(dir2 + "/convergence_twrgd.csv"));
  CHECK(slurp(dir1 + "/trace_twrgd_r8_t0.csv") == slurp(dir2 + "/trace_twrgd_r8_t0.csv"));
}

TEST_CASE("csv schemas match the documented headers") {
  const auto dir = temp_dir("wrgd_h3");
  harness::run_convergence(small_spec(dir));
  const std::string results = slurp(dir + "/results.csv");
  CHECK(results.rfind("solver,m_over_n,trial,seed,success,iters,final_mse,seconds,nu_hat\n", 0) == 0);
  const std::string trace = slurp(dir + "/trace_twrgd_r8_t1.csv");
  CHECK(trace.rfind("iter,rel_mse,step_size,kept_fraction,elapsed_s\n", 0) == 0);
}

TEST_CASE("wall-clock columns vary but numeric content is reproducible by seed") {
  auto spec = small_spec("");
  spec.deterministic_timing = false;
  const auto g1 = harness::run_grid(spec);
  const auto g2 = harness::run_grid(spec);
  REQUIRE(g1.table.rows.size() == g2.table.rows.size());
  for (std::size_t i = 0; i < g1.table.rows.size(); ++i) {
    const auto& a = g1.table.rows[i];
    const auto& b = g2.table.rows[i];
    CHECK(a.success == b.success);
    CHECK(a.iters == b.iters);
    CHECK(a.final_mse == b.final_mse);
    CHECK(a.seed == b.seed);
    CHECK(((std::isnan(a.nu_hat) && std::isnan(b.nu_hat)) || a.nu_hat == b.nu_hat));
  }
}

TEST_CASE("aggregates are recomputable from rows") {
  auto spec = small_spec("");
  spec.trials = 5;
  const auto grid = harness::run_grid(spec);
  REQUIRE(grid.aggregates.size() == 1);
  const auto& agg = grid.aggregates.front();
  int succ = 0;
  std::vector<double> iters;
  for (const auto& row : grid.table.rows) {
    succ += row.success;
    iters.push_back(row.iters);
  }
  CHECK(agg.success_rate == doctest::Approx(static_cast<double>(succ) / 5.0));
  CHECK(agg.median_iters == doctest::Approx(harness::median_of(iters)));
  for (const auto& row : grid.table.rows)
    CHECK(row.success == (row.final_mse <= spec.success_threshold && row.iters <= spec.iter_cap));
}

TEST_CASE("trial rows do not depend on how many trials run") {
  auto spec3 = small_spec("");
  spec3.trials = 3;
  auto spec5 = small_spec("");
  spec5.trials = 5;
  const auto g3 = harness::run_grid(spec3);
  const auto g5 = harness::run_grid(spec5);
  for (int t = 0; t < 3; ++t) {
    const auto& a = g3.table.rows[t];
    const auto& b = g5.table.rows[t];
    CHECK(a.trial == b.trial);
    CHECK(a.seed == b.seed);
    CHECK(a.iters == b.iters);
    CHECK(a.final_mse == b.final_mse);
  }
}

TEST_CASE("worker threads do not change results") {
  auto spec1 = small_spec("");
  spec1.trials = 4;
  auto spec2 = small_spec("");
  spec2.trials = 4;
  spec2.threads = 3;
  const auto g1 = harness::run_grid(spec1);
  const auto g2 = harness::run_grid(spec2);
  REQUIRE(g1.table.rows.size() == g2.table.rows.size());
  for (std::size_t i = 0; i < g1.table.rows.size(); ++i) {
    CHECK(g1.table.rows[i].iters == g2.table.rows[i].iters);
    CHECK(g1.table.rows[i].final_mse == g2.table.rows[i].final_mse);
  }
}

TEST_CASE("degenerate success threshold marks everything successful") {
  auto spec = small_spec("");
  spec.success_threshold = 1e9;
  spec.iter_cap = 0;
  const auto grid = harness::run_grid(spec);
  for (const auto& row : grid.table.rows) {
    CHECK(row.success);
    CHECK(row.iters == 0);
  }
  CHECK(grid.aggregates.front().success_rate == 1.0);
}

TEST_CASE("zero iteration budget typically leaves the threshold unmet") {
  auto spec = small_spec("");
  spec.trials = 1;
  spec.iter_cap = 0;
  const auto grid = harness::run_grid(spec);
  REQUIRE(grid.table.rows.size() == 1);
  CHECK(grid.table.rows.front().iters == 0);
  CHECK_FALSE(grid.table.rows.front().success);
}

TEST_CASE("sweep covers the full grid with one row per trial") {
  auto spec = small_spec("");
  spec.m_over_n = {6.0, 10.0};
  spec.solvers = {"twrgd", "trgd"};
  spec.trials = 2;
  const auto grid = harness::run_sweep(spec);
  CHECK(grid.table.rows.size() == 2 * 2 * 2);
  CHECK(grid.aggregates.size() == 4);
}

TEST_CASE("config files populate the spec and flags stay overridable") {
  const auto path = (fs::temp_directory_path() / "wrgd_cfg.txt").string();
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "n = 48\n"
        << "m_over_n = 4,6\n"
        << "trials = 7\n"
        << "seed = 99\n"
        << "solvers = twrgd,twf\n"
        << "tau1 = 5.5\n"
        << "step = fixed:0.3\n"
        << "threshold = 1e-4\n"
        << "max_iters = 123\n"
        << "deterministic_timing = true\n";
  }
  harness::ExperimentSpec spec;
  harness::apply_config(spec, harness::parse_config_file(path));
  CHECK(spec.n == 48);
  CHECK(spec.m_over_n == std::vector<double>{4.0, 6.0});
  CHECK(spec.trials == 7);
  CHECK(spec.base_seed == 99);
  CHECK(spec.solvers == std::vector<std::string>{"twrgd", "twf"});
  CHECK(spec.configs.at("twrgd").tau1 == 5.5);
  CHECK(spec.configs.at("twrgd").step.kind == StepPolicy::Kind::fixed);
  CHECK(spec.configs.at("twrgd").step.alpha == 0.3);
  // the wf baseline keeps its own fixed-step default
  CHECK(spec.configs.at("twf").step.kind == StepPolicy::Kind::fixed);
  CHECK(spec.success_threshold == 1e-4);
  CHECK(spec.iter_cap == 123);
  CHECK(spec.deterministic_timing);
  // a later (CLI-style) assignment wins
  spec.trials = 11;
  CHECK(spec.trials == 11);

  CHECK_THROWS_AS(harness::parse_step_policy("bogus"), std::invalid_argument);
  CHECK(harness::parse_ratio_list("2,4.5,6").size() == 3);
}

TEST_CASE("validation audits pass on a healthy build") {
  const auto results = harness::run_validate(false);
  for (const auto& r : results) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("compatibility audit is sensitive to a corrupted projector coefficient") {
  // A wrong radial coefficient (1.4 instead of 3/2) must blow the identity
  // <T(W), B>_weighted = tr(W B) far past its tolerance.
  const CVector z = test::random_cvector(8, 4242);
  const CVector u = z / z.norm();
  const CMatrix W = test::random_hermitian(8, 4243);
  const double zn = z.norm();
  const double theta = (u.dot(W * u)).real();
  // corrupted analogue of the weighted gradient operator's companion
  const TangentVector corrupted(z, (W * u - (1.4 / 2.0) * theta * u) / zn);
  const TangentVector B(z, test::random_cvector(8, 4244));
  const double lhs = metric_inner(MetricKind::weighted, corrupted, B);
  const double rhs = oracle::dense_metric_inner(MetricKind::canonical, W, oracle::dense(B));
  CHECK(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)) > 1e-10);
}
