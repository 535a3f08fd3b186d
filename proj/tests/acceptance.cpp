// Acceptance suite: end-to-end statistical and equivalence checks at pinned
// seeds.  Each case prints one PASS/FAIL line with the measured numbers so a
// run reads as a report.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>

#include "test_support.hpp"
#include "wrgd/harness.hpp"

using namespace wrgd;

namespace {

constexpr std::uint64_t kSeed = 20250808;

void report(int idx, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", idx, name, detail.c_str());
  std::fflush(stdout);
}

harness::ExperimentSpec base_spec() {
  harness::ExperimentSpec spec;
  spec.n = 128;
  spec.trials = 50;
  spec.base_seed = kSeed;
  spec.iter_cap = 500;
  spec.success_threshold = 1e-3;
  spec.write_traces = false;
  return spec;
}

double binom_band(double p, int n) { return 1.96 * std::sqrt(p * (1.0 - p) / n); }

}  // namespace

TEST_CASE("criterion 1: exact recovery at six-fold oversampling") {
  const auto t0 = std::chrono::steady_clock::now();
  auto spec = base_spec();
  spec.m_over_n = {6.0};
  spec.solvers = {"twrgd"};
  const auto grid = harness::run_grid(spec);
  const double rate = grid.aggregates.front().success_rate;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = rate >= 0.95 && secs < 120.0;
  report(1, "exact recovery at m=6n", pass,
         "success 50x trials rate " + harness::format_double(rate) + " (need >= 0.95), wall " +
             harness::format_double(secs) + " s (budget 120)");
  CHECK(pass);
}

TEST_CASE("criterion 2: phase transition of the success probability") {
  auto spec = base_spec();
  spec.m_over_n = {2.0, 5.0, 7.0, 10.0};
  spec.solvers = {"twrgd"};
  const auto grid = harness::run_success_rate(spec);
  auto rate_at = [&](double r) {
    for (const auto& a : grid.aggregates)
      if (a.m_over_n == r) return a.success_rate;
    return -1.0;
  };
  const double r2 = rate_at(2.0), r5 = rate_at(5.0), r7 = rate_at(7.0), r10 = rate_at(10.0);
  const bool low_fail = r2 <= 0.1 + binom_band(0.1, spec.trials);
  const bool mid = r5 >= 0.9 - binom_band(0.9, spec.trials);
  const bool high = r7 >= 1.0 - binom_band(0.95, spec.trials) &&
                    r10 >= 1.0 - binom_band(0.95, spec.trials);
  const bool pass = low_fail && mid && high;
  report(2, "success rates across m/n", pass,
         "rate(2)=" + harness::format_double(r2) + " rate(5)=" + harness::format_double(r5) +
             " rate(7)=" + harness::format_double(r7) + " rate(10)=" + harness::format_double(r10));
  CHECK(pass);
}

TEST_CASE("criterion 3: efficiency ordering across the oversampling grid") {
  auto spec = base_spec();
  spec.m_over_n = {10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
  spec.solvers = {"twrgd", "trgd", "twf"};
  const auto grid = harness::run_sweep(spec);
  auto med = [&](const std::string& s, double r) {
    for (const auto& a : grid.aggregates)
      if (a.solver == s && a.m_over_n == r) return a.median_iters;
    return -1.0;
  };
  bool pass = true;
  std::string detail;
  for (double r : spec.m_over_n) {
    const double w = med("twrgd", r), c = med("trgd", r), f = med("twf", r);
    const bool ok = w < c && c < f;
    pass = pass && ok;
    detail += "m/n=" + harness::format_double(r) + ": " + harness::format_double(w) + "/" +
              harness::format_double(c) + "/" + harness::format_double(f) + (ok ? " " : " <-VIOLATED ");
  }
  report(3, "median iterations twrgd < trgd < twf", pass, detail);
  CHECK(pass);
}

TEST_CASE("criterion 4: near-isometry of the weighted metric and spread separation") {
  const auto audit = oracle::condition_number_audit(16, 400 * 16, 200, kSeed);
  const bool w_in = audit.weighted.min_q >= 0.75 && audit.weighted.max_q <= 1.25;
  const bool c_in = audit.canonical.min_q >= 0.9 && audit.canonical.max_q <= 2.2;
  const bool f_in = audit.wf.min_q >= 0.9 && audit.wf.max_q <= 4.4;
  const bool spread = audit.weighted.spread() < audit.canonical.spread() &&
                      audit.weighted.spread() < audit.wf.spread();
  const bool pass = w_in && c_in && f_in && spread;
  report(4, "restricted Rayleigh quotients", pass,
         "weighted [" + harness::format_double(audit.weighted.min_q) + "," +
             harness::format_double(audit.weighted.max_q) + "] canonical [" +
             harness::format_double(audit.canonical.min_q) + "," +
             harness::format_double(audit.canonical.max_q) + "] wf [" +
             harness::format_double(audit.wf.min_q) + "," +
             harness::format_double(audit.wf.max_q) + "] spreads " +
             harness::format_double(audit.weighted.spread()) + " / " +
             harness::format_double(audit.canonical.spread()) + " / " +
             harness::format_double(audit.wf.spread()));
  CHECK(pass);
}

TEST_CASE("criterion 5: contraction improves with more measurements") {
  auto deep = base_spec();
  deep.trials = 30;
  deep.iter_cap = 400;
  deep.success_threshold = 1e-10;
  deep.solvers = {"twrgd"};
  auto run_ratio = [&](double r) {
    auto s = deep;
    s.m_over_n = {r};
    return harness::run_grid(s);
  };
  const auto g6 = run_ratio(6.0);
  const auto g20 = run_ratio(20.0);
  int better = 0, valid = 0;
  for (int t = 0; t < deep.trials; ++t) {
    const double nu6 = g6.table.rows[t].nu_hat;
    const double nu20 = g20.table.rows[t].nu_hat;
    if (std::isnan(nu6) || std::isnan(nu20)) continue;
    ++valid;
    better += nu20 < nu6;
  }
  const bool pass = valid >= 28 && better >= static_cast<int>(0.9 * valid);
  report(5, "contraction factor shrinks from m=6n to m=20n", pass,
         std::to_string(better) + "/" + std::to_string(valid) + " paired trials improved (need 90%)");
  CHECK(pass);
}

TEST_CASE("criterion 6: factored fast paths equal dense oracles") {
  double worst_retract = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 4 + (rep % 4) * 4;  // 4..16
    const CVector z = test::random_cvector(n, derive_seed(kSeed, rep, 1));
    const TangentVector step(z, test::random_cvector(n, derive_seed(kSeed, rep, 2)));
    RandomStream rng(derive_seed(kSeed, rep, 3));
    const double scale = 0.5 * rng.uniform() / std::max(1.0, step.companion().norm());
    const Rank1Point fast = retract_rank1(Rank1Point(z), step, scale);
    const CMatrix Wt = oracle::dense(Rank1Point(z)) + scale * oracle::dense(step);
    const auto [lam, v] = oracle::dense_rank1_trunc_svd(Wt);
    worst_retract =
        std::max(worst_retract, (oracle::dense(fast) - lam * (v * v.adjoint())).norm() / Wt.norm());
  }

  double worst_lift = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 4 + (rep % 4) * 4;
    const auto A = MeasurementEnsemble::sample(n, 3 * n, derive_seed(kSeed, rep, 4));
    const CVector z = test::random_cvector(n, derive_seed(kSeed, rep, 5));
    const CVector w = test::random_cvector(n, derive_seed(kSeed, rep, 6));
    const auto F = FactoredHermitian::symmetric_pair(z, w);
    const RVector fast = apply_lift(A, F);
    const RVector dense = oracle::dense_lift(A, oracle::dense(F));
    worst_lift = std::max(worst_lift, (fast - dense).norm() / std::max(1.0, dense.norm()));

    RandomStream rng(derive_seed(kSeed, rep, 7));
    RVector b(A.m());
    for (Eigen::Index k = 0; k < A.m(); ++k) b[k] = rng.gaussian();
    const CMatrix M = oracle::dense_lift_adjoint(A, b);
    const CVector probe = test::random_cvector(n, derive_seed(kSeed, rep, 8));
    const CVector fast_v = apply_lift_adjoint(A, b, nullptr, probe);
    worst_lift = std::max(worst_lift, (fast_v - M * probe).norm() / std::max(1.0, (M * probe).norm()));
  }

  double worst_solver = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 8, m = 32;
    const auto A = MeasurementEnsemble::sample(n, m, derive_seed(kSeed, rep, 9));
    const CVector x = test::random_cvector(n, derive_seed(kSeed, rep, 10));
    const auto y = forward_intensities(A, x);
    const CVector z0 = spectral_init(A, y, 60, derive_seed(kSeed, rep, 11));
    SolverConfig cfg;
    cfg.mse_tol = 1e-300;
    CVector z_fast = z0, z_dense = z0;
    for (int it = 0; it < 20; ++it) {
      const auto parts = riemannian_gradient(A, y, z_fast, cfg);
      const TangentVector t = gradient_tangent(MetricKind::weighted, z_fast, parts);
      if (t.is_zero()) break;
      const double alpha =
          step_size_exact(A, &parts.mask, t, MetricKind::weighted, &parts.projections);
      z_fast = retract_rank1(Rank1Point(z_fast), t, alpha).z;
      z_dense = oracle::dense_weighted_step(A, y, z_dense, cfg);
    }
    const CMatrix Zf = z_fast * z_fast.adjoint();
    const CMatrix Zd = z_dense * z_dense.adjoint();
    worst_solver = std::max(worst_solver, (Zf - Zd).norm() / Zd.norm());
  }

  const bool pass = worst_retract <= 1e-8 && worst_lift <= 1e-8 && worst_solver <= 1e-8;
  report(6, "oracle equivalence of fast paths", pass,
         "worst rel dev: retraction " + harness::format_double(worst_retract) + ", lift/adjoint " +
             harness::format_double(worst_lift) + ", 20-step solver " +
             harness::format_double(worst_solver) + " (bound 1e-8)");
  CHECK(pass);
}

TEST_CASE("criterion 7: gradient and metric identities") {
  double worst_fd = 0.0, worst_compat = 0.0, worst_norm = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index n = 8, m = 64;
    const auto A = MeasurementEnsemble::sample(n, m, derive_seed(kSeed, rep, 20));
    const CVector x = test::random_cvector(n, derive_seed(kSeed, rep, 21));
    const auto y = forward_intensities(A, x);
    const CVector z = x + 0.25 * test::random_cvector(n, derive_seed(kSeed, rep, 22));
    SolverConfig cfg;
    cfg.truncated = false;
    const auto parts = riemannian_gradient(A, y, z, cfg);
    const TangentVector descent = gradient_tangent(MetricKind::weighted, z, parts);
    const CMatrix Z = z * z.adjoint();
    auto F = [&](const CMatrix& M) { return oracle::dense_objective(A, y, M); };
    for (int dir = 0; dir < 5; ++dir) {
      const TangentVector B(z, test::random_cvector(n, derive_seed(kSeed, rep, 23 + dir)));
      const double fd = oracle::finite_diff_directional(F, Z, oracle::dense(B), 1e-5);
      const double analytic = -metric_inner(MetricKind::weighted, descent, B);
      worst_fd = std::max(worst_fd, std::abs(fd - analytic) / std::max(1e-12, std::abs(analytic)));
    }

    const CMatrix W = test::random_hermitian(n, derive_seed(kSeed, rep, 30));
    const Rank1Point Zp(z);
    const CVector u = z / z.norm();
    const TangentVector TW = project_weighted(Zp, W * u);
    const TangentVector B2(z, test::random_cvector(n, derive_seed(kSeed, rep, 31)));
    const double lhs = metric_inner(MetricKind::weighted, TW, B2);
    const double rhs = oracle::dense_metric_inner(MetricKind::canonical, W, oracle::dense(B2));
    worst_compat = std::max(worst_compat, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));

    const TangentVector T3(z, test::random_cvector(n, derive_seed(kSeed, rep, 32)));
    const double formula =
        2.0 * z.squaredNorm() * T3.companion().squaredNorm() + 6.0 * T3.zw() * T3.zw();
    const double dense =
        oracle::dense_metric_inner(MetricKind::weighted, oracle::dense(T3), oracle::dense(T3));
    worst_norm = std::max(worst_norm, std::abs(formula - dense) / dense);
  }
  const bool pass = worst_fd <= 1e-5 && worst_compat <= 1e-10 && worst_norm <= 1e-10;
  report(7, "directional derivative, compatibility, norm formula", pass,
         "fd rel " + harness::format_double(worst_fd) + " (1e-5), compat " +
             harness::format_double(worst_compat) + " (1e-10), norm " +
             harness::format_double(worst_norm) + " (1e-10)");
  CHECK(pass);
}

TEST_CASE("criterion 8: Gaussian expectation identities") {
  const CMatrix W = test::random_hermitian(6, derive_seed(kSeed, 1, 40));
  const double target = W.trace().real() * W.trace().real() + W.squaredNorm();
  const auto est = oracle::mc_expectation_lift(W, 400, 64, derive_seed(kSeed, 2, 41));
  const bool energy_ok = std::abs(est.mean - target) <= 4.0 * est.std_err;

  const auto mom = oracle::moments_closed_form(4.5);
  RandomStream rng(derive_seed(kSeed, 3, 42));
  const int samples = 1000000;
  double s2 = 0, s2sq = 0, s1 = 0, s1sq = 0;
  for (int i = 0; i < samples; ++i) {
    const double a2 = std::norm(rng.complex_gaussian());
    const bool kept = std::sqrt(a2) <= 4.5;
    const double v2 = kept ? a2 : 0.0;
    const double v1 = kept ? a2 * a2 - a2 : 0.0;
    s2 += v2;
    s2sq += v2 * v2;
    s1 += v1;
    s1sq += v1 * v1;
  }
  const double m2 = s2 / samples, m1 = s1 / samples;
  const double se2 = std::sqrt((s2sq / samples - m2 * m2) / samples);
  const double se1 = std::sqrt((s1sq / samples - m1 * m1) / samples);
  const bool beta_ok = std::abs(m2 - mom.beta2_hat) <= 4.0 * se2 &&
                       std::abs(m1 - mom.beta1_hat) <= 4.0 * se1;

  const double q2 = oracle::moments_quadrature(4.5, 1);
  const double q4 = oracle::moments_quadrature(4.5, 2);
  const bool quad_ok = std::abs(mom.beta2_hat - q2) <= 1e-10 &&
                       std::abs(mom.beta1_hat - (q4 - q2)) <= 1e-10;

  const bool pass = energy_ok && beta_ok && quad_ok;
  report(8, "expectation identities and moment closed forms", pass,
         "energy dev " + harness::format_double(std::abs(est.mean - target)) + " vs 4se " +
             harness::format_double(4.0 * est.std_err) + "; beta devs " +
             harness::format_double(std::abs(m2 - mom.beta2_hat)) + ", " +
             harness::format_double(std::abs(m1 - mom.beta1_hat)) + "; quadrature ok " +
             (quad_ok ? "1" : "0"));
  CHECK(pass);
}

TEST_CASE("criterion 9: Wirtinger flow as Riemannian descent") {
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index n = 8, m = 56;
    const auto A = MeasurementEnsemble::sample(n, m, derive_seed(kSeed, rep, 50));
    const CVector x = test::random_cvector(n, derive_seed(kSeed, rep, 51));
    const auto y = forward_intensities(A, x);
    const CVector z0 = spectral_init(A, y, 60, derive_seed(kSeed, rep, 52));
    SolverConfig cfg;
    cfg.truncated = false;
    cfg.step = StepPolicy::fixed_step(0.2);
    cfg.mse_tol = 1e-300;
    cfg.max_iters = 10;
    const auto vec_trace = twf_solve(A, y, &x, cfg, z0);

    CVector z = z0;
    for (int it = 0; it < 10; ++it) {
      const auto parts = riemannian_gradient(A, y, z, cfg);
      const CVector step = 2.0 * 0.2 * parts.g / z.norm();
      z = retract_wf(Rank1Point(z), TangentVector(z, step)).z;
    }
    const CMatrix Zv = vec_trace.estimate * vec_trace.estimate.adjoint();
    const CMatrix Zm = z * z.adjoint();
    worst = std::max(worst, (Zv - Zm).norm() / Zv.norm());
  }
  const bool pass = worst <= 1e-10;
  report(9, "vector and manifold trajectories coincide", pass,
         "worst rel divergence " + harness::format_double(worst) + " over 10 iterations (1e-10)");
  CHECK(pass);
}
