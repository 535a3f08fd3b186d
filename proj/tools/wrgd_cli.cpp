// Command-line front end: single solves, convergence studies, m/n sweeps,
// success-rate curves, and the oracle validation audits.
//
// Exit codes: 0 ok, 1 usage error, 2 numeric failure, 3 audit failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wrgd/harness.hpp"

namespace {

using namespace wrgd;

struct CommonFlags {
  std::string config_path;
  long n = -1;
  std::string ratios;
  int trials = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> solvers;
  double tau0 = -1, tau1 = -1, tau2 = -1;
  std::string step;
  int max_iters = -1;
  double tol = -1;
  int power_iters = -1;
  std::string out_dir;
  int threads = -1;
  bool no_traces = false;
  bool deterministic_timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "flat key=value config file");
  cmd->add_option("--n", f.n, "signal dimension");
  cmd->add_option("--m-over-n", f.ratios, "comma-separated list of m/n ratios");
  cmd->add_option("--trials", f.trials, "trials per grid point");
  cmd->add_option("--seed", f.seed, "base seed")->each([&](const std::string&) { f.seed_set = true; });
  cmd->add_option("--solver", f.solvers, "solver name (twrgd, trgd, twf); repeatable");
  cmd->add_option("--tau0", f.tau0, "intensity truncation threshold");
  cmd->add_option("--tau1", f.tau1, "projection truncation threshold");
  cmd->add_option("--tau2", f.tau2, "residual truncation threshold");
  cmd->add_option("--step", f.step, "step policy: exact or fixed:<alpha>");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap");
  cmd->add_option("--tol", f.tol, "relative MSE stopping threshold");
  cmd->add_option("--power-iters", f.power_iters, "power iterations for the spectral start");
  cmd->add_option("--out", f.out_dir, "output directory for CSV/JSON");
  cmd->add_option("--threads", f.threads, "worker threads for trial sharding");
  cmd->add_flag("--no-traces", f.no_traces, "skip per-trial trace files");
  cmd->add_flag("--deterministic-timing", f.deterministic_timing,
                "zero wall-clock columns for byte-stable output");
}

harness::ExperimentSpec build_spec(const CommonFlags& f) {
  harness::ExperimentSpec spec;
  spec.m_over_n = {6.0};
  if (!f.config_path.empty()) harness::apply_config(spec, harness::parse_config_file(f.config_path));
  if (f.n > 0) spec.n = f.n;
  if (!f.ratios.empty()) spec.m_over_n = harness::parse_ratio_list(f.ratios);
  if (f.trials > 0) spec.trials = f.trials;
  if (f.seed_set) spec.base_seed = f.seed;
  if (!f.solvers.empty()) spec.solvers = f.solvers;
  if (f.max_iters >= 0) spec.iter_cap = f.max_iters;
  if (f.tol > 0) spec.success_threshold = f.tol;
  if (!f.out_dir.empty()) spec.out_dir = f.out_dir;
  if (f.threads > 0) spec.threads = f.threads;
  if (f.no_traces) spec.write_traces = false;
  if (f.deterministic_timing) spec.deterministic_timing = true;
  for (auto& [name, cfg] : spec.configs) {
    if (f.tau0 > 0) cfg.tau0 = f.tau0;
    if (f.tau1 > 0) cfg.tau1 = f.tau1;
    if (f.tau2 > 0) cfg.tau2 = f.tau2;
    if (f.power_iters > 0) cfg.power_iters = f.power_iters;
    if (!f.step.empty()) {
      const StepPolicy policy = harness::parse_step_policy(f.step);
      if (name != "twf" || policy.kind == StepPolicy::Kind::fixed) cfg.step = policy;
    }
  }
  return spec;
}

void print_aggregates(const std::vector<harness::Aggregate>& aggs) {
  std::printf("%-8s %-8s %-12s %-12s %-14s\n", "solver", "m/n", "success", "med_iters", "med_seconds");
  for (const auto& a : aggs)
    std::printf("%-8s %-8g %-12g %-12g %-14g\n", a.solver.c_str(), a.m_over_n, a.success_rate,
                a.median_iters, a.median_seconds);
}

int cmd_solve(const CommonFlags& f, bool blind, const std::string& dump_path,
              const std::string& load_path) {
  harness::ExperimentSpec spec = build_spec(f);
  spec.validate();
  const std::string solver = spec.solvers.front();
  const Eigen::Index n = spec.n;
  const Eigen::Index m =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(spec.m_over_n.front() * n)));

  const CVector x = harness::sample_signal(n, derive_seed(spec.base_seed, 0, 0xA001));
  MeasurementEnsemble A =
      load_path.empty()
          ? MeasurementEnsemble::sample(n, m, derive_seed(spec.base_seed, 0, 0xE000 + m))
          : MeasurementEnsemble::load(load_path);
  if (A.n() != n) throw std::invalid_argument("loaded ensemble dimension does not match --n");
  if (!dump_path.empty()) A.dump(dump_path);

  const IntensityVector y = forward_intensities(A, x);
  SolverConfig config = spec.configs.at(solver);
  config.max_iters = spec.iter_cap;
  config.mse_tol = spec.success_threshold;
  const CVector z0 = spectral_init(A, y, config.power_iters, derive_seed(spec.base_seed, 0, 0xB002));

  IterateTrace trace;
  const CVector* target = blind ? nullptr : &x;
  if (solver == "twrgd")
    trace = twrgd_solve(A, y, target, config, z0);
  else if (solver == "trgd")
    trace = trgd_solve(A, y, target, config, z0);
  else if (solver == "twf")
    trace = twf_solve(A, y, target, config, z0);
  else
    throw std::invalid_argument("unknown solver: " + solver);

  std::fputs(harness::trace_csv(trace, spec.deterministic_timing).c_str(), stdout);
  std::printf("# solver=%s n=%ld m=%ld converged=%d degenerate=%d iters=%d final_mse=%s nu_hat=%s\n",
              solver.c_str(), static_cast<long>(n), static_cast<long>(m), trace.converged ? 1 : 0,
              trace.degenerate ? 1 : 0, trace.iters,
              harness::format_double(trace.final_mse()).c_str(),
              harness::format_double(trace.nu_hat).c_str());
  if (!spec.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + spec.out_dir);
    harness::write_text_file(spec.out_dir + "/trace.csv",
                             harness::trace_csv(trace, spec.deterministic_timing));
  }
  return trace.degenerate ? 2 : 0;
}

int cmd_validate(const std::string& level) {
  if (level != "fast" && level != "full")
    throw CLI::ValidationError("--level", "must be 'fast' or 'full'");
  const auto results = harness::run_validate(level == "full");
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %-34s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  std::printf("%zu audits, %s\n", results.size(), all_pass ? "all passed" : "FAILURES present");
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase retrieval via weighted Riemannian gradient descent"};
  app.require_subcommand(1);

  CommonFlags solve_flags, conv_flags, sweep_flags, rate_flags;
  bool blind = false;
  std::string dump_path, load_path, level = "fast";

  auto* solve = app.add_subcommand("solve", "run one seeded instance and print its trace");
  add_common(solve, solve_flags);
  solve->add_flag("--blind", blind, "stop on relative residual instead of true error");
  solve->add_option("--dump-ensemble", dump_path, "write the sensing ensemble to a binary file");
  solve->add_option("--load-ensemble", load_path, "read the sensing ensemble from a binary file");

  auto* converge = app.add_subcommand("converge", "fixed-ratio multi-trial convergence study");
  add_common(converge, conv_flags);

  auto* sweep = app.add_subcommand("sweep", "m/n grid: iterations and time to threshold");
  add_common(sweep, sweep_flags);

  auto* rate = app.add_subcommand("success-rate", "success probability over an m/n grid");
  add_common(rate, rate_flags);

  auto* validate = app.add_subcommand("validate", "run the oracle audit suites");
  validate->add_option("--level", level, "fast (seconds) or full (minutes)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(solve_flags, blind, dump_path, load_path);
    if (converge->parsed()) {
      auto grid = harness::run_convergence(build_spec(conv_flags));
      print_aggregates(grid.aggregates);
      return 0;
    }
    if (sweep->parsed()) {
      auto grid = harness::run_sweep(build_spec(sweep_flags));
      print_aggregates(grid.aggregates);
      return 0;
    }
    if (rate->parsed()) {
      auto grid = harness::run_success_rate(build_spec(rate_flags));
      print_aggregates(grid.aggregates);
      return 0;
    }
    if (validate->parsed()) return cmd_validate(level);
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
