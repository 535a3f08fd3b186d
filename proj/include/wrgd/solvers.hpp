#pragma once

#include <chrono>
#include <limits>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "wrgd/manifold.hpp"
#include "wrgd/measurement.hpp"
#include "wrgd/rng.hpp"
#include "wrgd/types.hpp"

namespace wrgd {

struct StepPolicy {
  enum class Kind { exact_line_search, fixed };
  Kind kind = Kind::exact_line_search;
  double alpha = 0.2;  // used when kind == fixed

  static StepPolicy exact() { return {Kind::exact_line_search, 0.0}; }
  static StepPolicy fixed_step(double alpha) { return {Kind::fixed, alpha}; }
};

struct SolverConfig {
  double tau0 = 7.0;
  double tau1 = 4.5;
  double tau2 = 8.0;
  MetricKind metric = MetricKind::weighted;
  bool truncated = true;
  StepPolicy step = StepPolicy::exact();
  int max_iters = 500;
  double mse_tol = 1e-3;
  int power_iters = 100;

  void validate() const {
    if (!(tau0 > 0.0) || !(tau1 > 0.0) || !(tau2 > 0.0))
      throw std::invalid_argument("SolverConfig: truncation thresholds must be positive");
    if (max_iters < 0) throw std::invalid_argument("SolverConfig: max_iters must be >= 0");
    if (!(mse_tol > 0.0)) throw std::invalid_argument("SolverConfig: mse_tol must be positive");
    if (power_iters < 1) throw std::invalid_argument("SolverConfig: power_iters must be >= 1");
  }
};

struct IterateRecord {
  int iter = 0;
  double rel_mse = 0.0;
  double step_size = 0.0;
  double kept_fraction = 1.0;
  double elapsed_s = 0.0;
};

struct IterateTrace {
  std::vector<IterateRecord> steps;
  bool converged = false;
  bool degenerate = false;  // retraction left the PSD branch; partial trace
  int iters = 0;
  CVector estimate;
  double nu_hat = std::numeric_limits<double>::quiet_NaN();

  double final_mse() const { return steps.empty() ? 0.0 : steps.back().rel_mse; }
  double total_seconds() const { return steps.empty() ? 0.0 : steps.back().elapsed_s; }
};

/// Distance between vectors modulo a global phase:
/// min_phi ||z - e^{i phi} x|| = sqrt(||z||^2 + ||x||^2 - 2 |x^* z|).
inline double dist_phase(const CVector& z, const CVector& x) {
  if (z.size() != x.size()) throw std::invalid_argument("dist_phase: length mismatch");
  const double s = z.squaredNorm() + x.squaredNorm() - 2.0 * std::abs(x.dot(z));
  return std::sqrt(std::max(s, 0.0));
}

/// Truncated spectral initialization: power iteration on the implicit matrix
/// Y = (1/m) sum_k y_k a_k a_k^* 1[y_k <= 3 ||y||_1 / m], then rescaling the
/// unit eigenvector estimate to the energy level sqrt(n ||y||_1 / sum_i ||a_i||^2).
inline CVector spectral_init(const MeasurementEnsemble& A, const IntensityVector& y,
                             int power_iters, std::uint64_t seed) {
  if (y.size() != A.m()) throw std::invalid_argument("spectral_init: intensity length mismatch");
  if (power_iters < 1) throw std::invalid_argument("spectral_init: power_iters must be >= 1");
  if (!(y.l1 > 0.0)) throw std::invalid_argument("spectral_init: zero intensities");

  const double m = static_cast<double>(A.m());
  const double cutoff = 3.0 * y.l1 / m;
  RArray weighted = (y.y.array() <= cutoff).select(y.y.array(), RArray::Zero(y.size())) / m;

  RandomStream rng(seed);
  CVector v(A.n());
  for (Eigen::Index j = 0; j < A.n(); ++j) v[j] = rng.complex_gaussian();
  v.normalize();

  for (int it = 0; it < power_iters; ++it) {
    const CVector proj = A.project(v);
    const CVector next = A.accumulate((proj.array() * weighted.cast<Complex>()).matrix());
    const double norm = next.norm();
    if (!(norm > 0.0)) throw numeric_error("spectral_init: power iteration broke down");
    v = next / norm;
  }
  return std::sqrt(static_cast<double>(A.n()) * y.l1 / A.row_norm_sq_sum()) * v;
}

/// The factored pieces of the masked descent direction
/// G = (1/m) sum_{k in I} (y_k - |a_k^* z|^2) a_k a_k^*:
/// g = G u, theta = u^* G u, q = g - theta u, with u = z/||z||.
struct GradientParts {
  CVector g;
  CVector q;
  double theta = 0.0;
  TruncationMask mask;
  RVector residual;     // y - A(z z^*), unmasked
  CVector projections;  // a_k^* z
};

inline GradientParts riemannian_gradient(const MeasurementEnsemble& A, const IntensityVector& y,
                                         const CVector& z, const SolverConfig& config) {
  if (y.size() != A.m()) throw std::invalid_argument("riemannian_gradient: intensity length mismatch");
  if (z.size() != A.n()) throw std::invalid_argument("riemannian_gradient: iterate length mismatch");
  const double zn = z.norm();
  if (zn == 0.0) throw std::invalid_argument("riemannian_gradient: zero iterate");

  GradientParts parts;
  parts.projections = A.project(z);
  parts.residual = y.y - parts.projections.cwiseAbs2();
  parts.mask = config.truncated ? detail::truncation_mask_from_projection(
                                      y, parts.projections, zn, config.tau0, config.tau1, config.tau2)
                                : TruncationMask::all(A.m());

  const double m = static_cast<double>(A.m());
  const RArray masked_resid = parts.residual.array() * parts.mask.weights;
  const CVector coeff =
      (parts.projections.array() * masked_resid.cast<Complex>()).matrix() / (m * zn);
  parts.g = A.accumulate(coeff);
  parts.theta = (masked_resid * parts.projections.array().abs2()).sum() / (m * zn * zn);
  parts.q = parts.g - parts.theta * (z / zn);
  return parts;
}

/// Assembles the metric gradient as a tangent vector at z.  The weighted
/// operator gives u q^* + q u^* + 1/2 theta uu^* (companion (q + theta/4 u)/||z||);
/// the canonical projector gives u q^* + q u^* + theta uu^*.
inline TangentVector gradient_tangent(MetricKind kind, const CVector& z, const GradientParts& parts) {
  const double zn = z.norm();
  const CVector u = z / zn;
  const double coef = (kind == MetricKind::weighted) ? 0.25 : 0.5;
  return TangentVector(z, (parts.q + coef * parts.theta * u) / zn);
}

/// Masked image of a tangent under the lifted map, entrywise
/// 2 Re[(a_k^* z) conj(a_k^* w)].
inline RVector lift_tangent(const MeasurementEnsemble& A, const TangentVector& t,
                            const TruncationMask* mask, const CVector* anchor_projections = nullptr) {
  const CVector wz = anchor_projections ? *anchor_projections : A.project(t.anchor());
  const CVector ww = A.project(t.companion());
  RVector out = 2.0 * (wz.array() * ww.array().conjugate()).real();
  if (mask) out.array() *= mask->weights;
  return out;
}

/// Exact line-search step along a tangent direction T:
/// alpha = m ||T||_g^2 / ||A_mask(T)||_2^2, with the metric norm matching
/// the gradient operator that produced T.
inline double step_size_exact(const MeasurementEnsemble& A, const TruncationMask* mask,
                              const TangentVector& grad_tangent,
                              MetricKind kind = MetricKind::weighted,
                              const CVector* anchor_projections = nullptr) {
  const double num = metric_norm_sq(kind, grad_tangent);
  if (!(num > 0.0)) throw std::invalid_argument("step_size_exact: zero gradient direction");
  const double den = lift_tangent(A, grad_tangent, mask, anchor_projections).squaredNorm();
  if (!(den > 0.0))
    throw numeric_error("step_size_exact: measurements annihilate the tangent direction");
  return static_cast<double>(A.m()) * num / den;
}

namespace detail {

inline double relative_error(const CVector& z, const CVector* x_true, const RVector& residual,
                             double y_l2) {
  if (x_true) return dist_phase(z, *x_true) / x_true->norm();
  return residual.norm() / y_l2;
}

/// Geometric-mean ratio of successive errors over the late stage
/// (rel_mse below `gate`); NaN when no qualifying pair exists.
inline double contraction_estimate(const std::vector<IterateRecord>& steps, double gate = 1e-2) {
  double log_sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const double e0 = steps[i].rel_mse;
    const double e1 = steps[i + 1].rel_mse;
    if (e0 < gate && e0 > 0.0 && e1 > 0.0) {
      log_sum += std::log(e1 / e0);
      ++count;
    }
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(log_sum / count);
}

/// Shared driver for the two manifold solvers; `kind` selects the gradient
/// operator, the line-search norm, and nothing else.
inline IterateTrace riemannian_descent(const MeasurementEnsemble& A, const IntensityVector& y,
                                       const CVector* x_true, const SolverConfig& config,
                                       const CVector& z0, MetricKind kind) {
  config.validate();
  if (z0.size() != A.n()) throw std::invalid_argument("solve: initial iterate length mismatch");
  if (z0.norm() == 0.0) throw std::invalid_argument("solve: zero initial iterate");

  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };
  const double y_l2 = y.y.norm();

  IterateTrace trace;
  CVector z = z0;
  double last_fraction = 1.0;
  for (int t = 0;; ++t) {
    GradientParts parts = riemannian_gradient(A, y, z, config);
    const double err = relative_error(z, x_true, parts.residual, y_l2);
    trace.steps.push_back({t, err, 0.0, last_fraction, elapsed()});
    trace.iters = t;
    if (err <= config.mse_tol) {
      trace.converged = true;
      break;
    }
    if (t >= config.max_iters) break;

    last_fraction = parts.mask.fraction();
    trace.steps.back().kept_fraction = last_fraction;
    const TangentVector direction = gradient_tangent(kind, z, parts);
    if (direction.is_zero()) break;  // stationary but above tolerance
    double alpha = 0.0;
    if (config.step.kind == StepPolicy::Kind::exact_line_search) {
      alpha = step_size_exact(A, &parts.mask, direction, kind, &parts.projections);
    } else {
      alpha = config.step.alpha;
    }
    trace.steps.back().step_size = alpha;
    try {
      z = retract_rank1(Rank1Point(z), direction, alpha).z;
    } catch (const degenerate_retraction_error&) {
      trace.degenerate = true;
      break;
    }
  }
  trace.estimate = z;
  trace.nu_hat = contraction_estimate(trace.steps);
  return trace;
}

}  // namespace detail

/// Truncated weighted Riemannian gradient descent (vector form).
inline IterateTrace twrgd_solve(const MeasurementEnsemble& A, const IntensityVector& y,
                                const CVector* x_true, const SolverConfig& config,
                                const CVector& z0) {
  if (config.metric != MetricKind::weighted)
    throw std::invalid_argument("twrgd_solve: config.metric must be weighted");
  return detail::riemannian_descent(A, y, x_true, config, z0, MetricKind::weighted);
}

/// Canonical-metric Riemannian gradient descent baseline.
inline IterateTrace trgd_solve(const MeasurementEnsemble& A, const IntensityVector& y,
                               const CVector* x_true, const SolverConfig& config,
                               const CVector& z0) {
  return detail::riemannian_descent(A, y, x_true, config, z0, MetricKind::canonical);
}

/// Wirtinger-flow baseline: z <- z - (alpha/||z||^2) grad f(z) with
/// grad f(z) = (2/m) sum_{k in I} (|a_k^* z|^2 - y_k)(a_k^* z) a_k.
/// Runs with a fixed step (default 0.2); the truncation mask is optional.
inline IterateTrace twf_solve(const MeasurementEnsemble& A, const IntensityVector& y,
                              const CVector* x_true, const SolverConfig& config,
                              const CVector& z0) {
  config.validate();
  if (z0.size() != A.n()) throw std::invalid_argument("twf_solve: initial iterate length mismatch");
  if (z0.norm() == 0.0) throw std::invalid_argument("twf_solve: zero initial iterate");

  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };
  const double y_l2 = y.y.norm();
  const double alpha = (config.step.kind == StepPolicy::Kind::fixed) ? config.step.alpha : 0.2;
  const double m = static_cast<double>(A.m());

  IterateTrace trace;
  CVector z = z0;
  double last_fraction = 1.0;
  for (int t = 0;; ++t) {
    const CVector proj = A.project(z);
    const RVector residual = y.y - proj.cwiseAbs2();
    const double err = detail::relative_error(z, x_true, residual, y_l2);
    trace.steps.push_back({t, err, 0.0, last_fraction, elapsed()});
    trace.iters = t;
    if (err <= config.mse_tol) {
      trace.converged = true;
      break;
    }
    if (t >= config.max_iters) break;

    TruncationMask mask = config.truncated
                              ? detail::truncation_mask_from_projection(y, proj, z.norm(),
                                                                        config.tau0, config.tau1,
                                                                        config.tau2)
                              : TruncationMask::all(A.m());
    last_fraction = mask.fraction();
    trace.steps.back().kept_fraction = last_fraction;
    trace.steps.back().step_size = alpha;
    const RArray masked = -residual.array() * mask.weights;  // |a^* z|^2 - y
    const CVector grad =
        (2.0 / m) * A.accumulate((proj.array() * masked.cast<Complex>()).matrix());
    z -= (alpha / z.squaredNorm()) * grad;
  }
  trace.estimate = z;
  trace.nu_hat = detail::contraction_estimate(trace.steps);
  return trace;
}

}  // namespace wrgd
