#pragma once

// Brute-force validators used by tests and the `validate` subcommand.
// Everything here takes the dense n x n route and deliberately shares no
// evaluation code with the factored production paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "wrgd/measurement.hpp"
#include "wrgd/rng.hpp"
#include "wrgd/solvers.hpp"
#include "wrgd/types.hpp"

namespace wrgd::oracle {

inline CMatrix dense(const FactoredHermitian& f) {
  CMatrix out = CMatrix::Zero(f.dim(), f.dim());
  for (const auto& t : f.terms()) out += t.weight * (t.vector * t.vector.adjoint());
  return out;
}

inline CMatrix dense(const Rank1Point& p) { return dense(p.factored()); }

inline CMatrix dense(const TangentVector& t) {
  return t.anchor() * t.companion().adjoint() + t.companion() * t.anchor().adjoint();
}

inline void check_hermitian(const CMatrix& Z, double rel_tol = 1e-10) {
  if (Z.rows() != Z.cols()) throw std::invalid_argument("check_hermitian: not square");
  const double scale = std::max(1e-300, Z.norm());
  if ((Z - Z.adjoint()).norm() > rel_tol * scale)
    throw std::invalid_argument("check_hermitian: asymmetry beyond tolerance");
}

/// Entry k = a_k^* Z a_k from the dense matrix, zeroed where the mask
/// drops k.  Validates Hermitian symmetry to 1e-10 relative.
inline RVector dense_lift(const MeasurementEnsemble& A, const CMatrix& Z,
                          const TruncationMask* mask = nullptr) {
  if (Z.rows() != A.n()) throw std::invalid_argument("dense_lift: dimension mismatch");
  check_hermitian(Z);
  RVector out(A.m());
  for (Eigen::Index k = 0; k < A.m(); ++k) {
    const CVector ak = A.row(k);
    out[k] = ak.dot(Z * ak).real();
    if (mask && !mask->keep[static_cast<std::size_t>(k)]) out[k] = 0.0;
  }
  return out;
}

/// The adjoint matrix (1/m) sum_{k kept} b_k a_k a_k^*, materialized.
inline CMatrix dense_lift_adjoint(const MeasurementEnsemble& A, const RVector& b,
                                  const TruncationMask* mask = nullptr) {
  if (b.size() != A.m()) throw std::invalid_argument("dense_lift_adjoint: length mismatch");
  CMatrix out = CMatrix::Zero(A.n(), A.n());
  for (Eigen::Index k = 0; k < A.m(); ++k) {
    if (mask && !mask->keep[static_cast<std::size_t>(k)]) continue;
    const CVector ak = A.row(k);
    out += b[k] * (ak * ak.adjoint());
  }
  return out / static_cast<double>(A.m());
}

inline CMatrix dense_project_canonical(const CVector& u, const CMatrix& W) {
  const CMatrix P = u * u.adjoint();
  return P * W + W * P - P * W * P;
}

inline CMatrix dense_project_weighted(const CVector& u, const CMatrix& W) {
  const CMatrix P = u * u.adjoint();
  return P * W + W * P - 1.5 * P * W * P;
}

inline double dense_metric_inner(MetricKind kind, const CMatrix& A, const CMatrix& B) {
  if (A.rows() != B.rows()) throw std::invalid_argument("dense_metric_inner: dimension mismatch");
  const double base = (A * B).trace().real();
  const double ta = A.trace().real();
  const double tb = B.trace().real();
  switch (kind) {
    case MetricKind::canonical:
      return base;
    case MetricKind::wf_pseudo:
      return base - 0.5 * ta * tb;
    case MetricKind::weighted:
      return base + ta * tb;
  }
  throw std::invalid_argument("dense_metric_inner: unknown metric");
}

/// Least-squares data fit F(Z) = (1/2m) ||A_mask(Z) - y||^2 on dense input.
inline double dense_objective(const MeasurementEnsemble& A, const IntensityVector& y,
                              const CMatrix& Z, const TruncationMask* mask = nullptr) {
  RVector lifted = dense_lift(A, Z, mask);
  RVector target = y.y;
  if (mask)
    for (Eigen::Index k = 0; k < A.m(); ++k)
      if (!mask->keep[static_cast<std::size_t>(k)]) target[k] = 0.0;
  return (lifted - target).squaredNorm() / (2.0 * static_cast<double>(A.m()));
}

/// Central difference (F(Z + hB) - F(Z - hB)) / 2h.
template <class Field>
double finite_diff_directional(Field&& F, const CMatrix& Z, const CMatrix& B, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_directional: h must be positive");
  return (F(Z + h * B) - F(Z - h * B)) / (2.0 * h);
}

/// Eigenpair of largest magnitude, tie-broken toward the larger eigenvalue;
/// lambda * v v^* is the best rank-1 Frobenius approximation.
inline std::pair<double, CVector> dense_rank1_trunc_svd(const CMatrix& W) {
  check_hermitian(W, 1e-8);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig((W + W.adjoint()) / 2.0);
  const RVector& vals = eig.eigenvalues();  // ascending
  const Eigen::Index lo = 0, hi = vals.size() - 1;
  Eigen::Index pick = hi;
  if (std::abs(vals[lo]) > std::abs(vals[hi])) pick = lo;
  // |vals[lo]| == |vals[hi]| resolves toward the larger (positive) one.
  return {vals[pick], eig.eigenvectors().col(pick)};
}

// ---------------------------------------------------------------------------
// Truncated Gaussian moments.
// ---------------------------------------------------------------------------

/// Second/fourth truncated moments of a complex standard normal.  Since
/// |xi|^2 is unit-rate exponential, the closed forms are
///   beta2 = 1 - (1 + T) e^{-T},           T = tau1^2,
///   beta1 = 1 - (1 + T + T^2) e^{-T}.
struct TruncationMoments {
  double tau1 = 0.0;
  double beta1_hat = 0.0;
  double beta2_hat = 0.0;
};

inline TruncationMoments moments_closed_form(double tau1) {
  if (!(tau1 > 0.0)) throw std::invalid_argument("moments_closed_form: tau1 must be positive");
  const double T = tau1 * tau1;
  const double e = std::exp(-T);
  return {tau1, 1.0 - (1.0 + T + T * T) * e, 1.0 - (1.0 + T) * e};
}

/// Composite-Simpson quadrature of int_0^{tau1^2} t^p e^{-t} dt, p in {1,2};
/// the independent cross-check for the closed forms above.
inline double moments_quadrature(double tau1, int power, int intervals = 20000) {
  if (power != 1 && power != 2) throw std::invalid_argument("moments_quadrature: power must be 1 or 2");
  const double b = tau1 * tau1;
  const auto f = [power](double t) { return std::pow(t, power) * std::exp(-t); };
  const int n = intervals % 2 == 0 ? intervals : intervals + 1;
  const double h = b / n;
  double sum = f(0.0) + f(b);
  for (int i = 1; i < n; ++i) sum += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimators.
// ---------------------------------------------------------------------------

struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
};

/// Sample mean and standard error of (1/m) ||A(W)||_2^2 over fresh
/// ensembles; the target identity is tr(W)^2 + ||W||_F^2.
inline McEstimate mc_expectation_lift(const CMatrix& W, int trials, Eigen::Index m,
                                      std::uint64_t seed) {
  if (trials < 30) throw std::invalid_argument("mc_expectation_lift: need at least 30 trials");
  check_hermitian(W, 1e-8);
  const Eigen::Index n = W.rows();
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto A = MeasurementEnsemble::sample(n, m, derive_seed(seed, t, 0x111));
    const double v = dense_lift(A, W).squaredNorm() / static_cast<double>(m);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / trials;
  const double var = std::max(0.0, (sum_sq / trials - mean * mean) * trials / (trials - 1.0));
  return {mean, std::sqrt(var / trials)};
}

struct MatrixMomentDeviations {
  double hermitian_dev = 0.0;   // || emp - (beta1 zz^* + beta2 I) ||_2
  double symmetric_dev = 0.0;   // || emp - (beta1 + beta2) zz^T ||_2
  Eigen::Index samples = 0;
};

/// Spectral-norm deviation of the empirical truncated fourth-moment sums
/// (1/m) sum |a^*z|^2 aa^* 1[|a^*z| <= tau1] and
/// (1/m) sum (a^*z)^2 aa^T 1[...] from their closed-form expectations.
inline MatrixMomentDeviations mc_truncated_matrix_moments(const CVector& z, double tau1,
                                                          Eigen::Index m, std::uint64_t seed) {
  if (std::abs(z.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("mc_truncated_matrix_moments: z must be unit");
  const Eigen::Index n = z.size();
  RandomStream rng(seed);
  CMatrix s_herm = CMatrix::Zero(n, n);
  CMatrix s_symm = CMatrix::Zero(n, n);
  CVector a(n);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) a[j] = rng.complex_gaussian();
    const Complex az = a.dot(z);  // a^* z
    if (std::abs(az) > tau1) continue;
    s_herm += std::norm(az) * (a * a.adjoint());
    s_symm += az * az * (a * a.transpose());
  }
  s_herm /= static_cast<double>(m);
  s_symm /= static_cast<double>(m);

  const auto mom = moments_closed_form(tau1);
  const CMatrix target_h =
      mom.beta1_hat * (z * z.adjoint()) + mom.beta2_hat * CMatrix::Identity(n, n);
  const CMatrix target_s = (mom.beta1_hat + mom.beta2_hat) * (z * z.transpose());

  MatrixMomentDeviations dev;
  dev.samples = m;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig_h(s_herm - target_h);
  dev.hermitian_dev = eig_h.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::JacobiSVD<CMatrix> svd(s_symm - target_s);
  dev.symmetric_dev = svd.singularValues()[0];
  return dev;
}

// ---------------------------------------------------------------------------
// Dense reference solver (weighted metric, exact or fixed step).
// ---------------------------------------------------------------------------

namespace detail {

inline TruncationMask dense_truncation_mask(const MeasurementEnsemble& A, const IntensityVector& y,
                                            const CVector& z, double tau0, double tau1,
                                            double tau2) {
  const Eigen::Index m = A.m();
  const double zn = z.norm();
  RVector absw(m), resid(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const CVector ak = A.row(k);
    const Complex p = ak.dot(z);
    absw[k] = std::abs(p);
    resid[k] = y.y[k] - std::norm(p);
  }
  const double resid_l1 = resid.cwiseAbs().sum();
  const double bound0 = tau0 * std::sqrt(y.l1 / static_cast<double>(m));
  const double bound1 = tau1 * zn;
  const double scale2 = tau2 / static_cast<double>(m) * resid_l1 / zn;
  TruncationMask mask;
  mask.keep.resize(static_cast<std::size_t>(m));
  mask.weights = RArray::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const bool e0 = std::sqrt(y.y[k]) <= bound0;
    const bool e1 = absw[k] <= bound1;
    const bool e2 = std::abs(resid[k]) <= scale2 * (absw[k] + std::sqrt(y.y[k]));
    mask.count_e0 += e0;
    mask.count_e1 += e1;
    mask.count_e2 += e2;
    const bool kept = e0 && e1 && e2;
    mask.keep[static_cast<std::size_t>(k)] = kept;
    if (kept) {
      mask.weights[k] = 1.0;
      ++mask.count_kept;
    }
  }
  return mask;
}

}  // namespace detail

/// One dense weighted-descent step from factor z; mirrors the production
/// update through full matrices and a full eigendecomposition.
inline CVector dense_weighted_step(const MeasurementEnsemble& A, const IntensityVector& y,
                                   const CVector& z, const SolverConfig& config) {
  const double m = static_cast<double>(A.m());
  const CMatrix Z = z * z.adjoint();
  TruncationMask mask = config.truncated
                            ? detail::dense_truncation_mask(A, y, z, config.tau0, config.tau1,
                                                            config.tau2)
                            : TruncationMask::all(A.m());
  RVector resid = y.y - dense_lift(A, Z);
  for (Eigen::Index k = 0; k < A.m(); ++k)
    if (!mask.keep[static_cast<std::size_t>(k)]) resid[k] = 0.0;
  const CMatrix G = dense_lift_adjoint(A, resid, &mask);
  const CVector u = z / z.norm();
  const CMatrix T = dense_project_weighted(u, G);

  double alpha = config.step.alpha;
  if (config.step.kind == StepPolicy::Kind::exact_line_search) {
    const double num = (G * T).trace().real();
    const double den = dense_lift(A, T, &mask).squaredNorm();
    if (!(den > 0.0)) throw numeric_error("dense_weighted_step: zero line-search denominator");
    alpha = m * num / den;
  }
  const CMatrix W = Z + alpha * T;
  const auto [lam, v] = dense_rank1_trunc_svd(W);
  if (!(lam > 0.0)) throw degenerate_retraction_error("dense_weighted_step: non-PSD retraction");
  return std::sqrt(lam) * v;
}

// ---------------------------------------------------------------------------
// Statistical audits shared by the acceptance suite and `validate`.
// ---------------------------------------------------------------------------

struct RayleighSpread {
  double min_q = 0.0;
  double max_q = 0.0;
  double spread() const { return max_q / min_q; }
};

/// Empirical Rayleigh quotients (1/m)||A(W)||^2 / ||W||_g^2 over tangent
/// vectors with mixed alignment at a point near the planted signal.
/// The weighted metric uses the truncated operator; the other two use the
/// plain one, matching how each metric is analyzed.
struct ConditionAudit {
  RayleighSpread weighted, canonical, wf;
};

inline ConditionAudit condition_number_audit(Eigen::Index n, Eigen::Index m, int directions,
                                             std::uint64_t seed) {
  RandomStream rng(seed);
  CVector x(n);
  for (Eigen::Index j = 0; j < n; ++j) x[j] = rng.complex_gaussian();
  const auto A = MeasurementEnsemble::sample(n, m, derive_seed(seed, 1, 0xC0));
  const IntensityVector y = forward_intensities(A, x);

  // Point near the signal: relative factor error 2%.
  CVector noise(n);
  for (Eigen::Index j = 0; j < n; ++j) noise[j] = rng.complex_gaussian();
  CVector z = x + 0.02 * x.norm() / noise.norm() * noise;
  const Rank1Point Zp(z);
  const TruncationMask mask = truncation_mask(A, y, z, 7.0, 4.5, 8.0);

  const double align[] = {0.0, 0.25, 0.5, 0.75, 0.95};
  ConditionAudit audit;
  auto fold = [](RayleighSpread& s, double q, bool first) {
    if (first) {
      s.min_q = s.max_q = q;
    } else {
      s.min_q = std::min(s.min_q, q);
      s.max_q = std::max(s.max_q, q);
    }
  };
  const CVector u = z / z.norm();
  for (int i = 0; i < directions; ++i) {
    CVector p(n);
    for (Eigen::Index j = 0; j < n; ++j) p[j] = rng.complex_gaussian();
    p -= u * u.dot(p);  // orthogonal part
    p.normalize();
    const double s = align[i % 5];
    const CVector w = std::sqrt(1.0 - s * s) * p + s * u;
    const TangentVector W(z, w);

    const RVector lifted_masked = lift_tangent(A, W, &mask);
    const RVector lifted_plain = lift_tangent(A, W, nullptr);
    const double mm = static_cast<double>(m);
    fold(audit.weighted,
         lifted_masked.squaredNorm() / mm / metric_norm_sq(MetricKind::weighted, W), i == 0);
    fold(audit.canonical,
         lifted_plain.squaredNorm() / mm / metric_norm_sq(MetricKind::canonical, W), i == 0);
    fold(audit.wf, lifted_plain.squaredNorm() / mm / metric_norm_sq(MetricKind::wf_pseudo, W),
         i == 0);
  }
  return audit;
}

/// Weighted-metric norm of T A_Z^adj A_Z (I - P)(Z - X) / m against
/// 0.5 ||Z - X||_F, the off-tangent leakage check; fully dense.
struct WeakCorrelationAudit {
  double measured = 0.0;
  double bound = 0.0;
  bool pass() const { return measured <= bound; }
};

inline WeakCorrelationAudit weak_correlation_audit(Eigen::Index n, Eigen::Index m,
                                                   std::uint64_t seed) {
  RandomStream rng(seed);
  CVector x(n);
  for (Eigen::Index j = 0; j < n; ++j) x[j] = rng.complex_gaussian();
  const auto A = MeasurementEnsemble::sample(n, m, derive_seed(seed, 2, 0xC1));
  const IntensityVector y = forward_intensities(A, x);

  CVector noise(n);
  for (Eigen::Index j = 0; j < n; ++j) noise[j] = rng.complex_gaussian();
  // ||Z - X||_F <= 0.05 ||X||_F via a ~2% factor perturbation.
  CVector z = x + 0.02 * x.norm() / noise.norm() * noise;

  const CMatrix Z = z * z.adjoint();
  const CMatrix X = x * x.adjoint();
  const CMatrix D = Z - X;
  const CVector u = z / z.norm();
  const CMatrix off_tangent = D - dense_project_canonical(u, D);

  const TruncationMask mask = detail::dense_truncation_mask(A, y, z, 7.0, 4.5, 8.0);
  const RVector image = dense_lift(A, off_tangent, &mask);
  const CMatrix back = dense_lift_adjoint(A, image, &mask);
  const CMatrix T = dense_project_weighted(u, back);
  const double norm_sq = dense_metric_inner(MetricKind::weighted, T, T);

  WeakCorrelationAudit audit;
  audit.measured = std::sqrt(std::max(0.0, norm_sq));
  audit.bound = 0.5 * D.norm();
  return audit;
}

}  // namespace wrgd::oracle
