#pragma once

#include <cmath>

#include "wrgd/types.hpp"

namespace wrgd {

/// A point Z = sigma * z z^* on the rank-1 Hermitian manifold, kept in
/// factored form.  Phase retrieval lives on the PSD branch sigma = +1;
/// sigma = -1 exists only for the sign-carrying retraction.
struct Rank1Point {
  CVector z;
  int sigma = +1;

  Rank1Point() = default;
  explicit Rank1Point(CVector factor, int sign = +1) : z(std::move(factor)), sigma(sign) {
    if (z.size() == 0) throw std::invalid_argument("Rank1Point: empty factor");
    if (sigma != 1 && sigma != -1) throw std::invalid_argument("Rank1Point: sign must be +-1");
  }

  Eigen::Index dim() const { return z.size(); }
  double factor_norm() const { return z.norm(); }
  bool valid() const { return z.size() > 0 && z.norm() > 0.0; }

  FactoredHermitian factored() const { return FactoredHermitian::outer(sigma, z); }
};

/// Tangent element W = z w^* + w z^* at anchor z, stored by its companion
/// vector w.  Construction applies the realness normalization
/// w <- v - i Im(z^* v)/||z||^2 z, which leaves W unchanged and makes the
/// parametrization unique with z^* w real.
class TangentVector {
 public:
  TangentVector(const CVector& anchor, const CVector& raw_companion) : z_(anchor) {
    if (anchor.size() != raw_companion.size())
      throw std::invalid_argument("TangentVector: length mismatch");
    z_norm_sq_ = z_.squaredNorm();
    if (z_norm_sq_ == 0.0) throw std::invalid_argument("TangentVector: zero anchor");
    const Complex zv = z_.dot(raw_companion);
    w_ = raw_companion - Complex(0.0, zv.imag() / z_norm_sq_) * z_;
    zw_ = zv.real();
  }

  const CVector& anchor() const { return z_; }
  const CVector& companion() const { return w_; }
  double anchor_norm_sq() const { return z_norm_sq_; }
  /// The (real) inner product z^* w after normalization.
  double zw() const { return zw_; }
  bool is_zero() const { return w_.isZero(0.0); }

  /// Action of W = z w^* + w z^* on a vector.
  CVector apply(const CVector& v) const {
    if (v.size() != z_.size()) throw std::invalid_argument("TangentVector::apply: length mismatch");
    return z_ * w_.dot(v) + w_ * z_.dot(v);
  }

  FactoredHermitian factored() const { return FactoredHermitian::symmetric_pair(z_, w_); }

 private:
  CVector z_;
  CVector w_;
  double z_norm_sq_ = 0.0;
  double zw_ = 0.0;
};

inline TangentVector normalize_tangent_param(const Rank1Point& Z, const CVector& v) {
  if (!Z.valid()) throw std::invalid_argument("normalize_tangent_param: invalid anchor point");
  return TangentVector(Z.z, v);
}

enum class MetricKind {
  canonical,  // tr(AB)
  wf_pseudo,  // tr(AB) - 1/2 tr(A) tr(B); a metric only on tangent spaces
  weighted,   // tr(AB) + tr(A) tr(B)
};

/// Metric inner product of two tangent vectors sharing an anchor.
/// For W_i = z w_i^* + w_i z^* with real z^* w_i:
///   tr(W_1 W_2) = 2 ||z||^2 Re(w_1^* w_2) + 2 (z^* w_1)(z^* w_2),
///   tr(W_i)     = 2 z^* w_i.
inline double metric_inner(MetricKind kind, const TangentVector& a, const TangentVector& b) {
  if (a.anchor().size() != b.anchor().size() ||
      !(a.anchor().array() == b.anchor().array()).all())
    throw std::invalid_argument("metric_inner: anchors differ");
  const double cross = a.anchor_norm_sq() * a.companion().dot(b.companion()).real();
  const double tr_term = a.zw() * b.zw();
  switch (kind) {
    case MetricKind::canonical:
      return 2.0 * cross + 2.0 * tr_term;
    case MetricKind::wf_pseudo:
      return 2.0 * cross;
    case MetricKind::weighted:
      return 2.0 * cross + 6.0 * tr_term;
  }
  throw std::invalid_argument("metric_inner: unknown metric");
}

inline double metric_norm_sq(MetricKind kind, const TangentVector& a) {
  return metric_inner(kind, a, a);
}

/// Metric inner product for general Hermitian arguments in factored form.
inline double metric_inner(MetricKind kind, const FactoredHermitian& a, const FactoredHermitian& b) {
  const double base = a.inner(b);
  switch (kind) {
    case MetricKind::canonical:
      return base;
    case MetricKind::wf_pseudo:
      return base - 0.5 * a.trace() * b.trace();
    case MetricKind::weighted:
      return base + a.trace() * b.trace();
  }
  throw std::invalid_argument("metric_inner: unknown metric");
}

/// Orthogonal projection onto the tangent space, given the action Wu of a
/// Hermitian W on the unit direction u = z/||z||:
///   P(W) = uu^* W + W uu^* - uu^* W uu^*,
/// returned in factored form with companion (Wu - 1/2 (u^* W u) u) / ||z||.
inline TangentVector project_canonical(const Rank1Point& Z, const CVector& Wu) {
  if (!Z.valid()) throw std::invalid_argument("project_canonical: invalid anchor point");
  if (Wu.size() != Z.dim()) throw std::invalid_argument("project_canonical: length mismatch");
  const double zn = Z.factor_norm();
  const CVector u = Z.z / zn;
  const double theta = u.dot(Wu).real();
  return TangentVector(Z.z, (Wu - 0.5 * theta * u) / zn);
}

/// Weighted-metric gradient operator
///   T(W) = uu^* W + W uu^* - 3/2 uu^* W uu^*,
/// companion (Wu - 3/4 (u^* W u) u) / ||z||.  Satisfies the compatibility
/// identity <T(W), B>_weighted = tr(W B) for every tangent B.
inline TangentVector project_weighted(const Rank1Point& Z, const CVector& Wu) {
  if (!Z.valid()) throw std::invalid_argument("project_weighted: invalid anchor point");
  if (Wu.size() != Z.dim()) throw std::invalid_argument("project_weighted: length mismatch");
  const double zn = Z.factor_norm();
  const CVector u = Z.z / zn;
  const double theta = u.dot(Wu).real();
  return TangentVector(Z.z, (Wu - 0.75 * theta * u) / zn);
}

/// Best PSD rank-1 approximation of Z + scale * (z w^* + w z^*), computed
/// through the 2x2 symmetric eigenproblem in the basis {u, p/||p||} with
/// p the component of w orthogonal to u:
///
///   [ ||z||^2 + 2 s ||z|| xi     s ||z|| ||p|| ]
///   [ s ||z|| ||p||              0             ]
///
/// where xi = Re(u^* w).  The leading eigenvalue lam > 0 yields the new
/// factor sqrt(lam) (lam u + b p/||p||) / sqrt(lam^2 + b^2).  When w is
/// collinear with u the 2x2 matrix is diagonal; the direction stays u and
/// only the scale updates.  Throws degenerate_retraction_error when the
/// leading eigenvalue is not positive.
inline Rank1Point retract_rank1(const Rank1Point& Z, const TangentVector& step, double scale) {
  if (!Z.valid()) throw std::invalid_argument("retract_rank1: invalid anchor point");
  if (Z.sigma != +1) throw std::invalid_argument("retract_rank1: requires the PSD branch");
  if (step.anchor().size() != Z.dim())
    throw std::invalid_argument("retract_rank1: anchor dimension mismatch");
  if (scale == 0.0 || step.is_zero()) return Z;

  const double zn = Z.factor_norm();
  const CVector u = Z.z / zn;
  const double xi = u.dot(step.companion()).real();
  const CVector p = step.companion() - xi * u;
  const double pn = p.norm();

  const double a = zn * zn + 2.0 * scale * zn * xi;
  const double b = scale * zn * pn;

  if (pn == 0.0) {
    if (a <= 0.0)
      throw degenerate_retraction_error("retract_rank1: leading eigenvalue not positive");
    return Rank1Point(std::sqrt(a) * u, +1);
  }

  const double lam = 0.5 * (a + std::sqrt(a * a + 4.0 * b * b));
  if (!(lam > 0.0))
    throw degenerate_retraction_error("retract_rank1: leading eigenvalue not positive");
  CVector dir = lam * u + (b / pn) * p;
  return Rank1Point(std::sqrt(lam) / dir.norm() * dir, +1);
}

/// Sign-carrying factored retraction: maps Z + z w^* + w z^* (with z^* w
/// real) to sigma (z + sigma w)(z + sigma w)^*.  Total on valid tangents.
inline Rank1Point retract_wf(const Rank1Point& Z, const TangentVector& step) {
  if (!Z.valid()) throw std::invalid_argument("retract_wf: invalid anchor point");
  if (step.anchor().size() != Z.dim())
    throw std::invalid_argument("retract_wf: anchor dimension mismatch");
  const double s = static_cast<double>(Z.sigma);
  return Rank1Point(Z.z + s * step.companion(), Z.sigma);
}

}  // namespace wrgd
