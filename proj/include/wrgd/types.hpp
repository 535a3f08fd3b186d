#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace wrgd {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RArray = Eigen::ArrayXd;

// Raised when an algorithm hits a numerically impossible state (as opposed
// to a caller error, which is std::invalid_argument).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by the rank-1 retraction when the leading eigenvalue of the
// retracted matrix is not positive, so no PSD rank-1 point exists.
struct degenerate_retraction_error : numeric_error {
  using numeric_error::numeric_error;
};

/// A Hermitian matrix held as a short sum of weighted outer products,
/// sum_i weight_i * v_i v_i^*.  Rank-1 points, tangent vectors, and
/// retraction arguments are all expressible with at most three terms,
/// which keeps every operator evaluation at matrix-vector cost.
class FactoredHermitian {
 public:
  struct Term {
    double weight;
    CVector vector;
  };

  FactoredHermitian() = default;

  explicit FactoredHermitian(std::vector<Term> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_) {
      if (t.vector.size() == 0) throw std::invalid_argument("FactoredHermitian: empty term vector");
      if (t.vector.size() != terms_.front().vector.size())
        throw std::invalid_argument("FactoredHermitian: inconsistent term dimensions");
    }
  }

  static FactoredHermitian outer(double weight, CVector v) {
    return FactoredHermitian({Term{weight, std::move(v)}});
  }

  /// z w^* + w z^* encoded as 1/2 [(z+w)(z+w)^* - (z-w)(z-w)^*].
  static FactoredHermitian symmetric_pair(const CVector& z, const CVector& w) {
    if (z.size() != w.size()) throw std::invalid_argument("symmetric_pair: length mismatch");
    return FactoredHermitian({Term{0.5, z + w}, Term{-0.5, z - w}});
  }

  Eigen::Index dim() const { return terms_.empty() ? 0 : terms_.front().vector.size(); }
  const std::vector<Term>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  CVector apply(const CVector& x) const {
    if (x.size() != dim()) throw std::invalid_argument("FactoredHermitian::apply: length mismatch");
    CVector out = CVector::Zero(x.size());
    for (const auto& t : terms_) out.noalias() += (t.weight * t.vector.dot(x)) * t.vector;
    return out;
  }

  double trace() const {
    double tr = 0.0;
    for (const auto& t : terms_) tr += t.weight * t.vector.squaredNorm();
    return tr;
  }

  /// Frobenius inner product tr(AB), real for Hermitian arguments.
  double inner(const FactoredHermitian& other) const {
    if (!empty() && !other.empty() && dim() != other.dim())
      throw std::invalid_argument("FactoredHermitian::inner: dimension mismatch");
    double s = 0.0;
    for (const auto& a : terms_)
      for (const auto& b : other.terms_) s += a.weight * b.weight * std::norm(a.vector.dot(b.vector));
    return s;
  }

 private:
  std::vector<Term> terms_;
};

}  // namespace wrgd
