#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "wrgd/rng.hpp"
#include "wrgd/types.hpp"

namespace wrgd {

/// m complex Gaussian sensing vectors a_k of length n, stored row-wise.
/// Immutable after construction; regenerating from the same (n, m, seed)
/// reproduces bit-identical rows.
class MeasurementEnsemble {
 public:
  static MeasurementEnsemble sample(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
    if (n < 1 || m < 1) throw std::invalid_argument("MeasurementEnsemble: n and m must be >= 1");
    MeasurementEnsemble e;
    e.seed_ = seed;
    e.rows_.resize(m, n);
    RandomStream rng(seed);
    for (Eigen::Index k = 0; k < m; ++k)
      for (Eigen::Index j = 0; j < n; ++j) e.rows_(k, j) = rng.complex_gaussian();
    e.row_norm_sq_sum_ = e.rows_.squaredNorm();
    return e;
  }

  Eigen::Index n() const { return rows_.cols(); }
  Eigen::Index m() const { return rows_.rows(); }
  std::uint64_t seed() const { return seed_; }
  double row_norm_sq_sum() const { return row_norm_sq_sum_; }

  CVector row(Eigen::Index k) const { return rows_.row(k).transpose(); }

  /// All m projections a_k^* v in one matrix-vector product.
  CVector project(const CVector& v) const {
    if (v.size() != n()) throw std::invalid_argument("project: length mismatch");
    return (rows_ * v.conjugate()).conjugate();
  }

  /// sum_k c_k a_k.
  CVector accumulate(const CVector& c) const {
    if (c.size() != m()) throw std::invalid_argument("accumulate: length mismatch");
    return rows_.transpose() * c;
  }

  /// Binary dump: 24-byte header (magic "WRGDENS1", n u32, m u32, seed u64)
  /// followed by row-major interleaved re/im f64, all little-endian.
  void dump(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("MeasurementEnsemble::dump: cannot open " + path);
    out.write(kMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(n()));
    write_u32(out, static_cast<std::uint32_t>(m()));
    write_u64(out, seed_);
    for (Eigen::Index k = 0; k < m(); ++k)
      for (Eigen::Index j = 0; j < n(); ++j) {
        write_f64(out, rows_(k, j).real());
        write_f64(out, rows_(k, j).imag());
      }
    if (!out) throw std::runtime_error("MeasurementEnsemble::dump: write failed for " + path);
  }

  static MeasurementEnsemble load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("MeasurementEnsemble::load: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
      throw std::runtime_error("MeasurementEnsemble::load: bad magic in " + path);
    const std::uint32_t n = read_u32(in);
    const std::uint32_t m = read_u32(in);
    const std::uint64_t seed = read_u64(in);
    if (n < 1 || m < 1) throw std::runtime_error("MeasurementEnsemble::load: bad header in " + path);
    MeasurementEnsemble e;
    e.seed_ = seed;
    e.rows_.resize(m, n);
    for (std::uint32_t k = 0; k < m; ++k)
      for (std::uint32_t j = 0; j < n; ++j) {
        const double re = read_f64(in);
        const double im = read_f64(in);
        e.rows_(k, j) = Complex(re, im);
      }
    if (!in) throw std::runtime_error("MeasurementEnsemble::load: truncated file " + path);
    e.row_norm_sq_sum_ = e.rows_.squaredNorm();
    return e;
  }

 private:
  MeasurementEnsemble() = default;

  static constexpr const char* kMagic = "WRGDENS1";

  static void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  static void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  static void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
  }
  static std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  static std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  static double read_f64(std::istream& in) {
    const std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  Eigen::MatrixXcd rows_;
  double row_norm_sq_sum_ = 0.0;
  std::uint64_t seed_ = 0;
};

/// Nonnegative intensities y_k = |a_k^* x|^2 with a cached l1 norm.
struct IntensityVector {
  RVector y;
  double l1 = 0.0;

  IntensityVector() = default;
  explicit IntensityVector(RVector values) : y(std::move(values)) {
    if ((y.array() < 0.0).any()) throw std::invalid_argument("IntensityVector: negative entry");
    l1 = y.sum();
  }
  Eigen::Index size() const { return y.size(); }
};

inline IntensityVector forward_intensities(const MeasurementEnsemble& A, const CVector& x) {
  if (x.size() != A.n()) throw std::invalid_argument("forward_intensities: length mismatch");
  return IntensityVector(A.project(x).cwiseAbs2());
}

/// Per-measurement keep/drop decisions from the three truncation events,
/// with kept counts per event and for the intersection.
struct TruncationMask {
  std::vector<std::uint8_t> keep;
  RArray weights;  // 1.0 where kept, 0.0 where dropped
  Eigen::Index count_e0 = 0;
  Eigen::Index count_e1 = 0;
  Eigen::Index count_e2 = 0;
  Eigen::Index count_kept = 0;

  static TruncationMask all(Eigen::Index m) {
    TruncationMask mask;
    mask.keep.assign(static_cast<std::size_t>(m), 1);
    mask.weights = RArray::Ones(m);
    mask.count_e0 = mask.count_e1 = mask.count_e2 = mask.count_kept = m;
    return mask;
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(keep.size()); }
  double fraction() const {
    return keep.empty() ? 1.0 : static_cast<double>(count_kept) / static_cast<double>(keep.size());
  }
};

namespace detail {

// Core mask evaluation given the projections w_k = a_k^* z.  The residual
// l1 norm ||y - A(zz^*)||_1 is recomputed from the same residuals, so no
// state is carried between iterations.
inline TruncationMask truncation_mask_from_projection(const IntensityVector& y, const CVector& w,
                                                      double z_norm, double tau0, double tau1,
                                                      double tau2) {
  const Eigen::Index m = y.size();
  const RArray absw = w.array().abs();
  const RArray sqrty = y.y.array().sqrt();
  const RArray resid = y.y.array() - absw.square();
  const double resid_l1 = resid.abs().sum();

  const double bound0 = tau0 * std::sqrt(y.l1 / static_cast<double>(m));
  const double bound1 = tau1 * z_norm;
  const double scale2 = tau2 / static_cast<double>(m) * resid_l1 / z_norm;

  TruncationMask mask;
  mask.keep.resize(static_cast<std::size_t>(m));
  mask.weights = RArray::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const bool e0 = sqrty[k] <= bound0;
    const bool e1 = absw[k] <= bound1;
    const bool e2 = std::abs(resid[k]) <= scale2 * (absw[k] + sqrty[k]);
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

inline TruncationMask truncation_mask(const MeasurementEnsemble& A, const IntensityVector& y,
                                      const CVector& z, double tau0, double tau1, double tau2) {
  if (y.size() != A.m()) throw std::invalid_argument("truncation_mask: intensity length mismatch");
  if (z.size() != A.n()) throw std::invalid_argument("truncation_mask: anchor length mismatch");
  if (!(tau0 > 0.0) || !(tau1 > 0.0) || !(tau2 > 0.0))
    throw std::invalid_argument("truncation_mask: thresholds must be positive");
  const double zn = z.norm();
  if (zn == 0.0) throw std::invalid_argument("truncation_mask: zero anchor");
  return detail::truncation_mask_from_projection(y, A.project(z), zn, tau0, tau1, tau2);
}

/// Evaluates the lifted linear map entrywise: out_k = <a_k a_k^*, Z> for a
/// factored Hermitian Z, zeroed where the mask drops k.  Cost is one
/// matrix-vector product per factor term.
inline RVector apply_lift(const MeasurementEnsemble& A, const FactoredHermitian& Z,
                          const TruncationMask* mask = nullptr) {
  if (Z.dim() != A.n()) throw std::invalid_argument("apply_lift: dimension mismatch");
  if (mask && mask->size() != A.m()) throw std::invalid_argument("apply_lift: mask length mismatch");
  RVector out = RVector::Zero(A.m());
  for (const auto& term : Z.terms())
    out.array() += term.weight * A.project(term.vector).array().abs2();
  if (mask) out.array() *= mask->weights;
  return out;
}

/// Applies the adjoint matrix (1/m) sum_{k kept} b_k a_k a_k^* to v without
/// materializing it.
inline CVector apply_lift_adjoint(const MeasurementEnsemble& A, const RVector& b,
                                  const TruncationMask* mask, const CVector& v) {
  if (b.size() != A.m()) throw std::invalid_argument("apply_lift_adjoint: coefficient length mismatch");
  if (v.size() != A.n()) throw std::invalid_argument("apply_lift_adjoint: vector length mismatch");
  if (mask && mask->size() != A.m())
    throw std::invalid_argument("apply_lift_adjoint: mask length mismatch");
  RArray coeff = b.array();
  if (mask) coeff *= mask->weights;
  const CVector proj = A.project(v);
  const CVector scaled = (proj.array() * coeff.cast<Complex>()).matrix() / static_cast<double>(A.m());
  return A.accumulate(scaled);
}

}  // namespace wrgd
