#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

#include "kmshrink/types.hpp"

namespace kmshrink {

// Relative thresholds shared by everything built on the decomposition.
inline constexpr double kSymmetryTol = 1e-10;   // max allowed input asymmetry
inline constexpr double kClampRel = 1e-12;      // eigenvalue zeroing threshold
inline constexpr double kRankRel = 1e-10;       // retained-mode threshold
inline constexpr double kPsdGuardRel = 1e-6;    // "clearly not PSD" guard

// Eigendecomposition M = U diag(gamma) U^T with gamma sorted descending,
// U orthonormal, and each column's sign fixed so its largest-magnitude
// component is positive (deterministic golden outputs).
struct SpectralDecomposition {
  Matrix eigvecs;  // columns u_i
  Vector eigvals;  // gamma, descending

  Index size() const { return eigvals.size(); }
  double max_eigenvalue() const { return eigvals.size() ? eigvals(0) : 0.0; }

  double rank_threshold() const {
    return kRankRel * std::max(max_eigenvalue(), 0.0);
  }

  // Modes with gamma above the rank threshold (spectrum is sorted).
  Index retained_modes() const {
    const double tau = rank_threshold();
    Index r = 0;
    while (r < eigvals.size() && eigvals(r) > tau) ++r;
    return r;
  }
};

namespace detail {

inline void fix_column_signs(Matrix& u) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) u.col(j) = -u.col(j);
  }
}

// Descending symmetric eigendecomposition without any clamping; used where
// the operand may be indefinite (e.g. the reduced KPCA problem).
inline SpectralDecomposition sym_eig_unclamped(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("sym_eig: matrix must be square");
  if (!m.allFinite())
    throw std::invalid_argument("sym_eig: non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale)
    throw std::invalid_argument("sym_eig: matrix is not symmetric (asymmetry " +
                                std::to_string(asym / scale) + " relative)");
  Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw numerical_error("sym_eig: eigensolver failed to converge (matrix scale " +
                          std::to_string(scale) + ")");
  SpectralDecomposition dec;
  dec.eigvals = solver.eigenvalues().reverse();
  dec.eigvecs = solver.eigenvectors().rowwise().reverse();
  fix_column_signs(dec.eigvecs);
  return dec;
}

}  // namespace detail

// Eigendecomposition for PSD-by-construction matrices (Gram and centered Gram
// matrices). Round-off negatives and eigenvalues below
// eps_clamp = 1e-12 * max(gamma_max, 1) are zeroed; a spectrum below
// -1e-6 * max(gamma_max, 1) means the input was not PSD and is an error.
inline SpectralDecomposition sym_eig(const Matrix& m) {
  SpectralDecomposition dec = detail::sym_eig_unclamped(m);
  const double gmax = dec.eigvals.size() ? std::abs(dec.eigvals(0)) : 0.0;
  const double eps_clamp = kClampRel * std::max(gmax, 1.0);
  const double guard = kPsdGuardRel * std::max(gmax, 1.0);
  for (Index i = 0; i < dec.eigvals.size(); ++i) {
    if (dec.eigvals(i) < -guard)
      throw numerical_error("sym_eig: matrix is not numerically PSD (eigenvalue " +
                            std::to_string(dec.eigvals(i)) + ")");
    if (dec.eigvals(i) < eps_clamp) dec.eigvals(i) = 0.0;
  }
  return dec;
}

// Solves (M + lambda I) z = b through the decomposition of M:
// z = U (D + lambda I)^{-1} U^T b.
inline Vector shifted_solve(const SpectralDecomposition& dec, double lambda,
                            const Vector& b) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("shifted_solve: lambda must be finite and >= 0");
  if (b.size() != dec.size())
    throw std::invalid_argument("shifted_solve: size mismatch");
  validate_vector(b, "rhs");
  if (lambda == 0.0 && dec.eigvals.size() &&
      dec.eigvals(dec.eigvals.size() - 1) <= 0.0)
    throw numerical_error("shifted_solve: singular system at lambda = 0");
  Vector t = dec.eigvecs.transpose() * b;
  t.array() /= (dec.eigvals.array() + lambda);
  return dec.eigvecs * t;
}

// Output of the generalized KPCA problem Kc B Kc V = Kc V D, reduced on the
// retained spectral range of Kc. Columns a_j of `coefficients` satisfy
// a_j^T Kc a_k = delta_jk, and Kc B Kc a_j = d_j Kc a_j.
struct KpcaEig {
  Vector eigvals;       // d, descending; length = retained rank of Kc
  Matrix coefficients;  // n x rank, columns a_j
};

// Reduction: with Kc = U Gamma U^T restricted to gamma > tau_rank, substitute
// V = U Gamma^{-1/2} W to get the ordinary symmetric problem
// Gamma^{1/2} U^T B U Gamma^{1/2} w = d w, then map back a_j = U Gamma^{-1/2} w_j.
inline KpcaEig generalized_kpca_eig(const Matrix& kc, const Vector& b_diag) {
  if (kc.rows() != b_diag.size())
    throw std::invalid_argument("generalized_kpca_eig: size mismatch");
  validate_vector(b_diag, "B diagonal");
  SpectralDecomposition dec = sym_eig(kc);
  const Index r = dec.retained_modes();
  if (r == 0)
    throw numerical_error("generalized_kpca_eig: degenerate centered Gram");
  Matrix u = dec.eigvecs.leftCols(r);
  Vector sqrt_g = dec.eigvals.head(r).cwiseSqrt();
  Matrix inner = sqrt_g.asDiagonal() * (u.transpose() * b_diag.asDiagonal() * u) *
                 sqrt_g.asDiagonal();
  // B may be indefinite (shrinkage weights can go negative), so no clamping.
  SpectralDecomposition red = detail::sym_eig_unclamped(inner);
  KpcaEig out;
  out.eigvals = red.eigvals;
  out.coefficients = u * sqrt_g.cwiseInverse().asDiagonal() * red.eigvecs;
  return out;
}

}  // namespace kmshrink
