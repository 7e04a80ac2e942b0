#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kmshrink/kernels.hpp"
#include "kmshrink/spectral.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

// A kernel expansion sum_j beta_j k(x_j, .). Weights are plain coefficients;
// all RKHS geometry goes through Gram / cross-Gram evaluations so the feature
// space never has to be materialized.
struct KernelMeanEstimate {
  Matrix points;   // expansion support, row per point
  Vector weights;  // beta
  KernelSpec kernel;

  void validate() const {
    validate_data(points, "estimate support");
    validate_vector(weights, "estimate weights");
    if (points.rows() != weights.size())
      throw std::invalid_argument("estimate: support/weight length mismatch");
    kernel.validate();
  }
};

// Shrinkage direction f*. Absent expansion means f* = 0.
struct ShrinkageTarget {
  std::optional<KernelMeanEstimate> expansion;
};

// Standard empirical kernel mean: weights exactly 1/n.
inline KernelMeanEstimate kme(const Matrix& x, const KernelSpec& kernel) {
  validate_data(x);
  kernel.validate();
  return {x, uniform_weights(x.rows()), kernel};
}

// Simple shrinkage: beta = (1/(1+lambda)) 1_n, i.e. (1-alpha) mu_hat with
// alpha = lambda/(1+lambda). lambda = +inf yields the zero function.
inline KernelMeanEstimate s_kmse(const Matrix& x, const KernelSpec& kernel,
                                 double lambda) {
  validate_data(x);
  kernel.validate();
  if (!(lambda >= 0.0))  // rejects negatives and NaN; +inf allowed
    throw std::invalid_argument("s_kmse: lambda must be >= 0");
  double scale = std::isinf(lambda) ? 0.0 : 1.0 / (1.0 + lambda);
  return {x, Vector(scale * uniform_weights(x.rows())), kernel};
}

// Flexible shrinkage weights by direct dense solve of
// (K + lambda I) beta = K 1_n. Kept independent of the spectral path so the
// two can cross-check each other.
inline Vector f_kmse(const Matrix& k, double lambda) {
  if (k.rows() != k.cols())
    throw std::invalid_argument("f_kmse: Gram matrix must be square");
  if (!k.allFinite()) throw std::invalid_argument("f_kmse: non-finite Gram");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("f_kmse: lambda must be finite and >= 0");
  const Index n = k.rows();
  Vector rhs = k * uniform_weights(n);
  if (lambda == 0.0) {
    Eigen::FullPivLU<Matrix> lu(k);
    if (!lu.isInvertible())
      throw numerical_error("f_kmse: singular system at lambda = 0");
    return lu.solve(rhs);
  }
  Matrix shifted = k;
  shifted.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success)
    throw numerical_error("f_kmse: factorization failed");
  return ldlt.solve(rhs);
}

// Same weights through the eigendecomposition of K:
// beta = U (D + lambda I)^{-1} D U^T 1_n, the spectral-filter form with
// per-mode factors gamma/(gamma+lambda).
inline Vector f_kmse_spectral(const SpectralDecomposition& dec, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("f_kmse_spectral: lambda must be finite and > 0");
  Vector t = dec.eigvecs.transpose() * uniform_weights(dec.size());
  t.array() *= dec.eigvals.array() / (dec.eigvals.array() + lambda);
  return dec.eigvecs * t;
}

namespace detail {

inline bool same_row(const Matrix& a, Index i, const Matrix& b, Index j) {
  return a.row(i) == b.row(j);
}

}  // namespace detail

// mu_alpha = alpha f* + (1-alpha) mu_hat. The output support is the union of
// both supports; exactly duplicated points are merged by summing weights so
// expansions stay canonical.
inline KernelMeanEstimate shrink_toward(const KernelMeanEstimate& estimate,
                                        const ShrinkageTarget& target,
                                        double alpha) {
  estimate.validate();
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("shrink_toward: alpha must be in [0, 1)");
  if (!target.expansion) {
    KernelMeanEstimate out = estimate;
    out.weights *= (1.0 - alpha);
    return out;
  }
  const KernelMeanEstimate& fstar = *target.expansion;
  fstar.validate();
  if (!(fstar.kernel == estimate.kernel))
    throw std::invalid_argument("shrink_toward: kernel mismatch");
  if (alpha == 0.0) return estimate;

  std::vector<Index> extra;  // f* points not present in the estimate support
  Vector merged = (1.0 - alpha) * estimate.weights;
  for (Index j = 0; j < fstar.points.rows(); ++j) {
    bool found = false;
    for (Index i = 0; i < estimate.points.rows(); ++i) {
      if (detail::same_row(estimate.points, i, fstar.points, j)) {
        merged(i) += alpha * fstar.weights(j);
        found = true;
        break;
      }
    }
    if (!found) extra.push_back(j);
  }
  Matrix points(estimate.points.rows() + static_cast<Index>(extra.size()),
                estimate.points.cols());
  Vector weights(points.rows());
  points.topRows(estimate.points.rows()) = estimate.points;
  weights.head(estimate.points.rows()) = merged;
  for (std::size_t k = 0; k < extra.size(); ++k) {
    points.row(estimate.points.rows() + static_cast<Index>(k)) =
        fstar.points.row(extra[k]);
    weights(estimate.points.rows() + static_cast<Index>(k)) =
        alpha * fstar.weights(extra[k]);
  }
  return {std::move(points), std::move(weights), estimate.kernel};
}

// <a, b>_H = beta_a^T L beta_b with L the cross-Gram of the supports.
inline double rkhs_inner(const KernelMeanEstimate& a,
                         const KernelMeanEstimate& b) {
  a.validate();
  b.validate();
  if (!(a.kernel == b.kernel))
    throw std::invalid_argument("rkhs_inner: kernel mismatch");
  Matrix l = cross_gram(a.kernel, a.points, b.points);
  return a.weights.dot(l * b.weights);
}

inline double rkhs_dist_sq(const KernelMeanEstimate& a,
                           const KernelMeanEstimate& b) {
  double d = rkhs_inner(a, a) - 2.0 * rkhs_inner(a, b) + rkhs_inner(b, b);
  return std::max(0.0, d);
}

}  // namespace kmshrink
