#pragma once

#include <stdexcept>

#include "kmshrink/kernels.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

// Gram matrix centered against the shrinkage mean sum_j beta_j phi(x_j):
//   Kc_ij = K_ij - beta^T K_{.i} - K_{.j}^T beta + beta^T K beta.
// Records the beta it was built with so test centering cannot silently pair
// a different weight vector.
struct CenteredGram {
  Matrix values;
  Vector weights_used;
};

inline CenteredGram center_train(const Matrix& k, const Vector& beta) {
  if (k.rows() != k.cols())
    throw std::invalid_argument("center_train: Gram matrix must be square");
  if (beta.size() != k.rows())
    throw std::invalid_argument("center_train: weight length mismatch");
  validate_vector(beta, "centering weights");
  const Vector s = k * beta;          // s_i = beta^T K_{.i}
  const double q = beta.dot(s);       // beta^T K beta
  // upper triangle mirrored for exact symmetry
  Matrix kc(k.rows(), k.cols());
  for (Index i = 0; i < k.rows(); ++i)
    for (Index j = i; j < k.cols(); ++j) {
      double v = k(i, j) - s(i) - s(j) + q;
      kc(i, j) = v;
      kc(j, i) = v;
    }
  return {std::move(kc), beta};
}

// Centered test kernel Lc = L - B_t K - L B + B_t K B with B the n x n
// stack of beta columns and B_t the m x n stack of beta rows; entrywise
//   Lc_ij = L_ij - (K beta)_j - (L beta)_i + beta^T K beta.
inline Matrix center_test(const Matrix& l, const Matrix& k, const Vector& beta) {
  if (k.rows() != k.cols())
    throw std::invalid_argument("center_test: Gram matrix must be square");
  if (l.cols() != k.rows())
    throw std::invalid_argument("center_test: cross-Gram shape mismatch");
  if (beta.size() != k.rows())
    throw std::invalid_argument("center_test: weight length mismatch");
  const Vector s = k * beta;
  const Vector r = l * beta;
  const double q = beta.dot(s);
  Matrix lc = l;
  lc.rowwise() -= s.transpose();
  lc.colwise() -= r;
  lc.array() += q;
  return lc;
}

// Diagonal term of the centered test kernel for a single point:
// |phi(z) - sum_j beta_j phi(x_j)|^2 = k(z,z) - 2 k_z^T beta + beta^T K beta.
inline double centered_test_diag(const Vector& z, const Matrix& x,
                                 const KernelSpec& kernel, const Vector& beta) {
  if (beta.size() != x.rows())
    throw std::invalid_argument("centered_test_diag: weight length mismatch");
  Matrix zrow = z.transpose();
  Matrix kz = cross_gram(kernel, zrow, x);  // 1 x n
  Matrix k = gram(kernel, x);
  double kzz = eval_kernel(kernel, z, z);
  return kzz - 2.0 * kz.row(0).dot(beta) + beta.dot(k * beta);
}

}  // namespace kmshrink
