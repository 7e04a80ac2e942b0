#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "kmshrink/kernels.hpp"
#include "kmshrink/rng.hpp"
#include "kmshrink/types.hpp"

namespace kmtest {

using kmshrink::Index;
using kmshrink::Matrix;
using kmshrink::Vector;

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Matrix mat(Index rows, Index cols, std::initializer_list<double> xs) {
  REQUIRE(static_cast<Index>(xs.size()) == rows * cols);
  Matrix m(rows, cols);
  Index i = 0;
  for (double x : xs) {
    m(i / cols, i % cols) = x;
    ++i;
  }
  return m;
}

inline Matrix random_data(kmshrink::Rng& rng, Index n, Index d,
                          double scale = 1.0) {
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = scale * rng.normal();
  return x;
}

// Random PSD matrix A A^T + ridge I.
inline Matrix random_psd(kmshrink::Rng& rng, Index n, double ridge = 0.0) {
  Matrix a = random_data(rng, n, n);
  Matrix m = a * a.transpose();
  m.diagonal().array() += ridge;
  return m;
}

inline const std::array<kmshrink::KernelSpec, 4>& all_kernels() {
  static const std::array<kmshrink::KernelSpec, 4> kernels{
      kmshrink::lin_kernel(), kmshrink::poly2_kernel(),
      kmshrink::poly3_kernel(), kmshrink::rbf_kernel(1.5)};
  return kernels;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace kmtest
