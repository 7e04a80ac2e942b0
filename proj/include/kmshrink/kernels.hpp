#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmshrink/types.hpp"

namespace kmshrink {

enum class KernelFamily { Lin, Poly2, Poly3, Rbf };

inline const char* family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::Lin: return "lin";
    case KernelFamily::Poly2: return "poly2";
    case KernelFamily::Poly3: return "poly3";
    case KernelFamily::Rbf: return "rbf";
  }
  return "?";
}

inline KernelFamily family_from_name(const std::string& name) {
  if (name == "lin" || name == "linear") return KernelFamily::Lin;
  if (name == "poly2") return KernelFamily::Poly2;
  if (name == "poly3") return KernelFamily::Poly3;
  if (name == "rbf" || name == "gaussian") return KernelFamily::Rbf;
  throw std::invalid_argument("unknown kernel family: " + name);
}

// k(x,x') for one of the four families:
//   lin    x'y
//   poly2  (x'y + 1)^2
//   poly3  (x'y + 1)^3
//   rbf    exp(-|x-y|^2 / (2 sigma^2)),  bandwidth_sq = sigma^2
struct KernelSpec {
  KernelFamily family = KernelFamily::Rbf;
  double bandwidth_sq = 1.0;  // used by rbf only

  void validate() const {
    if (family == KernelFamily::Rbf &&
        !(bandwidth_sq > 0.0 && std::isfinite(bandwidth_sq)))
      throw std::invalid_argument("rbf kernel requires bandwidth_sq > 0");
  }

  bool operator==(const KernelSpec& o) const {
    if (family != o.family) return false;
    return family != KernelFamily::Rbf || bandwidth_sq == o.bandwidth_sq;
  }
};

inline KernelSpec lin_kernel() { return {KernelFamily::Lin, 1.0}; }
inline KernelSpec poly2_kernel() { return {KernelFamily::Poly2, 1.0}; }
inline KernelSpec poly3_kernel() { return {KernelFamily::Poly3, 1.0}; }
inline KernelSpec rbf_kernel(double bandwidth_sq) {
  KernelSpec s{KernelFamily::Rbf, bandwidth_sq};
  s.validate();
  return s;
}

namespace detail {

inline double kernel_from_parts(const KernelSpec& spec, double dot,
                                double dist_sq) {
  switch (spec.family) {
    case KernelFamily::Lin: return dot;
    case KernelFamily::Poly2: {
      double t = dot + 1.0;
      return t * t;
    }
    case KernelFamily::Poly3: {
      double t = dot + 1.0;
      return t * t * t;
    }
    case KernelFamily::Rbf:
      return std::exp(-dist_sq / (2.0 * spec.bandwidth_sq));
  }
  return 0.0;
}

}  // namespace detail

inline double eval_kernel(const KernelSpec& spec, const Vector& x,
                          const Vector& y) {
  spec.validate();
  if (x.size() != y.size())
    throw std::invalid_argument("eval_kernel: dimension mismatch");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("eval_kernel: non-finite input");
  if (spec.family == KernelFamily::Rbf)
    return detail::kernel_from_parts(spec, 0.0, (x - y).squaredNorm());
  return detail::kernel_from_parts(spec, x.dot(y), 0.0);
}

// Gram matrix K_ij = k(x_i, x_j). Only the upper triangle is evaluated; the
// lower triangle is mirrored, so the result is exactly symmetric.
inline Matrix gram(const KernelSpec& spec, const Matrix& x) {
  spec.validate();
  validate_data(x);
  const Index n = x.rows();
  Matrix k(n, n);
  if (spec.family == KernelFamily::Rbf) {
    Vector sq = x.rowwise().squaredNorm();
    for (Index i = 0; i < n; ++i) {
      k(i, i) = 1.0;
      for (Index j = i + 1; j < n; ++j) {
        double dist_sq = std::max(0.0, sq(i) + sq(j) - 2.0 * x.row(i).dot(x.row(j)));
        k(i, j) = detail::kernel_from_parts(spec, 0.0, dist_sq);
        k(j, i) = k(i, j);
      }
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      k(i, i) = detail::kernel_from_parts(spec, x.row(i).squaredNorm(), 0.0);
      for (Index j = i + 1; j < n; ++j) {
        k(i, j) = detail::kernel_from_parts(spec, x.row(i).dot(x.row(j)), 0.0);
        k(j, i) = k(i, j);
      }
    }
  }
  return k;
}

// L_ij = k(x_test_i, x_train_j), shape m x n.
inline Matrix cross_gram(const KernelSpec& spec, const Matrix& x_test,
                         const Matrix& x_train) {
  spec.validate();
  validate_data(x_test, "test matrix");
  validate_data(x_train, "train matrix");
  if (x_test.cols() != x_train.cols())
    throw std::invalid_argument("cross_gram: dimension mismatch");
  const Index m = x_test.rows();
  const Index n = x_train.rows();
  Matrix l(m, n);
  if (spec.family == KernelFamily::Rbf) {
    Vector sq_test = x_test.rowwise().squaredNorm();
    Vector sq_train = x_train.rowwise().squaredNorm();
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) {
        double dist_sq = std::max(
            0.0, sq_test(i) + sq_train(j) - 2.0 * x_test.row(i).dot(x_train.row(j)));
        l(i, j) = detail::kernel_from_parts(spec, 0.0, dist_sq);
      }
  } else {
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j)
        l(i, j) = detail::kernel_from_parts(spec, x_test.row(i).dot(x_train.row(j)), 0.0);
  }
  return l;
}

// sigma^2 = median{ |x_i - x_j|^2 } over unordered pairs i < j (diagonal
// excluded). Even-length lists take the lower median so the value is
// platform-independent.
inline double median_heuristic(const Matrix& x) {
  validate_data(x);
  const Index n = x.rows();
  if (n < 2)
    throw std::invalid_argument("median_heuristic: needs at least two samples");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      dists.push_back((x.row(i) - x.row(j)).squaredNorm());
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>((dists.size() - 1) / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  if (!(*mid > 0.0))
    throw std::invalid_argument("median_heuristic: degenerate sample");
  return *mid;
}

}  // namespace kmshrink
