#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace kmshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Thrown when a computation fails for numerical reasons (singular system,
// degenerate Gram, non-convergent eigensolver). Input-validation failures
// throw std::invalid_argument instead; the CLI maps the two to exit codes
// 2 and 1 respectively.
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Sample matrix: row i = observation x_i, n >= 1, d >= 1, finite entries.
inline void validate_data(const Matrix& x, const char* what = "data matrix") {
  if (x.rows() < 1 || x.cols() < 1)
    throw std::invalid_argument(std::string(what) + ": must be non-empty");
  if (!x.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

inline void validate_vector(const Vector& v, const char* what = "vector") {
  if (!v.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

// The paper's 1_n: uniform weight vector with entries 1/n.
inline Vector uniform_weights(Index n) {
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

inline double relative_diff(double a, double b) {
  double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace kmshrink
