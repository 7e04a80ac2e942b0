#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kmshrink/kernels.hpp"
#include "kmshrink/spectral.hpp"
#include "test_util.hpp"

using namespace kmshrink;
using kmtest::mat;
using kmtest::vec;

namespace {

void check_decomposition(const Matrix& m, const SpectralDecomposition& dec) {
  Matrix utu = dec.eigvecs.transpose() * dec.eigvecs;
  CHECK(kmtest::max_abs_diff(utu, Matrix::Identity(m.rows(), m.cols())) < 1e-8);
  Matrix rebuilt = dec.eigvecs * dec.eigvals.asDiagonal() * dec.eigvecs.transpose();
  double rel = (rebuilt - m).norm() / std::max(m.norm(), 1e-30);
  CHECK(rel < 1e-8);
  for (Index i = 0; i + 1 < dec.eigvals.size(); ++i)
    CHECK(dec.eigvals(i) >= dec.eigvals(i + 1));
}

}  // namespace

TEST_CASE("sym_eig identity and diagonal cases") {
  SpectralDecomposition dec = sym_eig(Matrix::Identity(3, 3));
  CHECK(dec.eigvals.isApproxToConstant(1.0, 1e-14));
  check_decomposition(Matrix::Identity(3, 3), dec);

  Matrix d = mat(2, 2, {3, 0, 0, 1});
  SpectralDecomposition dd = sym_eig(d);
  CHECK_THAT(dd.eigvals(0), Catch::Matchers::WithinAbs(3.0, 1e-14));
  CHECK_THAT(dd.eigvals(1), Catch::Matchers::WithinAbs(1.0, 1e-14));
  // axis vectors with the sign convention: largest component positive
  CHECK_THAT(std::abs(dd.eigvecs(0, 0)), Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK(dd.eigvecs(0, 0) > 0.0);
  CHECK(dd.eigvecs(1, 1) > 0.0);
}

TEST_CASE("sym_eig reconstructs random symmetric PSD matrices") {
  kmshrink::Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix m = kmtest::random_psd(rng, 8);
    SpectralDecomposition dec = sym_eig(m);
    check_decomposition(m, dec);
    CHECK(dec.eigvals.minCoeff() >= 0.0);
  }
}

TEST_CASE("sym_eig input validation") {
  Matrix asym = mat(2, 2, {1, 0.5, -0.5, 1});
  CHECK_THROWS_AS(sym_eig(asym), std::invalid_argument);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(sym_eig(bad), std::invalid_argument);
  // clearly indefinite input is rejected by the PSD guard
  Matrix indef = mat(2, 2, {1, 0, 0, -1});
  CHECK_THROWS_AS(sym_eig(indef), numerical_error);
}

TEST_CASE("eigenvalue clamp only zeroes the round-off tail") {
  kmshrink::Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    // rank-deficient PSD: A A^T with A n x r, r < n
    Matrix a = kmtest::random_data(rng, 10, 4);
    Matrix m = a * a.transpose();
    SpectralDecomposition dec = sym_eig(m);
    double eps_clamp = kClampRel * std::max(dec.max_eigenvalue(), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> raw(m);
    Vector raw_desc = raw.eigenvalues().reverse();
    for (Index i = 0; i < dec.size(); ++i) {
      if (raw_desc(i) >= 0.0)
        CHECK(std::abs(dec.eigvals(i) - raw_desc(i)) <= eps_clamp);
      else
        CHECK(dec.eigvals(i) == 0.0);  // round-off negatives move up to zero
    }
  }
}

TEST_CASE("shifted_solve worked examples") {
  SpectralDecomposition eye = sym_eig(Matrix::Identity(2, 2));
  Vector z = shifted_solve(eye, 1.0, vec({2, 2}));
  CHECK_THAT(z(0), Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK_THAT(z(1), Catch::Matchers::WithinAbs(1.0, 1e-14));

  SpectralDecomposition diag = sym_eig(mat(2, 2, {2, 0, 0, 1}));
  Vector w = shifted_solve(diag, 1.0, vec({1, 1}));
  CHECK_THAT(w(0), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-14));
  CHECK_THAT(w(1), Catch::Matchers::WithinAbs(0.5, 1e-14));
}

TEST_CASE("shifted_solve agrees with a dense direct solve") {
  kmshrink::Rng rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    Index n = 5 + static_cast<Index>(rng.index(46));
    Matrix m = kmtest::random_psd(rng, n);
    SpectralDecomposition dec = sym_eig(m);
    double lambda = std::pow(10.0, rng.uniform(-3.0, 1.0));
    Vector b = kmtest::random_data(rng, n, 1).col(0);
    Vector z = shifted_solve(dec, lambda, b);
    Matrix shifted = m;
    shifted.diagonal().array() += lambda;
    Vector direct = shifted.ldlt().solve(b);
    CHECK((z - direct).norm() <= 1e-8 * std::max(direct.norm(), 1.0));
    CHECK((shifted * z - b).norm() <= 1e-8 * b.norm());
  }
}

TEST_CASE("shifted_solve rejects singular systems at lambda = 0") {
  Matrix a = mat(2, 1, {1, 2});
  SpectralDecomposition dec = sym_eig(Matrix(a * a.transpose()));
  CHECK_THROWS_AS(shifted_solve(dec, 0.0, vec({1, 0})), numerical_error);
  // nonsingular at lambda = 0 is fine
  SpectralDecomposition eye = sym_eig(Matrix::Identity(2, 2));
  Vector z = shifted_solve(eye, 0.0, vec({3, 4}));
  CHECK_THAT(z(0), Catch::Matchers::WithinAbs(3.0, 1e-14));
}

TEST_CASE("generalized_kpca_eig reduces to standard kernel PCA for B = I/n") {
  kmshrink::Rng rng(53);
  Matrix x = kmtest::random_data(rng, 9, 3);
  Matrix k = gram(rbf_kernel(2.0), x);
  Matrix h = Matrix::Identity(9, 9) - Matrix::Constant(9, 9, 1.0 / 9.0);
  Matrix kc = h * k * h;
  kc = 0.5 * (kc + kc.transpose());

  KpcaEig eig = generalized_kpca_eig(kc, uniform_weights(9));
  SpectralDecomposition dec = sym_eig(kc);
  const Index r = dec.retained_modes();
  REQUIRE(eig.eigvals.size() == r);
  for (Index j = 0; j < r; ++j)
    CHECK_THAT(eig.eigvals(j),
               Catch::Matchers::WithinRel(dec.eigvals(j) / 9.0, 1e-10));
}

TEST_CASE("generalized_kpca_eig two-point hand case") {
  Matrix kc = mat(2, 2, {0.5, -0.5, -0.5, 0.5});
  KpcaEig eig = generalized_kpca_eig(kc, uniform_weights(2));
  REQUIRE(eig.eigvals.size() == 1);  // single retained mode
  CHECK_THAT(eig.eigvals(0), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("generalized_kpca_eig orthonormality and eigen relation") {
  kmshrink::Rng rng(61);
  for (int rep = 0; rep < 8; ++rep) {
    Index n = 5 + static_cast<Index>(rng.index(8));
    Matrix x = kmtest::random_data(rng, n, 3);
    Matrix k = gram(rbf_kernel(1.0), x);
    Matrix h = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
    Matrix kc = h * k * h;
    kc = 0.5 * (kc + kc.transpose());
    Vector b = kmtest::random_data(rng, n, 1).col(0).cwiseAbs() / double(n);
    KpcaEig eig = generalized_kpca_eig(kc, b);
    Matrix overlap = eig.coefficients.transpose() * kc * eig.coefficients;
    CHECK(kmtest::max_abs_diff(overlap,
                               Matrix::Identity(eig.eigvals.size(),
                                                eig.eigvals.size())) < 1e-8);
    // Kc B Kc a_j = d_j Kc a_j on retained modes
    Matrix lhs = kc * b.asDiagonal() * kc * eig.coefficients;
    Matrix rhs = kc * eig.coefficients * eig.eigvals.asDiagonal();
    double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    CHECK(kmtest::max_abs_diff(lhs, rhs) / scale < 1e-7);
  }
}

TEST_CASE("generalized_kpca_eig rejects a numerically zero Gram") {
  Matrix zero = Matrix::Zero(3, 3);
  CHECK_THROWS_WITH(generalized_kpca_eig(zero, uniform_weights(3)),
                    Catch::Matchers::ContainsSubstring("degenerate"));
}
