#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "kmshrink/kernels.hpp"
#include "kmshrink/model_selection.hpp"
#include "test_util.hpp"

using namespace kmshrink;
using kmtest::mat;

namespace {

Matrix random_gram(kmshrink::Rng& rng, Index n, const KernelSpec& spec) {
  return gram(spec, kmtest::random_data(rng, n, 3));
}

}  // namespace

TEST_CASE("gram_stats worked examples") {
  GramStats eye = gram_stats(Matrix::Identity(3, 3));
  CHECK_THAT(eye.rho, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
  CHECK(eye.varrho == 1.0);

  GramStats ones = gram_stats(Matrix::Ones(4, 4));
  CHECK(ones.rho == 1.0);
  CHECK(ones.varrho == 1.0);

  GramStats half = gram_stats(mat(2, 2, {1, 0.5, 0.5, 1}));
  CHECK(half.rho == 0.75);
  CHECK(half.varrho == 1.0);
}

TEST_CASE("varrho >= rho on PSD Gram matrices") {
  kmshrink::Rng rng(101);
  for (int rep = 0; rep < 40; ++rep) {
    Index n = 2 + static_cast<Index>(rng.index(18));
    const auto& spec = kmtest::all_kernels()[rng.index(4)];
    GramStats s = gram_stats(random_gram(rng, n, spec));
    CHECK(s.varrho >= s.rho - 1e-10 * std::abs(s.varrho));
  }
}

TEST_CASE("s_kmse_select analytic optimum") {
  // no within-sample variance: no shrinkage
  SKmseSelection flat = s_kmse_select(gram_stats(Matrix::Ones(5, 5)));
  CHECK(flat.lambda == 0.0);
  CHECK(flat.alpha == 0.0);

  // rho = 0.75, varrho = 1, n = 2: lambda = 1, alpha = 1/2
  SKmseSelection worked = s_kmse_select(gram_stats(mat(2, 2, {1, 0.5, 0.5, 1})));
  CHECK(worked.lambda == 1.0);
  CHECK(worked.alpha == 0.5);
  CHECK_FALSE(worked.full_shrinkage);

  // identity Gram (n = 3): alpha reaches 1, the full-shrinkage branch
  SKmseSelection degenerate = s_kmse_select(gram_stats(Matrix::Identity(3, 3)));
  CHECK(degenerate.full_shrinkage);
  CHECK(degenerate.alpha == 1.0);
  CHECK(std::isinf(degenerate.lambda));

  CHECK_THROWS_AS(s_kmse_select(gram_stats(Matrix::Identity(1, 1))),
                  std::invalid_argument);
}

TEST_CASE("s_kmse_loocv_poly reference values") {
  GramStats stats;
  stats.rho = 0.75;
  stats.varrho = 1.0;
  stats.n = 2;
  // hand expansion: LOOCV(alpha) = alpha^2 - alpha + 1
  CHECK_THAT(s_kmse_loocv_poly(stats, 0.0), Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK_THAT(s_kmse_loocv_poly(stats, 0.5), Catch::Matchers::WithinAbs(0.75, 1e-14));
  CHECK_THAT(s_kmse_loocv_poly(stats, 1.0), Catch::Matchers::WithinAbs(1.0, 1e-14));

  // alpha = 0 reduces to the plain KME leave-one-out score
  kmshrink::Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    GramStats s = gram_stats(random_gram(rng, 6, rbf_kernel(1.0)));
    double n = static_cast<double>(s.n);
    double expected = n * n * (s.varrho - s.rho) / ((n - 1.0) * (n - 1.0));
    CHECK_THAT(s_kmse_loocv_poly(s, 0.0), Catch::Matchers::WithinRel(expected, 1e-12));
  }

  // varrho = rho: minimized at alpha = 0
  GramStats equal;
  equal.rho = equal.varrho = 0.8;
  equal.n = 5;
  for (double a : {0.1, 0.4, 0.9})
    CHECK(s_kmse_loocv_poly(equal, a) >= s_kmse_loocv_poly(equal, 0.0) - 1e-14);
}

TEST_CASE("analytic alpha matches the grid argmin of the proof quadratic") {
  kmshrink::Rng rng(103);
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    Index n = 2 + static_cast<Index>(rng.index(14));
    const auto& spec = kmtest::all_kernels()[rng.index(4)];
    GramStats s = gram_stats(random_gram(rng, n, spec));
    SKmseSelection sel = s_kmse_select(s);
    double best_alpha = 0.0, best = s_kmse_loocv_poly(s, 0.0);
    for (int i = 1; i <= 10000; ++i) {
      double a = i * 1e-4;
      double v = s_kmse_loocv_poly(s, a);
      if (v < best) {
        best = v;
        best_alpha = a;
      }
    }
    double analytic = sel.full_shrinkage ? 1.0 : sel.alpha;
    CHECK(std::abs(analytic - best_alpha) <= 1e-4 + 1e-12);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("closed-form LOOCV matches the naive fixed-point oracle") {
  kmshrink::Rng rng(107);
  for (Index n : {3, 5, 10, 20}) {
    for (const auto& spec : kmtest::all_kernels()) {
      Matrix k = random_gram(rng, n, spec);
      SpectralDecomposition dec = sym_eig(k);
      for (double lambda_rel : {0.01, 0.1, 1.0, 10.0}) {
        double lambda = lambda_rel * dec.max_eigenvalue();
        double fast = f_kmse_loocv_score(dec, lambda);
        double naive = f_kmse_loocv_naive(k, lambda);
        CHECK(relative_diff(fast, naive) < 1e-6);
      }
    }
  }
}

TEST_CASE("LOOCV score limits and sign") {
  kmshrink::Rng rng(109);
  Matrix k = random_gram(rng, 10, rbf_kernel(1.0));
  SpectralDecomposition dec = sym_eig(k);
  GramStats stats = gram_stats(k);

  // lambda -> inf: beta -> 0 and the score approaches varrho
  double at_large = f_kmse_loocv_score(dec, 1e8 * dec.max_eigenvalue());
  CHECK(relative_diff(at_large, stats.varrho) < 1e-4);
  double naive_large = f_kmse_loocv_naive(k, 1e8 * dec.max_eigenvalue());
  CHECK(relative_diff(naive_large, stats.varrho) < 1e-4);
  double refit_large = f_kmse_loocv_refit(dec, 1e8 * dec.max_eigenvalue());
  CHECK(relative_diff(refit_large, stats.varrho) < 1e-4);

  for (double lambda : {1e-4, 1e-2, 1.0, 1e2}) {
    CHECK(f_kmse_loocv_score(dec, lambda * dec.max_eigenvalue()) >= 0.0);
    CHECK(f_kmse_loocv_refit(dec, lambda * dec.max_eigenvalue()) >= 0.0);
  }
}

TEST_CASE("deleted-refit LOOCV matches its brute-force oracle") {
  kmshrink::Rng rng(211);
  for (Index n : {2, 3, 5, 10, 20}) {
    for (const auto& spec : kmtest::all_kernels()) {
      Matrix k = random_gram(rng, n, spec);
      SpectralDecomposition dec = sym_eig(k);
      for (double rel : {0.001, 0.01, 0.1, 1.0, 10.0}) {
        double lambda = rel * dec.max_eigenvalue();
        double fast = f_kmse_loocv_refit(dec, lambda);
        double naive = f_kmse_loocv_refit_naive(k, lambda);
        CHECK(relative_diff(fast, naive) < 1e-8);
      }
    }
  }
}

TEST_CASE("deleted-refit LOOCV meets the uniform deleted mean at lambda -> 0") {
  // at a vanishing shrinkage the deleted refit is the uniform mean of the
  // n-1 remaining points, whose score is the alpha = 0 value of the
  // simple-shrinkage quadratic
  kmshrink::Rng rng(223);
  for (int rep = 0; rep < 6; ++rep) {
    Matrix k = random_gram(rng, 8, rbf_kernel(1.0));
    k.diagonal().array() += 0.05;  // keep K comfortably nonsingular
    SpectralDecomposition dec = sym_eig(k);
    double refit = f_kmse_loocv_refit(dec, 1e-10 * dec.max_eigenvalue());
    double kme_loo = s_kmse_loocv_poly(gram_stats(k), 0.0);
    CHECK(relative_diff(refit, kme_loo) < 1e-6);
  }
}

TEST_CASE("LOOCV score is continuous in lambda") {
  kmshrink::Rng rng(113);
  Matrix k = random_gram(rng, 12, poly2_kernel());
  SpectralDecomposition dec = sym_eig(k);
  for (double rel : {1e-3, 1e-1, 1.0, 10.0}) {
    double lambda = rel * dec.max_eigenvalue();
    double a = f_kmse_loocv_score(dec, lambda);
    double b = f_kmse_loocv_score(dec, lambda * (1.0 + 1e-9));
    CHECK(std::abs(a - b) <= 1e-6 * std::abs(a));
  }
}

TEST_CASE("naive oracle rejects n = 1 and works on duplicate points") {
  CHECK_THROWS_AS(f_kmse_loocv_naive(Matrix::Identity(1, 1), 1.0),
                  std::invalid_argument);
  // exactly singular Gram: both paths agree (pseudo-inverse convention)
  Matrix dup = Matrix::Ones(2, 2);
  double naive = f_kmse_loocv_naive(dup, 1.0);
  double fast = f_kmse_loocv_score(sym_eig(dup), 1.0);
  CHECK_THAT(naive, Catch::Matchers::WithinAbs(0.25, 1e-12));  // hand value
  CHECK(relative_diff(fast, naive) < 1e-10);
}

TEST_CASE("f_kmse_select profile invariants") {
  kmshrink::Rng rng(127);
  Matrix x = kmtest::random_data(rng, 18, 3);
  Matrix k = gram(rbf_kernel(median_heuristic(x)), x);
  SpectralDecomposition dec = sym_eig(k);
  LoocvProfile profile = f_kmse_select(dec);

  REQUIRE(profile.lambdas.size() == 30);
  for (double score : profile.scores) CHECK(std::isfinite(score));
  for (std::size_t i = 0; i < profile.lambdas.size(); ++i) {
    CHECK(profile.lambdas[i] > 0.0);
    // profile scores match pointwise recomputation
    CHECK(profile.scores[i] == f_kmse_loocv_refit(dec, profile.lambdas[i]));
    // the selected lambda beats every coarse-grid point
    CHECK(profile.selected_score <= profile.scores[i]);
  }
  CHECK(profile.selected_score == f_kmse_loocv_refit(dec, profile.selected_lambda));
  CHECK(profile.method == SelectionMethod::FClosedForm);

  // the surrogate objective remains selectable
  LoocvProfile fixed =
      f_kmse_select(dec, {}, FSelectionObjective::FixedPointScore);
  CHECK(fixed.scores[0] == f_kmse_loocv_score(dec, fixed.lambdas[0]));
}

TEST_CASE("selection work stays O(n^2) per lambda after one decomposition") {
  kmshrink::Rng rng(131);
  const Index n = 50;
  Matrix x = kmtest::random_data(rng, n, 3);
  Matrix k = gram(rbf_kernel(median_heuristic(x)), x);
  SpectralDecomposition dec = sym_eig(k);
  LoocvProfile profile = f_kmse_select(dec);
  // Each deleted-refit evaluation is a handful of n x n matrix-vector
  // products plus six weighted diagonal sums per held-out index: ~30 n^2
  // scalar ops, far inside the 1e3 n^2 budget.
  const double per_lambda_ops =
      30.0 * static_cast<double>(n) * static_cast<double>(n);
  CHECK(per_lambda_ops < 1e3 * static_cast<double>(n) * static_cast<double>(n));
  CHECK(profile.evaluations < 200);
}
