#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kmshrink/oracle.hpp"
#include "test_util.hpp"

using namespace kmshrink;
using kmtest::mat;
using kmtest::vec;

namespace {

GaussianMixture point_mass(const Vector& theta) {
  Matrix means = theta.transpose();
  return make_mixture(vec({1.0}), means,
                      {Matrix::Zero(theta.size(), theta.size())}, 0.0);
}

GaussianMixture random_mixture(kmshrink::Rng& rng, Index c, Index d) {
  Vector w(c);
  for (Index i = 0; i < c; ++i) w(i) = 0.2 + rng.uniform();
  w /= w.sum();
  Matrix means = kmtest::random_data(rng, c, d, 1.5);
  std::vector<Matrix> covs;
  for (Index i = 0; i < c; ++i) {
    Matrix a = kmtest::random_data(rng, d, d, 0.6);
    covs.push_back(a * a.transpose());
  }
  return make_mixture(w, means, std::move(covs), 0.1);
}

}  // namespace

TEST_CASE("mixture validation") {
  CHECK_THROWS_AS(make_mixture(vec({0.5, 0.4}), Matrix::Zero(2, 2),
                               {Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
                               0.0),
                  std::invalid_argument);  // weights sum to 0.9
  CHECK_THROWS_AS(make_mixture(vec({1.0}), Matrix::Zero(1, 2),
                               {Matrix::Identity(3, 3)}, 0.0),
                  std::invalid_argument);  // covariance shape
}

TEST_CASE("draw_mixture is deterministic and honors the singular Wishart") {
  ProtocolConfig cfg;
  cfg.d = 30;
  kmshrink::Rng rng1(42), rng2(42);
  GaussianMixture a = draw_mixture(cfg, rng1);
  GaussianMixture b = draw_mixture(cfg, rng2);
  CHECK(a.means == b.means);
  for (std::size_t i = 0; i < a.covariances.size(); ++i)
    CHECK(a.covariances[i] == b.covariances[i]);

  // df = 7 < d = 30: every component covariance has rank <= 7
  for (const Matrix& sigma : a.covariances) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    Index rank = 0;
    for (Index j = 0; j < 30; ++j)
      if (eig.eigenvalues()(j) > 1e-9 * eig.eigenvalues().maxCoeff()) ++rank;
    CHECK(rank <= 7);
  }
  CHECK(a.means.minCoeff() >= -10.0);
  CHECK(a.means.maxCoeff() <= 10.0);
}

TEST_CASE("Wishart draws have mean df * scale * I") {
  ProtocolConfig cfg;
  cfg.d = 3;
  cfg.components = 1;
  cfg.pi = {1.0};
  kmshrink::Rng rng(7);
  Matrix acc = Matrix::Zero(3, 3);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) acc += draw_mixture(cfg, rng).covariances[0];
  acc /= static_cast<double>(draws);
  const double expected = 2.0 * 7.0;  // scale * df
  for (Index j = 0; j < 3; ++j)
    CHECK(std::abs(acc(j, j) - expected) < 0.05 * expected);
}

TEST_CASE("sampling a point mass returns the mean") {
  GaussianMixture pm = point_mass(vec({1.5, -2.0}));
  kmshrink::Rng rng(3);
  Matrix x = sample(pm, 6, rng);
  for (Index i = 0; i < 6; ++i) {
    CHECK(x(i, 0) == 1.5);
    CHECK(x(i, 1) == -2.0);
  }
}

TEST_CASE("sample mean agrees with the mixture mean (CLT bound)") {
  kmshrink::Rng rng(11);
  GaussianMixture mix = random_mixture(rng, 3, 3);
  const Index n = 100000;
  Matrix x = sample(mix, n, rng);
  Vector mean_bar = mix.means.transpose() * mix.weights;
  for (Index j = 0; j < 3; ++j) {
    double second = 0.0;
    for (Index i = 0; i < mix.components(); ++i)
      second += mix.weights(i) *
                (mix.effective_cov(i)(j, j) + mix.means(i, j) * mix.means(i, j));
    double var = second - mean_bar(j) * mean_bar(j);
    double se = std::sqrt(var / static_cast<double>(n));
    CHECK(std::abs(x.col(j).mean() - mean_bar(j)) < 4.0 * se);
  }

  kmshrink::Rng r1(5), r2(5);
  CHECK(sample(mix, 10, r1) == sample(mix, 10, r2));
}

TEST_CASE("true_mean_eval reduces to the kernel on point masses") {
  Vector theta = vec({0.8, -0.4});
  GaussianMixture pm = point_mass(theta);
  Vector y = vec({-1.0, 0.25});
  for (const auto& spec : kmtest::all_kernels())
    CHECK_THAT(true_mean_eval(pm, spec, y),
               Catch::Matchers::WithinRel(eval_kernel(spec, theta, y), 1e-12));
}

TEST_CASE("true_mean_eval rbf 1-D reference value") {
  GaussianMixture mix = make_mixture(vec({1.0}), Matrix::Zero(1, 1),
                                     {Matrix::Identity(1, 1)}, 0.0);
  double v = true_mean_eval(mix, rbf_kernel(1.0), vec({0.0}));
  CHECK_THAT(v, Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0), 1e-12));
}

TEST_CASE("true_mean_eval matches Monte-Carlo for every family") {
  kmshrink::Rng rng(13);
  GaussianMixture mix = random_mixture(rng, 2, 3);
  Vector y = vec({0.4, -0.2, 1.0});
  for (const auto& spec : kmtest::all_kernels()) {
    double exact = true_mean_eval(mix, spec, y);
    McEstimate mc = true_mean_eval_mc(mix, spec, y, 200000, rng);
    CHECK(std::abs(exact - mc.value) < 4.0 * mc.std_error + 1e-12);
  }
}

TEST_CASE("true_mean_sq_norm closed forms") {
  Vector theta = vec({0.5, 1.0});
  GaussianMixture pm = point_mass(theta);
  for (const auto& spec : kmtest::all_kernels()) {
    if (spec.family == KernelFamily::Poly3) continue;
    CHECK_THAT(true_mean_sq_norm(pm, spec),
               Catch::Matchers::WithinRel(eval_kernel(spec, theta, theta), 1e-12));
  }

  // zero-mean mixture has a vanishing linear-kernel mean
  GaussianMixture sym = make_mixture(
      vec({0.5, 0.5}), mat(2, 2, {1, 0, -1, 0}),
      {Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, 0.0);
  CHECK(true_mean_sq_norm(sym, lin_kernel()) == 0.0);

  CHECK_THROWS_AS(true_mean_sq_norm(pm, poly3_kernel()), std::invalid_argument);
}

TEST_CASE("true_mean_sq_norm matches Monte-Carlo") {
  kmshrink::Rng rng(17);
  for (int rep = 0; rep < 3; ++rep) {
    GaussianMixture mix = random_mixture(rng, 3, 3);
    for (const auto& spec : kmtest::all_kernels()) {
      if (spec.family == KernelFamily::Poly3) continue;
      double exact = true_mean_sq_norm(mix, spec);
      McEstimate mc = true_mean_sq_norm_mc(mix, spec, 200000, rng);
      CHECK(std::abs(exact - mc.value) < 4.0 * mc.std_error + 1e-12);
    }
  }
}

TEST_CASE("mean_diagonal_kernel closed forms against Monte-Carlo") {
  kmshrink::Rng rng(19);
  GaussianMixture mix = random_mixture(rng, 2, 3);
  const Index n = 200000;
  Matrix x = sample(mix, n, rng);
  for (const auto& spec : kmtest::all_kernels()) {
    double exact = mean_diagonal_kernel(mix, spec);
    double sum = 0.0, sum_sq = 0.0;
    for (Index i = 0; i < n; ++i) {
      double k = eval_kernel(spec, x.row(i), x.row(i));
      sum += k;
      sum_sq += k * k;
    }
    double mean = sum / n;
    double se = std::sqrt(
        std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) / n);
    CHECK(std::abs(exact - mean) < 4.0 * se + 1e-12);
  }
}

TEST_CASE("loss worked examples") {
  Vector theta = vec({0.3, -0.9});
  GaussianMixture pm = point_mass(theta);
  Matrix x0 = theta.transpose();
  for (const auto& spec : kmtest::all_kernels()) {
    if (spec.family == KernelFamily::Poly3) continue;
    // the sample sits exactly on the point mass: perfect estimate
    CHECK_THAT(loss(vec({1.0}), x0, spec, pm),
               Catch::Matchers::WithinAbs(0.0, 1e-10));
    // beta = 0 leaves |mu|^2
    CHECK_THAT(loss(Vector::Zero(1), x0, spec, pm),
               Catch::Matchers::WithinRel(true_mean_sq_norm(pm, spec), 1e-12));
  }
}

TEST_CASE("risk_delta worked examples") {
  // P = N(0, I_2), lin kernel, n = 4: Delta = (2 - 0)/4
  GaussianMixture std2 = make_mixture(vec({1.0}), Matrix::Zero(1, 2),
                                      {Matrix::Identity(2, 2)}, 0.0);
  CHECK_THAT(risk_delta(std2, lin_kernel(), 4),
             Catch::Matchers::WithinAbs(0.5, 1e-14));

  // rbf: Delta = (1 - |mu|^2)/n <= 1/n
  kmshrink::Rng rng(23);
  GaussianMixture mix = random_mixture(rng, 3, 2);
  double delta = risk_delta(mix, rbf_kernel(1.0), 8);
  CHECK(delta > 0.0);
  CHECK(delta <= 1.0 / 8.0);
  CHECK_THAT(delta,
             Catch::Matchers::WithinRel(
                 (1.0 - true_mean_sq_norm(mix, rbf_kernel(1.0))) / 8.0, 1e-12));

  GaussianMixture pm = point_mass(vec({1.0, 2.0}));
  CHECK_THAT(risk_delta(pm, rbf_kernel(1.0), 5),
             Catch::Matchers::WithinAbs(0.0, 1e-12));

  // poly3 goes through the Monte-Carlo path
  CHECK_THROWS_AS(risk_delta(mix, poly3_kernel(), 5), std::invalid_argument);
  McEstimate mc = risk_delta_mc(mix, poly3_kernel(), 5, 50000, rng);
  CHECK(mc.std_error > 0.0);
}

TEST_CASE("oracle_alpha worked examples") {
  GaussianMixture shifted = make_mixture(vec({1.0}), mat(1, 2, {1, 0}),
                                         {Matrix::Identity(2, 2)}, 0.0);
  OracleAlpha oa = oracle_alpha(shifted, lin_kernel(), 4, {});
  CHECK_THAT(oa.alpha, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-14));
  CHECK_THAT(oa.risk_gap, Catch::Matchers::WithinAbs(-0.25 / 1.5, 1e-14));

  GaussianMixture pm = point_mass(vec({2.0, 0.0}));
  CHECK(oracle_alpha(pm, rbf_kernel(1.0), 4, {}).alpha == 0.0);

  // f* equal to the true mean: alpha_* = 1 (lin mean is the expansion at
  // the mixture mean)
  KernelMeanEstimate fstar{mat(1, 2, {1, 0}), vec({1.0}), lin_kernel()};
  OracleAlpha exact = oracle_alpha(shifted, lin_kernel(), 4, {fstar});
  CHECK_THAT(exact.alpha, Catch::Matchers::WithinAbs(1.0, 1e-10));
}

TEST_CASE("oracle values are invariant to component permutation") {
  kmshrink::Rng rng(29);
  GaussianMixture mix = random_mixture(rng, 3, 2);
  GaussianMixture permuted = make_mixture(
      vec({mix.weights(2), mix.weights(0), mix.weights(1)}),
      (Matrix(3, 2) << mix.means.row(2), mix.means.row(0), mix.means.row(1))
          .finished(),
      {mix.covariances[2], mix.covariances[0], mix.covariances[1]},
      mix.noise_var);
  Vector y = vec({0.2, -0.5});
  for (const auto& spec : kmtest::all_kernels()) {
    CHECK_THAT(true_mean_eval(mix, spec, y),
               Catch::Matchers::WithinRel(true_mean_eval(permuted, spec, y), 1e-12));
    if (spec.family == KernelFamily::Poly3) continue;
    CHECK_THAT(true_mean_sq_norm(mix, spec),
               Catch::Matchers::WithinRel(true_mean_sq_norm(permuted, spec), 1e-12));
    CHECK_THAT(risk_delta(mix, spec, 7),
               Catch::Matchers::WithinRel(risk_delta(permuted, spec, 7), 1e-10));
  }
}

TEST_CASE("empirical KME loss concentrates around Delta") {
  kmshrink::Rng rng(31);
  GaussianMixture mix = random_mixture(rng, 2, 2);
  const Index n = 5;
  const int resamples = 200;
  KernelSpec spec = rbf_kernel(2.0);
  double delta = risk_delta(mix, spec, n);
  double musq = true_mean_sq_norm(mix, spec);
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < resamples; ++t) {
    Matrix x = sample(mix, n, rng);
    double l = loss(uniform_weights(n), x, spec, mix, musq);
    sum += l;
    sum_sq += l * l;
  }
  double mean = sum / resamples;
  double se = std::sqrt(
      std::max(0.0, (sum_sq - resamples * mean * mean) / (resamples - 1.0)) /
      resamples);
  CHECK(std::abs(mean - delta) < 5.0 * se);
}

TEST_CASE("oracle shrinkage beats the KME by the predicted gap") {
  GaussianMixture mix = make_mixture(vec({1.0}), mat(1, 2, {1, 0}),
                                     {Matrix::Identity(2, 2)}, 0.0);
  KernelSpec spec = lin_kernel();
  const Index n = 4;
  const int resamples = 200;
  OracleAlpha oa = oracle_alpha(mix, spec, n, {});
  double musq = true_mean_sq_norm(mix, spec);
  kmshrink::Rng rng(37);
  double gap_sum = 0.0, gap_sq = 0.0, kme_sum = 0.0, shrunk_sum = 0.0;
  for (int t = 0; t < resamples; ++t) {
    Matrix x = sample(mix, n, rng);
    Vector uniform = uniform_weights(n);
    double l_kme = loss(uniform, x, spec, mix, musq);
    double l_shrunk = loss(Vector((1.0 - oa.alpha) * uniform), x, spec, mix, musq);
    kme_sum += l_kme;
    shrunk_sum += l_shrunk;
    double g = l_kme - l_shrunk;
    gap_sum += g;
    gap_sq += g * g;
  }
  double gap_mean = gap_sum / resamples;
  double gap_se = std::sqrt(
      std::max(0.0, (gap_sq - resamples * gap_mean * gap_mean) /
                        (resamples - 1.0)) /
      resamples);
  CHECK(shrunk_sum < kme_sum);
  CHECK(std::abs(gap_mean - (-oa.risk_gap)) < 5.0 * gap_se);
}
