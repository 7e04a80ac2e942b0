#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kmshrink/estimators.hpp"
#include "kmshrink/kernels.hpp"
#include "kmshrink/rng.hpp"
#include "kmshrink/spectral.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

// Mixture of Gaussians with isotropic additive noise:
//   x ~ sum_i pi_i N(theta_i, Sigma_i) + N(0, noise_var I).
// Each component keeps a factor G_i with Sigma_i = G_i G_i^T (the Wishart
// construction provides it directly; make_mixture derives one spectrally), so
// sampling works even when Sigma_i is rank-deficient.
struct GaussianMixture {
  Vector weights;                   // pi
  Matrix means;                     // c x d, row i = theta_i
  std::vector<Matrix> covariances;  // Sigma_i, d x d
  std::vector<Matrix> factors;      // G_i, d x r_i
  double noise_var = 0.0;

  Index components() const { return means.rows(); }
  Index dim() const { return means.cols(); }

  // Effective component covariance C_i = Sigma_i + noise_var I.
  Matrix effective_cov(Index i) const {
    Matrix c = covariances[static_cast<std::size_t>(i)];
    c.diagonal().array() += noise_var;
    return c;
  }
};

inline GaussianMixture make_mixture(const Vector& weights, const Matrix& means,
                                    std::vector<Matrix> covariances,
                                    double noise_var) {
  const Index c = means.rows();
  if (weights.size() != c || static_cast<Index>(covariances.size()) != c)
    throw std::invalid_argument("mixture: component count mismatch");
  if (c < 1 || means.cols() < 1)
    throw std::invalid_argument("mixture: needs >= 1 component and dimension");
  if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must be nonnegative and sum to 1");
  if (!(noise_var >= 0.0))
    throw std::invalid_argument("mixture: noise_var must be >= 0");
  GaussianMixture mix;
  mix.weights = weights;
  mix.means = means;
  mix.noise_var = noise_var;
  mix.factors.reserve(covariances.size());
  for (const Matrix& sigma : covariances) {
    if (sigma.rows() != means.cols() || sigma.cols() != means.cols())
      throw std::invalid_argument("mixture: covariance shape mismatch");
    SpectralDecomposition dec = sym_eig(sigma);  // validates symmetric PSD
    const Index r = dec.retained_modes();
    mix.factors.push_back(dec.eigvecs.leftCols(r) *
                          dec.eigvals.head(r).cwiseSqrt().asDiagonal());
  }
  mix.covariances = std::move(covariances);
  return mix;
}

// Defaults from the synthetic protocol: 4 components, means uniform in
// (-10,10)^d, Sigma_i ~ W(2 I_d, 7), noise N(0, 0.2 I_d).
struct ProtocolConfig {
  Index d = 30;
  Index components = 4;
  std::vector<double> pi{0.05, 0.3, 0.4, 0.25};
  double theta_min = -10.0;
  double theta_max = 10.0;
  double wishart_scale = 2.0;
  Index wishart_df = 7;
  double noise_var = 0.2;

  void validate() const {
    if (d < 1 || components < 1 || wishart_df < 1)
      throw std::invalid_argument("protocol: d, components, wishart_df must be >= 1");
    if (static_cast<Index>(pi.size()) != components)
      throw std::invalid_argument("protocol: pi length must match components");
    if (!(theta_max > theta_min))
      throw std::invalid_argument("protocol: empty theta range");
    if (!(wishart_scale > 0.0) || !(noise_var >= 0.0))
      throw std::invalid_argument("protocol: bad scale or noise");
    double sum = 0.0;
    for (double p : pi) {
      if (p < 0.0) throw std::invalid_argument("protocol: negative pi");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("protocol: pi must sum to 1");
  }
};

// Draws Sigma_i as sum_{k<df} g_k g_k^T with g_k ~ N(0, scale I), which stays
// valid (singular Wishart) when df < d; E[Sigma_i] = df * scale * I.
inline GaussianMixture draw_mixture(const ProtocolConfig& config, Rng& rng) {
  config.validate();
  GaussianMixture mix;
  mix.weights = Eigen::Map<const Vector>(config.pi.data(),
                                         static_cast<Index>(config.pi.size()));
  mix.means.resize(config.components, config.d);
  for (Index i = 0; i < config.components; ++i)
    for (Index j = 0; j < config.d; ++j)
      mix.means(i, j) = rng.uniform(config.theta_min, config.theta_max);
  mix.noise_var = config.noise_var;
  const double g_std = std::sqrt(config.wishart_scale);
  for (Index i = 0; i < config.components; ++i) {
    Matrix g(config.d, config.wishart_df);
    for (Index k = 0; k < config.wishart_df; ++k)
      for (Index j = 0; j < config.d; ++j) g(j, k) = g_std * rng.normal();
    mix.factors.push_back(g);
    mix.covariances.push_back(g * g.transpose());
  }
  return mix;
}

inline Matrix sample(const GaussianMixture& mix, Index n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const Index d = mix.dim();
  const double noise_std = std::sqrt(mix.noise_var);
  Matrix x(n, d);
  for (Index t = 0; t < n; ++t) {
    double u = rng.uniform();
    Index comp = mix.components() - 1;
    double acc = 0.0;
    for (Index i = 0; i < mix.components(); ++i) {
      acc += mix.weights(i);
      if (u < acc) {
        comp = i;
        break;
      }
    }
    const Matrix& g = mix.factors[static_cast<std::size_t>(comp)];
    Vector z(g.cols());
    for (Index k = 0; k < g.cols(); ++k) z(k) = rng.normal();
    Vector point = mix.means.row(comp).transpose() + g * z;
    if (noise_std > 0.0)
      for (Index j = 0; j < d; ++j) point(j) += noise_std * rng.normal();
    x.row(t) = point.transpose();
  }
  return x;
}

namespace detail {

// log of (sigma^2)^{d/2} det(M)^{-1/2} exp(-q/2) evaluated stably; M is
// passed by its eigenvalues.
inline double log_gaussian_overlap(double sigma_sq, const Vector& m_eigvals,
                                   double quad_form, Index d) {
  double log_det = 0.0;
  for (Index i = 0; i < m_eigvals.size(); ++i) {
    if (!(m_eigvals(i) > 0.0))
      throw numerical_error("oracle: singular covariance in rbf closed form");
    log_det += std::log(m_eigvals(i));
  }
  return 0.5 * static_cast<double>(d) * std::log(sigma_sq) - 0.5 * log_det -
         0.5 * quad_form;
}

}  // namespace detail

// E_{x~P}[k(x, y)] in closed form. With C_i = Sigma_i + noise_var I,
// m_i = theta_i^T y, s_i^2 = y^T C_i y:
//   lin    sum pi_i m_i
//   poly2  sum pi_i [(m_i+1)^2 + s_i^2]
//   poly3  sum pi_i [(m_i+1)^3 + 3 (m_i+1) s_i^2]
//   rbf    sum pi_i (s^2)^{d/2} det(C_i + s^2 I)^{-1/2}
//              exp(-(y-theta_i)^T (C_i + s^2 I)^{-1} (y-theta_i) / 2)
inline double true_mean_eval(const GaussianMixture& mix,
                             const KernelSpec& kernel, const Vector& y) {
  kernel.validate();
  if (y.size() != mix.dim())
    throw std::invalid_argument("true_mean_eval: dimension mismatch");
  const Index c = mix.components();
  double total = 0.0;
  for (Index i = 0; i < c; ++i) {
    const Vector theta = mix.means.row(i).transpose();
    switch (kernel.family) {
      case KernelFamily::Lin:
        total += mix.weights(i) * theta.dot(y);
        break;
      case KernelFamily::Poly2: {
        Matrix cov = mix.effective_cov(i);
        double m = theta.dot(y) + 1.0;
        double s2 = y.dot(cov * y);
        total += mix.weights(i) * (m * m + s2);
        break;
      }
      case KernelFamily::Poly3: {
        Matrix cov = mix.effective_cov(i);
        double m = theta.dot(y) + 1.0;
        double s2 = y.dot(cov * y);
        total += mix.weights(i) * (m * m * m + 3.0 * m * s2);
        break;
      }
      case KernelFamily::Rbf: {
        Matrix cov = mix.effective_cov(i);
        cov.diagonal().array() += kernel.bandwidth_sq;
        SpectralDecomposition dec = sym_eig(cov);
        Vector diff = y - theta;
        double quad = diff.dot(shifted_solve(dec, 0.0, diff));
        total += mix.weights(i) *
                 std::exp(detail::log_gaussian_overlap(
                     kernel.bandwidth_sq, dec.eigvals, quad, mix.dim()));
        break;
      }
    }
  }
  return total;
}

// |mu_P|^2 = E[k(x, x~)] over an independent copy x~, in closed form.
// Supported exactly for lin, poly2, rbf; poly3 has no implemented closed form
// (third-moment cross term) and must go through the Monte-Carlo path.
inline double true_mean_sq_norm(const GaussianMixture& mix,
                                const KernelSpec& kernel) {
  kernel.validate();
  const Index c = mix.components();
  switch (kernel.family) {
    case KernelFamily::Lin: {
      Vector mean_bar = mix.means.transpose() * mix.weights;
      return mean_bar.squaredNorm();
    }
    case KernelFamily::Poly2: {
      double total = 0.0;
      for (Index i = 0; i < c; ++i) {
        Matrix ci = mix.effective_cov(i);
        Vector ti = mix.means.row(i).transpose();
        for (Index j = 0; j < c; ++j) {
          Matrix cj = mix.effective_cov(j);
          Vector tj = mix.means.row(j).transpose();
          double dot = ti.dot(tj) + 1.0;
          double term = dot * dot + ti.dot(cj * ti) + tj.dot(ci * tj) +
                        (ci * cj).trace();
          total += mix.weights(i) * mix.weights(j) * term;
        }
      }
      return total;
    }
    case KernelFamily::Poly3:
      throw std::invalid_argument(
          "true_mean_sq_norm: poly3 has no exact form; use the Monte-Carlo mode");
    case KernelFamily::Rbf: {
      double total = 0.0;
      for (Index i = 0; i < c; ++i) {
        Matrix ci = mix.effective_cov(i);
        Vector ti = mix.means.row(i).transpose();
        for (Index j = 0; j < c; ++j) {
          Matrix m = ci + mix.effective_cov(j);
          m.diagonal().array() += kernel.bandwidth_sq;
          SpectralDecomposition dec = sym_eig(m);
          Vector diff = ti - mix.means.row(j).transpose();
          double quad = diff.dot(shifted_solve(dec, 0.0, diff));
          total += mix.weights(i) * mix.weights(j) *
                   std::exp(detail::log_gaussian_overlap(
                       kernel.bandwidth_sq, dec.eigvals, quad, mix.dim()));
        }
      }
      return total;
    }
  }
  throw std::invalid_argument("true_mean_sq_norm: bad kernel family");
}

// Monte-Carlo estimate with its standard error.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// U-statistic over paired fresh draws: mean of k(x_t, x'_t) across
// independent pairs.
inline McEstimate true_mean_sq_norm_mc(const GaussianMixture& mix,
                                       const KernelSpec& kernel,
                                       std::size_t pairs, Rng& rng) {
  if (pairs < 2) throw std::invalid_argument("mc: needs >= 2 pairs");
  Matrix xa = sample(mix, static_cast<Index>(pairs), rng);
  Matrix xb = sample(mix, static_cast<Index>(pairs), rng);
  double sum = 0.0, sum_sq = 0.0;
  for (Index t = 0; t < static_cast<Index>(pairs); ++t) {
    double k = eval_kernel(kernel, xa.row(t).transpose(), xb.row(t).transpose());
    sum += k;
    sum_sq += k * k;
  }
  double n = static_cast<double>(pairs);
  double mean = sum / n;
  double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), pairs};
}

inline McEstimate true_mean_eval_mc(const GaussianMixture& mix,
                                    const KernelSpec& kernel, const Vector& y,
                                    std::size_t samples, Rng& rng) {
  if (samples < 2) throw std::invalid_argument("mc: needs >= 2 samples");
  Matrix x = sample(mix, static_cast<Index>(samples), rng);
  double sum = 0.0, sum_sq = 0.0;
  for (Index t = 0; t < static_cast<Index>(samples); ++t) {
    double k = eval_kernel(kernel, x.row(t).transpose(), y);
    sum += k;
    sum_sq += k * k;
  }
  double n = static_cast<double>(samples);
  double mean = sum / n;
  double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), samples};
}

// E[k(x,x)], exact for every family. For the polynomial kernels this is
// E[(q+1)^p] with q = |x|^2, obtained from the quadratic-form cumulants
//   k1 = tr C + |theta|^2, k2 = 2 tr C^2 + 4 theta^T C theta,
//   k3 = 8 tr C^3 + 24 theta^T C^2 theta.
inline double mean_diagonal_kernel(const GaussianMixture& mix,
                                   const KernelSpec& kernel) {
  kernel.validate();
  if (kernel.family == KernelFamily::Rbf) return 1.0;
  double total = 0.0;
  for (Index i = 0; i < mix.components(); ++i) {
    Vector theta = mix.means.row(i).transpose();
    if (kernel.family == KernelFamily::Lin) {
      Matrix cov = mix.effective_cov(i);
      total += mix.weights(i) * (theta.squaredNorm() + cov.trace());
      continue;
    }
    Matrix cov = mix.effective_cov(i);
    double k1 = cov.trace() + theta.squaredNorm();
    double k2 = 2.0 * (cov * cov).trace() + 4.0 * theta.dot(cov * theta);
    double m = k1 + 1.0;
    if (kernel.family == KernelFamily::Poly2) {
      total += mix.weights(i) * (m * m + k2);
    } else {
      double k3 = 8.0 * (cov * cov * cov).trace() +
                  24.0 * theta.dot(cov * cov * theta);
      total += mix.weights(i) * (m * m * m + 3.0 * m * k2 + k3);
    }
  }
  return total;
}

// mu(x_i) = true_mean_eval at every sample point; shared by all estimators
// scored on the same trial.
inline Vector mean_evals(const GaussianMixture& mix, const KernelSpec& kernel,
                         const Matrix& x) {
  Vector m(x.rows());
  for (Index i = 0; i < x.rows(); ++i)
    m(i) = true_mean_eval(mix, kernel, x.row(i).transpose());
  return m;
}

// Exact loss l(beta) = |sum beta_i k(x_i,.) - mu_P|^2
//                    = beta^T K beta - 2 beta^T m + |mu|^2,
// given the trial-constant pieces K, m = mean_evals, |mu|^2. Every loss in
// the library flows through this one expression so per-trial comparisons are
// bit-reproducible.
inline double loss_precomputed(const Vector& beta, const Matrix& k,
                               const Vector& mean_eval, double mu_sq_norm) {
  if (beta.size() != k.rows() || mean_eval.size() != k.rows())
    throw std::invalid_argument("loss: weight length mismatch");
  return std::max(0.0,
                  beta.dot(k * beta) - 2.0 * beta.dot(mean_eval) + mu_sq_norm);
}

// The |mu|^2 term is constant across estimators on a trial, so callers doing
// comparisons may pass a precomputed (possibly Monte-Carlo) value.
inline double loss(const Vector& beta, const Matrix& x,
                   const KernelSpec& kernel, const GaussianMixture& mix,
                   double mu_sq_norm) {
  validate_data(x);
  return loss_precomputed(beta, gram(kernel, x), mean_evals(mix, kernel, x),
                          mu_sq_norm);
}

inline double loss(const Vector& beta, const Matrix& x,
                   const KernelSpec& kernel, const GaussianMixture& mix) {
  return loss(beta, x, kernel, mix, true_mean_sq_norm(mix, kernel));
}

// Risk of the standard estimator:
//   Delta = E|mu_hat - mu|^2 = (1/n) (E[k(x,x)] - E[k(x,x~)]).
// Exact for lin, poly2, rbf; the poly3 cross term needs Monte-Carlo.
inline double risk_delta(const GaussianMixture& mix, const KernelSpec& kernel,
                         Index n) {
  if (n < 1) throw std::invalid_argument("risk_delta: n must be >= 1");
  return (mean_diagonal_kernel(mix, kernel) - true_mean_sq_norm(mix, kernel)) /
         static_cast<double>(n);
}

// Monte-Carlo variant: exact diagonal term, sampled cross term.
inline McEstimate risk_delta_mc(const GaussianMixture& mix,
                                const KernelSpec& kernel, Index n,
                                std::size_t pairs, Rng& rng) {
  McEstimate cross = true_mean_sq_norm_mc(mix, kernel, pairs, rng);
  double nd = static_cast<double>(n);
  return {(mean_diagonal_kernel(mix, kernel) - cross.value) / nd,
          cross.std_error / nd, pairs};
}

// Oracle shrinkage amount alpha_* = Delta / (Delta + |f* - mu|^2) and the
// predicted risk improvement Delta_{alpha_*} - Delta = -Delta^2 / (Delta +
// |f* - mu|^2).
struct OracleAlpha {
  double alpha = 0.0;
  double risk_gap = 0.0;
};

inline OracleAlpha oracle_alpha(const GaussianMixture& mix,
                                const KernelSpec& kernel, Index n,
                                const ShrinkageTarget& fstar) {
  double delta = risk_delta(mix, kernel, n);
  double dist_sq;
  if (!fstar.expansion) {
    dist_sq = true_mean_sq_norm(mix, kernel);
  } else {
    const KernelMeanEstimate& f = *fstar.expansion;
    f.validate();
    if (!(f.kernel == kernel))
      throw std::invalid_argument("oracle_alpha: kernel mismatch");
    double ff = rkhs_inner(f, f);
    double fmu = 0.0;
    for (Index j = 0; j < f.points.rows(); ++j)
      fmu += f.weights(j) * true_mean_eval(mix, kernel, f.points.row(j).transpose());
    dist_sq = ff - 2.0 * fmu + true_mean_sq_norm(mix, kernel);
    dist_sq = std::max(0.0, dist_sq);
  }
  double denom = delta + dist_sq;
  if (denom <= 0.0) return {0.0, 0.0};  // point mass: Delta = 0
  return {delta / denom, -delta * delta / denom};
}

}  // namespace kmshrink
