#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmshrink/centering.hpp"
#include "kmshrink/estimators.hpp"
#include "kmshrink/kernels.hpp"
#include "kmshrink/model_selection.hpp"
#include "kmshrink/spectral.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

enum class CovOpMethod { Standard, SCose, FCose };

inline const char* covop_name(CovOpMethod m) {
  switch (m) {
    case CovOpMethod::Standard: return "STANDARD";
    case CovOpMethod::SCose: return "S_COSE";
    case CovOpMethod::FCose: return "F_COSE";
  }
  return "?";
}

// Weight vector of a covariance-operator estimate. The covariance operator is
// a kernel mean in the product RKHS, so its shrinkage weights come from
// running a KMSE on the Hadamard-product Gram of centered kernels.
struct CovOpWeights {
  Vector beta;
  CovOpMethod source = CovOpMethod::Standard;
  double lambda = 0.0;
};

// Builds the product Gram (Kc_X o Kc_Y, or Kc o Kc for the self-covariance)
// from uniformly centered inputs and runs the requested shrinkage estimator
// on it. lambda absent means automatic leave-one-out selection.
inline CovOpWeights cose_weights(const Matrix& k_x,
                                 const std::optional<Matrix>& k_y,
                                 CovOpMethod method,
                                 std::optional<double> lambda = std::nullopt,
                                 const SearchConfig& search = {}) {
  if (k_x.rows() != k_x.cols())
    throw std::invalid_argument("cose_weights: Gram matrix must be square");
  const Index n = k_x.rows();
  if (method == CovOpMethod::Standard)
    return {uniform_weights(n), CovOpMethod::Standard, 0.0};
  if (k_y && (k_y->rows() != n || k_y->cols() != n))
    throw std::invalid_argument("cose_weights: Gram size mismatch");

  const Vector uniform = uniform_weights(n);
  Matrix kc_x = center_train(k_x, uniform).values;
  Matrix product;
  if (k_y) {
    Matrix kc_y = center_train(*k_y, uniform).values;
    product = kc_x.cwiseProduct(kc_y);
  } else {
    product = kc_x.cwiseProduct(kc_x);
  }
  if (product.cwiseAbs().maxCoeff() <= 1e-14)
    throw numerical_error("cose_weights: degenerate product Gram");

  if (method == CovOpMethod::SCose) {
    double lam = lambda ? *lambda : s_kmse_select(gram_stats(product)).lambda;
    double scale = std::isinf(lam) ? 0.0 : 1.0 / (1.0 + lam);
    return {Vector(scale * uniform), CovOpMethod::SCose, lam};
  }
  SpectralDecomposition dec = sym_eig(product);
  double lam = lambda ? *lambda : f_kmse_select(dec, search).selected_lambda;
  return {f_kmse_spectral(dec, lam), CovOpMethod::FCose, lam};
}

// Fitted kernel PCA model: columns a_j of `coefficients` are feature-space
// orthonormal (a_j^T Kc a_k = delta_jk) eigenfunction coefficients of the
// generalized problem Kc B Kc V = Kc V D.
struct KpcaModel {
  Matrix coefficients;   // n x ell
  Vector eigenvalues;    // length ell, descending
  Vector centering_beta;
  Matrix train_points;
  Matrix train_gram;
  KernelSpec kernel;
  Index ell = 0;
};

// Rank of the generalized problem = retained spectral rank of Kc.
inline Index kpca_rank(const Matrix& kc) {
  return sym_eig(kc).retained_modes();
}

inline KpcaModel kpca_fit(const Matrix& x, const KernelSpec& kernel,
                          const Vector& centering_beta,
                          const CovOpWeights& covop, Index ell) {
  validate_data(x);
  kernel.validate();
  if (covop.beta.size() != x.rows())
    throw std::invalid_argument("kpca_fit: covariance weight length mismatch");
  Matrix k = gram(kernel, x);
  CenteredGram kc = center_train(k, centering_beta);
  KpcaEig eig = generalized_kpca_eig(kc.values, covop.beta);
  const Index rank = eig.eigvals.size();
  if (ell < 1 || ell > rank)
    throw std::invalid_argument("kpca_fit: requested " + std::to_string(ell) +
                                " components but achievable rank is " +
                                std::to_string(rank));
  KpcaModel model;
  model.coefficients = eig.coefficients.leftCols(ell);
  model.eigenvalues = eig.eigvals.head(ell);
  model.centering_beta = centering_beta;
  model.train_points = x;
  model.train_gram = std::move(k);
  model.kernel = kernel;
  model.ell = ell;
  return model;
}

// Projection residual |phi~(z) - P phi~(z)|^2 per test point, using the first
// `components` fitted directions (default: all of model.ell). phi~ is
// centered with the model's own beta. Clamped at zero.
inline Vector kpca_reconstruction_error(const KpcaModel& model, const Matrix& z,
                                        Index components = -1) {
  validate_data(z, "test matrix");
  if (components < 0) components = model.ell;
  if (components > model.ell)
    throw std::invalid_argument("kpca_reconstruction_error: components > ell");
  Matrix l = cross_gram(model.kernel, z, model.train_points);
  Matrix lc = center_test(l, model.train_gram, model.centering_beta);
  const Vector s = model.train_gram * model.centering_beta;
  const double q = model.centering_beta.dot(s);
  Matrix proj = lc * model.coefficients.leftCols(components);  // m x components
  Vector err(z.rows());
  for (Index i = 0; i < z.rows(); ++i) {
    double kzz = model.kernel.family == KernelFamily::Rbf
                     ? 1.0
                     : detail::kernel_from_parts(
                           model.kernel, z.row(i).squaredNorm(), 0.0);
    double diag = kzz - 2.0 * l.row(i).dot(model.centering_beta) + q;
    err(i) = std::max(0.0, diag - proj.row(i).squaredNorm());
  }
  return err;
}

enum class MeanEstimator { Kme, SKmse, FKmse };

inline const char* estimator_name(MeanEstimator e) {
  switch (e) {
    case MeanEstimator::Kme: return "KME";
    case MeanEstimator::SKmse: return "S-KMSE";
    case MeanEstimator::FKmse: return "F-KMSE";
  }
  return "?";
}

inline MeanEstimator estimator_from_name(const std::string& name) {
  if (name == "kme" || name == "KME") return MeanEstimator::Kme;
  if (name == "s-kmse" || name == "S-KMSE") return MeanEstimator::SKmse;
  if (name == "f-kmse" || name == "F-KMSE") return MeanEstimator::FKmse;
  throw std::invalid_argument("unknown estimator: " + name);
}

// Builds the chosen estimator with automatic leave-one-out shrinkage.
inline KernelMeanEstimate fit_mean_estimate(const Matrix& x,
                                            const KernelSpec& kernel,
                                            MeanEstimator estimator,
                                            std::optional<double> lambda =
                                                std::nullopt,
                                            const SearchConfig& search = {},
                                            double* lambda_used = nullptr) {
  switch (estimator) {
    case MeanEstimator::Kme: {
      if (lambda_used) *lambda_used = 0.0;
      return kme(x, kernel);
    }
    case MeanEstimator::SKmse: {
      Matrix k = gram(kernel, x);
      double lam = lambda ? *lambda : s_kmse_select(gram_stats(k)).lambda;
      if (lambda_used) *lambda_used = lam;
      return s_kmse(x, kernel, lam);
    }
    case MeanEstimator::FKmse: {
      SpectralDecomposition dec = sym_eig(gram(kernel, x));
      double lam = lambda ? *lambda : f_kmse_select(dec, search).selected_lambda;
      if (lambda_used) *lambda_used = lam;
      return {x, f_kmse_spectral(dec, lam), kernel};
    }
  }
  throw std::invalid_argument("fit_mean_estimate: bad estimator");
}

// Level-2 kernel between distributions evaluated on their mean embeddings.
struct Level2Kernel {
  enum class Kind { Linear, Gaussian } kind = Kind::Linear;
  double sigma_sq = 1.0;  // Gaussian only
};

// kappa(P_i, P_j) over groups of samples: LINEAR uses <mu_i, mu_j>,
// GAUSSIAN uses exp(-|mu_i - mu_j|^2 / 2 sigma^2).
inline Matrix distribution_gram(const std::vector<Matrix>& groups,
                                const KernelSpec& kernel,
                                MeanEstimator estimator,
                                const Level2Kernel& level2,
                                const SearchConfig& search = {}) {
  if (groups.empty())
    throw std::invalid_argument("distribution_gram: needs at least one group");
  std::vector<KernelMeanEstimate> estimates;
  estimates.reserve(groups.size());
  for (const Matrix& g : groups) {
    validate_data(g, "group");
    estimates.push_back(fit_mean_estimate(g, kernel, estimator, std::nullopt,
                                          search));
  }
  const Index m = static_cast<Index>(groups.size());
  Matrix out(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = i; j < m; ++j) {
      double entry;
      if (level2.kind == Level2Kernel::Kind::Linear) {
        entry = rkhs_inner(estimates[static_cast<std::size_t>(i)],
                           estimates[static_cast<std::size_t>(j)]);
      } else {
        if (!(level2.sigma_sq > 0.0))
          throw std::invalid_argument("distribution_gram: sigma_sq must be > 0");
        double d = rkhs_dist_sq(estimates[static_cast<std::size_t>(i)],
                                estimates[static_cast<std::size_t>(j)]);
        entry = std::exp(-d / (2.0 * level2.sigma_sq));
      }
      out(i, j) = entry;
      out(j, i) = entry;
    }
  }
  return out;
}

}  // namespace kmshrink
