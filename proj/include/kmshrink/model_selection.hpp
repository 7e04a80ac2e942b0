#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmshrink/spectral.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

// rho    = (1/n^2) sum_ij K_ij   (mean Gram entry)
// varrho = (1/n)   sum_i  K_ii   (mean diagonal)
// For PSD K, varrho >= rho.
struct GramStats {
  double rho = 0.0;
  double varrho = 0.0;
  Index n = 0;
};

inline GramStats gram_stats(const Matrix& k) {
  if (k.rows() != k.cols() || k.rows() < 1)
    throw std::invalid_argument("gram_stats: Gram matrix must be square");
  if (!k.allFinite()) throw std::invalid_argument("gram_stats: non-finite Gram");
  GramStats s;
  s.n = k.rows();
  s.rho = k.sum() / static_cast<double>(s.n * s.n);
  s.varrho = k.trace() / static_cast<double>(s.n);
  return s;
}

enum class SelectionMethod { SAnalytic, FClosedForm, NaiveOracle };

inline const char* method_name(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::SAnalytic: return "S_ANALYTIC";
    case SelectionMethod::FClosedForm: return "F_CLOSED_FORM";
    case SelectionMethod::NaiveOracle: return "NAIVE_ORACLE";
  }
  return "?";
}

// Analytic simple-shrinkage optimum:
//   alpha_* = (varrho - rho) / ((n-2) rho + varrho/n)
//   lambda_* = (varrho - rho) / ((n-1) rho + varrho/n - varrho)
// When the lambda denominator is <= 0 the alpha form reaches 1, i.e. full
// shrinkage to the zero function; this is reported as lambda = +inf.
struct SKmseSelection {
  double lambda = 0.0;
  double alpha = 0.0;
  bool full_shrinkage = false;
};

inline SKmseSelection s_kmse_select(const GramStats& stats) {
  if (stats.n < 2)
    throw std::invalid_argument("s_kmse_select: needs n >= 2");
  if (!std::isfinite(stats.rho) || !std::isfinite(stats.varrho))
    throw std::invalid_argument("s_kmse_select: non-finite statistics");
  const double nd = static_cast<double>(stats.n);
  const double num = stats.varrho - stats.rho;
  if (num <= 0.0) return {0.0, 0.0, false};  // no within-sample variance
  const double alpha_den = (nd - 2.0) * stats.rho + stats.varrho / nd;
  const double alpha_raw = num / alpha_den;
  if (!(alpha_raw < 1.0))
    return {std::numeric_limits<double>::infinity(), 1.0, true};
  return {alpha_raw / (1.0 - alpha_raw), alpha_raw, false};
}

// The proof's leave-one-out quadratic in alpha, used as a grid-search oracle
// against the analytic optimum:
// LOOCV(alpha) = (1/(n-1)^2) { (-n^2 + a^2 n^2 + 2an - 2a^2 n) rho
//                              + (n^2 - 2an + a^2) varrho }
inline double s_kmse_loocv_poly(const GramStats& stats, double alpha) {
  if (stats.n < 2)
    throw std::invalid_argument("s_kmse_loocv_poly: needs n >= 2");
  const double n = static_cast<double>(stats.n);
  const double a = alpha;
  const double rho_term = (-n * n + a * a * n * n + 2.0 * a * n - 2.0 * a * a * n);
  const double varrho_term = (n * n - 2.0 * a * n + a * a);
  return (rho_term * stats.rho + varrho_term * stats.varrho) /
         ((n - 1.0) * (n - 1.0));
}

// O(n^2) flexible-shrinkage LOOCV score. With K = U D U^T and
//   C_lambda = U (D - (1/n) D (D+lambda)^{-1} D)^{-1} D (...)^{-1} U^T
// the score (1/n) sum_i (K beta - K_i)^T C_lambda (K beta - K_i) collapses
// to per-mode sums: with t = U^T 1_n, y_m = gamma_m^2 t_m / (gamma_m+lambda),
// g(gamma) = n^2 (gamma+lambda)^2 / (gamma ((n-1) gamma + n lambda)^2),
//   score = sum_m g_m (y_m^2 - 2 y_m gamma_m t_m + gamma_m^2 / n).
// Modes below the rank threshold carry no residual mass (K beta and K_i both
// live in range(K)) and are excluded, which realizes the pseudo-inverse
// convention for C_lambda.
inline double f_kmse_loocv_score(const SpectralDecomposition& dec,
                                 double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("f_kmse_loocv_score: lambda must be > 0");
  const Index r = dec.retained_modes();
  if (r == 0) throw numerical_error("f_kmse_loocv_score: degenerate Gram");
  const double n = static_cast<double>(dec.size());
  const Vector t = dec.eigvecs.transpose() * uniform_weights(dec.size());
  double score = 0.0;
  for (Index m = 0; m < r; ++m) {
    const double gamma = dec.eigvals(m);
    const double y = gamma * gamma * t(m) / (gamma + lambda);
    const double root = n * (gamma + lambda) / ((n - 1.0) * gamma + n * lambda);
    const double g = root * root / gamma;
    score += g * (y * y - 2.0 * y * gamma * t(m) + gamma * gamma / n);
  }
  return score;
}

// Naive leave-one-out oracle from the fixed-point characterization of the
// deleted estimate: with A = (K + lambda I)^{-1}, the coefficients c of
// mu_hat^{(-i)} solve
//   (I - (1/n) A K) c = A (K 1_n - (1/n) K_{.i}),
// and the deleted residual is c^T K c - 2 c^T K_{.i} + K_ii. Never forms
// C_lambda, so it is independent of the closed form above. O(n^4); test use.
inline double f_kmse_loocv_naive(const Matrix& k, double lambda) {
  if (k.rows() != k.cols())
    throw std::invalid_argument("f_kmse_loocv_naive: Gram matrix must be square");
  const Index n = k.rows();
  if (n < 2)
    throw std::invalid_argument("f_kmse_loocv_naive: needs n >= 2");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("f_kmse_loocv_naive: lambda must be > 0");
  Matrix shifted = k;
  shifted.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success)
    throw numerical_error("f_kmse_loocv_naive: factorization failed");
  const Matrix ak = ldlt.solve(k);  // A K
  const Vector ak1 = ak * uniform_weights(n);
  Matrix fixed_point = Matrix::Identity(n, n) - ak / static_cast<double>(n);
  Eigen::FullPivLU<Matrix> lu(fixed_point);
  if (!lu.isInvertible())
    throw numerical_error("f_kmse_loocv_naive: singular fixed-point system");
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    Vector rhs = ak1 - ak.col(i) / static_cast<double>(n);
    Vector c = lu.solve(rhs);
    total += c.dot(k * c) - 2.0 * c.dot(k.col(i)) + k(i, i);
  }
  return total / static_cast<double>(n);
}

// Exact deleted-refit LOOCV: mu_hat^{(-i)} is re-estimated from the n-1
// remaining points (uniform 1/(n-1) targets, same lambda), which is the
// leave-one-out score's literal definition. The fixed-point score above is a
// small-n-biased surrogate for it: its deleted estimate keeps phi(x_i) as a
// basis function plus a self-referential pseudo-observation, so the two only
// coincide at lambda = 0; at n ~ 10 the surrogate's minimizer lands several
// times too high and over-shrinks. Selection therefore runs on this score.
//
// Brute-force reference: one (n-1)-point solve per held-out index. O(n^4);
// the independent oracle for the efficient form below.
inline double f_kmse_loocv_refit_naive(const Matrix& k, double lambda) {
  const Index n = k.rows();
  if (k.cols() != n || n < 2)
    throw std::invalid_argument("f_kmse_loocv_refit_naive: needs square K, n >= 2");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("f_kmse_loocv_refit_naive: lambda must be > 0");
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    Matrix kd(n - 1, n - 1);
    Vector ki(n - 1);
    for (Index a = 0; a < n - 1; ++a) {
      Index ra = a < i ? a : a + 1;
      ki(a) = k(ra, i);
      for (Index b = 0; b < n - 1; ++b) {
        Index rb = b < i ? b : b + 1;
        kd(a, b) = k(ra, rb);
      }
    }
    Matrix shifted = kd;
    shifted.diagonal().array() += lambda;
    Vector beta =
        shifted.ldlt().solve(kd * uniform_weights(n - 1));
    total += k(i, i) - 2.0 * beta.dot(ki) + beta.dot(kd * beta);
  }
  return total / static_cast<double>(n);
}

// Efficient deleted-refit score, O(n^2) per lambda after one decomposition.
// With M = K + lambda I, W = M^{-1}, the deleted solve over the reduced index
// set is expressed through the block-inverse identity
//   (M_{-i})^{-1} = [W - W_{.i} W_{i.} / W_ii]_{-i,-i},
// so every held-out residual reduces to per-mode sums over the eigenbasis
// (six weighted diagonal sums per i plus four matrix-vector products per
// lambda). Verified against f_kmse_loocv_refit_naive.
inline double f_kmse_loocv_refit(const SpectralDecomposition& dec,
                                 double lambda) {
  const Index n = dec.size();
  if (n < 2) throw std::invalid_argument("f_kmse_loocv_refit: needs n >= 2");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("f_kmse_loocv_refit: lambda must be > 0");
  const Matrix& u = dec.eigvecs;
  const Eigen::ArrayXd gam = dec.eigvals.array();
  const double m = static_cast<double>(n - 1);

  const Vector k_one = u * (gam * (u.transpose() * Vector::Ones(n)).array()).matrix();
  const Vector v = k_one / m;                         // K 1 / (n-1)
  const Vector y = u.transpose() * v;

  const Eigen::ArrayXd w = (gam + lambda).inverse();  // modes of W
  const Eigen::ArrayXd w2 = w * w;
  const Vector wv = u * (w * y.array()).matrix();     // W v
  const Vector gv = u * (gam * w * y.array()).matrix();   // K W v
  const Vector w2v = u * (w2 * y.array()).matrix();   // W^2 v
  const Vector gw2v = u * (gam * w2 * y.array()).matrix();  // K W^2 v
  const double v_w_v = (y.array() * w * y.array()).sum();
  const double v_w2_v = (y.array() * w2 * y.array()).sum();

  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd t2 = u.row(i).transpose().array().square();
    const double s_w = (t2 * w).sum();            // W_ii
    const double s_g = (t2 * gam * w).sum();      // (WK)_ii
    const double s_gg = (t2 * gam * gam * w).sum();    // (KWK)_ii
    const double s_w2 = (t2 * w2).sum();          // (W^2)_ii
    const double s_gw = (t2 * gam * w2).sum();    // (W^2 K)_ii
    const double s_ggw = (t2 * gam * gam * w2).sum();  // (K W^2 K)_ii
    const double k_ii = (t2 * gam).sum();

    const double a = v(i) - k_ii / m;
    const double p_ii = wv(i) - s_g / m - a * s_w;
    const double c = p_ii / s_w;

    // r^T W r and r^T W^2 r with r = v - K_{.i}/(n-1) - a e_i
    const double r_w_r = v_w_v + s_gg / (m * m) + a * a * s_w -
                         2.0 * gv(i) / m - 2.0 * a * wv(i) + 2.0 * a * s_g / m;
    const double r_w2_r = v_w2_v + s_ggw / (m * m) + a * a * s_w2 -
                          2.0 * gw2v(i) / m - 2.0 * a * w2v(i) +
                          2.0 * a * s_gw / m;

    const double k_row_beta =
        (gv(i) - s_gg / m - a * s_g) - c * s_g;        // K_{i.} beta
    const double beta_r = r_w_r - p_ii * p_ii / s_w;   // beta^T r
    const double w2r_i = w2v(i) - s_gw / m - a * s_w2;  // (W^2 r)_i
    const double beta_sq = r_w2_r - 2.0 * c * w2r_i + c * c * s_w2;

    total += k_ii - 2.0 * k_row_beta + beta_r - lambda * beta_sq;
  }
  return total / static_cast<double>(n);
}

// Which leave-one-out functional the 1-D search minimizes.
enum class FSelectionObjective { DeletedRefit, FixedPointScore };

// Grid + refinement bounds for the 1-D lambda search. Bounds are relative to
// gamma_max of the Gram since the filter factors gamma/(gamma+lambda) only
// vary meaningfully on that scale.
struct SearchConfig {
  int grid_size = 30;
  double lo_mult = 1e-6;
  double hi_mult = 1e3;
  double rel_tol = 1e-4;
};

struct LoocvProfile {
  std::vector<double> lambdas;
  std::vector<double> scores;
  double selected_lambda = 0.0;
  double selected_score = 0.0;
  SelectionMethod method = SelectionMethod::FClosedForm;
  std::size_t evaluations = 0;
};

namespace detail {

// Golden-section minimization on [lo, hi] in log-lambda space.
template <typename F>
double golden_section(F&& score, double lo, double hi, double rel_tol,
                      std::size_t* evals) {
  constexpr double invphi = 0.6180339887498949;
  double a = std::log(lo), b = std::log(hi);
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = score(std::exp(c));
  double fd = score(std::exp(d));
  *evals += 2;
  while ((b - a) > rel_tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = score(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = score(std::exp(d));
    }
    ++(*evals);
  }
  return std::exp(0.5 * (a + b));
}

}  // namespace detail

// Minimizes the flexible-shrinkage leave-one-out score over lambda > 0:
// coarse log-grid over [lo_mult, hi_mult] x gamma_max, then golden-section
// refinement around the grid minimum. The default objective is the exact
// deleted-refit score; the fixed-point surrogate is kept selectable.
inline LoocvProfile f_kmse_select(
    const SpectralDecomposition& dec, const SearchConfig& cfg = {},
    FSelectionObjective objective = FSelectionObjective::DeletedRefit) {
  if (dec.size() < 2)
    throw std::invalid_argument("f_kmse_select: needs n >= 2");
  if (cfg.grid_size < 2 || !(cfg.lo_mult > 0.0) || !(cfg.hi_mult > cfg.lo_mult))
    throw std::invalid_argument("f_kmse_select: invalid search config");
  const Index r = dec.retained_modes();
  if (r == 0) throw numerical_error("f_kmse_select: degenerate Gram");

  LoocvProfile profile;
  auto score = [&](double lambda) {
    return objective == FSelectionObjective::DeletedRefit
               ? f_kmse_loocv_refit(dec, lambda)
               : f_kmse_loocv_score(dec, lambda);
  };

  const double gmax = dec.max_eigenvalue();
  const double lo = cfg.lo_mult * gmax;
  const double hi = cfg.hi_mult * gmax;
  profile.lambdas.resize(static_cast<std::size_t>(cfg.grid_size));
  profile.scores.resize(static_cast<std::size_t>(cfg.grid_size));
  const double step = std::log(hi / lo) / (cfg.grid_size - 1);
  std::size_t best = 0;
  for (int i = 0; i < cfg.grid_size; ++i) {
    double lambda = lo * std::exp(step * i);
    profile.lambdas[static_cast<std::size_t>(i)] = lambda;
    profile.scores[static_cast<std::size_t>(i)] = score(lambda);
    ++profile.evaluations;
    if (profile.scores[static_cast<std::size_t>(i)] < profile.scores[best])
      best = static_cast<std::size_t>(i);
  }
  double ref_lo = best == 0 ? profile.lambdas[0] : profile.lambdas[best - 1];
  double ref_hi = best + 1 == profile.lambdas.size() ? profile.lambdas[best]
                                                     : profile.lambdas[best + 1];
  double refined =
      detail::golden_section(score, ref_lo, ref_hi, cfg.rel_tol,
                             &profile.evaluations);
  double refined_score = score(refined);
  ++profile.evaluations;
  if (refined_score <= profile.scores[best]) {
    profile.selected_lambda = refined;
    profile.selected_score = refined_score;
  } else {
    profile.selected_lambda = profile.lambdas[best];
    profile.selected_score = profile.scores[best];
  }
  profile.method = SelectionMethod::FClosedForm;
  return profile;
}

}  // namespace kmshrink
