#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kmshrink/centering.hpp"
#include "kmshrink/estimators.hpp"
#include "kmshrink/kernels.hpp"
#include "kmshrink/log.hpp"
#include "kmshrink/model_selection.hpp"
#include "kmshrink/operators.hpp"
#include "kmshrink/oracle.hpp"
#include "kmshrink/rng.hpp"
#include "kmshrink/serialize.hpp"
#include "kmshrink/spectral.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

// Kernel choice as written in configs: bandwidth either fixed or resolved per
// dataset by the median heuristic.
struct KernelConfig {
  KernelFamily family = KernelFamily::Rbf;
  std::optional<double> bandwidth_sq;  // absent = median heuristic (rbf only)

  KernelSpec resolve(const Matrix& x) const {
    if (family != KernelFamily::Rbf) return {family, 1.0};
    if (bandwidth_sq) return rbf_kernel(*bandwidth_sq);
    return rbf_kernel(median_heuristic(x));
  }

  std::string label() const {
    if (family != KernelFamily::Rbf) return family_name(family);
    return bandwidth_sq ? "rbf(" + std::to_string(*bandwidth_sq) + ")"
                        : "rbf(median)";
  }
};

inline KernelConfig kernel_config_from_json(const Json& j) {
  KernelConfig cfg;
  cfg.family = family_from_name(j.at("family").get<std::string>());
  if (j.contains("bandwidth_sq")) {
    cfg.bandwidth_sq = j.at("bandwidth_sq").get<double>();
  } else if (j.contains("bandwidth")) {
    const auto& b = j.at("bandwidth");
    if (b.is_string() && b.get<std::string>() == "median")
      cfg.bandwidth_sq = std::nullopt;
    else if (b.is_number())
      cfg.bandwidth_sq = b.get<double>();
    else
      throw std::invalid_argument("kernel config: bad bandwidth value");
  }
  if (cfg.family == KernelFamily::Rbf && cfg.bandwidth_sq &&
      !(*cfg.bandwidth_sq > 0.0))
    throw std::invalid_argument("kernel config: bandwidth_sq must be > 0");
  return cfg;
}

inline Json to_json(const KernelConfig& cfg) {
  Json j{{"family", family_name(cfg.family)}};
  if (cfg.family == KernelFamily::Rbf) {
    if (cfg.bandwidth_sq)
      j["bandwidth_sq"] = *cfg.bandwidth_sq;
    else
      j["bandwidth"] = "median";
  }
  return j;
}

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string kernel;
  Index n = 0;
  Index d = 0;
  double axis_value = 0.0;  // lambda multiplier on the lambda sweep
  std::string estimator;
  double lambda_used = 0.0;
  double loss = 0.0;
  bool failed = false;
  std::string failure_reason;
  double elapsed_ms = 0.0;  // metadata only, never serialized into the payload
};

struct AggregateRow {
  std::string kernel;
  Index n = 0;
  Index d = 0;
  double axis_value = 0.0;
  std::string estimator;
  int trials_effective = 0;
  double mean_loss = 0.0;
  double median_loss = 0.0;
  double p25_loss = 0.0;
  double p75_loss = 0.0;
  double win_rate_vs_kme = std::numeric_limits<double>::quiet_NaN();
};

struct SweepReport {
  std::string command;
  std::vector<double> axis_values;
  std::vector<TrialRecord> trials;
  std::vector<AggregateRow> aggregates;
  int requested_trials = 0;
  int failed_trials = 0;
};

namespace detail {

// Interpolating percentile on a sorted copy (numpy "linear" convention).
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (v.size() == 1) return v[0];
  double h = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

template <typename F>
void parallel_for_count(std::size_t count, int degree, F&& fn) {
  if (degree <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int threads = std::min<int>(degree, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct GroupKey {
  std::string kernel;
  Index n;
  Index d;
  double axis_value;
  bool operator<(const GroupKey& o) const {
    if (kernel != o.kernel) return kernel < o.kernel;
    if (n != o.n) return n < o.n;
    if (d != o.d) return d < o.d;
    return axis_value < o.axis_value;
  }
  bool operator==(const GroupKey& o) const {
    return kernel == o.kernel && n == o.n && d == o.d &&
           axis_value == o.axis_value;
  }
};

// Deterministic reduce: trials are stored by trial index, grouped here by
// (kernel, n, d, axis_value), paired against KME per group.
inline std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& trials) {
  std::vector<GroupKey> keys;
  for (const auto& t : trials) {
    GroupKey k{t.kernel, t.n, t.d, t.axis_value};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  const char* estimators[] = {"KME", "S-KMSE", "F-KMSE"};
  std::vector<AggregateRow> rows;
  for (const auto& key : keys) {
    // trial id -> kme loss for pairing
    std::vector<std::pair<int, double>> kme_losses;
    for (const auto& t : trials)
      if (!t.failed && t.estimator == "KME" && GroupKey{t.kernel, t.n, t.d, t.axis_value} == key)
        kme_losses.emplace_back(t.trial, t.loss);
    for (const char* est : estimators) {
      AggregateRow row;
      row.kernel = key.kernel;
      row.n = key.n;
      row.d = key.d;
      row.axis_value = key.axis_value;
      row.estimator = est;
      std::vector<double> losses;
      int wins = 0, paired = 0;
      for (const auto& t : trials) {
        if (t.failed || t.estimator != est ||
            !(GroupKey{t.kernel, t.n, t.d, t.axis_value} == key))
          continue;
        losses.push_back(t.loss);
        for (const auto& [id, kme_loss] : kme_losses) {
          if (id == t.trial) {
            ++paired;
            if (t.loss < kme_loss) ++wins;
            break;
          }
        }
      }
      if (losses.empty()) continue;
      row.trials_effective = static_cast<int>(losses.size());
      row.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) /
                      static_cast<double>(losses.size());
      row.median_loss = percentile(losses, 0.5);
      row.p25_loss = percentile(losses, 0.25);
      row.p75_loss = percentile(losses, 0.75);
      if (std::string(est) != "KME" && paired > 0)
        row.win_rate_vs_kme = static_cast<double>(wins) / paired;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// |mu|^2 for the trial: exact where a closed form exists, Monte-Carlo for
// poly3 (constant across estimators, so comparisons stay paired).
inline double trial_mu_sq_norm(const GaussianMixture& mix,
                               const KernelSpec& spec, std::size_t mc_samples,
                               Rng& rng) {
  if (spec.family == KernelFamily::Poly3)
    return true_mean_sq_norm_mc(mix, spec, mc_samples, rng).value;
  return true_mean_sq_norm(mix, spec);
}

}  // namespace detail

struct LambdaSweepConfig {
  std::vector<KernelConfig> kernels{{KernelFamily::Rbf, std::nullopt}};
  std::vector<double> multipliers{0.01, 0.1, 1.0, 10.0};
  int trials = 30;
  Index n = 10;
  ProtocolConfig protocol;  // protocol.d carries the dimension (default 30)
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::size_t mc_samples = 200000;  // |mu|^2 for poly3
};

// Per trial: draw a distribution, draw one sample shared by every estimator,
// scale lambda by the smallest retained eigenvalue gamma_0 of the Gram, and
// score all three estimators with the exact loss.
inline SweepReport run_lambda_sweep(const LambdaSweepConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("lambda sweep: trials >= 1");
  if (cfg.n < 2) throw std::invalid_argument("lambda sweep: n >= 2");
  cfg.protocol.validate();
  SweepReport report;
  report.command = "lambda-sweep";
  report.axis_values = cfg.multipliers;
  report.requested_trials = cfg.trials;

  std::vector<std::vector<TrialRecord>> per_trial(
      static_cast<std::size_t>(cfg.trials));
  Rng master(cfg.seed);
  detail::parallel_for_count(
      static_cast<std::size_t>(cfg.trials), cfg.parallelism, [&](std::size_t t) {
        auto start = std::chrono::steady_clock::now();
        Rng rng = master.derive(t);
        std::uint64_t trial_seed = rng.seed();
        auto& out = per_trial[t];
        GaussianMixture mix = draw_mixture(cfg.protocol, rng);
        Matrix x = sample(mix, cfg.n, rng);
        for (const KernelConfig& kc : cfg.kernels) {
          auto fail = [&](const std::string& why) {
            TrialRecord r;
            r.trial = static_cast<int>(t);
            r.seed = trial_seed;
            r.kernel = kc.label();
            r.n = cfg.n;
            r.d = cfg.protocol.d;
            r.failed = true;
            r.failure_reason = why;
            out.push_back(r);
            log_warn("lambda-sweep trial " + std::to_string(t) + " kernel " +
                     kc.label() + " failed: " + why);
          };
          try {
            KernelSpec spec = kc.resolve(x);
            Matrix k = gram(spec, x);
            SpectralDecomposition dec = sym_eig(k);
            const Index r = dec.retained_modes();
            if (r == 0) throw numerical_error("degenerate Gram");
            const double gamma0 = dec.eigvals(r - 1);
            Vector m = mean_evals(mix, spec, x);
            double musq = detail::trial_mu_sq_norm(mix, spec, cfg.mc_samples, rng);
            const Vector uniform = uniform_weights(cfg.n);
            double kme_loss = loss_precomputed(uniform, k, m, musq);
            for (double mult : cfg.multipliers) {
              double lambda = mult * gamma0;
              Vector beta_s = (std::isinf(lambda) ? 0.0 : 1.0 / (1.0 + lambda)) *
                              uniform;
              Vector beta_f =
                  lambda > 0.0 ? f_kmse_spectral(dec, lambda) : uniform;
              auto add = [&](const char* est, double lam, double value) {
                TrialRecord rec;
                rec.trial = static_cast<int>(t);
                rec.seed = trial_seed;
                rec.kernel = kc.label();
                rec.n = cfg.n;
                rec.d = cfg.protocol.d;
                rec.axis_value = mult;
                rec.estimator = est;
                rec.lambda_used = lam;
                rec.loss = value;
                out.push_back(rec);
              };
              add("KME", 0.0, kme_loss);
              add("S-KMSE", lambda, loss_precomputed(beta_s, k, m, musq));
              add("F-KMSE", lambda, loss_precomputed(beta_f, k, m, musq));
            }
          } catch (const std::exception& e) {
            fail(e.what());
          }
        }
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
        for (auto& rec : out) rec.elapsed_ms = ms;
      });

  for (auto& chunk : per_trial)
    for (auto& rec : chunk) {
      if (rec.failed) ++report.failed_trials;
      report.trials.push_back(std::move(rec));
    }
  report.aggregates = detail::aggregate(report.trials);
  return report;
}

struct NdSweepConfig {
  std::vector<KernelConfig> kernels{{KernelFamily::Rbf, std::nullopt}};
  std::vector<Index> n_grid{10, 25, 50};
  std::vector<Index> d_grid{5, 30};
  int trials = 30;
  ProtocolConfig protocol;  // d is overridden per grid cell
  SearchConfig search;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::size_t mc_samples = 200000;
};

// Same pipeline with lambda chosen per trial per estimator by leave-one-out:
// the analytic optimum for S-KMSE and the closed-form search for F-KMSE.
inline SweepReport run_nd_sweep(const NdSweepConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("nd sweep: trials >= 1");
  if (cfg.n_grid.empty() || cfg.d_grid.empty())
    throw std::invalid_argument("nd sweep: empty grid");
  for (Index n : cfg.n_grid)
    if (n < 2) throw std::invalid_argument("nd sweep: n >= 2");
  SweepReport report;
  report.command = "nd-sweep";
  report.requested_trials = cfg.trials;

  struct Cell {
    Index n;
    Index d;
  };
  std::vector<Cell> cells;
  for (Index d : cfg.d_grid)
    for (Index n : cfg.n_grid) cells.push_back({n, d});
  const std::size_t jobs = cells.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialRecord>> per_job(jobs);
  Rng master(cfg.seed);

  detail::parallel_for_count(jobs, cfg.parallelism, [&](std::size_t job) {
    auto start = std::chrono::steady_clock::now();
    const std::size_t cell_idx = job / static_cast<std::size_t>(cfg.trials);
    const std::size_t t = job % static_cast<std::size_t>(cfg.trials);
    const Cell cell = cells[cell_idx];
    Rng rng = master.derive(cell_idx).derive(t);
    std::uint64_t trial_seed = rng.seed();
    auto& out = per_job[job];
    ProtocolConfig protocol = cfg.protocol;
    protocol.d = cell.d;
    GaussianMixture mix = draw_mixture(protocol, rng);
    Matrix x = sample(mix, cell.n, rng);
    for (const KernelConfig& kc : cfg.kernels) {
      try {
        KernelSpec spec = kc.resolve(x);
        Matrix k = gram(spec, x);
        SpectralDecomposition dec = sym_eig(k);
        Vector m = mean_evals(mix, spec, x);
        double musq = detail::trial_mu_sq_norm(mix, spec, cfg.mc_samples, rng);
        const Vector uniform = uniform_weights(cell.n);

        SKmseSelection s_sel = s_kmse_select(gram_stats(k));
        Vector beta_s =
            (std::isinf(s_sel.lambda) ? 0.0 : 1.0 / (1.0 + s_sel.lambda)) *
            uniform;
        LoocvProfile f_prof = f_kmse_select(dec, cfg.search);
        Vector beta_f = f_kmse_spectral(dec, f_prof.selected_lambda);

        auto add = [&](const char* est, double lam, double value) {
          TrialRecord rec;
          rec.trial = static_cast<int>(t);
          rec.seed = trial_seed;
          rec.kernel = kc.label();
          rec.n = cell.n;
          rec.d = cell.d;
          rec.estimator = est;
          rec.lambda_used = lam;
          rec.loss = value;
          out.push_back(rec);
        };
        add("KME", 0.0, loss_precomputed(uniform, k, m, musq));
        add("S-KMSE", s_sel.lambda, loss_precomputed(beta_s, k, m, musq));
        add("F-KMSE", f_prof.selected_lambda,
            loss_precomputed(beta_f, k, m, musq));
      } catch (const std::exception& e) {
        TrialRecord rec;
        rec.trial = static_cast<int>(t);
        rec.seed = trial_seed;
        rec.kernel = kc.label();
        rec.n = cell.n;
        rec.d = cell.d;
        rec.failed = true;
        rec.failure_reason = e.what();
        out.push_back(rec);
        log_warn("nd-sweep trial " + std::to_string(t) + " (n=" +
                 std::to_string(cell.n) + ", d=" + std::to_string(cell.d) +
                 ") kernel " + kc.label() + " failed: " + e.what());
      }
    }
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    for (auto& rec : out) rec.elapsed_ms = ms;
  });

  for (auto& chunk : per_job)
    for (auto& rec : chunk) {
      if (rec.failed) ++report.failed_trials;
      report.trials.push_back(std::move(rec));
    }
  report.aggregates = detail::aggregate(report.trials);
  return report;
}

// Column standardization with statistics from the train split only.
inline void standardize_split(Matrix& train, Matrix& test) {
  for (Index j = 0; j < train.cols(); ++j) {
    double mean = train.col(j).mean();
    double var = (train.col(j).array() - mean).square().mean();
    if (!(var > 1e-24))
      throw std::invalid_argument("standardize: column " + std::to_string(j + 1) +
                                  " has zero variance in the train split");
    double inv_sd = 1.0 / std::sqrt(var);
    train.col(j) = (train.col(j).array() - mean) * inv_sd;
    if (test.rows() > 0) test.col(j) = (test.col(j).array() - mean) * inv_sd;
  }
}

struct KpcaBenchConfig {
  KernelConfig kernel{KernelFamily::Rbf, std::nullopt};
  Index ell = 20;
  int repetitions = 10;
  double test_fraction = 0.3;
  bool normalize = true;
  std::uint64_t seed = 0;
  SearchConfig search;
};

struct KpcaScenarioResult {
  std::string scenario;
  double mean_error = 0.0;
  double std_error = 0.0;  // std of the per-repetition means
  Index ell_used = 0;
  std::vector<double> rep_means;
};

struct KpcaBenchReport {
  std::vector<KpcaScenarioResult> scenarios;
  int repetitions = 0;
};

// The five scenarios: standard KPCA, shrinkage centering (S/F), and
// covariance shrinkage (S/F-COSE) with uniform centering.
inline KpcaBenchReport run_kpca_bench(const KpcaBenchConfig& cfg,
                                      const Matrix& data) {
  validate_data(data);
  if (data.rows() < 10)
    throw std::invalid_argument("kpca bench: needs at least 10 points");
  if (cfg.repetitions < 1 || !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw std::invalid_argument("kpca bench: bad repetitions or test fraction");

  static constexpr const char* kScenarios[] = {
      "standard", "s-kmse-centering", "f-kmse-centering", "s-cose", "f-cose"};
  KpcaBenchReport report;
  report.repetitions = cfg.repetitions;
  report.scenarios.resize(5);
  for (int s = 0; s < 5; ++s) report.scenarios[s].scenario = kScenarios[s];

  Rng master(cfg.seed);
  const Index n = data.rows();
  const Index n_test = std::max<Index>(
      1, static_cast<Index>(std::llround(cfg.test_fraction * static_cast<double>(n))));
  const Index n_train = n - n_test;
  if (n_train < 2) throw std::invalid_argument("kpca bench: train split too small");

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    Rng rng = master.derive(static_cast<std::uint64_t>(rep));
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.index(i + 1)]);
    Matrix train(n_train, data.cols()), test(n_test, data.cols());
    for (Index i = 0; i < n_train; ++i)
      train.row(i) = data.row(perm[static_cast<std::size_t>(i)]);
    for (Index i = 0; i < n_test; ++i)
      test.row(i) = data.row(perm[static_cast<std::size_t>(n_train + i)]);
    if (cfg.normalize) standardize_split(train, test);

    KernelSpec spec = cfg.kernel.resolve(train);
    Matrix k = gram(spec, train);
    SpectralDecomposition dec = sym_eig(k);
    const Vector uniform = uniform_weights(n_train);

    SKmseSelection s_sel = s_kmse_select(gram_stats(k));
    Vector beta_s =
        (std::isinf(s_sel.lambda) ? 0.0 : 1.0 / (1.0 + s_sel.lambda)) * uniform;
    Vector beta_f = f_kmse_spectral(dec, f_kmse_select(dec, cfg.search).selected_lambda);
    CovOpWeights cov_std{uniform, CovOpMethod::Standard, 0.0};

    struct Scenario {
      Vector centering;
      CovOpWeights covop;
    };
    std::vector<Scenario> scenarios;
    scenarios.push_back({uniform, cov_std});
    scenarios.push_back({beta_s, cov_std});
    scenarios.push_back({beta_f, cov_std});
    scenarios.push_back({uniform, cose_weights(k, std::nullopt, CovOpMethod::SCose,
                                               std::nullopt, cfg.search)});
    scenarios.push_back({uniform, cose_weights(k, std::nullopt, CovOpMethod::FCose,
                                               std::nullopt, cfg.search)});

    for (int s = 0; s < 5; ++s) {
      const Scenario& sc = scenarios[static_cast<std::size_t>(s)];
      Index rank = kpca_rank(center_train(k, sc.centering).values);
      Index ell = std::min(cfg.ell, rank);
      if (ell < cfg.ell)
        log_info("kpca bench: scenario " + std::string(kScenarios[s]) +
                 " rank " + std::to_string(rank) + " < requested ell " +
                 std::to_string(cfg.ell) + "; reduced");
      KpcaModel model = kpca_fit(train, spec, sc.centering, sc.covop, ell);
      Vector errs = kpca_reconstruction_error(model, test);
      report.scenarios[static_cast<std::size_t>(s)].rep_means.push_back(
          errs.mean());
      report.scenarios[static_cast<std::size_t>(s)].ell_used = ell;
    }
  }

  for (auto& sc : report.scenarios) {
    double mean = std::accumulate(sc.rep_means.begin(), sc.rep_means.end(), 0.0) /
                  static_cast<double>(sc.rep_means.size());
    double var = 0.0;
    for (double v : sc.rep_means) var += (v - mean) * (v - mean);
    var /= static_cast<double>(sc.rep_means.size());
    sc.mean_error = mean;
    sc.std_error = std::sqrt(var);
  }
  return report;
}

// --- flat config keys <-> experiment configs ---

inline void protocol_from_json(const Json& j, ProtocolConfig* p) {
  if (j.contains("d")) p->d = j.at("d").get<Index>();
  if (j.contains("components")) p->components = j.at("components").get<Index>();
  if (j.contains("pi")) p->pi = j.at("pi").get<std::vector<double>>();
  if (j.contains("theta_range")) {
    auto range = j.at("theta_range").get<std::vector<double>>();
    if (range.size() != 2)
      throw std::invalid_argument("config: theta_range must be [lo, hi]");
    p->theta_min = range[0];
    p->theta_max = range[1];
  }
  if (j.contains("wishart_scale"))
    p->wishart_scale = j.at("wishart_scale").get<double>();
  if (j.contains("wishart_df")) p->wishart_df = j.at("wishart_df").get<Index>();
  if (j.contains("noise_var")) p->noise_var = j.at("noise_var").get<double>();
}

inline void protocol_to_json(const ProtocolConfig& p, Json* j) {
  (*j)["d"] = p.d;
  (*j)["components"] = p.components;
  (*j)["pi"] = p.pi;
  (*j)["theta_range"] = std::vector<double>{p.theta_min, p.theta_max};
  (*j)["wishart_scale"] = p.wishart_scale;
  (*j)["wishart_df"] = p.wishart_df;
  (*j)["noise_var"] = p.noise_var;
}

inline void search_from_json(const Json& j, SearchConfig* s) {
  if (j.contains("search_grid_size"))
    s->grid_size = j.at("search_grid_size").get<int>();
  if (j.contains("search_lo_mult")) s->lo_mult = j.at("search_lo_mult").get<double>();
  if (j.contains("search_hi_mult")) s->hi_mult = j.at("search_hi_mult").get<double>();
  if (j.contains("search_rel_tol")) s->rel_tol = j.at("search_rel_tol").get<double>();
}

inline void search_to_json(const SearchConfig& s, Json* j) {
  (*j)["search_grid_size"] = s.grid_size;
  (*j)["search_lo_mult"] = s.lo_mult;
  (*j)["search_hi_mult"] = s.hi_mult;
  (*j)["search_rel_tol"] = s.rel_tol;
}

inline std::vector<KernelConfig> kernels_from_json(const Json& j) {
  std::vector<KernelConfig> kernels;
  if (j.contains("kernels")) {
    for (const auto& k : j.at("kernels"))
      kernels.push_back(kernel_config_from_json(k));
  } else if (j.contains("kernel")) {
    kernels.push_back(kernel_config_from_json(j.at("kernel")));
  }
  if (kernels.empty())
    throw std::invalid_argument("config: kernel or kernels is required");
  return kernels;
}

inline std::uint64_t seed_from_json(const Json& j, const char* command) {
  if (!j.contains("seed"))
    throw std::invalid_argument(std::string("config: seed is required for ") +
                                command);
  return j.at("seed").get<std::uint64_t>();
}

inline LambdaSweepConfig lambda_sweep_config_from_json(const Json& j) {
  LambdaSweepConfig cfg;
  cfg.kernels = kernels_from_json(j);
  if (j.contains("multipliers"))
    cfg.multipliers = j.at("multipliers").get<std::vector<double>>();
  if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
  if (j.contains("n")) cfg.n = j.at("n").get<Index>();
  protocol_from_json(j, &cfg.protocol);
  cfg.seed = seed_from_json(j, "lambda-sweep");
  if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
  if (j.contains("mc_samples"))
    cfg.mc_samples = j.at("mc_samples").get<std::size_t>();
  return cfg;
}

inline Json to_json(const LambdaSweepConfig& cfg) {
  Json j;
  Json kernels = Json::array();
  for (const auto& k : cfg.kernels) kernels.push_back(to_json(k));
  j["kernels"] = std::move(kernels);
  j["multipliers"] = cfg.multipliers;
  j["trials"] = cfg.trials;
  j["n"] = cfg.n;
  protocol_to_json(cfg.protocol, &j);
  j["seed"] = cfg.seed;
  j["parallelism"] = cfg.parallelism;
  j["mc_samples"] = cfg.mc_samples;
  return j;
}

inline NdSweepConfig nd_sweep_config_from_json(const Json& j) {
  NdSweepConfig cfg;
  cfg.kernels = kernels_from_json(j);
  if (j.contains("n_grid")) cfg.n_grid = j.at("n_grid").get<std::vector<Index>>();
  if (j.contains("d_grid")) cfg.d_grid = j.at("d_grid").get<std::vector<Index>>();
  if (j.contains("n")) cfg.n_grid = {j.at("n").get<Index>()};
  if (j.contains("d")) cfg.d_grid = {j.at("d").get<Index>()};
  if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
  protocol_from_json(j, &cfg.protocol);
  search_from_json(j, &cfg.search);
  cfg.seed = seed_from_json(j, "nd-sweep");
  if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
  if (j.contains("mc_samples"))
    cfg.mc_samples = j.at("mc_samples").get<std::size_t>();
  return cfg;
}

inline Json to_json(const NdSweepConfig& cfg) {
  Json j;
  Json kernels = Json::array();
  for (const auto& k : cfg.kernels) kernels.push_back(to_json(k));
  j["kernels"] = std::move(kernels);
  j["n_grid"] = cfg.n_grid;
  j["d_grid"] = cfg.d_grid;
  j["trials"] = cfg.trials;
  protocol_to_json(cfg.protocol, &j);
  search_to_json(cfg.search, &j);
  j["seed"] = cfg.seed;
  j["parallelism"] = cfg.parallelism;
  j["mc_samples"] = cfg.mc_samples;
  return j;
}

inline KpcaBenchConfig kpca_bench_config_from_json(const Json& j) {
  KpcaBenchConfig cfg;
  if (j.contains("kernel") || j.contains("kernels"))
    cfg.kernel = kernels_from_json(j).front();
  if (j.contains("ell")) cfg.ell = j.at("ell").get<Index>();
  if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<int>();
  if (j.contains("test_fraction"))
    cfg.test_fraction = j.at("test_fraction").get<double>();
  if (j.contains("normalize")) cfg.normalize = j.at("normalize").get<bool>();
  search_from_json(j, &cfg.search);
  cfg.seed = seed_from_json(j, "kpca-bench");
  return cfg;
}

inline Json to_json(const KpcaBenchConfig& cfg) {
  Json j;
  j["kernel"] = to_json(cfg.kernel);
  j["ell"] = cfg.ell;
  j["repetitions"] = cfg.repetitions;
  j["test_fraction"] = cfg.test_fraction;
  j["normalize"] = cfg.normalize;
  search_to_json(cfg.search, &j);
  j["seed"] = cfg.seed;
  return j;
}

// --- payload serialization (deterministic for a fixed seed) ---

inline Json payload_json(const SweepReport& report) {
  Json trials = Json::array();
  for (const auto& t : report.trials) {
    Json rec{{"trial", t.trial},       {"seed", t.seed},
             {"kernel", t.kernel},     {"n", t.n},
             {"d", t.d},               {"axis_value", t.axis_value},
             {"estimator", t.estimator}, {"lambda", t.lambda_used},
             {"loss", t.loss},         {"failed", t.failed}};
    if (t.failed) rec["failure_reason"] = t.failure_reason;
    trials.push_back(std::move(rec));
  }
  Json aggregates = Json::array();
  for (const auto& row : report.aggregates) {
    Json rec{{"kernel", row.kernel},
             {"n", row.n},
             {"d", row.d},
             {"axis_value", row.axis_value},
             {"estimator", row.estimator},
             {"trials_effective", row.trials_effective},
             {"mean_loss", row.mean_loss},
             {"median_loss", row.median_loss},
             {"p25_loss", row.p25_loss},
             {"p75_loss", row.p75_loss}};
    if (!std::isnan(row.win_rate_vs_kme))
      rec["win_rate_vs_kme"] = row.win_rate_vs_kme;
    aggregates.push_back(std::move(rec));
  }
  return Json{{"schema_version", 1},
              {"command", report.command},
              {"axis_values", report.axis_values},
              {"requested_trials", report.requested_trials},
              {"failed_trials", report.failed_trials},
              {"trials", std::move(trials)},
              {"aggregates", std::move(aggregates)}};
}

inline Json payload_json(const KpcaBenchReport& report) {
  Json scenarios = Json::array();
  for (const auto& sc : report.scenarios)
    scenarios.push_back(Json{{"scenario", sc.scenario},
                             {"ell", sc.ell_used},
                             {"mean_error", sc.mean_error},
                             {"std_error", sc.std_error},
                             {"rep_means", sc.rep_means}});
  return Json{{"schema_version", 1},
              {"command", "kpca-bench"},
              {"repetitions", report.repetitions},
              {"scenarios", std::move(scenarios)}};
}

// Aggregate table as CSV, schema-versioned in the first line.
inline std::string aggregates_csv(const SweepReport& report) {
  std::string out = "# schema_version=1\n";
  out += "kernel,n,d,axis_value,estimator,trials_effective,mean_loss,"
         "median_loss,p25_loss,p75_loss,win_rate_vs_kme\n";
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    Json j = v;
    return j.dump();
  };
  for (const auto& row : report.aggregates) {
    out += row.kernel + "," + std::to_string(row.n) + "," + std::to_string(row.d) +
           "," + num(row.axis_value) + "," + row.estimator + "," +
           std::to_string(row.trials_effective) + "," + num(row.mean_loss) + "," +
           num(row.median_loss) + "," + num(row.p25_loss) + "," +
           num(row.p75_loss) + "," + num(row.win_rate_vs_kme) + "\n";
  }
  return out;
}

inline std::string aggregates_csv(const KpcaBenchReport& report) {
  std::string out = "# schema_version=1\n";
  out += "scenario,ell,repetitions,mean_error,std_error\n";
  for (const auto& sc : report.scenarios) {
    out += sc.scenario + "," + std::to_string(sc.ell_used) + "," +
           std::to_string(report.repetitions) + "," + Json(sc.mean_error).dump() +
           "," + Json(sc.std_error).dump() + "\n";
  }
  return out;
}

}  // namespace kmshrink
