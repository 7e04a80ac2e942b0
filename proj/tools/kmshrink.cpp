// Command-line front end: config parsing, CSV ingestion, experiment dispatch,
// and artifact output. Exit codes: 0 ok, 1 input error, 2 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kmshrink/kmshrink.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using kmshrink::Json;

std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path.string());
  out << content;
}

// results file layout: the only run-dependent bytes live under "metadata";
// "payload" and "effective_config" are byte-identical for a fixed seed.
void write_results(const std::filesystem::path& dir, const std::string& stem,
                   const Json& effective_config, const Json& payload,
                   double runtime_seconds) {
  Json doc{{"schema_version", 1},
           {"metadata",
            Json{{"timestamp", timestamp_utc()},
                 {"runtime_seconds", runtime_seconds},
                 {"version", kVersion}}},
           {"effective_config", effective_config},
           {"payload", payload}};
  std::filesystem::create_directories(dir);
  write_file(dir / (stem + "_results.json"), doc.dump(2) + "\n");
  write_file(dir / "effective_config.json", effective_config.dump(2) + "\n");
}

kmshrink::Matrix load_input(const Json& cfg, bool normalize_whole) {
  if (!cfg.contains("input"))
    throw std::invalid_argument("config: input csv path is required");
  kmshrink::CsvOptions options;
  if (cfg.contains("has_header")) options.has_header = cfg.at("has_header").get<bool>();
  if (cfg.contains("drop_column"))
    options.drop_column = cfg.at("drop_column").get<kmshrink::Index>();
  kmshrink::Matrix x =
      kmshrink::ingest_csv(cfg.at("input").get<std::string>(), options);
  if (normalize_whole) {
    kmshrink::Matrix empty(0, x.cols());
    kmshrink::standardize_split(x, empty);
  }
  return x;
}

int cmd_lambda_sweep(const Json& cfg, const std::filesystem::path& out_dir) {
  auto sweep_cfg = kmshrink::lambda_sweep_config_from_json(cfg);
  auto start = std::chrono::steady_clock::now();
  kmshrink::SweepReport report = kmshrink::run_lambda_sweep(sweep_cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  write_results(out_dir, "lambda_sweep", kmshrink::to_json(sweep_cfg),
                kmshrink::payload_json(report), secs);
  write_file(out_dir / "lambda_sweep_aggregates.csv",
             kmshrink::aggregates_csv(report));
  std::cout << "lambda-sweep: " << report.trials.size() << " records, "
            << report.failed_trials << " failed; wrote "
            << (out_dir / "lambda_sweep_results.json").string() << "\n";
  return 0;
}

int cmd_nd_sweep(const Json& cfg, const std::filesystem::path& out_dir) {
  auto sweep_cfg = kmshrink::nd_sweep_config_from_json(cfg);
  auto start = std::chrono::steady_clock::now();
  kmshrink::SweepReport report = kmshrink::run_nd_sweep(sweep_cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  write_results(out_dir, "nd_sweep", kmshrink::to_json(sweep_cfg),
                kmshrink::payload_json(report), secs);
  write_file(out_dir / "nd_sweep_aggregates.csv",
             kmshrink::aggregates_csv(report));
  std::cout << "nd-sweep: " << report.trials.size() << " records, "
            << report.failed_trials << " failed; wrote "
            << (out_dir / "nd_sweep_results.json").string() << "\n";
  return 0;
}

int cmd_kpca_bench(const Json& cfg, const std::filesystem::path& out_dir) {
  auto bench_cfg = kmshrink::kpca_bench_config_from_json(cfg);
  kmshrink::Matrix data;
  Json effective = kmshrink::to_json(bench_cfg);
  if (cfg.contains("input")) {
    data = load_input(cfg, false);  // split-aware normalization happens inside
    effective["input"] = cfg.at("input");
  } else if (cfg.value("synthetic", false)) {
    kmshrink::ProtocolConfig protocol;
    kmshrink::protocol_from_json(cfg, &protocol);
    kmshrink::Index n = cfg.value("n", kmshrink::Index{100});
    // data stream kept separate from the split stream inside the bench
    kmshrink::Rng data_rng = kmshrink::Rng(bench_cfg.seed).derive(0x5D17);
    kmshrink::GaussianMixture mix = kmshrink::draw_mixture(protocol, data_rng);
    data = kmshrink::sample(mix, n, data_rng);
    effective["synthetic"] = true;
    effective["n"] = n;
    kmshrink::protocol_to_json(protocol, &effective);
  } else {
    throw std::invalid_argument(
        "kpca-bench: either input csv or synthetic = true is required");
  }
  auto start = std::chrono::steady_clock::now();
  kmshrink::KpcaBenchReport report = kmshrink::run_kpca_bench(bench_cfg, data);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  write_results(out_dir, "kpca_bench", effective,
                kmshrink::payload_json(report), secs);
  write_file(out_dir / "kpca_bench_aggregates.csv",
             kmshrink::aggregates_csv(report));
  for (const auto& sc : report.scenarios)
    std::cout << "kpca-bench " << sc.scenario << ": mean error " << sc.mean_error
              << " (sd " << sc.std_error << ", ell " << sc.ell_used << ")\n";
  return 0;
}

int cmd_estimate(const Json& cfg, const std::filesystem::path& out_dir) {
  kmshrink::Matrix x = load_input(cfg, cfg.value("normalize", false));
  if (!cfg.contains("kernel"))
    throw std::invalid_argument("config: kernel is required");
  kmshrink::KernelConfig kc =
      kmshrink::kernel_config_from_json(cfg.at("kernel"));
  kmshrink::KernelSpec spec = kc.resolve(x);
  kmshrink::MeanEstimator estimator = kmshrink::estimator_from_name(
      cfg.value("estimator", std::string("kme")));
  std::optional<double> fixed_lambda;
  if (cfg.contains("lambda")) fixed_lambda = cfg.at("lambda").get<double>();
  kmshrink::SearchConfig search;
  kmshrink::search_from_json(cfg, &search);

  kmshrink::Matrix k = kmshrink::gram(spec, x);
  kmshrink::GramStats stats = kmshrink::gram_stats(k);
  double lambda_used = 0.0;
  kmshrink::KernelMeanEstimate est = kmshrink::fit_mean_estimate(
      x, spec, estimator, fixed_lambda, search, &lambda_used);

  // leave-one-out score at the reported optimum (KME scored at alpha = 0)
  double loocv_score;
  if (estimator == kmshrink::MeanEstimator::FKmse) {
    loocv_score =
        kmshrink::f_kmse_loocv_refit(kmshrink::sym_eig(k), lambda_used);
  } else {
    double alpha = std::isinf(lambda_used) ? 1.0
                                           : lambda_used / (1.0 + lambda_used);
    loocv_score = kmshrink::s_kmse_loocv_poly(stats, alpha);
  }

  Json effective{{"command", "estimate"},
                 {"kernel", kmshrink::to_json(spec)},
                 {"estimator", kmshrink::estimator_name(estimator)},
                 {"input", cfg.at("input")},
                 {"normalize", cfg.value("normalize", false)}};
  if (fixed_lambda) effective["lambda"] = *fixed_lambda;
  Json payload{{"schema_version", 1},
               {"estimate", kmshrink::to_json(est)},
               {"lambda", lambda_used},
               {"rho", stats.rho},
               {"varrho", stats.varrho},
               {"loocv_score", loocv_score}};
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "estimate.json", payload.dump(2) + "\n");
  write_file(out_dir / "effective_config.json", effective.dump(2) + "\n");
  std::cout << "estimator=" << kmshrink::estimator_name(estimator)
            << " lambda=" << lambda_used << " rho=" << stats.rho
            << " varrho=" << stats.varrho << " loocv=" << loocv_score << "\n";
  return 0;
}

int cmd_loocv_profile(const Json& cfg, const std::filesystem::path& out_dir) {
  kmshrink::Matrix x = load_input(cfg, cfg.value("normalize", false));
  if (!cfg.contains("kernel"))
    throw std::invalid_argument("config: kernel is required");
  kmshrink::KernelSpec spec =
      kmshrink::kernel_config_from_json(cfg.at("kernel")).resolve(x);
  std::string estimator = cfg.value("estimator", std::string("f-kmse"));
  kmshrink::Matrix k = kmshrink::gram(spec, x);

  kmshrink::LoocvProfile profile;
  if (estimator == "f-kmse") {
    kmshrink::SearchConfig search;
    kmshrink::search_from_json(cfg, &search);
    profile = kmshrink::f_kmse_select(kmshrink::sym_eig(k), search);
  } else if (estimator == "s-kmse") {
    kmshrink::GramStats stats = kmshrink::gram_stats(k);
    kmshrink::SKmseSelection sel = kmshrink::s_kmse_select(stats);
    profile.method = kmshrink::SelectionMethod::SAnalytic;
    profile.selected_lambda = sel.lambda;
    profile.selected_score = kmshrink::s_kmse_loocv_poly(stats, sel.alpha);
    // trace of the analytic quadratic over an alpha grid, for plotting
    for (int i = 0; i <= 100; ++i) {
      double alpha = i / 101.0;
      profile.lambdas.push_back(alpha / (1.0 - alpha));
      profile.scores.push_back(kmshrink::s_kmse_loocv_poly(stats, alpha));
      ++profile.evaluations;
    }
  } else {
    throw std::invalid_argument("loocv-profile: estimator must be s-kmse or f-kmse");
  }

  Json effective{{"command", "loocv-profile"},
                 {"kernel", kmshrink::to_json(spec)},
                 {"estimator", estimator},
                 {"input", cfg.at("input")}};
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "loocv_profile.json",
             kmshrink::to_json(profile).dump(2) + "\n");
  write_file(out_dir / "effective_config.json", effective.dump(2) + "\n");
  std::cout << "selected lambda=" << profile.selected_lambda
            << " score=" << profile.selected_score << "\n";
  return 0;
}

int cmd_dist_gram(const Json& cfg, const std::filesystem::path& out_dir) {
  if (!cfg.contains("inputs"))
    throw std::invalid_argument("dist-gram: inputs (array of csv paths) required");
  std::vector<kmshrink::Matrix> groups;
  kmshrink::CsvOptions options;
  if (cfg.contains("has_header")) options.has_header = cfg.at("has_header").get<bool>();
  for (const auto& path : cfg.at("inputs"))
    groups.push_back(kmshrink::ingest_csv(path.get<std::string>(), options));
  if (!cfg.contains("kernel"))
    throw std::invalid_argument("config: kernel is required");
  kmshrink::KernelConfig kc = kmshrink::kernel_config_from_json(cfg.at("kernel"));
  // median heuristic over the pooled groups so every estimate shares a kernel
  kmshrink::Matrix pooled(0, groups.front().cols());
  for (const auto& g : groups) {
    kmshrink::Matrix merged(pooled.rows() + g.rows(), g.cols());
    merged << pooled, g;
    pooled = std::move(merged);
  }
  kmshrink::KernelSpec spec = kc.resolve(pooled);
  kmshrink::MeanEstimator estimator = kmshrink::estimator_from_name(
      cfg.value("estimator", std::string("kme")));
  kmshrink::Level2Kernel level2;
  std::string kind = cfg.value("level2", std::string("linear"));
  if (kind == "gaussian") {
    level2.kind = kmshrink::Level2Kernel::Kind::Gaussian;
    if (!cfg.contains("level2_sigma_sq"))
      throw std::invalid_argument("dist-gram: level2_sigma_sq required for gaussian");
    level2.sigma_sq = cfg.at("level2_sigma_sq").get<double>();
  } else if (kind != "linear") {
    throw std::invalid_argument("dist-gram: level2 must be linear or gaussian");
  }
  kmshrink::SearchConfig search;
  kmshrink::search_from_json(cfg, &search);
  kmshrink::Matrix g =
      kmshrink::distribution_gram(groups, spec, estimator, level2, search);

  Json effective{{"command", "dist-gram"},
                 {"inputs", cfg.at("inputs")},
                 {"kernel", kmshrink::to_json(spec)},
                 {"estimator", kmshrink::estimator_name(estimator)},
                 {"level2", kind}};
  if (kind == "gaussian") effective["level2_sigma_sq"] = level2.sigma_sq;
  Json payload{{"schema_version", 1},
               {"groups", cfg.at("inputs").size()},
               {"gram", kmshrink::to_json(g)}};
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "dist_gram.json", payload.dump(2) + "\n");
  write_file(out_dir / "effective_config.json", effective.dump(2) + "\n");
  std::string csv = "# schema_version=1\n";
  for (kmshrink::Index i = 0; i < g.rows(); ++i) {
    for (kmshrink::Index j = 0; j < g.cols(); ++j)
      csv += (j ? "," : "") + Json(g(i, j)).dump();
    csv += "\n";
  }
  write_file(out_dir / "dist_gram.csv", csv);
  std::cout << "dist-gram: " << g.rows() << "x" << g.cols() << " matrix written\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel mean shrinkage estimators and benchmarks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(0, 1);

  std::string config_path, output_dir = ".";
  Json overrides = Json::object();

  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--output-dir", output_dir, "artifact output directory");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { overrides["seed"] = v; },
      "master seed (required for experiment commands)");
  app.add_option_function<std::string>(
      "--kernel",
      [&](const std::string& v) { overrides["kernel"] = Json{{"family", v}}; },
      "kernel family: lin | poly2 | poly3 | rbf");
  app.add_option_function<double>(
      "--bandwidth-sq",
      [&](double v) {
        if (!overrides.contains("kernel")) overrides["kernel"] = Json::object();
        overrides["kernel"]["bandwidth_sq"] = v;
      },
      "rbf bandwidth sigma^2");
  app.add_flag_function(
      "--median-bandwidth",
      [&](std::int64_t) {
        if (!overrides.contains("kernel")) overrides["kernel"] = Json::object();
        overrides["kernel"]["bandwidth"] = "median";
      },
      "use the median heuristic for the rbf bandwidth");
  app.add_option_function<std::string>(
      "--estimator",
      [&](const std::string& v) { overrides["estimator"] = v; },
      "kme | s-kmse | f-kmse");
  app.add_option_function<double>(
      "--lambda", [&](double v) { overrides["lambda"] = v; },
      "fixed shrinkage parameter (bypasses leave-one-out selection)");
  app.add_option_function<int>(
      "--parallelism", [&](int v) { overrides["parallelism"] = v; },
      "trial worker threads");
  app.add_option_function<bool>(
      "--normalize", [&](bool v) { overrides["normalize"] = v; },
      "standardize columns");
  app.add_option_function<std::vector<std::string>>(
      "--input",
      [&](const std::vector<std::string>& v) {
        overrides["input"] = v.front();
        overrides["inputs"] = v;
      },
      "input csv path(s)");
  app.add_option_function<int>(
      "--trials", [&](int v) { overrides["trials"] = v; }, "trial count");
  app.add_option_function<kmshrink::Index>(
      "--n", [&](kmshrink::Index v) { overrides["n"] = v; }, "sample size");
  app.add_option_function<kmshrink::Index>(
      "--d", [&](kmshrink::Index v) { overrides["d"] = v; }, "dimension");

  std::vector<std::string> command_names = {"lambda-sweep", "nd-sweep",
                                            "kpca-bench",   "estimate",
                                            "loocv-profile", "dist-gram"};
  // flags after the command name fall through to the options declared above
  for (const auto& name : command_names) app.add_subcommand(name)->fallthrough();

  CLI11_PARSE(app, argc, argv);

  std::string command;
  for (const auto& name : command_names)
    if (app.got_subcommand(name)) command = name;
  if (command.empty()) {
    std::cout << app.help();
    return 0;
  }

  try {
    Json file_cfg = Json::object();
    if (!config_path.empty()) file_cfg = kmshrink::load_config_file(config_path);
    Json effective = kmshrink::merge_config(file_cfg, overrides);
    effective["command"] = command;
    std::filesystem::path out_dir(output_dir);

    if (command == "lambda-sweep") return cmd_lambda_sweep(effective, out_dir);
    if (command == "nd-sweep") return cmd_nd_sweep(effective, out_dir);
    if (command == "kpca-bench") return cmd_kpca_bench(effective, out_dir);
    if (command == "estimate") return cmd_estimate(effective, out_dir);
    if (command == "loocv-profile") return cmd_loocv_profile(effective, out_dir);
    if (command == "dist-gram") return cmd_dist_gram(effective, out_dir);
    throw std::invalid_argument("unknown command: " + command);
  } catch (const kmshrink::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
