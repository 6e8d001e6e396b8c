#include "cesdet/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cesdet/config.hpp"
#include "cesdet/selftest.hpp"
#include "cesdet/version.hpp"
#include "cesdet/weighted_chisq.hpp"

namespace cesdet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string format = "both";
  double perturb = 0.0;
};

bool want_csv(const Options& o) { return o.format == "csv" || o.format == "both"; }
bool want_json(const Options& o) { return o.format == "json" || o.format == "both"; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// manifest.json is written with status "running" before any work and
/// rewritten with the final status afterwards.
class Manifest {
 public:
  Manifest(std::string subcommand, const Options& opts, std::uint64_t seed)
      : dir_(opts.out_dir), start_(std::chrono::steady_clock::now()) {
    doc_ = {{"subcommand", std::move(subcommand)},
            {"config_path", opts.config_path},
            {"output_dir", opts.out_dir},
            {"version", kVersion},
            {"timestamp", utc_timestamp()},
            {"seed", seed},
            {"workers", opts.workers},
            {"format", opts.format},
            {"schema_hash", config::schema_hash()},
            {"status", "running"},
            {"files", json::array()}};
    write();
  }

  void add_file(const std::string& name) { doc_["files"].push_back(name); }

  void finish(const std::string& status, const std::string& message = "") {
    doc_["status"] = status;
    if (!message.empty()) doc_["message"] = message;
    doc_["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write();
  }

 private:
  void write() const { config::write_file_atomic(dir_ / "manifest.json", doc_.dump(2) + "\n"); }

  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

void prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir);
}

void emit(Manifest& manifest, const fs::path& dir, const std::string& name, const std::string& contents) {
  config::write_file_atomic(dir / name, contents);
  manifest.add_file(name);
}

std::vector<double> asymptotic_thresholds(const ExperimentConfig& cfg) {
  std::vector<double> thr;
  for (double p : cfg.nominal_pfa) thr.push_back(chi2_quantile(1.0 - p, 2.0));
  thr.insert(thr.end(), cfg.thresholds.begin(), cfg.thresholds.end());
  return thr;
}

int cmd_simulate(const Options& opts) {
  auto loaded = config::load(opts.config_path, config::Command::Simulate);
  ExperimentConfig& cfg = loaded.experiment;
  if (opts.seed) cfg.seed = *opts.seed;
  prepare_output_dir(opts.out_dir);
  Manifest manifest("simulate", opts, cfg.seed);

  RunOptions run_opts;
  run_opts.workers = opts.workers;
  ExperimentResult result;
  try {
    if (cfg.alpha == cplx(0.0, 0.0)) {
      result = run_h0(cfg, run_opts);
    } else {
      const std::vector<std::vector<double>> thr(cfg.detectors.size(), asymptotic_thresholds(cfg));
      result = run_trials(cfg, cfg.alpha, thr, run_opts);
    }
  } catch (const NotPositiveDefinite& e) {
    manifest.finish("failed", e.what());
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }

  const fs::path dir(opts.out_dir);
  if (want_csv(opts)) emit(manifest, dir, "result.csv", config::simulate_csv(result));
  if (want_json(opts)) emit(manifest, dir, "result.json", config::to_json(result).dump(2) + "\n");

  for (const auto& d : result.detectors) {
    std::cout << fmt::format("{:6s} trials={} ks={}", detector_name(d.id), result.completed_trials,
                             d.ks ? fmt::format("{:.4f}", *d.ks) : "n/a");
    for (const auto& r : d.rows) {
      std::cout << fmt::format("  thr={:.4f} rate={:.4f} [{:.4f},{:.4f}]", r.threshold, r.exceed.estimate,
                               r.exceed.lo, r.exceed.hi);
    }
    std::cout << "\n";
  }

  if (result.partial) {
    manifest.finish("partial", result.failure);
    std::cerr << "numerical failure, partial results flushed: " << result.failure << "\n";
    return kNumericalFailure;
  }
  manifest.finish("complete");
  return kOk;
}

int cmd_roc(const Options& opts) {
  auto loaded = config::load(opts.config_path, config::Command::Roc);
  ExperimentConfig& cfg = loaded.experiment;
  if (opts.seed) cfg.seed = *opts.seed;
  prepare_output_dir(opts.out_dir);
  Manifest manifest("roc", opts, cfg.seed);

  RunOptions run_opts;
  run_opts.workers = opts.workers;
  RocResult roc;
  try {
    std::vector<std::vector<double>> thr(cfg.detectors.size());
    if (loaded.roc.calibrate) {
      ExperimentConfig h0 = cfg;
      h0.seed = splitmix64(cfg.seed ^ 0xca11b7a7eULL);  // independent of the Pd trials
      for (double p : cfg.nominal_pfa) {
        const auto cal = calibrate_threshold(h0, p, run_opts);
        for (std::size_t d = 0; d < cal.size(); ++d) thr[d].push_back(cal[d].empirical_threshold);
      }
      for (auto& t : thr) t.insert(t.end(), cfg.thresholds.begin(), cfg.thresholds.end());
    } else {
      for (auto& t : thr) t = asymptotic_thresholds(cfg);
    }
    roc = run_h1(cfg, loaded.roc.snr_db, thr, run_opts);
  } catch (const NotPositiveDefinite& e) {
    manifest.finish("failed", e.what());
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const InvalidArgument& e) {
    manifest.finish("failed", e.what());
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const fs::path dir(opts.out_dir);
  if (want_csv(opts)) {
    for (const auto& c : roc.curves) emit(manifest, dir, fmt::format("roc_{}.csv", detector_name(c.id)), config::roc_csv(c));
  }
  if (want_json(opts)) emit(manifest, dir, "roc.json", config::to_json(roc).dump(2) + "\n");
  if (roc.partial) {
    manifest.finish("partial", roc.failure);
    std::cerr << "numerical failure, partial results flushed: " << roc.failure << "\n";
    return kNumericalFailure;
  }
  manifest.finish("complete");
  return kOk;
}

int cmd_asymptotics(const Options& opts) {
  auto loaded = config::load(opts.config_path, config::Command::Asymptotics);
  auto& s = loaded.asymptotics;
  if (opts.seed) s.mc.seed = *opts.seed;
  s.mc.workers = opts.workers;
  prepare_output_dir(opts.out_dir);
  Manifest manifest("asymptotics", opts, s.mc.seed);

  SandwichReport report;
  try {
    report = sandwich_report(s.model, s.sigma.build(s.n), s.steering.build(s.n), s.mc);
  } catch (const std::runtime_error& e) {
    manifest.finish("failed", e.what());
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const InvalidArgument& e) {
    manifest.finish("failed", e.what());
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
  emit(manifest, opts.out_dir, "sandwich.json", config::to_json(report).dump(2) + "\n");
  std::cout << fmt::format("{}: lambda = ({:.5f}, {:.5f}) +/- ({:.5f}, {:.5f}); max |cross A|/se = {:.2f}, "
                           "max |cross B|/se = {:.2f}\n",
                           report.model, report.lambdas(0), report.lambdas(1), report.lambda_se(0),
                           report.lambda_se(1), report.max_cross_a_over_se, report.max_cross_b_over_se);
  manifest.finish("complete");
  return kOk;
}

int cmd_selftest(const Options& opts) {
  const auto start = std::chrono::steady_clock::now();
  const auto checks = run_selftest(opts.perturb);
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << fmt::format("{} {} (max rel err {:.3e}, tol {:.0e})\n", c.passed ? "PASS" : "FAIL", c.name,
                             c.max_relative_error, c.tolerance);
    ok = ok && c.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << fmt::format("selftest {} in {:.3f} s\n", ok ? "passed" : "FAILED", secs);
  return ok ? kOk : kSelftestFailed;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Mismatched-GLRT detection experiments for CES data"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options opts;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", opts.config_path, "JSON config file");
    if (needs_config) cfg->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", opts.seed, "override the config seed");
    sub->add_option("--workers", opts.workers, "worker threads (outputs do not depend on it)")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
    sub->add_option("--format", opts.format, "csv | json | both")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "H0/H1 Monte Carlo run with Pfa/Pd, KS and calibration");
  add_common(simulate, true);
  auto* roc = app.add_subcommand("roc", "Pd versus SNR curves");
  add_common(roc, true);
  auto* asym = app.add_subcommand("asymptotics", "pseudo-true point, sandwich matrices and H eigenvalues");
  add_common(asym, true);
  auto* selftest = app.add_subcommand("selftest", "fast algebraic identity suite");
  selftest->add_option("--perturb", opts.perturb, "relative perturbation of the reference side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(opts);
    if (*roc) return cmd_roc(opts);
    if (*asym) return cmd_asymptotics(opts);
    if (*selftest) return cmd_selftest(opts);
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace cesdet::cli
