#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cesdet/ces_models.hpp"
#include "cesdet/core_types.hpp"
#include "cesdet/detectors.hpp"

namespace cesdet {

/// Sigma_{jk} = rho^{|j-k|} (real), identity, or an explicit matrix.
struct SigmaSpec {
  enum class Kind { Identity, Exponential, Explicit };
  Kind kind = Kind::Identity;
  double rho = 0.0;
  CMatrix explicit_matrix;

  HermitianMatrix build(Index n) const;
  std::string describe() const;
};

/// Unit-norm Fourier steering v_n = exp(i 2 pi f n) / sqrt(N), or explicit.
struct SteeringSpec {
  enum class Kind { Fourier, Explicit };
  Kind kind = Kind::Fourier;
  double frequency = 0.0;
  CVector explicit_vector;

  CVector build(Index n) const;
  std::string describe() const;
};

struct ExperimentConfig {
  Index n = 4;
  Index m1 = 16;
  Index m0 = 128;
  CesModel model = CesModel::gaussian();
  SigmaSpec sigma;
  SteeringSpec steering;
  cplx alpha{0.0, 0.0};
  std::vector<DetectorId> detectors{DetectorId::Mglrt};
  WaldScatter wald_scatter = WaldScatter::T1AtEtaHat;
  Index trials = 1000;
  std::uint64_t seed = 1;
  std::vector<double> nominal_pfa;
  std::vector<double> thresholds;  // explicit, in addition to nominal ones

  /// Throws InvalidArgument naming the violated invariant.
  void validate() const;
};

struct RunOptions {
  unsigned workers = 1;
  /// Statistics are kept in full up to this many trials; beyond it only a
  /// log-binned histogram sketch is kept and the KS distance is omitted.
  Index full_storage_limit = 1'000'000;
  Index chunk_size = 1024;
};

/// Wilson score interval at 95%.
struct Proportion {
  Index successes = 0;
  Index trials = 0;
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

Proportion wilson_interval(Index successes, Index trials, double z = 1.959963984540054);

struct ThresholdRow {
  double threshold = 0.0;
  std::optional<double> nominal_pfa;  // set when derived from the chi2(2) quantile
  Proportion exceed;
};

/// Log-spaced histogram for quantiles when statistics are not stored.
class QuantileSketch {
 public:
  QuantileSketch();
  void add(double x);
  void merge(const QuantileSketch& other);
  Index count() const { return count_; }
  double quantile(double q) const;

 private:
  std::size_t bin_of(double x) const;
  double lower_edge(std::size_t bin) const;

  std::vector<Index> bins_;
  Index count_ = 0;
};

struct Calibration {
  double nominal_pfa = 0.0;
  double empirical_threshold = 0.0;
  double asymptotic_threshold = 0.0;
  double relative_gap = 0.0;  // (empirical - asymptotic) / asymptotic
};

struct DetectorSummary {
  DetectorId id = DetectorId::Mglrt;
  std::vector<double> sorted;  // empty in sketch mode
  std::optional<QuantileSketch> sketch;
  std::vector<ThresholdRow> rows;
  std::optional<double> ks;  // to chi2(2)
  Index overflow_events = 0;
  std::vector<Calibration> calibration;
  std::string calibration_note;
};

struct ExperimentResult {
  ExperimentConfig config;
  Index completed_trials = 0;
  bool partial = false;
  std::string failure;  // message of the numerical failure when partial
  double snr = 0.0;     // |alpha|^2 v^H Sigma^{-1} v
  std::vector<DetectorSummary> detectors;
};

/// Generates `trials` datasets (per-trial substreams keyed by (seed, trial))
/// with the given amplitude and evaluates the requested detectors. Output is
/// independent of the worker count.
/// `thresholds` holds one list per detector, in config.detectors order.
ExperimentResult run_trials(const ExperimentConfig& config, cplx alpha,
                            const std::vector<std::vector<double>>& thresholds,
                            const RunOptions& options);

/// H0 run: alpha forced to 0; thresholds at the chi2(2) quantiles of every
/// nominal Pfa plus the explicit thresholds; KS to chi2(2); calibration when
/// nominal levels are given.
ExperimentResult run_h0(const ExperimentConfig& config, const RunOptions& options = {});

struct RocPoint {
  double snr_db = 0.0;  // -inf for the alpha = 0 row
  double threshold = 0.0;
  Proportion detect;
};

struct RocCurve {
  DetectorId id = DetectorId::Mglrt;
  std::vector<RocPoint> points;  // sorted by snr_db, then threshold
};

struct RocResult {
  ExperimentConfig config;
  std::vector<RocCurve> curves;
  bool partial = false;
  std::string failure;
};

/// Pd over an SNR grid (SNR = |alpha|^2 v^H Sigma^{-1} v), keeping the phase
/// of config.alpha (zero phase when alpha = 0). Uses common random numbers
/// across the grid. An alpha = 0 row is always included first.
/// `thresholds` holds one list per detector, in config.detectors order.
RocResult run_h1(const ExperimentConfig& config, std::span<const double> snr_db,
                 const std::vector<std::vector<double>>& thresholds, const RunOptions& options = {});

/// Empirical (1 - Pfa) quantile of the H0 statistic of each detector.
/// Requires nominal_pfa * trials >= 100.
std::vector<Calibration> calibrate_threshold(const ExperimentConfig& config, double nominal_pfa,
                                             const RunOptions& options = {});

/// Two-sided KS distance between a sorted sample and a continuous CDF.
double ks_distance(std::span<const double> sorted_sample, const std::function<double(double)>& cdf);

/// Inverse of the empirical CDF at level q (type 1 quantile).
double empirical_quantile(std::span<const double> sorted_sample, double q);

}  // namespace cesdet
