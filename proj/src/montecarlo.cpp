#include "cesdet/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "cesdet/rng.hpp"
#include "cesdet/weighted_chisq.hpp"

namespace cesdet {

namespace {

// Substream keys within a trial.
enum Stream : std::uint64_t { kPrimaryTexture = 0, kPrimaryCore = 1, kSecondaryTexture = 2, kSecondaryCore = 3 };

struct ChunkResult {
  Index first = 0;
  std::vector<std::vector<double>> stats;  // [detector][trial in chunk]
  std::vector<Index> overflow;
  std::optional<Index> failed_at;  // absolute trial index
  std::string failure;
};

bool uses_single_snapshot(DetectorId id) { return id == DetectorId::Kelly || id == DetectorId::Amf; }

double chi2_2_cdf(double x) { return chi2_cdf(x, 2.0); }

}  // namespace

HermitianMatrix SigmaSpec::build(Index n) const {
  switch (kind) {
    case Kind::Identity:
      return HermitianMatrix::identity(n);
    case Kind::Exponential: {
      if (!(std::abs(rho) < 1.0)) throw InvalidArgument("sigma: exponential rho must satisfy |rho| < 1");
      CMatrix m(n, n);
      for (Index j = 0; j < n; ++j) {
        for (Index k = 0; k < n; ++k) m(j, k) = std::pow(rho, static_cast<double>(std::abs(j - k)));
      }
      return HermitianMatrix(m);
    }
    case Kind::Explicit:
      if (explicit_matrix.rows() != n || explicit_matrix.cols() != n) {
        throw InvalidArgument(fmt::format("sigma: explicit matrix must be {}x{}", n, n));
      }
      return HermitianMatrix(explicit_matrix);
  }
  throw InvalidArgument("sigma: unknown kind");
}

std::string SigmaSpec::describe() const {
  switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::Exponential: return fmt::format("exponential(rho={:.17g})", rho);
    case Kind::Explicit: return "explicit";
  }
  return "unknown";
}

CVector SteeringSpec::build(Index n) const {
  if (kind == Kind::Explicit) {
    if (explicit_vector.size() != n) {
      throw InvalidArgument(fmt::format("steering: explicit vector must have length {}", n));
    }
    if (explicit_vector.squaredNorm() <= 0.0) throw InvalidArgument("steering: vector is zero");
    return explicit_vector;
  }
  CVector v(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < n; ++i) {
    v(i) = std::polar(scale, 2.0 * M_PI * frequency * static_cast<double>(i));
  }
  return v;
}

std::string SteeringSpec::describe() const {
  if (kind == Kind::Explicit) return "explicit";
  return fmt::format("fourier(f={:.17g})", frequency);
}

void ExperimentConfig::validate() const {
  if (n < 1) throw InvalidArgument("N must be >= 1");
  if (m1 < 1) throw InvalidArgument("M1 must be >= 1");
  if (m0 < n) {
    throw InvalidArgument(fmt::format("M0 >= N violated (M0 = {}, N = {}): secondary scatter would be singular", m0, n));
  }
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (detectors.empty()) throw InvalidArgument("at least one detector is required");
  for (DetectorId id : detectors) {
    if (uses_single_snapshot(id) && m1 != 1) {
      throw InvalidArgument(fmt::format("{} requires M1 = 1 (got M1 = {})", detector_name(id), m1));
    }
  }
  for (double p : nominal_pfa) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument(fmt::format("nominal_pfa {} outside (0,1)", p));
  }
  for (double t : thresholds) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument(fmt::format("threshold {} must be finite and >= 0", t));
  }
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) throw InvalidArgument("alpha must be finite");
  Cholesky(sigma.build(n));  // sigma must be PD
  steering.build(n);
}

Proportion wilson_interval(Index successes, Index trials, double z) {
  Proportion p{successes, trials, 0.0, 0.0, 1.0};
  if (trials <= 0) return p;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (phat + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  p.estimate = phat;
  p.lo = std::max(0.0, std::min(phat, centre - half));
  p.hi = std::min(1.0, std::max(phat, centre + half));
  return p;
}

// 20 decades, 500 bins each, plus underflow and overflow bins.
namespace {
constexpr double kSketchLogMin = -12.0;
constexpr double kSketchLogMax = 8.0;
constexpr std::size_t kSketchPerDecade = 500;
constexpr std::size_t kSketchInner = static_cast<std::size_t>((kSketchLogMax - kSketchLogMin)) * kSketchPerDecade;
}  // namespace

QuantileSketch::QuantileSketch() : bins_(kSketchInner + 2, 0) {}

std::size_t QuantileSketch::bin_of(double x) const {
  if (!(x > std::pow(10.0, kSketchLogMin))) return 0;
  const double pos = (std::log10(x) - kSketchLogMin) * static_cast<double>(kSketchPerDecade);
  if (pos >= static_cast<double>(kSketchInner)) return kSketchInner + 1;
  return 1 + static_cast<std::size_t>(pos);
}

double QuantileSketch::lower_edge(std::size_t bin) const {
  if (bin == 0) return 0.0;
  return std::pow(10.0, kSketchLogMin + static_cast<double>(bin - 1) / static_cast<double>(kSketchPerDecade));
}

void QuantileSketch::add(double x) {
  ++bins_[bin_of(x)];
  ++count_;
}

void QuantileSketch::merge(const QuantileSketch& other) {
  for (std::size_t i = 0; i < bins_.size(); ++i) bins_[i] += other.bins_[i];
  count_ += other.count_;
}

double QuantileSketch::quantile(double q) const {
  if (count_ == 0) throw InvalidArgument("quantile of an empty sketch");
  const double target = std::clamp(q, 0.0, 1.0) * static_cast<double>(count_);
  double cum = 0.0;
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    const double c = static_cast<double>(bins_[i]);
    if (c > 0.0 && cum + c >= target) {
      if (i == 0) return 0.0;
      if (i == kSketchInner + 1) return lower_edge(i);
      const double frac = (target - cum) / c;
      const double lo = lower_edge(i);
      const double hi = lower_edge(i + 1);
      return lo * std::pow(hi / lo, frac);
    }
    cum += c;
  }
  return lower_edge(kSketchInner + 1);
}

double ks_distance(std::span<const double> sorted_sample, const std::function<double(double)>& cdf) {
  if (sorted_sample.empty()) throw InvalidArgument("ks_distance: empty sample");
  const double n = static_cast<double>(sorted_sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted_sample.size(); ++i) {
    const double f = cdf(sorted_sample[i]);
    const double upper = static_cast<double>(i + 1) / n - f;
    const double lower = f - static_cast<double>(i) / n;
    d = std::max({d, upper, lower});
  }
  return d;
}

double empirical_quantile(std::span<const double> sorted_sample, double q) {
  if (sorted_sample.empty()) throw InvalidArgument("empirical_quantile: empty sample");
  const double n = static_cast<double>(sorted_sample.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n));
  idx = std::clamp<std::size_t>(idx, 1, sorted_sample.size());
  return sorted_sample[idx - 1];
}

ExperimentResult run_trials(const ExperimentConfig& config, cplx alpha,
                            const std::vector<std::vector<double>>& thresholds,
                            const RunOptions& options) {
  config.validate();
  const std::size_t ndet = config.detectors.size();
  if (thresholds.size() != ndet) throw InvalidArgument("run_trials: one threshold list per detector required");
  if (options.chunk_size < 1) throw InvalidArgument("run_trials: chunk_size must be >= 1");

  const HermitianMatrix sigma = config.sigma.build(config.n);
  const CVector v = config.steering.build(config.n);
  const CesSampler primary_sampler({alpha, v, sigma, config.model});
  const CesSampler secondary_sampler({cplx(0.0, 0.0), v, sigma, config.model});
  const bool full_storage = config.trials <= options.full_storage_limit;

  ExperimentResult result;
  result.config = config;
  result.config.alpha = alpha;
  result.snr = std::norm(alpha) * quad_form(sigma, v, v).real();
  result.detectors.resize(ndet);
  std::vector<std::vector<Index>> exceed(ndet);
  for (std::size_t d = 0; d < ndet; ++d) {
    result.detectors[d].id = config.detectors[d];
    exceed[d].assign(thresholds[d].size(), 0);
    if (full_storage) {
      result.detectors[d].sorted.reserve(static_cast<std::size_t>(config.trials));
    } else {
      result.detectors[d].sketch.emplace();
    }
  }

  const Index nchunks = (config.trials + options.chunk_size - 1) / options.chunk_size;

  auto run_chunk = [&](Index c) {
    ChunkResult cr;
    cr.first = c * options.chunk_size;
    const Index last = std::min(config.trials, cr.first + options.chunk_size);
    cr.stats.assign(ndet, {});
    cr.overflow.assign(ndet, 0);
    for (Index t = cr.first; t < last; ++t) {
      const auto key = static_cast<std::uint64_t>(t);
      try {
        Rng pt = Rng::substream(config.seed, {key, kPrimaryTexture});
        Rng pc = Rng::substream(config.seed, {key, kPrimaryCore});
        Rng st = Rng::substream(config.seed, {key, kSecondaryTexture});
        Rng sc = Rng::substream(config.seed, {key, kSecondaryCore});
        Dataset data{primary_sampler.sample(config.m1, pt, pc), secondary_sampler.sample(config.m0, st, sc), v};
        const auto outs = evaluate(data, config.detectors, config.wald_scatter);
        for (std::size_t d = 0; d < ndet; ++d) {
          if (!std::isfinite(outs[d].statistic)) throw NotPositiveDefinite("non-finite statistic");
          cr.stats[d].push_back(outs[d].statistic);
          if (outs[d].clamped) ++cr.overflow[d];
        }
      } catch (const std::runtime_error& e) {
        cr.failed_at = t;
        cr.failure = fmt::format("trial {}: {}", t, e.what());
        break;
      }
    }
    return cr;
  };

  std::mutex mu;
  std::map<Index, ChunkResult> pending;
  Index next_commit = 0;
  std::atomic<bool> stop{false};
  std::atomic<Index> next_chunk{0};

  auto commit = [&](ChunkResult& cr) {
    for (std::size_t d = 0; d < ndet; ++d) {
      auto& summary = result.detectors[d];
      summary.overflow_events += cr.overflow[d];
      for (double s : cr.stats[d]) {
        if (full_storage) {
          summary.sorted.push_back(s);
        } else {
          summary.sketch->add(s);
        }
        for (std::size_t k = 0; k < thresholds[d].size(); ++k) {
          if (s > thresholds[d][k]) ++exceed[d][k];
        }
      }
    }
    result.completed_trials += static_cast<Index>(cr.stats.empty() ? 0 : cr.stats[0].size());
    if (cr.failed_at) {
      result.partial = true;
      result.failure = cr.failure;
      stop = true;
    }
  };

  auto worker = [&] {
    while (!stop) {
      const Index c = next_chunk++;
      if (c >= nchunks) break;
      ChunkResult cr = run_chunk(c);
      std::lock_guard lock(mu);
      pending.emplace(c, std::move(cr));
      while (!result.partial) {
        auto it = pending.find(next_commit);
        if (it == pending.end()) break;
        commit(it->second);
        pending.erase(it);
        ++next_commit;
      }
    }
  };

  const unsigned nworkers = std::max(1u, options.workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < nworkers; ++i) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t d = 0; d < ndet; ++d) {
    auto& summary = result.detectors[d];
    std::sort(summary.sorted.begin(), summary.sorted.end());
    for (std::size_t k = 0; k < thresholds[d].size(); ++k) {
      summary.rows.push_back({thresholds[d][k], std::nullopt, wilson_interval(exceed[d][k], result.completed_trials)});
    }
  }
  return result;
}

ExperimentResult run_h0(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<double> thr;
  for (double p : config.nominal_pfa) thr.push_back(chi2_quantile(1.0 - p, 2.0));
  thr.insert(thr.end(), config.thresholds.begin(), config.thresholds.end());
  const std::vector<std::vector<double>> per_det(config.detectors.size(), thr);

  ExperimentResult result = run_trials(config, cplx(0.0, 0.0), per_det, options);
  const Index n = result.completed_trials;
  for (auto& summary : result.detectors) {
    for (std::size_t k = 0; k < config.nominal_pfa.size(); ++k) {
      summary.rows[k].nominal_pfa = config.nominal_pfa[k];
    }
    if (!summary.sorted.empty()) summary.ks = ks_distance(summary.sorted, chi2_2_cdf);
    for (double p : config.nominal_pfa) {
      if (p * static_cast<double>(n) < 100.0) {
        summary.calibration_note += fmt::format(
            "{}calibration at pfa={:g} skipped: needs trials >= {}", summary.calibration_note.empty() ? "" : "; ", p,
            static_cast<Index>(std::ceil(100.0 / p)));
        continue;
      }
      Calibration cal;
      cal.nominal_pfa = p;
      cal.asymptotic_threshold = chi2_quantile(1.0 - p, 2.0);
      cal.empirical_threshold = summary.sorted.empty() ? summary.sketch->quantile(1.0 - p)
                                                       : empirical_quantile(summary.sorted, 1.0 - p);
      cal.relative_gap = (cal.empirical_threshold - cal.asymptotic_threshold) / cal.asymptotic_threshold;
      summary.calibration.push_back(cal);
    }
  }
  return result;
}

std::vector<Calibration> calibrate_threshold(const ExperimentConfig& config, double nominal_pfa,
                                             const RunOptions& options) {
  if (!(nominal_pfa > 0.0 && nominal_pfa < 1.0)) throw InvalidArgument("calibrate_threshold: pfa outside (0,1)");
  if (nominal_pfa * static_cast<double>(config.trials) < 100.0) {
    throw InvalidArgument(fmt::format("calibrate_threshold: pfa * trials must be >= 100; needs trials >= {}",
                                      static_cast<Index>(std::ceil(100.0 / nominal_pfa))));
  }
  ExperimentConfig cfg = config;
  cfg.nominal_pfa = {nominal_pfa};
  cfg.thresholds.clear();
  const ExperimentResult r = run_h0(cfg, options);
  if (r.partial) throw NotPositiveDefinite("calibrate_threshold: " + r.failure);
  std::vector<Calibration> out;
  for (const auto& d : r.detectors) out.push_back(d.calibration.at(0));
  return out;
}

RocResult run_h1(const ExperimentConfig& config, std::span<const double> snr_db,
                 const std::vector<std::vector<double>>& thresholds, const RunOptions& options) {
  config.validate();
  const HermitianMatrix sigma = config.sigma.build(config.n);
  const CVector v = config.steering.build(config.n);
  const double vsv = quad_form(sigma, v, v).real();
  const double phase = std::abs(config.alpha) > 0.0 ? std::arg(config.alpha) : 0.0;

  std::vector<double> grid(snr_db.begin(), snr_db.end());
  std::sort(grid.begin(), grid.end());
  grid.insert(grid.begin(), -std::numeric_limits<double>::infinity());

  RocResult roc;
  roc.config = config;
  for (DetectorId id : config.detectors) roc.curves.push_back({id, {}});

  for (double db : grid) {
    const double snr = std::isinf(db) ? 0.0 : std::pow(10.0, db / 10.0);
    const cplx alpha = std::polar(std::sqrt(snr / vsv), phase);
    const ExperimentResult r = run_trials(config, alpha, thresholds, options);
    for (std::size_t d = 0; d < r.detectors.size(); ++d) {
      std::vector<ThresholdRow> rows = r.detectors[d].rows;
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.threshold < b.threshold; });
      for (const auto& row : rows) roc.curves[d].points.push_back({db, row.threshold, row.exceed});
    }
    if (r.partial) {
      roc.partial = true;
      roc.failure = r.failure;
      break;
    }
  }
  return roc;
}

}  // namespace cesdet
