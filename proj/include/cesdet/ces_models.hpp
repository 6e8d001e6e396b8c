#pragma once

#include <string>
#include <vector>

#include "cesdet/core_types.hpp"
#include "cesdet/rng.hpp"

namespace cesdet {

enum class CesKind { Gaussian, ComplexT, KDist, GenGaussian };

/// A CES family, parameterized so that the scatter matrix equals the
/// covariance matrix (texture mean E{tau} = 1).
class CesModel {
 public:
  static CesModel gaussian() { return CesModel(CesKind::Gaussian, 0.0); }
  /// Complex t with nu degrees of freedom; nu > 2 for a finite covariance.
  static CesModel complex_t(double nu);
  /// K-distributed clutter, gamma texture with shape nu.
  static CesModel k_dist(double nu);
  /// Density generator exp(-t^s).
  static CesModel gen_gaussian(double s);

  CesKind kind() const { return kind_; }
  double shape() const { return shape_; }
  /// Stable identifier, e.g. "complex_t(5)".
  std::string name() const;
  /// Config keyword: gaussian, complex_t, k, gen_gaussian.
  std::string kind_name() const;

  bool operator==(const CesModel&) const = default;

 private:
  CesModel(CesKind kind, double shape) : kind_(kind), shape_(shape) {}

  CesKind kind_;
  double shape_;
};

/// Draws `count` textures with unit mean. For the compound-Gaussian families
/// the law does not depend on `dim`. For GenGaussian the draw is the modular
/// variate Q = x^H Sigma^{-1} x of an N-dimensional vector, divided by E{Q}.
std::vector<double> sample_texture(const CesModel& model, Index count, Index dim, Rng& rng);

struct SignalScenario {
  cplx alpha{0.0, 0.0};
  CVector steering;
  HermitianMatrix sigma;
  CesModel model = CesModel::gaussian();
};

/// Sampler with the covariance factor cached. Each draw is
///   x = alpha v + sqrt(tau) L z          (compound-Gaussian families)
///   x = alpha v + sqrt(N tau) L z / |z|  (GenGaussian)
/// with L L^H = Sigma and z circular standard normal.
class CesSampler {
 public:
  explicit CesSampler(SignalScenario scenario);

  const SignalScenario& scenario() const { return scn_; }
  Index dim() const { return scn_.steering.size(); }

  /// Separate generators for the texture and the Gaussian core.
  CMatrix sample(Index count, Rng& texture_rng, Rng& core_rng) const;
  /// Zero-mean draws: same law as sample() with alpha = 0.
  CMatrix sample_noise(Index count, Rng& texture_rng, Rng& core_rng) const;

 private:
  SignalScenario scn_;
  CMatrix lower_;
};

/// Convenience wrapper: derives the texture and core substreams from `rng`.
CMatrix sample_ces(const SignalScenario& scenario, Index count, Rng& rng);

/// Log-density of the assumed circular complex Gaussian model,
/// -N ln(pi) - ln|Phi| - (x - alpha v)^H Phi^{-1} (x - alpha v).
double gaussian_loglik(const CVector& x, cplx alpha, const CVector& v, const HermitianMatrix& phi);
double gaussian_loglik(const CVector& x, cplx alpha, const CVector& v, const Cholesky& phi);

}  // namespace cesdet
