#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cesdet/ces_models.hpp"
#include "cesdet/core_types.hpp"
#include "cesdet/rng.hpp"

namespace cesdet {

/// theta = [eta; mu], mu = vecs(Phi).
struct PseudoTrue {
  Eta eta_bar = Eta::Zero();
  RVector mu_bar;
};

/// Closed-form pseudo-true point under H0: eta = 0, mu = vecs(Sigma).
PseudoTrue pseudo_true_closed_form(const HermitianMatrix& sigma);

/// Minimizer of the average negative Gaussian log-likelihood over one large
/// H0 sample. The Gaussian argmin is exact per sample: with sample mean m and
/// sample covariance C, alpha = v^H C^{-1} m / (v^H C^{-1} v) and Phi is the
/// scatter of the sample about alpha v.
PseudoTrue pseudo_true_numeric(const CesModel& model, const HermitianMatrix& sigma, const CVector& v,
                               Index sample_size, Rng& rng);

/// Gradient and Hessian of gaussian_loglik with respect to theta, at a
/// single observation x.
struct LoglikDerivatives {
  RVector gradient;
  RMatrix hessian;
};

LoglikDerivatives gaussian_loglik_derivatives(const CVector& x, const Eta& eta, const CVector& v,
                                              const HermitianMatrix& phi);

struct MonteCarloOptions {
  Index sample_size = 1'000'000;
  /// Independent sample blocks; each has its own substream and yields one
  /// batch-means replicate for the standard errors of derived quantities.
  Index blocks = 32;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// Monte Carlo estimates of the per-observation information matrices at
/// theta_bar, under H0 data from the true model:
///   A = -E{Hessian of ln f},  B = E{score score^T}.
/// A carries the minus sign so that the eta block is 2 (v^H Sigma^{-1} v) I2.
struct AbMatrices {
  RMatrix a;
  RMatrix b;
  RMatrix a_se;  // per-entry Monte Carlo standard error
  RMatrix b_se;
  Index sample_size = 0;
  std::vector<RMatrix> block_a;
  std::vector<RMatrix> block_b;
};

AbMatrices ab_matrices(const CesModel& model, const HermitianMatrix& sigma, const CVector& v,
                       const PseudoTrue& theta_bar, const MonteCarloOptions& options);

/// C = A^{-1} B A^{-1}.
RMatrix sandwich(const RMatrix& a, const RMatrix& b);

/// Schur complement A_eta - A_eta,mu A_mu^{-1} A_mu,eta.
Eigen::Matrix2d p_matrix(const RMatrix& a);

struct HMatrix {
  Eigen::Matrix2d h;
  Eigen::Vector2d lambdas;  // descending
};

/// H = P C_eta and its eigenvalues. Throws if they are complex beyond 1e-8.
HMatrix h_matrix_and_eigs(const Eigen::Matrix2d& p, const Eigen::Matrix2d& c_eta);

struct SandwichReport {
  std::string model;
  Index dim = 0;
  Index sample_size = 0;
  Index blocks = 0;
  std::uint64_t seed = 0;
  Eta eta_bar = Eta::Zero();
  RVector mu_bar;
  RMatrix a, b, c;
  RMatrix a_se, b_se;
  Eigen::Matrix2d p, c_eta, h;
  Eigen::Vector2d lambdas;
  Eigen::Vector2d lambda_se;  // batch means over blocks
  double a_eta_closed_form = 0.0;  // 2 v^H Sigma^{-1} v
  /// max over cross-block (eta, mu) entries of |entry| / SE
  double max_cross_a_over_se = 0.0;
  double max_cross_b_over_se = 0.0;
  std::string sign_convention = "A = -E{hessian ln f}, B = E{score score^T}";
};

/// Full pipeline at the closed-form pseudo-true point.
SandwichReport sandwich_report(const CesModel& model, const HermitianMatrix& sigma, const CVector& v,
                               const MonteCarloOptions& options);

}  // namespace cesdet
