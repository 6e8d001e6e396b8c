#pragma once

#include <span>

namespace cesdet {

/// P(sum_i lambda_i v_i <= t), v_i iid chi-square(1). Equal weights go
/// through the scaled chi-square closed form; anything else through
/// imhof_cdf. Returns 0 for t <= 0. Throws on empty or non-positive weights.
double weighted_chisq_cdf(std::span<const double> lambdas, double t);

/// Imhof's characteristic-function inversion,
///   1/2 - (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du,
/// with the oscillatory integral split into Fourier sine/cosine parts and
/// evaluated by Ooura's double-exponential rule. No closed-form shortcut.
double imhof_cdf(std::span<const double> lambdas, double t);

double chi2_cdf(double t, double dof);

/// Quantile of chi-square(dof). dof = 2 uses -2 ln(1 - p); other dof solve
/// the regularized incomplete gamma equation by bracketing root-finding.
double chi2_quantile(double p, double dof = 2.0);

}  // namespace cesdet
