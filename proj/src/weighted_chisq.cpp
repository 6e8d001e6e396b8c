#include "cesdet/weighted_chisq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "cesdet/core_types.hpp"

namespace cesdet {

namespace {

void check_weights(std::span<const double> lambdas) {
  if (lambdas.empty()) throw InvalidArgument("weighted_chisq: no weights");
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw InvalidArgument(fmt::format("weighted_chisq: weights must be positive, got {}", l));
    }
  }
}

// Shared integrators; node tables grow lazily behind Boost's internal mutex.
boost::math::quadrature::ooura_fourier_sin<double>& sine_rule() {
  static boost::math::quadrature::ooura_fourier_sin<double> rule(1e-12, 12);
  return rule;
}

boost::math::quadrature::ooura_fourier_cos<double>& cosine_rule() {
  static boost::math::quadrature::ooura_fourier_cos<double> rule(1e-12, 12);
  return rule;
}

}  // namespace

double chi2_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw InvalidArgument("chi2_cdf: dof must be positive");
  if (t <= 0.0) return 0.0;
  if (std::isinf(t)) return 1.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * t);
}

double chi2_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument(fmt::format("chi2_quantile: level must lie in (0,1), got {}", p));
  }
  if (!(dof > 0.0)) throw InvalidArgument("chi2_quantile: dof must be positive");
  if (dof == 2.0) return -2.0 * std::log1p(-p);

  auto f = [&](double x) { return chi2_cdf(x, dof) - p; };
  double hi = std::max(1.0, dof);
  while (f(hi) < 0.0) hi *= 2.0;
  double lo = 0.0;
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, -p, f(hi), tol, iters);
  return 0.5 * (a + b);
}

double imhof_cdf(std::span<const double> lambdas, double t) {
  check_weights(lambdas);
  if (t <= 0.0) return 0.0;

  // theta(u) = beta(u) - t u / 2, beta(u) = 1/2 sum atan(lambda_i u)
  // rho(u)   = prod (1 + lambda_i^2 u^2)^{1/4}
  auto beta = [&](double u) {
    double b = 0.0;
    for (double l : lambdas) b += std::atan(l * u);
    return 0.5 * b;
  };
  auto urho = [&](double u) {
    double r = 0.0;
    for (double l : lambdas) r += std::log1p(l * l * u * u);
    return u * std::exp(0.25 * r);
  };
  // sin(beta - w u) = sin(beta) cos(w u) - cos(beta) sin(w u)
  auto cos_part = [&](double u) { return u > 0.0 ? std::sin(beta(u)) / urho(u) : 0.0; };
  auto sin_part = [&](double u) { return std::cos(beta(u)) / urho(u); };

  const double omega = 0.5 * t;
  const double ic = cosine_rule().integrate(cos_part, omega).first;
  const double is = sine_rule().integrate(sin_part, omega).first;
  const double cdf = 0.5 - (ic - is) / M_PI;
  return std::clamp(cdf, 0.0, 1.0);
}

double weighted_chisq_cdf(std::span<const double> lambdas, double t) {
  check_weights(lambdas);
  if (t <= 0.0) return 0.0;
  const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
  if (*lo == *hi) {
    return chi2_cdf(t / *lo, static_cast<double>(lambdas.size()));
  }
  return imhof_cdf(lambdas, t);
}

}  // namespace cesdet
