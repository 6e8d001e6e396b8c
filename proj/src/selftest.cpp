#include "cesdet/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cesdet/ces_models.hpp"
#include "cesdet/detectors.hpp"
#include "cesdet/estimators.hpp"
#include "cesdet/rng.hpp"

namespace cesdet {

namespace {

constexpr std::uint64_t kFixtureSeed = 0x5e1f7e57ULL;

Dataset fixture(Index n, Index m1, Index m0, std::uint64_t key) {
  Rng rng = Rng::substream(kFixtureSeed, {key});
  CMatrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = rng.complex_normal();
  }
  const HermitianMatrix sigma = HermitianMatrix::from_lower(g * g.adjoint() + CMatrix::Identity(n, n));
  CVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.complex_normal();
  const cplx alpha = 0.5 * rng.complex_normal();
  const auto model = CesModel::complex_t(5.0);
  return Dataset{sample_ces({alpha, v, sigma, model}, m1, rng),
                 sample_ces({cplx(0.0, 0.0), v, sigma, model}, m0, rng), v};
}

double rel_err(double value, double reference) {
  return std::abs(value - reference) / std::max(std::abs(reference), 1e-300);
}

IdentityCheck check(const std::string& name, double tolerance, double perturbation,
                    const std::function<std::pair<double, double>(const Dataset&)>& sides, Index m1) {
  IdentityCheck c{name, 0.0, tolerance, false};
  std::uint64_t key = 0;
  for (Index n = 2; n <= 6; n += 2) {
    for (Index m0 : {n, 2 * n, 4 * n}) {
      const Dataset d = fixture(n, m1, m0, key++ + (static_cast<std::uint64_t>(m1) << 32));
      const auto [value, reference] = sides(d);
      c.max_relative_error = std::max(c.max_relative_error, rel_err(value, reference * (1.0 + perturbation)));
    }
  }
  c.passed = c.max_relative_error <= tolerance;
  return c;
}

}  // namespace

std::vector<IdentityCheck> run_selftest(double perturbation) {
  std::vector<IdentityCheck> out;
  out.push_back(check(
      "kelly == mglrt at M1 = 1", 1e-10, perturbation,
      [](const Dataset& d) {
        return std::pair{mglrt(d).statistic, kelly(d.primary.col(0), secondary_scatter(d.secondary), d.steering, d.m0()).statistic};
      },
      1));
  out.push_back(check(
      "amf == wald(S0/M0) at M1 = 1", 1e-12, perturbation,
      [](const Dataset& d) {
        return std::pair{wald(d, WaldScatter::S0OverM0).statistic,
                         amf(d.primary.col(0), secondary_scatter(d.secondary), d.steering, d.m0()).statistic};
      },
      1));
  for (Index m1 : {1, 3, 8}) {
    out.push_back(check(
        "wald via P-hat == explicit wald, M1 = " + std::to_string(m1), 1e-12, perturbation,
        [](const Dataset& d) { return std::pair{wald(d).statistic, wald_explicit(d)}; }, m1));
  }
  out.push_back(check(
      "mglrt square form == Sylvester form", 1e-10, perturbation,
      [](const Dataset& d) { return std::pair{mglrt_square_form(d), mglrt_sylvester_form(d)}; }, 3));
  return out;
}

}  // namespace cesdet
