#include "cesdet/ces_models.hpp"

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

namespace cesdet {

CesModel CesModel::complex_t(double nu) {
  if (!(nu > 2.0) || !std::isfinite(nu)) {
    throw InvalidArgument(fmt::format("complex_t: nu must be > 2 for finite covariance, got {}", nu));
  }
  return CesModel(CesKind::ComplexT, nu);
}

CesModel CesModel::k_dist(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw InvalidArgument(fmt::format("k: shape must be > 0, got {}", nu));
  }
  return CesModel(CesKind::KDist, nu);
}

CesModel CesModel::gen_gaussian(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw InvalidArgument(fmt::format("gen_gaussian: shape must be > 0, got {}", s));
  }
  return CesModel(CesKind::GenGaussian, s);
}

std::string CesModel::kind_name() const {
  switch (kind_) {
    case CesKind::Gaussian: return "gaussian";
    case CesKind::ComplexT: return "complex_t";
    case CesKind::KDist: return "k";
    case CesKind::GenGaussian: return "gen_gaussian";
  }
  return "unknown";
}

std::string CesModel::name() const {
  if (kind_ == CesKind::Gaussian) return "gaussian";
  return fmt::format("{}({:g})", kind_name(), shape_);
}

std::vector<double> sample_texture(const CesModel& model, Index count, Index dim, Rng& rng) {
  if (count < 0) throw InvalidArgument("sample_texture: negative count");
  std::vector<double> tau(static_cast<std::size_t>(count), 1.0);
  switch (model.kind()) {
    case CesKind::Gaussian:
      break;
    case CesKind::ComplexT: {
      // inverse gamma, shape nu/2, scale nu/2 - 1: mean 1
      const double a = 0.5 * model.shape();
      for (auto& t : tau) t = (a - 1.0) / rng.gamma(a);
      break;
    }
    case CesKind::KDist: {
      const double nu = model.shape();
      for (auto& t : tau) t = rng.gamma(nu) / nu;
      break;
    }
    case CesKind::GenGaussian: {
      if (dim < 1) throw InvalidArgument("sample_texture: gen_gaussian needs dim >= 1");
      // Q^s ~ Gamma(N/s, 1) for density generator exp(-t^s).
      const double s = model.shape();
      const double n = static_cast<double>(dim);
      const double mean_q =
          std::exp(boost::math::lgamma((n + 1.0) / s) - boost::math::lgamma(n / s));
      for (auto& t : tau) t = std::pow(rng.gamma(n / s), 1.0 / s) / mean_q;
      break;
    }
  }
  return tau;
}

CesSampler::CesSampler(SignalScenario scenario) : scn_(std::move(scenario)) {
  if (scn_.steering.size() != scn_.sigma.dim()) {
    throw InvalidArgument("scenario: steering and sigma dimensions differ");
  }
  if (scn_.steering.squaredNorm() <= 0.0) throw InvalidArgument("scenario: zero steering vector");
  lower_ = Cholesky(scn_.sigma).lower();
}

CMatrix CesSampler::sample_noise(Index count, Rng& texture_rng, Rng& core_rng) const {
  if (count < 0) throw InvalidArgument("sample_ces: negative count");
  const Index n = dim();
  const auto tau = sample_texture(scn_.model, count, n, texture_rng);
  CMatrix z(n, count);
  for (Index m = 0; m < count; ++m) {
    for (Index i = 0; i < n; ++i) z(i, m) = core_rng.complex_normal();
  }
  const bool on_sphere = scn_.model.kind() == CesKind::GenGaussian;
  for (Index m = 0; m < count; ++m) {
    double scale = tau[static_cast<std::size_t>(m)];
    if (on_sphere) scale *= static_cast<double>(n) / z.col(m).squaredNorm();
    z.col(m) *= std::sqrt(scale);
  }
  return lower_.triangularView<Eigen::Lower>() * z;
}

CMatrix CesSampler::sample(Index count, Rng& texture_rng, Rng& core_rng) const {
  CMatrix x = sample_noise(count, texture_rng, core_rng);
  if (scn_.alpha != cplx(0.0, 0.0)) x.colwise() += scn_.alpha * scn_.steering;
  return x;
}

CMatrix sample_ces(const SignalScenario& scenario, Index count, Rng& rng) {
  Rng texture(rng.next_u64());
  Rng core(rng.next_u64());
  return CesSampler(scenario).sample(count, texture, core);
}

double gaussian_loglik(const CVector& x, cplx alpha, const CVector& v, const Cholesky& phi) {
  const CVector r = x - alpha * v;
  const double n = static_cast<double>(x.size());
  return -n * std::log(M_PI) - phi.logdet() - phi.quad_form(r, r).real();
}

double gaussian_loglik(const CVector& x, cplx alpha, const CVector& v, const HermitianMatrix& phi) {
  return gaussian_loglik(x, alpha, v, Cholesky(phi));
}

}  // namespace cesdet
