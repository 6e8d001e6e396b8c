#include "cesdet/detectors.hpp"

#include <cmath>

#include "cesdet/estimators.hpp"

namespace cesdet {

namespace {

constexpr double kLogFloor = 1e-300;

HermitianMatrix scatter_of(const CMatrix& secondary, Index n) {
  return secondary_scatter(secondary.cols() > 0 ? secondary : CMatrix::Zero(n, 0));
}

// log|I + Y^H Y| with Y = L^{-1} X, i.e. log|I + X^H S0^{-1} X|.
double log_det_identity_plus(const Cholesky& s0, const CMatrix& x) {
  const CMatrix lower = s0.lower();
  const CMatrix y = lower.triangularView<Eigen::Lower>().solve(x);
  CMatrix g = CMatrix::Identity(x.cols(), x.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(y.adjoint());
  return Cholesky(HermitianMatrix::from_lower(g)).logdet();
}

CMatrix centred_primary(const Dataset& data, const Eta& eta) {
  CMatrix c = data.primary;
  c.colwise() -= to_alpha(eta) * data.steering;
  return c;
}

double mglrt_from(const Dataset& data, const HermitianMatrix& s0, const Cholesky& s0f,
                  bool sylvester) {
  const Eta eta = mml_alpha(data.primary, s0f, data.steering);
  const double m = static_cast<double>(data.total());
  double diff = 0.0;
  if (sylvester) {
    diff = log_det_identity_plus(s0f, data.primary) -
           log_det_identity_plus(s0f, centred_primary(data, eta));
  } else {
    const Index total = data.total();
    diff = logdet(t0_matrix(data.primary, s0, total)) -
           logdet(t1_matrix(data.primary, s0, total, data.steering, eta));
  }
  return std::max(0.0, 2.0 * m * diff);
}

DetectorOutput kelly_from(const CVector& x, const Cholesky& s0f, const CVector& v, Index m0) {
  const CVector sx = s0f.solve(x);
  const CVector sv = s0f.solve(v);
  const double num = std::norm(v.dot(sx));
  const double vsv = v.dot(sv).real();
  const double xsx = x.dot(sx).real();
  double arg = 1.0 - num / (vsv * (1.0 + xsx));
  DetectorOutput out{0.0, DetectorId::Kelly, 2, false};
  if (arg < kLogFloor) {
    arg = kLogFloor;
    out.clamped = true;
  }
  out.statistic = std::max(0.0, -2.0 * (static_cast<double>(m0) + 1.0) * std::log(std::min(arg, 1.0)));
  return out;
}

DetectorOutput amf_from(const CVector& x, const Cholesky& s0f, const CVector& v, Index m0) {
  const CVector sv = s0f.solve(v);
  const double vsv = v.dot(sv).real();
  const double num = std::norm(sv.dot(x));
  return {2.0 * static_cast<double>(m0) * num / vsv, DetectorId::Amf, 2, false};
}

DetectorOutput wald_from(const Dataset& data, const HermitianMatrix& s0, const Cholesky& s0f,
                         WaldScatter scatter) {
  const Eta eta = mml_alpha(data.primary, s0f, data.steering);
  Eigen::Matrix2d p;
  if (scatter == WaldScatter::T1AtEtaHat) {
    p = p_hat(data.steering, t1_matrix(data.primary, s0, data.total(), data.steering, eta));
  } else {
    if (data.m0() < 1) throw InvalidArgument("wald: S0/M0 scatter needs M0 >= 1");
    p = p_hat(data.steering, s0.scaled(1.0 / static_cast<double>(data.m0())));
  }
  const double w = static_cast<double>(data.m1()) * eta.dot(p * eta);
  return {std::max(0.0, w), DetectorId::Wald, 2, false};
}

void require_single_snapshot(const Dataset& data, std::string_view who) {
  if (data.m1() != 1) {
    throw InvalidArgument(std::string(who) + " requires exactly one primary snapshot (M1 = 1)");
  }
}

}  // namespace

std::string_view detector_name(DetectorId id) {
  switch (id) {
    case DetectorId::Mglrt: return "mglrt";
    case DetectorId::Kelly: return "kelly";
    case DetectorId::Wald: return "wald";
    case DetectorId::Amf: return "amf";
  }
  return "unknown";
}

std::optional<DetectorId> parse_detector(std::string_view name) {
  for (auto id : {DetectorId::Mglrt, DetectorId::Kelly, DetectorId::Wald, DetectorId::Amf}) {
    if (detector_name(id) == name) return id;
  }
  return std::nullopt;
}

double mglrt_square_form(const Dataset& data) {
  data.validate();
  const HermitianMatrix s0 = scatter_of(data.secondary, data.dim());
  return mglrt_from(data, s0, Cholesky(s0), false);
}

double mglrt_sylvester_form(const Dataset& data) {
  data.validate();
  const HermitianMatrix s0 = scatter_of(data.secondary, data.dim());
  return mglrt_from(data, s0, Cholesky(s0), true);
}

DetectorOutput mglrt(const Dataset& data) {
  data.validate();
  const HermitianMatrix s0 = scatter_of(data.secondary, data.dim());
  const double stat = mglrt_from(data, s0, Cholesky(s0), data.m1() < data.dim());
  return {stat, DetectorId::Mglrt, 2, false};
}

DetectorOutput kelly(const CVector& x, const HermitianMatrix& s0, const CVector& v, Index m0) {
  if (x.size() != s0.dim() || v.size() != s0.dim()) throw InvalidArgument("kelly: dimension mismatch");
  return kelly_from(x, Cholesky(s0), v, m0);
}

DetectorOutput amf(const CVector& x, const HermitianMatrix& s0, const CVector& v, Index m0) {
  if (x.size() != s0.dim() || v.size() != s0.dim()) throw InvalidArgument("amf: dimension mismatch");
  return amf_from(x, Cholesky(s0), v, m0);
}

DetectorOutput wald(const Dataset& data, WaldScatter scatter) {
  data.validate();
  const HermitianMatrix s0 = scatter_of(data.secondary, data.dim());
  return wald_from(data, s0, Cholesky(s0), scatter);
}

double wald_explicit(const Dataset& data) {
  data.validate();
  const HermitianMatrix s0 = scatter_of(data.secondary, data.dim());
  const Cholesky s0f(s0);
  const CVector& v = data.steering;
  const CVector sv = s0f.solve(v);
  const double vsv = v.dot(sv).real();
  cplx sum{0.0, 0.0};
  for (Index m = 0; m < data.m1(); ++m) sum += sv.dot(data.primary.col(m));
  const cplx alpha = sum / (static_cast<double>(data.m1()) * vsv);
  const HermitianMatrix t1 = t1_matrix(data.primary, s0, data.total(), v, to_eta(alpha));
  const double vtv = quad_form(t1, v, v).real();
  return 2.0 * vtv / (static_cast<double>(data.m1()) * vsv * vsv) * std::norm(sum);
}

std::vector<DetectorOutput> evaluate(const Dataset& data, const std::vector<DetectorId>& ids,
                                     WaldScatter wald_scatter) {
  data.validate();
  const HermitianMatrix s0 = scatter_of(data.secondary, data.dim());
  const Cholesky s0f(s0);
  std::vector<DetectorOutput> out;
  out.reserve(ids.size());
  for (DetectorId id : ids) {
    switch (id) {
      case DetectorId::Mglrt:
        out.push_back({mglrt_from(data, s0, s0f, data.m1() < data.dim()), id, 2, false});
        break;
      case DetectorId::Kelly:
        require_single_snapshot(data, "kelly");
        out.push_back(kelly_from(data.primary.col(0), s0f, data.steering, data.m0()));
        break;
      case DetectorId::Wald:
        out.push_back(wald_from(data, s0, s0f, wald_scatter));
        break;
      case DetectorId::Amf:
        require_single_snapshot(data, "amf");
        out.push_back(amf_from(data.primary.col(0), s0f, data.steering, data.m0()));
        break;
    }
  }
  return out;
}

}  // namespace cesdet
