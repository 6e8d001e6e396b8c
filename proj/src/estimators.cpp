#include "cesdet/estimators.hpp"

namespace cesdet {

HermitianMatrix secondary_scatter(const CMatrix& secondary) {
  const Index n = secondary.rows();
  if (n == 0) throw InvalidArgument("secondary_scatter: empty dimension");
  CMatrix s = CMatrix::Zero(n, n);
  s.selfadjointView<Eigen::Lower>().rankUpdate(secondary);
  return HermitianMatrix::from_lower(s);
}

HermitianMatrix t0_matrix(const CMatrix& primary, const HermitianMatrix& s0, Index total) {
  if (primary.cols() > 0 && primary.rows() != s0.dim()) {
    throw InvalidArgument("t0_matrix: dimension mismatch");
  }
  if (total <= 0) throw InvalidArgument("t0_matrix: M must be positive");
  CMatrix t = s0.matrix();
  if (primary.cols() > 0) t.selfadjointView<Eigen::Lower>().rankUpdate(primary);
  return HermitianMatrix::from_lower(t / static_cast<double>(total));
}

HermitianMatrix t1_matrix(const CMatrix& primary, const HermitianMatrix& s0, Index total,
                          const CVector& v, const Eta& eta) {
  if (v.size() != s0.dim()) throw InvalidArgument("t1_matrix: steering dimension mismatch");
  if (primary.cols() == 0) return t0_matrix(primary, s0, total);
  CMatrix centred = primary;
  centred.colwise() -= to_alpha(eta) * v;
  return t0_matrix(centred, s0, total);
}

Eta mml_alpha(const CMatrix& primary, const Cholesky& s0, const CVector& v) {
  if (v.size() != s0.dim() || primary.rows() != v.size()) {
    throw InvalidArgument("mml_alpha: dimension mismatch");
  }
  if (primary.cols() < 1) throw InvalidArgument("mml_alpha: M1 must be at least 1");
  if (v.squaredNorm() <= 0.0) throw InvalidArgument("mml_alpha: zero steering vector");
  const CVector w = s0.solve(v);  // S0^{-1} v
  const double vsv = v.dot(w).real();
  const cplx sum = w.dot(primary.rowwise().sum());  // v^H S0^{-1} sum_m x_m
  return to_eta(sum / (vsv * static_cast<double>(primary.cols())));
}

Eta mml_alpha(const CMatrix& primary, const HermitianMatrix& s0, const CVector& v) {
  return mml_alpha(primary, Cholesky(s0), v);
}

Eta exact_mml_alpha(const CMatrix& primary, const HermitianMatrix& s0, const CVector& v) {
  if (v.size() != s0.dim() || primary.rows() != v.size()) {
    throw InvalidArgument("exact_mml_alpha: dimension mismatch");
  }
  if (primary.cols() < 1) throw InvalidArgument("exact_mml_alpha: M1 must be at least 1");
  if (v.squaredNorm() <= 0.0) throw InvalidArgument("exact_mml_alpha: zero steering vector");
  const CVector mean = primary.rowwise().mean();
  const CMatrix centred = primary.colwise() - mean;
  CMatrix z = s0.matrix();
  z.selfadjointView<Eigen::Lower>().rankUpdate(centred);
  const Cholesky chol(HermitianMatrix::from_lower(z));
  const CVector w = chol.solve(v);
  return to_eta(w.dot(mean) / v.dot(w).real());
}

Eigen::Matrix2d p_hat(const CVector& v, const HermitianMatrix& scatter) {
  const double q = quad_form(scatter, v, v).real();
  return 2.0 * q * Eigen::Matrix2d::Identity();
}

MmlFit fit_mml(const Dataset& data) {
  data.validate();
  HermitianMatrix s0 = secondary_scatter(data.secondary.cols() > 0
                                             ? data.secondary
                                             : CMatrix::Zero(data.dim(), 0));
  const Eta eta = mml_alpha(data.primary, s0, data.steering);
  MmlFit fit{eta,
             t0_matrix(data.primary, s0, data.total()),
             t1_matrix(data.primary, s0, data.total(), data.steering, eta),
             s0,
             data.m0() < data.dim()};
  return fit;
}

}  // namespace cesdet
