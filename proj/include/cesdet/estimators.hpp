#pragma once

#include "cesdet/core_types.hpp"

namespace cesdet {

/// Unnormalized secondary scatter S0 = sum_m x_m x_m^H. With fewer columns
/// than rows the result is singular; that is only detected by the PD checks
/// of the consumers.
HermitianMatrix secondary_scatter(const CMatrix& secondary);

/// T0 = (X1 X1^H + S0) / M.
HermitianMatrix t0_matrix(const CMatrix& primary, const HermitianMatrix& s0, Index total);

/// T1(eta) = (sum_m (x_m - alpha v)(x_m - alpha v)^H + S0) / M, alpha = eta1 + i eta2.
HermitianMatrix t1_matrix(const CMatrix& primary, const HermitianMatrix& s0, Index total,
                          const CVector& v, const Eta& eta);

/// Closed-form minimizer of |T1(eta)|:
/// alpha_hat = (1/M1) sum_m v^H S0^{-1} x_m / (v^H S0^{-1} v).
Eta mml_alpha(const CMatrix& primary, const HermitianMatrix& s0, const CVector& v);
Eta mml_alpha(const CMatrix& primary, const Cholesky& s0, const CVector& v);

/// Exact minimizer of |T1(eta)| for any M1. With Z = S0 + sum_m (x_m - xbar)(x_m - xbar)^H,
/// |T1| is proportional to 1 + M1 (xbar - alpha v)^H Z^{-1} (xbar - alpha v), so
/// alpha = v^H Z^{-1} xbar / v^H Z^{-1} v. Coincides with mml_alpha when M1 = 1.
Eta exact_mml_alpha(const CMatrix& primary, const HermitianMatrix& s0, const CVector& v);

/// Consistent estimate of the P matrix: 2 (v^H T^{-1} v) I2.
Eigen::Matrix2d p_hat(const CVector& v, const HermitianMatrix& scatter);

/// Mismatched-ML fit of the Gaussian model to a dataset.
struct MmlFit {
  Eta eta_hat;
  HermitianMatrix t0;
  HermitianMatrix t1;  // at eta_hat
  HermitianMatrix s0;
  bool undersampled = false;  // M0 < N
};

MmlFit fit_mml(const Dataset& data);

}  // namespace cesdet
