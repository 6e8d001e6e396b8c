#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cesdet/core_types.hpp"

namespace cesdet {

enum class DetectorId { Mglrt, Kelly, Wald, Amf };

std::string_view detector_name(DetectorId id);
std::optional<DetectorId> parse_detector(std::string_view name);

struct DetectorOutput {
  double statistic = 0.0;
  DetectorId id = DetectorId::Mglrt;
  int dof = 2;
  /// Kelly only: the log argument hit the 1e-300 floor.
  bool clamped = false;
};

/// Which consistent estimate of the scatter enters P-hat in the Wald test.
enum class WaldScatter { T1AtEtaHat, S0OverM0 };

/// Multi-sample mismatched GLRT, 2M ln(|T0| / |T1(eta_hat)|). Evaluated in
/// the M1 x M1 Sylvester form when M1 < N and in the N x N form otherwise.
DetectorOutput mglrt(const Dataset& data);

/// Both determinant forms, exposed for cross-checking.
double mglrt_square_form(const Dataset& data);
double mglrt_sylvester_form(const Dataset& data);

/// Kelly's GLRT for a single primary snapshot.
DetectorOutput kelly(const CVector& x, const HermitianMatrix& s0, const CVector& v, Index m0);

/// W = M1 eta_hat^T P_hat eta_hat.
DetectorOutput wald(const Dataset& data, WaldScatter scatter = WaldScatter::T1AtEtaHat);

/// Closed form of the Wald statistic with T1(eta_hat):
/// 2 (v^H T1^{-1} v) / (M1 (v^H S0^{-1} v)^2) |sum_m v^H S0^{-1} x_m|^2.
double wald_explicit(const Dataset& data);

/// Adaptive matched filter, 2 M0 |v^H S0^{-1} x|^2 / (v^H S0^{-1} v).
DetectorOutput amf(const CVector& x, const HermitianMatrix& s0, const CVector& v, Index m0);

/// Evaluates several detectors on one dataset, sharing the S0 factorization.
/// Kelly and AMF use the first primary snapshot and require M1 = 1.
std::vector<DetectorOutput> evaluate(const Dataset& data, const std::vector<DetectorId>& ids,
                                     WaldScatter wald_scatter = WaldScatter::T1AtEtaHat);

}  // namespace cesdet
