#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace cesdet {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Real parameterization of the amplitude: [Re(alpha), Im(alpha)].
using Eta = Eigen::Vector2d;

inline cplx to_alpha(const Eta& eta) { return {eta(0), eta(1)}; }
inline Eta to_eta(cplx alpha) { return {alpha.real(), alpha.imag()}; }

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised whenever an operation needs a positive-definite matrix and the
/// Cholesky factorization hits a non-positive pivot.
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// N x N complex Hermitian matrix. The lower triangle is canonical: on
/// construction the upper triangle is rebuilt from it, after checking that
/// the input deviates from Hermitian symmetry by no more than the tolerance
/// (relative to max(1, max|entry|)).
class HermitianMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-10;

  HermitianMatrix() = default;
  explicit HermitianMatrix(const CMatrix& m,
                           double tolerance = kSymmetryTolerance);

  static HermitianMatrix identity(Index n);
  /// Trusted construction from the lower triangle; the upper part is ignored.
  static HermitianMatrix from_lower(const CMatrix& m);

  Index dim() const { return m_.rows(); }
  const CMatrix& matrix() const { return m_; }
  cplx operator()(Index i, Index j) const { return m_(i, j); }

  HermitianMatrix scaled(double c) const;

 private:
  CMatrix m_;
};

/// Cholesky factor H = L L^H of a positive-definite Hermitian matrix. Holds
/// the factorization so repeated solves do not refactor.
class Cholesky {
 public:
  explicit Cholesky(const HermitianMatrix& h);

  Index dim() const { return llt_.rows(); }
  CMatrix lower() const { return llt_.matrixL(); }
  double logdet() const;
  CVector solve(const CVector& b) const { return llt_.solve(b); }
  CMatrix solve(const CMatrix& b) const { return llt_.solve(b); }
  /// a^H H^{-1} b
  cplx quad_form(const CVector& a, const CVector& b) const;
  HermitianMatrix inverse() const;

 private:
  Eigen::LLT<CMatrix> llt_;
};

CMatrix cholesky(const HermitianMatrix& h);
double logdet(const HermitianMatrix& h);
CVector solve(const HermitianMatrix& h, const CVector& b);
cplx quad_form(const HermitianMatrix& h, const CVector& a, const CVector& b);

/// Hermitian -> R^{N^2}: [diag (N); Re strictly-lower, column order;
/// Im strictly-lower, column order].
RVector vecs(const HermitianMatrix& h);
HermitianMatrix unvecs(const RVector& m);

/// Primary block X1 (N x M1, one snapshot per column), secondary block X0
/// (N x M0) and the steering vector v.
struct Dataset {
  CMatrix primary;
  CMatrix secondary;
  CVector steering;

  Index dim() const { return steering.size(); }
  Index m1() const { return primary.cols(); }
  Index m0() const { return secondary.cols(); }
  Index total() const { return m1() + m0(); }

  /// Shape checks plus M1 >= 1 and a non-zero steering vector. M0 < N is
  /// not rejected here; the PD check on S0 fires downstream.
  void validate() const;
};

bool all_finite(const CMatrix& m);

}  // namespace cesdet
