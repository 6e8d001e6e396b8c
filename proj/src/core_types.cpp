#include "cesdet/core_types.hpp"

#include <cmath>
#include <limits>

namespace cesdet {

namespace {

Index dim_from_length(Index len) {
  const auto n = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(len))));
  if (len <= 0 || n * n != len) {
    throw InvalidArgument("unvecs: length " + std::to_string(len) +
                          " is not a positive perfect square");
  }
  return n;
}

}  // namespace

HermitianMatrix::HermitianMatrix(const CMatrix& m, double tolerance) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidArgument("HermitianMatrix: input must be square and non-empty");
  }
  if (!all_finite(m)) {
    throw InvalidArgument("HermitianMatrix: non-finite entry");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (asym > tolerance * scale) {
    throw InvalidArgument("HermitianMatrix: asymmetry " + std::to_string(asym) +
                          " exceeds tolerance");
  }
  *this = from_lower(m);
}

HermitianMatrix HermitianMatrix::identity(Index n) {
  HermitianMatrix h;
  h.m_ = CMatrix::Identity(n, n);
  return h;
}

HermitianMatrix HermitianMatrix::from_lower(const CMatrix& m) {
  HermitianMatrix h;
  const Index n = m.rows();
  h.m_.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    h.m_(j, j) = cplx(m(j, j).real(), 0.0);
    for (Index i = j + 1; i < n; ++i) {
      h.m_(i, j) = m(i, j);
      h.m_(j, i) = std::conj(m(i, j));
    }
  }
  return h;
}

HermitianMatrix HermitianMatrix::scaled(double c) const {
  HermitianMatrix h;
  h.m_ = m_ * c;
  return h;
}

Cholesky::Cholesky(const HermitianMatrix& h) : llt_(h.matrix()) {
  if (llt_.info() != Eigen::Success) {
    throw NotPositiveDefinite("matrix is not positive definite (non-positive pivot)");
  }
  // Eigen's pivot test is x <= 0. Also reject NaN pivots and pivots at
  // rounding level, which is what an exactly singular matrix produces.
  const auto& lu = llt_.matrixLLT();
  const double max_diag = h.matrix().diagonal().real().cwiseAbs().maxCoeff();
  const double floor = 64.0 * static_cast<double>(lu.rows()) * std::numeric_limits<double>::epsilon() * max_diag;
  for (Index i = 0; i < lu.rows(); ++i) {
    const double d = lu(i, i).real();
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefinite("matrix is not positive definite (non-positive pivot)");
    }
    if (d * d <= floor) throw NotPositiveDefinite("matrix is numerically singular (pivot at rounding level)");
  }
}

double Cholesky::logdet() const {
  const auto& lu = llt_.matrixLLT();
  double s = 0.0;
  for (Index i = 0; i < lu.rows(); ++i) s += std::log(lu(i, i).real());
  return 2.0 * s;
}

cplx Cholesky::quad_form(const CVector& a, const CVector& b) const {
  return a.dot(llt_.solve(b));  // Eigen's dot conjugates the first argument
}

HermitianMatrix Cholesky::inverse() const {
  return HermitianMatrix::from_lower(llt_.solve(CMatrix::Identity(dim(), dim())));
}

CMatrix cholesky(const HermitianMatrix& h) { return Cholesky(h).lower(); }
double logdet(const HermitianMatrix& h) { return Cholesky(h).logdet(); }
CVector solve(const HermitianMatrix& h, const CVector& b) { return Cholesky(h).solve(b); }
cplx quad_form(const HermitianMatrix& h, const CVector& a, const CVector& b) {
  return Cholesky(h).quad_form(a, b);
}

RVector vecs(const HermitianMatrix& h) {
  const Index n = h.dim();
  const Index off = n * (n - 1) / 2;
  RVector out(n * n);
  for (Index i = 0; i < n; ++i) out(i) = h(i, i).real();
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i, ++k) {
      out(n + k) = h(i, j).real();
      out(n + off + k) = h(i, j).imag();
    }
  }
  return out;
}

HermitianMatrix unvecs(const RVector& m) {
  const Index n = dim_from_length(m.size());
  const Index off = n * (n - 1) / 2;
  CMatrix lower = CMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) lower(i, i) = m(i);
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i, ++k) lower(i, j) = cplx(m(n + k), m(n + off + k));
  }
  return HermitianMatrix::from_lower(lower);
}

bool all_finite(const CMatrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
    }
  }
  return true;
}

void Dataset::validate() const {
  const Index n = steering.size();
  if (n < 1) throw InvalidArgument("dataset: steering vector is empty");
  if (steering.squaredNorm() <= 0.0) throw InvalidArgument("dataset: steering vector is zero");
  if (primary.rows() != n || (secondary.cols() > 0 && secondary.rows() != n)) {
    throw InvalidArgument("dataset: all vectors must share dimension N = " + std::to_string(n));
  }
  if (primary.cols() < 1) throw InvalidArgument("dataset: M1 must be at least 1");
  if (!all_finite(primary) || !all_finite(secondary) || !all_finite(steering)) {
    throw InvalidArgument("dataset: non-finite entry");
  }
}

}  // namespace cesdet
