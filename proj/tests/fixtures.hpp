#pragma once

// Random instances shared by the unit and acceptance tests.

#include <cmath>

#include "cesdet/ces_models.hpp"
#include "cesdet/core_types.hpp"
#include "cesdet/rng.hpp"

namespace fixtures {

using namespace cesdet;

inline CMatrix random_complex(Index rows, Index cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.complex_normal();
  }
  return m;
}

inline CVector random_vector(Index n, Rng& rng) { return random_complex(n, 1, rng).col(0); }

/// G G^H + I, well conditioned.
inline HermitianMatrix random_pd(Index n, Rng& rng) {
  const CMatrix g = random_complex(n, n, rng);
  return HermitianMatrix(g * g.adjoint() + CMatrix::Identity(n, n), 1e-8);
}

inline HermitianMatrix random_hermitian(Index n, Rng& rng) {
  const CMatrix g = random_complex(n, n, rng);
  return HermitianMatrix(0.5 * (g + g.adjoint()));
}

/// Haar-distributed unitary via QR with phase fix.
inline CMatrix random_unitary(Index n, Rng& rng) {
  const CMatrix g = random_complex(n, n, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR();
  for (Index i = 0; i < n; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Dataset with CES noise of the given model; signal alpha v in the primary block.
inline Dataset make_dataset(Index n, Index m1, Index m0, const CesModel& model, Rng& rng,
                            cplx alpha = {0.0, 0.0}, const HermitianMatrix* sigma = nullptr) {
  SignalScenario scn;
  scn.alpha = alpha;
  scn.steering = random_vector(n, rng);
  scn.sigma = sigma ? *sigma : random_pd(n, rng);
  scn.model = model;
  Dataset d;
  d.steering = scn.steering;
  d.primary = sample_ces(scn, m1, rng);
  scn.alpha = {0.0, 0.0};
  d.secondary = sample_ces(scn, m0, rng);
  return d;
}

}  // namespace fixtures
