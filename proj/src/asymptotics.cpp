#include "cesdet/asymptotics.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "cesdet/estimators.hpp"

namespace cesdet {

namespace {

// vecs basis: Phi = sum_k mu_k E_k, each E_k a sum of at most two
// elementary matrices c e_a e_b^T.
struct Term {
  Index a;
  Index b;
  cplx c;
};

std::vector<std::vector<Term>> vecs_basis(Index n) {
  std::vector<std::vector<Term>> basis(static_cast<std::size_t>(n * n));
  const Index off = n * (n - 1) / 2;
  for (Index i = 0; i < n; ++i) basis[i] = {{i, i, 1.0}};
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i, ++k) {
      basis[n + k] = {{i, j, 1.0}, {j, i, 1.0}};
      basis[n + off + k] = {{i, j, cplx(0.0, 1.0)}, {j, i, cplx(0.0, -1.0)}};
    }
  }
  return basis;
}

// For tr(E_k X E_l Y) = sum c_t c_s X(b_t, a_s) Y(b_s, a_t).
struct PairTerm {
  Index k;
  Index l;
  Index xr, xc, yr, yc;
  cplx c;
};

/// Everything about ln f at a fixed (alpha, Phi) that does not depend on x.
class LoglikGeometry {
 public:
  LoglikGeometry(const Eta& eta, const CVector& v, const HermitianMatrix& phi)
      : n_(v.size()), alpha_(to_alpha(eta)), v_(v), basis_(vecs_basis(v.size())) {
    if (phi.dim() != n_) throw InvalidArgument("loglik derivatives: dimension mismatch");
    w_mat_ = Cholesky(phi).inverse().matrix();
    w_ = w_mat_ * v;
    vwv_ = v.dot(w_).real();
    const Index p = n_ * n_;
    const_mu_.setZero(p, p);
    for (Index k = 0; k < p; ++k) {
      for (Index l = k; l < p; ++l) {
        cplx acc{0.0, 0.0};
        for (const Term& t : basis_[k]) {
          for (const Term& s : basis_[l]) {
            pairs_.push_back({k, l, t.b, s.a, s.b, t.a, t.c * s.c});
            acc += t.c * s.c * w_mat_(t.b, s.a) * w_mat_(s.b, t.a);
          }
        }
        const_mu_(k, l) = const_mu_(l, k) = acc.real();
      }
    }
  }

  Index dim() const { return 2 + n_ * n_; }

  void evaluate(const CVector& x, RVector& g, RMatrix& h) const {
    const Index p = n_ * n_;
    const CVector r = x - alpha_ * v_;
    const CVector y = w_mat_ * r;
    const cplx z = v_.dot(y);
    g.resize(dim());
    h.resize(dim(), dim());
    g(0) = 2.0 * z.real();
    g(1) = 2.0 * z.imag();
    h(0, 0) = h(1, 1) = -2.0 * vwv_;
    h(0, 1) = h(1, 0) = 0.0;
    for (Index k = 0; k < p; ++k) {
      cplx grad{0.0, 0.0};
      cplx q{0.0, 0.0};
      for (const Term& t : basis_[k]) {
        // G = y y^H - W
        grad += t.c * (y(t.b) * std::conj(y(t.a)) - w_mat_(t.b, t.a));
        q += t.c * std::conj(w_(t.a)) * y(t.b);
      }
      g(2 + k) = grad.real();
      h(0, 2 + k) = h(2 + k, 0) = -2.0 * q.real();
      h(1, 2 + k) = h(2 + k, 1) = -2.0 * q.imag();
    }
    h.bottomRightCorner(p, p) = const_mu_;
    // - tr(E_k W E_l Y) - tr(E_k Y E_l W), Y = y y^H
    for (const PairTerm& pt : pairs_) {
      const cplx wy = w_mat_(pt.xr, pt.xc) * y(pt.yr) * std::conj(y(pt.yc));
      const cplx yw = y(pt.xr) * std::conj(y(pt.xc)) * w_mat_(pt.yr, pt.yc);
      h(2 + pt.k, 2 + pt.l) -= (pt.c * (wy + yw)).real();
    }
    for (Index k = 0; k < p; ++k) {
      for (Index l = k + 1; l < p; ++l) h(2 + l, 2 + k) = h(2 + k, 2 + l);
    }
  }

 private:
  Index n_;
  cplx alpha_;
  CVector v_;
  std::vector<std::vector<Term>> basis_;
  CMatrix w_mat_;
  CVector w_;
  double vwv_ = 0.0;
  RMatrix const_mu_;
  std::vector<PairTerm> pairs_;
};

struct BlockSums {
  Index count = 0;
  RMatrix h, h2, b, b2;
};

constexpr Index kBatch = 4096;

BlockSums run_block(const LoglikGeometry& geom, const CesSampler& sampler, Index count,
                    std::uint64_t seed, Index block) {
  const Index d = geom.dim();
  BlockSums s;
  s.count = count;
  s.h.setZero(d, d);
  s.h2.setZero(d, d);
  s.b.setZero(d, d);
  s.b2.setZero(d, d);
  Rng texture = Rng::substream(seed, {static_cast<std::uint64_t>(block), 0});
  Rng core = Rng::substream(seed, {static_cast<std::uint64_t>(block), 1});
  RVector g;
  RMatrix h;
  RMatrix gg(d, d);
  for (Index done = 0; done < count; done += kBatch) {
    const CMatrix x = sampler.sample(std::min(kBatch, count - done), texture, core);
    for (Index m = 0; m < x.cols(); ++m) {
      geom.evaluate(x.col(m), g, h);
      gg.noalias() = g * g.transpose();
      s.h += h;
      s.h2 += h.cwiseProduct(h);
      s.b += gg;
      s.b2 += gg.cwiseProduct(gg);
    }
  }
  return s;
}

RMatrix standard_error(const RMatrix& sum, const RMatrix& sum2, Index n) {
  const double dn = static_cast<double>(n);
  RMatrix var = (sum2 - sum.cwiseProduct(sum) / dn) / (dn - 1.0);
  return (var.cwiseMax(0.0) / dn).cwiseSqrt();
}

}  // namespace

PseudoTrue pseudo_true_closed_form(const HermitianMatrix& sigma) {
  Cholesky check(sigma);  // PD precondition
  (void)check;
  return {Eta::Zero(), vecs(sigma)};
}

PseudoTrue pseudo_true_numeric(const CesModel& model, const HermitianMatrix& sigma, const CVector& v,
                               Index sample_size, Rng& rng) {
  if (sample_size <= sigma.dim()) {
    throw InvalidArgument("pseudo_true_numeric: sample_size must exceed N");
  }
  const CMatrix x = sample_ces({cplx(0.0, 0.0), v, sigma, model}, sample_size, rng);
  const double n = static_cast<double>(sample_size);
  const CVector mean = x.rowwise().sum() / n;
  const CMatrix centred = x.colwise() - mean;
  const HermitianMatrix cov = secondary_scatter(centred).scaled(1.0 / n);
  const Cholesky cf(cov);
  const cplx alpha = cf.quad_form(v, mean) / cf.quad_form(v, v).real();
  const HermitianMatrix phi = secondary_scatter(x.colwise() - alpha * v).scaled(1.0 / n);
  return {to_eta(alpha), vecs(phi)};
}

LoglikDerivatives gaussian_loglik_derivatives(const CVector& x, const Eta& eta, const CVector& v,
                                              const HermitianMatrix& phi) {
  LoglikGeometry geom(eta, v, phi);
  LoglikDerivatives out;
  geom.evaluate(x, out.gradient, out.hessian);
  return out;
}

AbMatrices ab_matrices(const CesModel& model, const HermitianMatrix& sigma, const CVector& v,
                       const PseudoTrue& theta_bar, const MonteCarloOptions& options) {
  const Index n = v.size();
  if (sigma.dim() != n || theta_bar.mu_bar.size() != n * n) {
    throw InvalidArgument("ab_matrices: dimension mismatch");
  }
  if (options.blocks < 1 || options.sample_size < 2 * options.blocks) {
    throw InvalidArgument("ab_matrices: need blocks >= 1 and at least two samples per block");
  }
  const LoglikGeometry geom(theta_bar.eta_bar, v, unvecs(theta_bar.mu_bar));
  const CesSampler sampler({cplx(0.0, 0.0), v, sigma, model});

  const Index blocks = options.blocks;
  std::vector<BlockSums> sums(static_cast<std::size_t>(blocks));
  auto block_count = [&](Index b) {
    return options.sample_size / blocks + (b < options.sample_size % blocks ? 1 : 0);
  };
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index b = next++; b < blocks; b = next++) {
      sums[static_cast<std::size_t>(b)] = run_block(geom, sampler, block_count(b), options.seed, b);
    }
  };
  const unsigned nworkers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(blocks)));
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < nworkers; ++i) pool.emplace_back(worker);
    worker();
  }

  // fixed-order reduction
  const Index d = geom.dim();
  RMatrix h = RMatrix::Zero(d, d), h2 = h, bs = h, b2 = h;
  AbMatrices out;
  for (const BlockSums& s : sums) {
    h += s.h;
    h2 += s.h2;
    bs += s.b;
    b2 += s.b2;
    out.block_a.push_back(-s.h / static_cast<double>(s.count));
    out.block_b.push_back(s.b / static_cast<double>(s.count));
  }
  const double total = static_cast<double>(options.sample_size);
  out.sample_size = options.sample_size;
  out.a = -h / total;
  out.b = bs / total;
  out.a_se = standard_error(h, h2, options.sample_size);
  out.b_se = standard_error(bs, b2, options.sample_size);
  return out;
}

RMatrix sandwich(const RMatrix& a, const RMatrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows() || b.rows() != b.cols()) {
    throw InvalidArgument("sandwich: shape mismatch");
  }
  const Eigen::FullPivLU<RMatrix> lu(a);
  if (!lu.isInvertible()) throw InvalidArgument("sandwich: A is singular");
  const RMatrix x = lu.solve(b);                           // A^{-1} B
  const RMatrix c = lu.solve(x.transpose()).transpose();  // (A^{-1} B) A^{-T}
  return 0.5 * (c + c.transpose());
}

Eigen::Matrix2d p_matrix(const RMatrix& a) {
  if (a.rows() != a.cols() || a.rows() < 3) throw InvalidArgument("p_matrix: A must be square, dim >= 3");
  const Index p = a.rows() - 2;
  const Eigen::FullPivLU<RMatrix> lu(a.bottomRightCorner(p, p));
  if (!lu.isInvertible()) throw InvalidArgument("p_matrix: A_mu block is singular");
  const RMatrix cross = a.topRightCorner(2, p);
  return a.topLeftCorner<2, 2>() - cross * lu.solve(a.bottomLeftCorner(p, 2));
}

HMatrix h_matrix_and_eigs(const Eigen::Matrix2d& p, const Eigen::Matrix2d& c_eta) {
  HMatrix out;
  out.h = p * c_eta;
  const double half_tr = 0.5 * out.h.trace();
  double disc = half_tr * half_tr - out.h.determinant();
  if (disc < 0.0) {
    if (std::sqrt(-disc) > 1e-8 * std::max(1.0, std::abs(half_tr))) {
      throw InvalidArgument("h_matrix: complex eigenvalues, inconsistent P and C_eta");
    }
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  out.lambdas = {half_tr + root, half_tr - root};
  return out;
}

SandwichReport sandwich_report(const CesModel& model, const HermitianMatrix& sigma, const CVector& v,
                               const MonteCarloOptions& options) {
  const PseudoTrue theta = pseudo_true_closed_form(sigma);
  const AbMatrices ab = ab_matrices(model, sigma, v, theta, options);

  SandwichReport rep;
  rep.model = model.name();
  rep.dim = v.size();
  rep.sample_size = options.sample_size;
  rep.blocks = options.blocks;
  rep.seed = options.seed;
  rep.eta_bar = theta.eta_bar;
  rep.mu_bar = theta.mu_bar;
  rep.a = ab.a;
  rep.b = ab.b;
  rep.a_se = ab.a_se;
  rep.b_se = ab.b_se;
  rep.c = sandwich(ab.a, ab.b);
  rep.p = p_matrix(ab.a);
  rep.c_eta = rep.c.topLeftCorner<2, 2>();
  const HMatrix hm = h_matrix_and_eigs(rep.p, rep.c_eta);
  rep.h = hm.h;
  rep.lambdas = hm.lambdas;
  rep.a_eta_closed_form = 2.0 * quad_form(sigma, v, v).real();

  rep.lambda_se.setZero();
  if (ab.block_a.size() >= 2) {
    std::vector<Eigen::Vector2d> lam;
    for (std::size_t i = 0; i < ab.block_a.size(); ++i) {
      const RMatrix c = sandwich(ab.block_a[i], ab.block_b[i]);
      lam.push_back(h_matrix_and_eigs(p_matrix(ab.block_a[i]), c.topLeftCorner<2, 2>()).lambdas);
    }
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& l : lam) mean += l;
    mean /= static_cast<double>(lam.size());
    Eigen::Vector2d var = Eigen::Vector2d::Zero();
    for (const auto& l : lam) var += (l - mean).cwiseAbs2();
    const double k = static_cast<double>(lam.size());
    rep.lambda_se = (var / (k - 1.0) / k).cwiseSqrt();
  }

  const Index d = rep.a.rows();
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 2; j < d; ++j) {
      if (rep.a_se(i, j) > 0.0) {
        rep.max_cross_a_over_se = std::max(rep.max_cross_a_over_se, std::abs(rep.a(i, j)) / rep.a_se(i, j));
      }
      if (rep.b_se(i, j) > 0.0) {
        rep.max_cross_b_over_se = std::max(rep.max_cross_b_over_se, std::abs(rep.b(i, j)) / rep.b_se(i, j));
      }
    }
  }
  return rep;
}

}  // namespace cesdet
