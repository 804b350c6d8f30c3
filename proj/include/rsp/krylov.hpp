#pragma once

// Lanczos iterations on complex vectors for a Hermitian operator given only
// through its action. Used for ground states and for short-time propagators
// exp(-i dt H) v.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rsp/errors.hpp"

namespace rsp {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;

struct LanczosOptions {
  std::size_t krylov_dim = 60;
  std::size_t max_restarts = 200;
  double tolerance = 1e-9;  ///< on the residual |H v - E v|
};

struct Eigenpair {
  double value = 0.0;
  CVector vector;
  double residual = 0.0;
  std::size_t restarts = 0;
};

namespace detail {

// Second Gram-Schmidt pass keeps the basis orthonormal to machine precision.
inline void orthogonalize(const Eigen::MatrixXcd& basis, Eigen::Index used, CVector& w,
                          CVector& overlaps) {
  for (int pass = 0; pass < 2; ++pass) {
    overlaps.noalias() = basis.leftCols(used).adjoint() * w;
    w.noalias() -= basis.leftCols(used) * overlaps;
  }
}

inline void orthogonalize(const Eigen::MatrixXcd& basis, Eigen::Index used, CVector& w) {
  CVector overlaps;
  orthogonalize(basis, used, w, overlaps);
}

inline Eigen::MatrixXd tridiagonal(const std::vector<double>& alpha,
                                   const std::vector<double>& beta, std::size_t m) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                            static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    t(i, i) = alpha[k];
    if (k + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[k];
  }
  return t;
}

}  // namespace detail

/// Lowest eigenpair of a Hermitian operator, restarting from the current
/// Ritz vector with full reorthogonalization. `apply(in, out)` sets out = H in.
template <class Apply>
Eigenpair lowest_eigenpair(Apply&& apply, const CVector& start, const LanczosOptions& opt = {}) {
  const Eigen::Index dim = start.size();
  if (dim == 0) throw InvalidParameter("empty start vector");
  if (!(start.norm() > 0.0)) throw InvalidParameter("start vector must be non-zero");
  const auto m_max = static_cast<Eigen::Index>(
      std::min<std::size_t>(std::max<std::size_t>(opt.krylov_dim, 2), static_cast<std::size_t>(dim)));

  CVector x = start.normalized();
  CVector w(dim), col(dim);
  Eigen::MatrixXcd basis(dim, m_max);
  double residual = std::numeric_limits<double>::infinity();
  double theta = 0.0;

  for (std::size_t restart = 0; restart <= opt.max_restarts; ++restart) {
    std::vector<double> alpha, beta;
    basis.col(0) = x;
    Eigen::Index m = 0;
    for (Eigen::Index j = 0; j < m_max; ++j) {
      col = basis.col(j);
      apply(col, w);
      alpha.push_back(col.dot(w).real());
      m = j + 1;
      detail::orthogonalize(basis, m, w);
      const double b = w.norm();
      if (j + 1 == m_max || b <= 1e-14 * std::max(1.0, std::abs(alpha.back()))) break;
      beta.push_back(b);
      basis.col(j + 1) = w / b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(
        detail::tridiagonal(alpha, beta, static_cast<std::size_t>(m)));
    theta = tri.eigenvalues()(0);
    const Eigen::VectorXcd s = tri.eigenvectors().col(0).cast<cplx>();
    x = basis.leftCols(m) * s;
    x.normalize();
    apply(x, w);
    residual = (w - theta * x).norm();
    if (residual <= opt.tolerance) return {theta, x, residual, restart};
  }
  throw ConvergenceError("Lanczos ground state did not converge", residual);
}

struct PropagatorResult {
  double error_estimate = 0.0;
  std::size_t krylov_dim = 0;
  bool converged = false;
};

/// Scratch space reused across propagator calls of the same dimension.
struct KrylovWorkspace {
  Eigen::MatrixXcd basis;
  CVector w, col, overlaps;
  Eigen::VectorXcd coeffs;
  std::vector<double> alpha, beta;
};

/// out = exp(-i dt H) v using a Lanczos basis grown until the standard a
/// posteriori estimate beta_m |[exp(-i dt T) e_1]_m| drops below `tolerance`
/// (absolute, relative to |v|). The result is exactly unitary in the Krylov
/// space; `converged` is false if max_dim was reached first.

template <class Apply>
PropagatorResult propagate(Apply&& apply, const CVector& v, double dt, CVector& out,
                           double tolerance, KrylovWorkspace& ws, std::size_t max_dim = 64) {
  const Eigen::Index dim = v.size();
  const double norm = v.norm();
  out.resize(dim);
  if (norm == 0.0 || dt == 0.0) {
    out = v;
    return {0.0, 0, true};
  }
  const auto m_max =
      static_cast<Eigen::Index>(std::min<std::size_t>(max_dim, static_cast<std::size_t>(dim)));
  if (ws.basis.rows() != dim || ws.basis.cols() < m_max) ws.basis.resize(dim, m_max);
  ws.w.resize(dim);
  ws.col.resize(dim);
  auto& basis = ws.basis;
  auto& alpha = ws.alpha;
  auto& beta = ws.beta;
  auto& w = ws.w;
  auto& col = ws.col;
  auto& coeffs = ws.coeffs;
  alpha.clear();
  beta.clear();
  basis.col(0) = v / norm;
  PropagatorResult result;
  double apriori = 1.0;

  for (Eigen::Index j = 0; j < m_max; ++j) {
    col = basis.col(j);
    apply(col, w);
    alpha.push_back(col.dot(w).real());
    const Eigen::Index m = j + 1;
    detail::orthogonalize(basis, m, w, ws.overlaps);
    const double b = w.norm();
    const bool exhausted = b <= 1e-14 * std::max(1.0, std::abs(alpha.back()));

    // a priori bound dt^m prod(beta) / m!; skip the small eigensolve while it is hopeless
    apriori *= std::abs(dt) * b / static_cast<double>(m);
    if (!exhausted && j + 1 < m_max && apriori * norm > 1e3 * tolerance) {
      beta.push_back(b);
      basis.col(j + 1) = w / b;
      continue;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(
        detail::tridiagonal(alpha, beta, static_cast<std::size_t>(m)));
    const Eigen::MatrixXcd s = tri.eigenvectors().cast<cplx>();
    Eigen::VectorXcd phases(m);
    for (Eigen::Index k = 0; k < m; ++k)
      phases(k) = std::polar(1.0, -dt * tri.eigenvalues()(k)) * s(0, k);
    coeffs = s * phases;

    result.error_estimate = exhausted ? 0.0 : b * std::abs(coeffs(m - 1)) * norm;
    result.krylov_dim = static_cast<std::size_t>(m);
    if (exhausted || result.error_estimate <= tolerance) {
      result.converged = true;
      out.noalias() = norm * (basis.leftCols(m) * coeffs);
      return result;
    }
    if (j + 1 == m_max) break;
    beta.push_back(b);
    basis.col(j + 1) = w / b;
  }
  out.noalias() = norm * (basis.leftCols(static_cast<Eigen::Index>(result.krylov_dim)) * coeffs);
  return result;
}

template <class Apply>
PropagatorResult propagate(Apply&& apply, const CVector& v, double dt, CVector& out,
                           double tolerance, std::size_t max_dim = 64) {
  KrylovWorkspace ws;
  return propagate(std::forward<Apply>(apply), v, dt, out, tolerance, ws, max_dim);
}

}  // namespace rsp
