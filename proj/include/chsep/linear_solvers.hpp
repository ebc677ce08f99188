#pragma once

// Krylov and direct solvers shared by the elliptic and Newton solves.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "chsep/error.hpp"
#include "chsep/grid.hpp"

namespace chsep {

struct SolverSettings {
  double rtol = 1e-10;
  double atol = 0.0;
  std::size_t max_iter = 0;  // 0 -> 10 * unknowns
  bool pin_mean = false;     // project out constants (pure Neumann problems)
};

struct SolveStats {
  std::size_t iterations = 0;
  double residual = 0.0;  // true residual 2-norm at exit
  bool converged = false;
};

using LinearOp = std::function<void(std::span<const double>, std::span<double>)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline void remove_mean(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  s /= static_cast<double>(v.size());
  for (double& x : v) x -= s;
}

}  // namespace detail

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi)definite operator. With pin_mean the right-hand side, preconditioned
/// residuals and iterate are projected onto mean-free vectors, so the
/// constant null space of Neumann operators never enters the iteration.
/// `x` holds the initial guess on entry.
inline SolveStats pcg(const LinearOp& apply, std::span<const double> diag,
                      std::span<const double> b_in, std::span<double> x,
                      const SolverSettings& s) {
  const std::size_t n = b_in.size();
  const std::size_t max_iter = s.max_iter ? s.max_iter : 10 * n;
  std::vector<double> b(b_in.begin(), b_in.end());
  if (s.pin_mean) {
    detail::remove_mean(b);
    detail::remove_mean(x);
  }
  const double bnorm = std::sqrt(detail::dot(b, b));
  const double target = std::max(s.rtol * bnorm, s.atol);

  std::vector<double> r(n), z(n), p(n), q(n);
  auto true_residual = [&] {
    apply(x, q);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
    if (s.pin_mean) detail::remove_mean(r);
    return std::sqrt(detail::dot(r, r));
  };

  SolveStats st;
  double rnorm = true_residual();
  if (rnorm <= target || bnorm == 0.0) {
    st.residual = rnorm;
    st.converged = true;
    return st;
  }
  // Restarted from the true residual so the exit test never trusts a drifted
  // recursive residual.
  for (int restart = 0; restart < 4 && st.iterations < max_iter; ++restart) {
    for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
    if (s.pin_mean) detail::remove_mean(z);
    p = z;
    double rz = detail::dot(r, z);
    while (st.iterations < max_iter) {
      apply(p, q);
      const double pq = detail::dot(p, q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * q[k];
      }
      if (s.pin_mean) detail::remove_mean(r);
      ++st.iterations;
      if (std::sqrt(detail::dot(r, r)) <= 0.1 * target) break;
      for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
      if (s.pin_mean) detail::remove_mean(z);
      const double rz_new = detail::dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    if (s.pin_mean) detail::remove_mean(x);
    rnorm = true_residual();
    if (rnorm <= target) {
      st.converged = true;
      break;
    }
  }
  st.residual = rnorm;
  return st;
}

// ---------------------------------------------------------------------------
// Sparse assembly of the cell operators, used by the Newton solvers.

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Matrix of div(w grad .) for face weights w (boundary faces ignored).
inline SparseMatrix face_weighted_laplacian_matrix(const FaceField& w) {
  const GridSpec& g = w.grid;
  const int nx = g.nx(), ny = g.ny();
  Triplets t;
  t.reserve(g.size() * 5);
  auto couple = [&](std::size_t a, std::size_t b, double c) {
    t.emplace_back(a, a, -c);
    t.emplace_back(a, b, c);
    t.emplace_back(b, b, -c);
    t.emplace_back(b, a, c);
  };
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i)
      couple(g.index(i - 1, j), g.index(i, j), w.axis[0][w.xface(i, j)] * ihx2);
  if (g.dim == 2) {
    const double ihy2 = 1.0 / (g.spacing(1) * g.spacing(1));
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        couple(g.index(i, j - 1), g.index(i, j), w.axis[1][w.yface(i, j)] * ihy2);
  }
  SparseMatrix m(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline SparseMatrix laplacian_matrix(const GridSpec& g) {
  FaceField ones(g);
  for (int ax = 0; ax < g.dim; ++ax)
    for (double& v : ones.axis[ax]) v = 1.0;
  return face_weighted_laplacian_matrix(ones);
}

/// Sparse LU wrapper that reports failures through the library error type.
class SparseDirectSolver {
 public:
  void factorize(const SparseMatrix& a) {
    lu_.analyzePattern(a);
    lu_.factorize(a);
    if (lu_.info() != Eigen::Success) fail(ErrorKind::SolverStall, "sparse LU factorization failed");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) {
    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) fail(ErrorKind::SolverStall, "sparse LU solve failed");
    return x;
  }

 private:
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace chsep
