#pragma once

// Inverse Neumann Laplacian on mean-free data and the norms built on it,
// including the dual norm of H1 realized through the inverse Laplacian.

#include <cmath>
#include <vector>

#include "chsep/grid.hpp"
#include "chsep/linear_solvers.hpp"

namespace chsep {

/// Diagonal of -neumann_laplacian, for Jacobi preconditioning.
inline std::vector<double> neg_laplacian_diagonal(const GridSpec& g) {
  std::vector<double> d(g.size(), 0.0);
  const int nx = g.nx(), ny = g.ny();
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double ihy2 = g.dim == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      if (i > 0) s += ihx2;
      if (i < nx - 1) s += ihx2;
      if (g.dim == 2) {
        if (j > 0) s += ihy2;
        if (j < ny - 1) s += ihy2;
      }
      d[g.index(i, j)] = s;
    }
  return d;
}

namespace detail {

inline ScalarField solve_neg_laplacian_mean_free(const ScalarField& v) {
  const GridSpec& g = v.grid;
  ScalarField psi(g, 0.0);
  if (max_abs(v) == 0.0) return psi;

  const std::vector<double> diag = neg_laplacian_diagonal(g);
  LinearOp apply = [&g](std::span<const double> x, std::span<double> y) {
    ScalarField xf(g, std::vector<double>(x.begin(), x.end()));
    ScalarField lx = neumann_laplacian(xf);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = -lx[k];
  };
  SolverSettings s;
  s.rtol = 1e-11;
  s.pin_mean = true;
  const SolveStats st = pcg(apply, diag, v.values, psi.values, s);

  ScalarField r = neumann_laplacian(psi);
  r += v;
  if (!st.converged || l2_norm(r) > 1e-10 * l2_norm(v))
    fail(ErrorKind::SolverStall, "inverse Neumann Laplacian did not reach tolerance");
  psi += -mean(psi);
  return psi;
}

}  // namespace detail

/// Mean-free psi with -Lap_h psi = v. Throws NotMeanFree when v has a mean
/// above 1e-10 * max|v|, SolverStall when the residual stays above
/// 1e-10 * ||v||.
inline ScalarField inverse_neumann_laplacian(const ScalarField& v) {
  if (std::abs(mean(v)) > 1e-10 * max_abs(v))
    fail(ErrorKind::NotMeanFree, "inverse Neumann Laplacian needs mean-free data");
  return detail::solve_neg_laplacian_mean_free(v);
}

struct Norms {
  double mean = 0.0;
  double l2 = 0.0;
  double h1_semi = 0.0;
  double h1_dual = 0.0;
};

inline double h1_seminorm(const ScalarField& u) { return std::sqrt(face_quadrature(faces_from_cells(u))); }

/// ||u - mean(u)|| in the dual of H1, sqrt((u - mean, psi)).
inline double h1_dual_norm(const ScalarField& u) {
  ScalarField centered = minus_mean(minus_mean(u));
  if (max_abs(centered) <= 1e-14 * max_abs(u)) return 0.0;
  ScalarField psi = detail::solve_neg_laplacian_mean_free(centered);
  return std::sqrt(std::max(0.0, inner(centered, psi)));
}

inline Norms norms(const ScalarField& u) {
  Norms n;
  n.mean = mean(u);
  n.l2 = l2_norm(u);
  n.h1_semi = h1_seminorm(u);
  n.h1_dual = h1_dual_norm(u);
  return n;
}

}  // namespace chsep
