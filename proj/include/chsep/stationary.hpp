#pragma once

// Stationary states: solutions of -Lap phi + f'(phi) = mu_inf with a fixed
// mean, residuals of arbitrary states and distances to a stationary state.

#include <cmath>
#include <string>

#include "chsep/ch_core.hpp"
#include "chsep/error.hpp"
#include "chsep/grid.hpp"
#include "chsep/linear_solvers.hpp"
#include "chsep/norms.hpp"
#include "chsep/physics.hpp"

namespace chsep {

struct StationaryState {
  ScalarField phi_inf;
  double mu_inf = 0.0;
  double residual = 0.0;  // ||-Lap phi + f'(phi) - mu_inf||_2
  double mass = 0.0;
  double delta_sep = 0.0;  // 1 - max|phi_inf|
  int iters = 0;
};

struct StationarySettings {
  double tol = 1e-10;         // on residual / (1 + |mu|)
  double target = 1e-13;      // iterate further while progress is made
  int max_iter = 50;
  double backtrack = 0.5;
  double guard_gap = 1e-9;
};

/// -Lap phi + f'(phi), pointwise.
inline ScalarField stationary_operator(const ScalarField& phi, const PotentialParams& p) {
  for (double v : phi.values) check_potential_domain(p, v);
  return chemical_potential(phi, p);
}

struct StationaryResidual {
  double mu_best = 0.0;
  double residual = 0.0;
};

/// Least-squares constant multiplier and the residual it leaves.
inline StationaryResidual stationary_residual(const ScalarField& phi, const PotentialParams& p) {
  ScalarField g = stationary_operator(phi, p);
  StationaryResidual r;
  // Centered about g[0] so that constant states give exactly zero.
  const double ref = g[0];
  g += -ref;
  const double shift = mean(g);
  r.mu_best = ref + shift;
  g += -shift;
  r.residual = l2_norm(g);
  return r;
}

/// Bordered Newton on (phi, mu) for G = (-Lap phi + f'(phi) - mu, mean(phi) - k).
inline StationaryState solve_stationary(const ScalarField& guess, double k, const PotentialParams& p,
                                        const StationarySettings& s = {}) {
  p.validate();
  if (!(std::abs(k) < 1.0)) fail(ErrorKind::ValidationError, "target mass must satisfy |k| < 1");
  const double bound = 1.0 - s.guard_gap;
  if (!(max_abs(guess) < bound))
    fail(ErrorKind::BoundaryCollision, "stationary guess touches the pure phases");
  const GridSpec& g = guess.grid;
  const std::size_t n = g.size();
  const auto ni = static_cast<Eigen::Index>(n);
  const SparseMatrix neg_lap = -laplacian_matrix(g);

  ScalarField phi = guess;
  phi += k - mean(phi);
  if (!(max_abs(phi) < bound))
    fail(ErrorKind::BoundaryCollision, "mass-shifted guess touches the pure phases");

  auto residual_of = [&](const ScalarField& f, double mu) {
    ScalarField r = stationary_operator(f, p);
    r += -mu;
    return r;
  };
  auto merit = [](const ScalarField& r, double mu) { return l2_norm(r) / (1.0 + std::abs(mu)); };

  double mu = stationary_residual(phi, p).mu_best;
  ScalarField r = residual_of(phi, mu);
  double rn = merit(r, mu);
  SparseDirectSolver lu;
  int it = 0;
  while (rn > s.target && it < s.max_iter) {
    ++it;
    Triplets t;
    t.reserve(neg_lap.nonZeros() + 3 * n);
    for (Eigen::Index c = 0; c < neg_lap.outerSize(); ++c)
      for (SparseMatrix::InnerIterator e(neg_lap, c); e; ++e) t.emplace_back(e.row(), e.col(), e.value());
    const double w = 1.0 / static_cast<double>(n);
    for (Eigen::Index q = 0; q < ni; ++q) {
      t.emplace_back(q, q, potential_eval(p, phi[q], 2));
      t.emplace_back(q, ni, -1.0);
      t.emplace_back(ni, q, w);
    }
    SparseMatrix jac(ni + 1, ni + 1);
    jac.setFromTriplets(t.begin(), t.end());
    lu.factorize(jac);
    Eigen::VectorXd rhs(ni + 1);
    for (Eigen::Index q = 0; q < ni; ++q) rhs[q] = -r[q];
    rhs[ni] = 0.0;  // mean already exact
    const Eigen::VectorXd d = lu.solve(rhs);

    double alpha = 1.0;
    bool by_bound = false;
    while (true) {
      ScalarField cand = phi;
      for (std::size_t q = 0; q < n; ++q) cand[q] += alpha * d[static_cast<Eigen::Index>(q)];
      cand += k - mean(cand);
      const double mc = mu + alpha * d[ni];
      if (max_abs(cand) < bound) {
        by_bound = false;
        ScalarField rc = residual_of(cand, mc);
        const double cn = merit(rc, mc);
        if (cn < rn) {
          phi = std::move(cand);
          r = std::move(rc);
          mu = mc;
          rn = cn;
          break;
        }
      } else {
        by_bound = true;
      }
      alpha *= s.backtrack;
      if (alpha < 1e-12) break;
    }
    if (alpha < 1e-12) {
      if (rn <= s.tol) break;  // stalled at rounding level
      if (by_bound) fail(ErrorKind::BoundaryCollision, "damping cannot keep the stationary iterate inside (-1, 1)");
      fail(ErrorKind::NewtonDiverged, "stationary line search failed to reduce the residual");
    }
  }
  if (!(rn <= s.tol))
    fail(ErrorKind::NewtonDiverged, "stationary Newton did not reach tolerance: residual " + std::to_string(rn));

  StationaryState out;
  out.mu_inf = mu;
  out.residual = l2_norm(r);
  out.mass = mean(phi);
  out.delta_sep = 1.0 - max_abs(phi);
  out.iters = it;
  out.phi_inf = std::move(phi);
  return out;
}

struct Distance {
  double l2 = 0.0;
  double h1 = 0.0;  // full H1 norm of the difference
};

inline Distance distance_to(const ScalarField& phi, const StationaryState& eq) {
  if (!(phi.grid == eq.phi_inf.grid)) fail(ErrorKind::GridMismatch, "distance between fields on different grids");
  const ScalarField d = phi - eq.phi_inf;
  Distance out;
  out.l2 = l2_norm(d);
  const double semi = h1_seminorm(d);
  out.h1 = std::sqrt(out.l2 * out.l2 + semi * semi);
  return out;
}

struct SecondOrderBound {
  double lap_l2 = 0.0;   // ||Lap phi||_2
  double grad_l2 = 0.0;  // ||grad phi||_2
  double squared_slack = 0.0;  // (theta0 - theta) ||grad||^2 - ||Lap||^2
};

/// Testing -Lap phi against the stationary equation gives
/// ||Lap phi||^2 <= (theta0 - theta) ||grad phi||^2 at a stationary state.
inline SecondOrderBound second_order_bound(const ScalarField& phi, const PotentialParams& p) {
  SecondOrderBound b;
  b.lap_l2 = l2_norm(neumann_laplacian(phi));
  b.grad_l2 = h1_seminorm(phi);
  b.squared_slack = (p.theta0 - p.theta) * b.grad_l2 * b.grad_l2 - b.lap_l2 * b.lap_l2;
  return b;
}

}  // namespace chsep
