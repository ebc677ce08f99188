#pragma once

// Test-only dense reference implementations. Nothing here calls into the
// library's operators: stencils are assembled entry by entry from their
// definitions and solved by Gaussian elimination in long double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "chsep/grid.hpp"
#include "chsep/physics.hpp"

namespace oracle {

using Real = long double;

struct Dense {
  std::size_t n = 0;
  std::vector<Real> a;
  explicit Dense(std::size_t n_) : n(n_), a(n_ * n_, 0.0L) {}
  Real& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  std::vector<Real> apply(const std::vector<Real>& x) const {
    std::vector<Real> y(n, 0.0L);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) y[i] += (*this)(i, j) * x[j];
    return y;
  }
};

inline Dense operator*(const Dense& x, const Dense& y) {
  Dense z(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k) {
      const Real v = x(i, k);
      if (v == 0.0L) continue;
      for (std::size_t j = 0; j < x.n; ++j) z(i, j) += v * y(k, j);
    }
  return z;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<Real> solve(Dense A, std::vector<Real> b) {
  const std::size_t n = A.n;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A(r, c)) > std::fabs(A(piv, c))) piv = r;
    if (A(piv, c) == 0.0L) throw std::runtime_error("singular oracle matrix");
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(c, j), A(piv, j));
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const Real f = A(r, c) / A(c, c);
      if (f == 0.0L) continue;
      for (std::size_t j = c; j < n; ++j) A(r, j) -= f * A(c, j);
      b[r] -= f * b[c];
    }
  }
  std::vector<Real> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Real s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

/// 1D Neumann second difference (mirror ghosts) on n cells of width h.
inline Dense second_difference_1d(std::size_t n, Real h) {
  Dense D(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      D(i, i - 1) += 1.0L / (h * h);
      D(i, i) -= 1.0L / (h * h);
    }
    if (i + 1 < n) {
      D(i, i + 1) += 1.0L / (h * h);
      D(i, i) -= 1.0L / (h * h);
    }
  }
  return D;
}

/// Dense Neumann Laplacian as a Kronecker sum (x index fastest).
inline Dense laplacian(const chsep::GridSpec& g) {
  const std::size_t nx = g.nx(), ny = g.ny();
  Dense Dx = second_difference_1d(nx, static_cast<Real>(g.spacing(0)));
  Dense L(nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t i2 = 0; i2 < nx; ++i2) L(i + nx * j, i2 + nx * j) += Dx(i, i2);
  if (g.dim == 2) {
    Dense Dy = second_difference_1d(ny, static_cast<Real>(g.spacing(1)));
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t j2 = 0; j2 < ny; ++j2)
        for (std::size_t i = 0; i < nx; ++i) L(i + nx * j, i + nx * j2) += Dy(j, j2);
  }
  return L;
}

/// Dense div(m grad .) with face mobility (m_a + m_b)/2 between neighbours.
inline Dense div_m_grad(const chsep::GridSpec& g, const std::vector<double>& m) {
  const std::size_t nx = g.nx(), ny = g.ny();
  Dense D(nx * ny);
  auto link = [&](std::size_t a, std::size_t b, Real h) {
    const Real w = 0.5L * (static_cast<Real>(m[a]) + static_cast<Real>(m[b])) / (h * h);
    D(a, a) -= w;
    D(a, b) += w;
    D(b, b) -= w;
    D(b, a) += w;
  };
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i) link(i + nx * j, i + 1 + nx * j, g.spacing(0));
  if (g.dim == 2)
    for (std::size_t j = 0; j + 1 < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) link(i + nx * j, i + nx * (j + 1), g.spacing(1));
  return D;
}

inline std::vector<Real> to_real(const std::vector<double>& v) { return {v.begin(), v.end()}; }

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(gen);
  return v;
}

inline double max_diff(const std::vector<double>& a, const std::vector<Real>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, static_cast<double>(std::fabs(static_cast<Real>(a[k]) - b[k])));
  return m;
}

inline Real F1(Real s, Real theta) { return 0.5L * theta * (std::log1p(s) - std::log1p(-s)); }
inline Real F2(Real s, Real theta) { return theta / ((1.0L - s) * (1.0L + s)); }

// Dense brute-force Newton for the convex-splitting step: full Jacobian,
// Gaussian elimination, backtracking by halves until the iterate is inside the
// guard and the max-norm residual decreases, mean restored after each update.
inline std::vector<Real> ch_step(const chsep::GridSpec& g, const std::vector<double>& phi_old,
                              const chsep::MobilitySpec& mob, const chsep::PotentialParams& p, double dt) {
  const std::size_t n = phi_old.size();
  std::vector<double> m(n);
  for (std::size_t k = 0; k < n; ++k) m[k] = mob(phi_old[k]);
  const Dense D = div_m_grad(g, m);
  const Dense L = laplacian(g);
  const std::vector<Real> old = to_real(phi_old);
  Real target = 0.0L;
  for (Real v : old) target += v;
  target /= static_cast<Real>(n);

  auto residual = [&](const std::vector<Real>& phi) {
    std::vector<Real> lap = L.apply(phi), mu(n);
    for (std::size_t k = 0; k < n; ++k) mu[k] = -lap[k] + F1(phi[k], p.theta) - p.theta0 * old[k];
    std::vector<Real> flux = D.apply(mu), r(n);
    for (std::size_t k = 0; k < n; ++k) r[k] = phi[k] - old[k] - dt * flux[k];
    return r;
  };
  auto maxnorm = [](const std::vector<Real>& v) {
    Real s = 0.0L;
    for (Real x : v) s = std::max(s, std::fabs(x));
    return s;
  };

  std::vector<Real> phi = old, r = residual(phi);
  for (int it = 0; it < 100 && maxnorm(r) > 1e-15L; ++it) {
    Dense J(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        Real dl = 0.0L;  // (D (-L + diag F''))_{ij}
        for (std::size_t q = 0; q < n; ++q) dl += D(i, q) * (-L(q, j) + (q == j ? F2(phi[j], p.theta) : 0.0L));
        J(i, j) = (i == j ? 1.0L : 0.0L) - dt * dl;
      }
    }
    std::vector<Real> rhs(n);
    for (std::size_t k = 0; k < n; ++k) rhs[k] = -r[k];
    const std::vector<Real> delta = solve(J, rhs);
    Real alpha = 1.0L;
    while (true) {
      std::vector<Real> cand(n);
      Real mc = 0.0L;
      for (std::size_t k = 0; k < n; ++k) mc += (cand[k] = phi[k] + alpha * delta[k]);
      mc /= static_cast<Real>(n);
      for (Real& v : cand) v += target - mc;
      if (maxnorm(cand) < 1.0L - 1e-9L) {
        std::vector<Real> rc = residual(cand);
        if (maxnorm(rc) < maxnorm(r)) {
          phi = cand;
          r = rc;
          break;
        }
      }
      alpha *= 0.5L;
      if (alpha < 1e-12L) return phi;
    }
  }
  return phi;
}

}  // namespace oracle
