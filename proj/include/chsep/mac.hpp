#pragma once

// Staggered (MAC) velocity on a 2D box: u on x-faces, v on y-faces, stored
// in a FaceField. Boundary faces carry the zero normal velocity. Tangential
// no-slip enters through mirrored ghost values in the node derivatives.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/SparseCore>

#include "chsep/error.hpp"
#include "chsep/grid.hpp"
#include "chsep/linear_solvers.hpp"

namespace chsep {

using VelocityField = FaceField;

/// Numbering of the interior faces, the velocity unknowns.
class MacDofs {
 public:
  explicit MacDofs(const GridSpec& g) : g_(g) {
    if (g.dim != 2) fail(ErrorKind::InvalidSpec, "staggered velocity needs a 2D grid");
    nu_ = static_cast<std::size_t>(g.nx() - 1) * g.ny();
    nv_ = static_cast<std::size_t>(g.nx()) * (g.ny() - 1);
  }

  std::size_t size() const { return nu_ + nv_; }
  std::size_t u(int i, int j) const { return static_cast<std::size_t>(i - 1) + static_cast<std::size_t>(g_.nx() - 1) * j; }
  std::size_t v(int i, int j) const { return nu_ + static_cast<std::size_t>(i) + static_cast<std::size_t>(g_.nx()) * (j - 1); }

  Eigen::VectorXd gather(const VelocityField& f) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(size()));
    for_each([&](std::size_t d, int ax, std::size_t k) { x[static_cast<Eigen::Index>(d)] = f.axis[ax][k]; });
    return x;
  }

  VelocityField scatter(const Eigen::VectorXd& x) const {
    VelocityField f(g_);
    for_each([&](std::size_t d, int ax, std::size_t k) { f.axis[ax][k] = x[static_cast<Eigen::Index>(d)]; });
    return f;
  }

  /// Calls fn(dof, axis, face index) for every interior face.
  template <class Fn>
  void for_each(Fn&& fn) const {
    const FaceField probe(g_);
    for (int j = 0; j < g_.ny(); ++j)
      for (int i = 1; i < g_.nx(); ++i) fn(u(i, j), 0, probe.xface(i, j));
    for (int j = 1; j < g_.ny(); ++j)
      for (int i = 0; i < g_.nx(); ++i) fn(v(i, j), 1, probe.yface(i, j));
  }

 private:
  GridSpec g_;
  std::size_t nu_ = 0, nv_ = 0;
};

/// Velocity gradient and strain matrices on the interior-face unknowns.
///
/// Gradient rows: du/dx and dv/dy at cells, then du/dy and dv/dx at nodes.
/// Strain rows: D11, D22 at cells, then sqrt(2) D12 at nodes, so that the
/// weighted sum of squared rows is int |Du|^2. Node weights are 1 inside,
/// 1/2 on walls and 1/4 at corners.
struct MacOperators {
  GridSpec grid;
  MacDofs dofs;
  SparseMatrix gradient;
  SparseMatrix strain;
  Eigen::VectorXd gradient_weight;
  Eigen::VectorXd strain_weight;

  explicit MacOperators(const GridSpec& g) : grid(g), dofs(g) {
    const int nx = g.nx(), ny = g.ny();
    const double hx = g.spacing(0), hy = g.spacing(1);
    const auto nc = static_cast<Eigen::Index>(g.size());
    const auto nn = static_cast<Eigen::Index>((nx + 1) * (ny + 1));
    auto cell = [&](int i, int j) { return static_cast<Eigen::Index>(g.index(i, j)); };
    auto node = [&](int i, int j) { return static_cast<Eigen::Index>(i + (nx + 1) * j); };
    auto is_u = [&](int i) { return i > 0 && i < nx; };
    auto is_v = [&](int j) { return j > 0 && j < ny; };

    Triplets t;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (is_u(i + 1)) t.emplace_back(cell(i, j), dofs.u(i + 1, j), 1.0 / hx);
        if (is_u(i)) t.emplace_back(cell(i, j), dofs.u(i, j), -1.0 / hx);
        if (is_v(j + 1)) t.emplace_back(nc + cell(i, j), dofs.v(i, j + 1), 1.0 / hy);
        if (is_v(j)) t.emplace_back(nc + cell(i, j), dofs.v(i, j), -1.0 / hy);
      }
    const Eigen::Index r_uy = 2 * nc, r_vx = 2 * nc + nn;
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        if (is_u(i)) {  // du/dy, ghost u = -u beyond the wall
          if (j == 0) t.emplace_back(r_uy + node(i, j), dofs.u(i, 0), 2.0 / hy);
          else if (j == ny) t.emplace_back(r_uy + node(i, j), dofs.u(i, ny - 1), -2.0 / hy);
          else {
            t.emplace_back(r_uy + node(i, j), dofs.u(i, j), 1.0 / hy);
            t.emplace_back(r_uy + node(i, j), dofs.u(i, j - 1), -1.0 / hy);
          }
        }
        if (is_v(j)) {  // dv/dx
          if (i == 0) t.emplace_back(r_vx + node(i, j), dofs.v(0, j), 2.0 / hx);
          else if (i == nx) t.emplace_back(r_vx + node(i, j), dofs.v(nx - 1, j), -2.0 / hx);
          else {
            t.emplace_back(r_vx + node(i, j), dofs.v(i, j), 1.0 / hx);
            t.emplace_back(r_vx + node(i, j), dofs.v(i - 1, j), -1.0 / hx);
          }
        }
      }
    gradient.resize(2 * nc + 2 * nn, static_cast<Eigen::Index>(dofs.size()));
    gradient.setFromTriplets(t.begin(), t.end());

    Triplets p;
    for (Eigen::Index r = 0; r < 2 * nc; ++r) p.emplace_back(r, r, 1.0);
    const double s = 1.0 / std::sqrt(2.0);
    for (Eigen::Index q = 0; q < nn; ++q) {
      p.emplace_back(2 * nc + q, r_uy + q, s);
      p.emplace_back(2 * nc + q, r_vx + q, s);
    }
    SparseMatrix combine(2 * nc + nn, 2 * nc + 2 * nn);
    combine.setFromTriplets(p.begin(), p.end());
    strain = combine * gradient;

    Eigen::VectorXd wn(nn);
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        wn[node(i, j)] = ((i == 0 || i == nx) ? 0.5 : 1.0) * ((j == 0 || j == ny) ? 0.5 : 1.0);
    gradient_weight.resize(2 * nc + 2 * nn);
    gradient_weight << Eigen::VectorXd::Ones(2 * nc), wn, wn;
    strain_weight.resize(2 * nc + nn);
    strain_weight << Eigen::VectorXd::Ones(2 * nc), wn;
  }

  /// Per-row viscosity for the strain rows: cell values, node averages of
  /// the adjacent cells.
  Eigen::VectorXd strain_viscosity(const ScalarField& nu_cell) const {
    const int nx = grid.nx(), ny = grid.ny();
    const auto nc = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd out(strain.rows());
    for (Eigen::Index c = 0; c < nc; ++c) out[c] = out[nc + c] = nu_cell[static_cast<std::size_t>(c)];
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        double s = 0.0;
        int n = 0;
        for (int dj = -1; dj <= 0; ++dj)
          for (int di = -1; di <= 0; ++di) {
            const int ci = i + di, cj = j + dj;
            if (ci < 0 || cj < 0 || ci >= nx || cj >= ny) continue;
            s += nu_cell.at(ci, cj);
            ++n;
          }
        out[2 * nc + i + (nx + 1) * j] = s / n;
      }
    return out;
  }

  /// K = S^T diag(w nu) S, so that u^T K u * cell_volume = int nu |Du|^2.
  SparseMatrix viscous_matrix(const ScalarField& nu_cell) const {
    const Eigen::VectorXd wnu = strain_weight.cwiseProduct(strain_viscosity(nu_cell));
    return SparseMatrix(strain.transpose() * wnu.asDiagonal() * strain);
  }

  double weighted_square(const SparseMatrix& op, const Eigen::VectorXd& w, const VelocityField& u) const {
    const Eigen::VectorXd r = op * dofs.gather(u);
    CompensatedSum s;
    for (Eigen::Index k = 0; k < r.size(); ++k) s.add(w[k] * r[k] * r[k]);
    return s.value() * grid.cell_volume();
  }
};

// ---------------------------------------------------------------------------

/// Sum over interior faces of weight * u^2 times the cell volume.
inline double velocity_l2_squared(const VelocityField& u, const FaceField* weight = nullptr) {
  return face_quadrature(u, weight);
}

inline double max_abs(const VelocityField& u) {
  double m = 0.0;
  for (const auto& a : u.axis)
    for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct KornRatios {
  double u_l2 = 0.0;
  double strain_l2 = 0.0;  // ||Du||
  double grad_l2 = 0.0;    // ||grad u||
  double u_over_strain = 0.0;
  double grad_over_strain = 0.0;
  bool strain_le_grad = true;
};

inline KornRatios korn_ratios(const MacOperators& ops, const VelocityField& u) {
  KornRatios k;
  k.u_l2 = std::sqrt(velocity_l2_squared(u));
  k.strain_l2 = std::sqrt(ops.weighted_square(ops.strain, ops.strain_weight, u));
  k.grad_l2 = std::sqrt(ops.weighted_square(ops.gradient, ops.gradient_weight, u));
  if (k.strain_l2 > 0.0) {
    k.u_over_strain = k.u_l2 / k.strain_l2;
    k.grad_over_strain = k.grad_l2 / k.strain_l2;
  }
  k.strain_le_grad = k.strain_l2 <= k.grad_l2 * (1.0 + 1e-14);
  return k;
}

/// Conservative convection div(u (x) M) on the momentum control volumes,
/// with M a face mass flux. Fluxes through the momentum-cell faces average
/// M, so the momentum-cell divergence of M is the mean of the two adjacent
/// cell divergences.
inline VelocityField convection(const VelocityField& u, const FaceField& M) {
  const GridSpec& g = u.grid;
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.spacing(0), hy = g.spacing(1);
  VelocityField out(g);
  const auto& U = u.axis[0];
  const auto& V = u.axis[1];
  const auto& Mx = M.axis[0];
  const auto& My = M.axis[1];

  // x-momentum on x-face (i, j), 0 < i < nx.
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      auto east = [&](int c) {  // through the center of cell (c, j)
        const double m = 0.5 * (Mx[M.xface(c, j)] + Mx[M.xface(c + 1, j)]);
        return m * 0.5 * (U[u.xface(c, j)] + U[u.xface(c + 1, j)]);
      };
      auto north = [&](int jn) {  // through node (i, jn)
        if (jn == 0 || jn == ny) return 0.0;
        const double m = 0.5 * (My[M.yface(i - 1, jn)] + My[M.yface(i, jn)]);
        return m * 0.5 * (U[u.xface(i, jn - 1)] + U[u.xface(i, jn)]);
      };
      out.axis[0][out.xface(i, j)] = (east(i) - east(i - 1)) / hx + (north(j + 1) - north(j)) / hy;
    }
  // y-momentum on y-face (i, j), 0 < j < ny.
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      auto north = [&](int c) {
        const double m = 0.5 * (My[M.yface(i, c)] + My[M.yface(i, c + 1)]);
        return m * 0.5 * (V[u.yface(i, c)] + V[u.yface(i, c + 1)]);
      };
      auto east = [&](int in) {
        if (in == 0 || in == nx) return 0.0;
        const double m = 0.5 * (Mx[M.xface(in, j - 1)] + Mx[M.xface(in, j)]);
        return m * 0.5 * (V[u.yface(in - 1, j)] + V[u.yface(in, j)]);
      };
      out.axis[1][out.yface(i, j)] = (north(j) - north(j - 1)) / hy + (east(i + 1) - east(i)) / hx;
    }
  return out;
}

/// Velocity of a node stream function psi ((nx+1) x (ny+1), zero on the
/// boundary): u = d psi / dy, v = -d psi / dx. Discretely divergence free.
inline VelocityField velocity_from_stream(const GridSpec& g, const std::vector<double>& psi) {
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.spacing(0), hy = g.spacing(1);
  auto P = [&](int i, int j) { return psi[static_cast<std::size_t>(i + (nx + 1) * j)]; };
  VelocityField u(g);
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) u.axis[0][u.xface(i, j)] = (P(i, j + 1) - P(i, j)) / hy;
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) u.axis[1][u.yface(i, j)] = -(P(i + 1, j) - P(i, j)) / hx;
  return u;
}

}  // namespace chsep
