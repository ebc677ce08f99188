#pragma once

// Uniform cell-centered grids on axis-aligned boxes in one or two dimensions,
// with homogeneous Neumann finite-difference operators.
//
// Storage is x-fastest: cell (i, j) lives at i + nx * j. Face fields store the
// x-normal faces as (nx + 1) * ny values, index i + (nx + 1) * j with face i
// sitting between cells i - 1 and i; y-normal faces likewise as nx * (ny + 1).
// Boundary faces always carry zero flux.

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "chsep/error.hpp"

namespace chsep {

struct GridSpec {
  int dim = 1;
  std::array<int, 2> cells{4, 1};
  std::array<double, 2> length{1.0, 1.0};

  static GridSpec line(int n, double len) {
    GridSpec g;
    g.dim = 1;
    g.cells = {n, 1};
    g.length = {len, 1.0};
    g.validate();
    return g;
  }

  static GridSpec box(int nx, int ny, double lx, double ly) {
    GridSpec g;
    g.dim = 2;
    g.cells = {nx, ny};
    g.length = {lx, ly};
    g.validate();
    return g;
  }

  void validate() const {
    if (dim != 1 && dim != 2) fail(ErrorKind::InvalidSpec, "grid dim must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
      if (cells[a] < 4) fail(ErrorKind::InvalidSpec, "grid needs at least 4 cells per axis");
      if (!(length[a] > 0.0) || !std::isfinite(length[a]))
        fail(ErrorKind::InvalidSpec, "grid length must be positive");
    }
    if (dim == 1 && cells[1] != 1) fail(ErrorKind::InvalidSpec, "1D grid must have cells[1] == 1");
  }

  int nx() const { return cells[0]; }
  int ny() const { return dim == 2 ? cells[1] : 1; }
  double spacing(int axis) const { return length[axis] / cells[axis]; }
  std::size_t size() const { return static_cast<std::size_t>(nx()) * ny(); }
  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx()) * j;
  }

  double cell_volume() const {
    double v = spacing(0);
    if (dim == 2) v *= spacing(1);
    return v;
  }
  double domain_volume() const { return dim == 2 ? length[0] * length[1] : length[0]; }

  /// Number of faces normal to `axis`, boundary faces included.
  std::size_t face_count(int axis) const {
    if (axis == 0) return static_cast<std::size_t>(nx() + 1) * ny();
    return static_cast<std::size_t>(nx()) * (ny() + 1);
  }

  /// Cell-center coordinate along `axis` for index k.
  double center(int axis, int k) const { return (k + 0.5) * spacing(axis); }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.dim == b.dim && a.cells == b.cells && a.length == b.length;
  }
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) fail(ErrorKind::GridMismatch, "fields live on different grids");
}

struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  ScalarField(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      fail(ErrorKind::InvalidSpec, "field value count does not match grid");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }
  double& at(int i, int j = 0) { return values[grid.index(i, j)]; }
  double at(int i, int j = 0) const { return values[grid.index(i, j)]; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid, o.grid);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid, o.grid);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }
  ScalarField& operator+=(double c) {
    for (double& v : values) v += c;
    return *this;
  }
  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
};

struct FaceField {
  GridSpec grid;
  std::array<std::vector<double>, 2> axis;

  FaceField() = default;
  explicit FaceField(const GridSpec& g) : grid(g) {
    axis[0].assign(g.face_count(0), 0.0);
    if (g.dim == 2) axis[1].assign(g.face_count(1), 0.0);
  }

  std::size_t xface(int i, int j) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.nx() + 1) * j;
  }
  std::size_t yface(int i, int j) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.nx()) * j;
  }
};

// ---------------------------------------------------------------------------
// Reductions

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sum_weighted(const ScalarField& u) {
  CompensatedSum s;
  for (double v : u.values) s.add(v);
  return s.value() * u.grid.cell_volume();
}

inline double mean(const ScalarField& u) { return sum_weighted(u) / u.grid.domain_volume(); }

inline double inner(const ScalarField& u, const ScalarField& v) {
  require_same_grid(u.grid, v.grid);
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
  return s * u.grid.cell_volume();
}

inline double l2_norm(const ScalarField& u) { return std::sqrt(inner(u, u)); }

inline double max_abs(const ScalarField& u) {
  double m = 0.0;
  for (double v : u.values) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs(const std::vector<double>& u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

inline double l1_norm(const ScalarField& u) {
  double s = 0.0;
  for (double v : u.values) s += std::abs(v);
  return s * u.grid.cell_volume();
}

inline ScalarField minus_mean(ScalarField u) {
  u += -mean(u);
  return u;
}

// ---------------------------------------------------------------------------
// Faces

/// Difference quotient across every interior face; boundary faces are zero
/// (homogeneous Neumann).
inline FaceField faces_from_cells(const ScalarField& u) {
  const GridSpec& g = u.grid;
  FaceField f(g);
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.spacing(0);
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) f.axis[0][f.xface(i, j)] = (u.at(i, j) - u.at(i - 1, j)) / hx;
  if (g.dim == 2) {
    const double hy = g.spacing(1);
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) f.axis[1][f.yface(i, j)] = (u.at(i, j) - u.at(i, j - 1)) / hy;
  }
  return f;
}

/// Arithmetic mean of the two adjacent cells on interior faces; boundary faces
/// copy the single adjacent cell.
inline FaceField face_mean(const ScalarField& m) {
  const GridSpec& g = m.grid;
  FaceField f(g);
  const int nx = g.nx(), ny = g.ny();
  for (int j = 0; j < ny; ++j) {
    f.axis[0][f.xface(0, j)] = m.at(0, j);
    f.axis[0][f.xface(nx, j)] = m.at(nx - 1, j);
    for (int i = 1; i < nx; ++i) f.axis[0][f.xface(i, j)] = 0.5 * (m.at(i - 1, j) + m.at(i, j));
  }
  if (g.dim == 2) {
    for (int i = 0; i < nx; ++i) {
      f.axis[1][f.yface(i, 0)] = m.at(i, 0);
      f.axis[1][f.yface(i, ny)] = m.at(i, ny - 1);
      for (int j = 1; j < ny; ++j) f.axis[1][f.yface(i, j)] = 0.5 * (m.at(i, j - 1) + m.at(i, j));
    }
  }
  return f;
}

inline FaceField multiply(const FaceField& a, const FaceField& b) {
  FaceField out(a.grid);
  for (int ax = 0; ax < a.grid.dim; ++ax)
    for (std::size_t k = 0; k < out.axis[ax].size(); ++k) out.axis[ax][k] = a.axis[ax][k] * b.axis[ax][k];
  return out;
}

/// Cell divergence of a face flux; uses the boundary-face entries as given.
inline ScalarField divergence(const FaceField& f) {
  const GridSpec& g = f.grid;
  ScalarField out(g);
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.spacing(0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      out.at(i, j) = (f.axis[0][f.xface(i + 1, j)] - f.axis[0][f.xface(i, j)]) / hx;
  if (g.dim == 2) {
    const double hy = g.spacing(1);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        out.at(i, j) += (f.axis[1][f.yface(i, j + 1)] - f.axis[1][f.yface(i, j)]) / hy;
  }
  return out;
}

/// Sum over interior faces of weight * value^2, times the cell volume. With
/// weight == nullptr this is the squared H1 seminorm quadrature of a gradient.
inline double face_quadrature(const FaceField& f, const FaceField* weight = nullptr) {
  const GridSpec& g = f.grid;
  const int nx = g.nx(), ny = g.ny();
  CompensatedSum s;
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const std::size_t k = f.xface(i, j);
      const double w = weight ? weight->axis[0][k] : 1.0;
      s.add(w * f.axis[0][k] * f.axis[0][k]);
    }
  if (g.dim == 2) {
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = f.yface(i, j);
        const double w = weight ? weight->axis[1][k] : 1.0;
        s.add(w * f.axis[1][k] * f.axis[1][k]);
      }
  }
  return s.value() * g.cell_volume();
}

// ---------------------------------------------------------------------------
// Operators

/// Five-point (three-point in 1D) Laplacian with mirror ghost cells.
inline ScalarField neumann_laplacian(const ScalarField& u) {
  const GridSpec& g = u.grid;
  ScalarField out(g);
  const int nx = g.nx(), ny = g.ny();
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double c = u.at(i, j);
      double s = 0.0;
      if (i > 0) s += u.at(i - 1, j) - c;
      if (i < nx - 1) s += u.at(i + 1, j) - c;
      out.at(i, j) = s * ihx2;
    }
  if (g.dim == 2) {
    const double ihy2 = 1.0 / (g.spacing(1) * g.spacing(1));
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const double c = u.at(i, j);
        double s = 0.0;
        if (j > 0) s += u.at(i, j - 1) - c;
        if (j < ny - 1) s += u.at(i, j + 1) - c;
        out.at(i, j) += s * ihy2;
      }
  }
  return out;
}

/// Mobility on faces by arithmetic mean; throws DegenerateMobility on a
/// nonpositive interior face value.
inline FaceField face_mobility(const ScalarField& m_cell) {
  FaceField mf = face_mean(m_cell);
  for (int ax = 0; ax < m_cell.grid.dim; ++ax)
    for (double v : mf.axis[ax])
      if (!(v > 0.0)) fail(ErrorKind::DegenerateMobility, "face mobility must be positive");
  return mf;
}

inline ScalarField div_m_grad(const FaceField& m_face, const ScalarField& u) {
  require_same_grid(m_face.grid, u.grid);
  return divergence(multiply(m_face, faces_from_cells(u)));
}

/// Flux-form div(m grad u) with face mobility from the arithmetic mean.
inline ScalarField div_m_grad(const ScalarField& m_cell, const ScalarField& u) {
  require_same_grid(m_cell.grid, u.grid);
  return div_m_grad(face_mobility(m_cell), u);
}

}  // namespace chsep
