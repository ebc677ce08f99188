#pragma once

// Flory-Huggins potential with its convex/concave splitting, mobility laws and
// the density/viscosity laws of the two-phase flow model.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "chsep/error.hpp"

namespace chsep {

struct PotentialParams {
  double theta = 1.0;
  double theta0 = 4.0;
  double clamp_eps = 1e-12;

  void validate() const {
    if (!(theta > 0.0)) fail(ErrorKind::ValidationError, "theta must be positive: theta in (0, theta0) required");
    if (!(theta < theta0))
      fail(ErrorKind::ValidationError, "theta must be < theta0: the double-well condition requires theta in (0, theta0)");
    if (!(clamp_eps > 0.0 && clamp_eps <= 1e-9))
      fail(ErrorKind::ValidationError, "clamp_eps must lie in (0, 1e-9]");
  }

  /// Zero of f' on (0, 1): the pure-phase value of the double well.
  double binodal() const {
    double lo = 0.0, hi = 1.0 - clamp_eps;
    if (theta >= theta0) return 0.0;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (theta * std::atanh(mid) - theta0 * mid < 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }
};

inline void check_potential_domain(const PotentialParams& p, double s) {
  if (!(std::abs(s) <= 1.0 - p.clamp_eps))
    fail(ErrorKind::OutOfDomain, "potential evaluated outside (-1, 1): s = " + std::to_string(s));
}

/// Convex part F(s) = theta/2 ((1+s)ln(1+s) + (1-s)ln(1-s)) and its first two
/// derivatives (order 0, 1, 2).
inline double convex_potential(const PotentialParams& p, double s, int order) {
  check_potential_domain(p, s);
  switch (order) {
    case 0: return 0.5 * p.theta * ((1.0 + s) * std::log1p(s) + (1.0 - s) * std::log1p(-s));
    case 1: return 0.5 * p.theta * (std::log1p(s) - std::log1p(-s));
    case 2: return p.theta / ((1.0 - s) * (1.0 + s));
    default: fail(ErrorKind::InvalidParams, "potential order must be 0, 1 or 2");
  }
}

/// f(s) = F(s) - theta0/2 s^2 and derivatives.
inline double potential_eval(const PotentialParams& p, double s, int order) {
  const double convex = convex_potential(p, s, order);
  switch (order) {
    case 0: return convex - 0.5 * p.theta0 * s * s;
    case 1: return convex - p.theta0 * s;
    default: return convex - p.theta0;
  }
}

/// Limit of F at the pure phases s -> +-1.
inline double convex_potential_at_pure_phase(const PotentialParams& p) { return p.theta * std::log(2.0); }

// ---------------------------------------------------------------------------

class MobilitySpec {
 public:
  enum class Kind { Constant, QuadraticBump, Table };

  static MobilitySpec constant(double c) {
    MobilitySpec m;
    m.kind_ = Kind::Constant;
    m.m_star_ = c;
    m.m_sup_ = c;
    m.validate();
    return m;
  }

  /// m(s) = m_star + (m_sup - m_star)(1 - s^2).
  static MobilitySpec quadratic_bump(double m_star, double m_sup) {
    MobilitySpec m;
    m.kind_ = Kind::QuadraticBump;
    m.m_star_ = m_star;
    m.m_sup_ = m_sup;
    m.validate();
    return m;
  }

  /// Piecewise-linear interpolation through (s, m) nodes that must cover
  /// [-1, 1]. Bounds default to the table extremes.
  static MobilitySpec table(std::vector<std::pair<double, double>> nodes) {
    MobilitySpec m;
    m.kind_ = Kind::Table;
    std::sort(nodes.begin(), nodes.end());
    m.nodes_ = std::move(nodes);
    if (m.nodes_.size() < 2) fail(ErrorKind::InvalidSpec, "mobility table needs at least two nodes");
    m.m_star_ = m.m_sup_ = m.nodes_.front().second;
    for (const auto& [s, v] : m.nodes_) {
      m.m_star_ = std::min(m.m_star_, v);
      m.m_sup_ = std::max(m.m_sup_, v);
    }
    m.validate();
    return m;
  }

  Kind kind() const { return kind_; }
  double m_star() const { return m_star_; }
  double m_sup() const { return m_sup_; }
  const std::vector<std::pair<double, double>>& nodes() const { return nodes_; }

  std::string kind_name() const {
    switch (kind_) {
      case Kind::Constant: return "constant";
      case Kind::QuadraticBump: return "bump";
      case Kind::Table: return "table";
    }
    return "unknown";
  }

  double operator()(double s) const {
    if (!(std::abs(s) <= 1.0)) fail(ErrorKind::OutOfDomain, "mobility evaluated outside [-1, 1]");
    return raw(s);
  }

 private:
  double raw(double s) const {
    switch (kind_) {
      case Kind::Constant: return m_star_;
      case Kind::QuadraticBump: return m_star_ + (m_sup_ - m_star_) * (1.0 - s * s);
      case Kind::Table: {
        auto hi = std::lower_bound(nodes_.begin(), nodes_.end(), s,
                                   [](const auto& n, double x) { return n.first < x; });
        if (hi == nodes_.begin()) return hi->second;
        if (hi == nodes_.end()) return nodes_.back().second;
        auto lo = std::prev(hi);
        const double w = (s - lo->first) / (hi->first - lo->first);
        return (1.0 - w) * lo->second + w * hi->second;
      }
    }
    return 0.0;
  }

  void validate() const {
    if (!(m_star_ > 0.0)) fail(ErrorKind::InvalidSpec, "mobility lower bound violated: 0 < m_star <= m(s) required");
    if (!(m_sup_ >= m_star_) || !std::isfinite(m_sup_))
      fail(ErrorKind::InvalidSpec, "mobility bounds violated: m_star <= m_sup required");
    if (kind_ == Kind::Table && (nodes_.front().first > -1.0 || nodes_.back().first < 1.0))
      fail(ErrorKind::InvalidSpec, "mobility table must cover [-1, 1]");
    constexpr int samples = 10000;
    for (int k = 0; k <= samples; ++k) {
      const double s = -1.0 + 2.0 * k / samples;
      const double v = raw(s);
      if (!(v >= m_star_ && v <= m_sup_))
        fail(ErrorKind::InvalidSpec, "mobility bounds violated: m(s) leaves [m_star, m_sup]");
    }
  }

  Kind kind_ = Kind::Constant;
  double m_star_ = 1.0;
  double m_sup_ = 1.0;
  std::vector<std::pair<double, double>> nodes_;
};

inline double mobility_eval(const MobilitySpec& spec, double s) { return spec(s); }

// ---------------------------------------------------------------------------

struct FluidParams {
  double rho1 = 1.0;  // density of the phase phi = +1
  double rho2 = 1.0;  // density of the phase phi = -1
  double nu_star = 1.0;  // viscosity at phi = -1 (lower bound)
  double nu_sup = 1.0;   // viscosity at phi = +1 (upper bound)

  void validate() const {
    if (!(rho1 > 0.0 && rho2 > 0.0)) fail(ErrorKind::ValidationError, "density law violated: rho1 > 0 and rho2 > 0 required");
    if (!(nu_star > 0.0)) fail(ErrorKind::ValidationError, "viscosity lower bound violated: 0 < nu_star required");
    if (!(nu_sup >= nu_star)) fail(ErrorKind::ValidationError, "viscosity bounds violated: nu_star <= nu_sup required");
  }

  double rho_star() const { return std::min(rho1, rho2); }
  double rho_sup() const { return std::max(rho1, rho2); }

  /// Affine law (1+s)/2 rho1 + (1-s)/2 rho2, valid for every real s.
  double rho(double s) const { return 0.5 * (1.0 + s) * rho1 + 0.5 * (1.0 - s) * rho2; }

  double nu(double s) const {
    const double v = 0.5 * (1.0 + s) * nu_sup + 0.5 * (1.0 - s) * nu_star;
    return std::clamp(v, nu_star, nu_sup);
  }
};

struct FluidValues {
  double rho = 0.0;
  double nu = 0.0;
};

inline FluidValues fluid_eval(const FluidParams& fp, double s) { return {fp.rho(s), fp.nu(s)}; }

}  // namespace chsep
