#pragma once

// Trajectory measurements: near-pure-phase measure, good/bad times,
// De Giorgi level sets with the geometric-recursion lemma, Lojasiewicz
// exponent fits and the tail-integrability criterion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chsep/ch_core.hpp"
#include "chsep/error.hpp"
#include "chsep/grid.hpp"

namespace chsep {

struct DiagnosticsSeries {
  std::vector<double> times;
  std::vector<double> E;
  std::vector<double> grad_mu_l2;
  std::vector<double> max_abs_phi;
  std::vector<double> mass_mean;
  std::vector<double> ctr_ratio;  // may be empty
  std::vector<double> kinetic;    // may be empty
  std::vector<double> E_tot;      // may be empty

  std::size_t size() const { return times.size(); }

  void validate() const {
    const std::size_t n = times.size();
    auto check_len = [n](const std::vector<double>& v, bool optional, const char* name) {
      if ((optional && v.empty()) || v.size() == n) return;
      fail(ErrorKind::InvalidParams, std::string("series column has wrong length: ") + name);
    };
    check_len(E, false, "E");
    check_len(grad_mu_l2, false, "grad_mu_l2");
    check_len(max_abs_phi, false, "max_abs_phi");
    check_len(mass_mean, false, "mass_mean");
    check_len(ctr_ratio, true, "ctr_ratio");
    check_len(kinetic, true, "kinetic");
    check_len(E_tot, true, "E_tot");
    for (std::size_t i = 1; i < n; ++i)
      if (!(times[i] > times[i - 1])) fail(ErrorKind::InvalidParams, "series times must be strictly increasing");
    for (double g : grad_mu_l2)
      if (!(g >= 0.0)) fail(ErrorKind::InvalidParams, "grad_mu_l2 must be nonnegative");
  }

  static DiagnosticsSeries from_records(const std::vector<DiagnosticsRecord>& recs) {
    DiagnosticsSeries s;
    for (const auto& r : recs) {
      s.times.push_back(r.t);
      s.E.push_back(r.E);
      s.grad_mu_l2.push_back(r.grad_mu_l2);
      s.max_abs_phi.push_back(r.max_abs_phi);
      s.mass_mean.push_back(r.mass_mean);
      s.ctr_ratio.push_back(r.ctr_ratio);
    }
    s.validate();
    return s;
  }
};

// ---------------------------------------------------------------------------

/// |{ |phi| >= 1 - delta1 }| / |Omega| by cell counting.
inline double a_delta_fraction(const ScalarField& phi, double delta1) {
  if (!(delta1 > 0.0 && delta1 < 1.0)) fail(ErrorKind::InvalidParams, "delta1 must lie in (0, 1)");
  std::size_t count = 0;
  for (double v : phi.values)
    if (std::abs(v) >= 1.0 - delta1) ++count;
  return static_cast<double>(count) / static_cast<double>(phi.size());
}

struct GoodTimes {
  double M = 0.0;
  double T = 0.0;
  std::vector<std::size_t> good_idx;
  std::vector<std::size_t> bad_idx;
  double sup_max_abs_phi = std::numeric_limits<double>::quiet_NaN();  // over good times

  /// 1 - sup over good times of max|phi|; NaN without good times.
  double measured_delta() const { return 1.0 - sup_max_abs_phi; }
};

inline GoodTimes classify_good_times(const DiagnosticsSeries& s, double M, double T) {
  if (!(M > 0.0)) fail(ErrorKind::InvalidParams, "M must be positive");
  GoodTimes gt;
  gt.M = M;
  gt.T = T;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.times[i] < T) continue;
    if (s.grad_mu_l2[i] <= M) gt.good_idx.push_back(i);
    else gt.bad_idx.push_back(i);
  }
  if (gt.good_idx.empty() && gt.bad_idx.empty()) fail(ErrorKind::EmptyWindow, "no samples with t >= T");
  if (!gt.good_idx.empty()) {
    gt.sup_max_abs_phi = 0.0;
    for (std::size_t i : gt.good_idx) gt.sup_max_abs_phi = std::max(gt.sup_max_abs_phi, s.max_abs_phi[i]);
  }
  return gt;
}

inline double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::InsufficientData, "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Window start and dissipation cap used when the caller gives none:
/// T = t_final / 2 and M = 2 x median of grad_mu_l2 over t >= T.
struct GoodTimeDefaults {
  double M = 0.0;
  double T = 0.0;
};

inline GoodTimeDefaults default_good_time_params(const DiagnosticsSeries& s) {
  if (s.size() == 0) fail(ErrorKind::EmptyWindow, "empty series");
  GoodTimeDefaults d;
  d.T = 0.5 * s.times.back();
  std::vector<double> tail;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.times[i] >= d.T) tail.push_back(s.grad_mu_l2[i]);
  d.M = 2.0 * median(tail);
  if (!(d.M > 0.0)) d.M = std::numeric_limits<double>::min();
  return d;
}

// ---------------------------------------------------------------------------
// De Giorgi level sets

struct LevelSetSequence {
  double delta = 0.0;
  std::vector<double> k_n;       // 1 - delta - delta / 2^n
  std::vector<double> y_n;       // |{phi >= k_n}|
  std::vector<double> trunc_l2;  // ||(phi - k_n)^+||_2

  /// Smallest n with y_n == 0, or -1.
  int first_zero() const {
    for (std::size_t n = 0; n < y_n.size(); ++n)
      if (y_n[n] == 0.0) return static_cast<int>(n);
    return -1;
  }
};

inline double degiorgi_level(double delta, int n) { return 1.0 - delta - delta / std::ldexp(1.0, n); }

/// Levels k_0..k_{n_max}. The lower-side sequence is obtained from -phi.
inline LevelSetSequence level_set_sequence(const ScalarField& phi, double delta, int n_max) {
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::InvalidParams, "delta must lie in (0, 1)");
  if (n_max < 1) fail(ErrorKind::InvalidParams, "n_max must be >= 1");
  LevelSetSequence seq;
  seq.delta = delta;
  const double vol = phi.grid.cell_volume();
  for (int n = 0; n <= n_max; ++n) {
    const double k = degiorgi_level(delta, n);
    std::size_t count = 0;
    double sq = 0.0;
    for (double v : phi.values) {
      if (v >= k) ++count;
      if (v > k) sq += (v - k) * (v - k);
    }
    seq.k_n.push_back(k);
    seq.y_n.push_back(static_cast<double>(count) * vol);
    seq.trunc_l2.push_back(std::sqrt(sq * vol));
  }
  return seq;
}

struct GeometricLemma {
  double theta = 0.0;  // C^{-1/eps} b^{-1/eps^2}
  bool holds = false;  // y0 <= theta
  std::vector<double> bound;  // theta b^{-n/eps}
};

/// Threshold and decay envelope for y_{n+1} <= C b^n y_n^{1+eps}.
inline GeometricLemma geometric_lemma(double y0, double C, double b, double eps, int n_max = 30) {
  if (!(C > 0.0) || !(b > 1.0) || !(eps > 0.0) || !(y0 >= 0.0) || n_max < 0)
    fail(ErrorKind::InvalidParams, "geometric lemma needs C > 0, b > 1, eps > 0, y0 >= 0");
  GeometricLemma g;
  g.theta = std::exp(-std::log(C) / eps - std::log(b) / (eps * eps));
  g.holds = y0 <= g.theta;
  for (int n = 0; n <= n_max; ++n) g.bound.push_back(g.theta * std::pow(b, -n / eps));
  return g;
}

/// Recursion parameters of the level-set estimate: b = 2^3, eps = 9/20.
inline constexpr double kDeGiorgiB = 8.0;
inline constexpr double kDeGiorgiEps = 9.0 / 20.0;

struct DeGiorgiSide {
  LevelSetSequence seq;
  bool separated = false;  // y_0 == 0, no fit attempted
  int first_zero = -1;
  std::optional<double> C_hat;      // max_n y_{n+1} / (8^n y_n^{29/20}) over y_n > 0
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool below_threshold = false;
};

/// Smallest C with y_{n+1} <= C 8^n y_n^{1+eps} over the observed n (y_n > 0).
inline std::optional<double> fit_degiorgi_constant(const std::vector<double>& y) {
  std::optional<double> c;
  for (std::size_t n = 0; n + 1 < y.size(); ++n) {
    if (!(y[n] > 0.0)) break;
    const double r = y[n + 1] / (std::pow(kDeGiorgiB, static_cast<double>(n)) * std::pow(y[n], 1.0 + kDeGiorgiEps));
    c = c ? std::max(*c, r) : r;
  }
  return c;
}

inline DeGiorgiSide degiorgi_side(const ScalarField& phi, double delta, int n_max) {
  DeGiorgiSide s;
  s.seq = level_set_sequence(phi, delta, n_max);
  s.first_zero = s.seq.first_zero();
  if (s.seq.y_n[0] == 0.0) {
    s.separated = true;
    s.below_threshold = true;
    return s;
  }
  s.C_hat = fit_degiorgi_constant(s.seq.y_n);
  if (s.C_hat && *s.C_hat > 0.0) {
    s.threshold = geometric_lemma(s.seq.y_n[0], *s.C_hat, kDeGiorgiB, kDeGiorgiEps, 0).theta;
  } else {
    s.threshold = std::numeric_limits<double>::infinity();  // y_1 == 0 already
  }
  s.below_threshold = s.seq.y_n[0] <= s.threshold;
  return s;
}

struct DeGiorgiSnapshotReport {
  double time = 0.0;
  double grad_mu_l2 = 0.0;
  DeGiorgiSide upper;  // (phi - k_n)^+
  DeGiorgiSide lower;  // (-phi - k_n)^+

  int first_zero() const {
    if (upper.first_zero < 0 || lower.first_zero < 0) return -1;
    return std::max(upper.first_zero, lower.first_zero);
  }
};

struct DeGiorgiReport {
  double delta = 0.0;
  double M = 0.0;
  double T = 0.0;
  int n_max = 20;
  std::vector<DeGiorgiSnapshotReport> snapshots;  // audited good-time snapshots
  std::size_t skipped = 0;                        // snapshots outside the good times

  /// Every audited snapshot reaches y_n = 0 on both sides within n_max.
  bool all_reach_zero() const {
    if (snapshots.empty()) return false;
    for (const auto& s : snapshots)
      if (s.first_zero() < 0) return false;
    return true;
  }
  int max_first_zero() const {
    int m = -1;
    for (const auto& s : snapshots) m = std::max(m, s.first_zero());
    return m;
  }
};

struct TimedField {
  double time = 0.0;
  ScalarField phi;
};

/// Audits the level-set recursion on snapshots taken at good times; the good
/// time test uses ||grad mu|| recomputed from each snapshot.
inline DeGiorgiReport degiorgi_audit(const std::vector<TimedField>& snaps, const PotentialParams& p, double delta,
                                     double M, double T, int n_max = 20) {
  DeGiorgiReport rep;
  rep.delta = delta;
  rep.M = M;
  rep.T = T;
  rep.n_max = n_max;
  for (const auto& s : snaps) {
    const double g = std::sqrt(face_quadrature(faces_from_cells(chemical_potential(s.phi, p))));
    if (s.time < T || g > M) {
      ++rep.skipped;
      continue;
    }
    DeGiorgiSnapshotReport r;
    r.time = s.time;
    r.grad_mu_l2 = g;
    r.upper = degiorgi_side(s.phi, delta, n_max);
    ScalarField neg = s.phi;
    neg *= -1.0;
    r.lower = degiorgi_side(neg, delta, n_max);
    rep.snapshots.push_back(std::move(r));
  }
  if (rep.snapshots.empty()) fail(ErrorKind::NoGoodTimes, "no snapshot lies in the good-time set");
  return rep;
}

// ---------------------------------------------------------------------------
// Lojasiewicz exponent

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::InsufficientData, "regression abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

struct LojasiewiczFit {
  double theta_hat = 0.0;  // 1 - 1/slope
  double C_hat = 0.0;      // (E - E_inf)^{1 - theta} ~ C ||grad mu||
  double r2 = 0.0;
  double slope = 0.0;
  std::size_t used = 0;
  std::size_t dropped_nonpositive_gap = 0;
  bool in_open_range = false;   // 0 < theta < 1/2
  bool at_boundary = false;     // within 0.01 of 0 or 1/2, or outside
  bool in_admitted_range = false;  // 0 < theta <= 1/2
};

inline LojasiewiczFit lojasiewicz_fit(const DiagnosticsSeries& s, const GoodTimes& gt, double E_inf,
                                      double gap_tol = 1e-14, std::size_t min_samples = 5) {
  std::vector<double> x, y;
  LojasiewiczFit fit;
  for (std::size_t i : gt.good_idx) {
    const double gap = s.E[i] - E_inf;
    if (!(gap > gap_tol)) {
      ++fit.dropped_nonpositive_gap;
      continue;
    }
    if (!(s.grad_mu_l2[i] > 0.0)) continue;
    x.push_back(std::log(s.grad_mu_l2[i]));
    y.push_back(std::log(gap));
  }
  fit.used = x.size();
  if (x.size() < min_samples)
    fail(ErrorKind::InsufficientData,
         "Lojasiewicz fit needs " + std::to_string(min_samples) + " good samples with E > E_inf, have " +
             std::to_string(x.size()) + " (" + std::to_string(fit.dropped_nonpositive_gap) +
             " dropped for nonpositive gap)");
  const LinearFit lf = least_squares(x, y);
  fit.slope = lf.slope;
  fit.r2 = lf.r2;
  fit.theta_hat = 1.0 - 1.0 / lf.slope;
  fit.C_hat = std::exp(lf.intercept / lf.slope);
  fit.in_open_range = fit.theta_hat > 0.0 && fit.theta_hat < 0.5;
  fit.in_admitted_range = fit.theta_hat > 0.0 && fit.theta_hat <= 0.5;
  fit.at_boundary = fit.theta_hat < 0.01 || fit.theta_hat > 0.49;
  return fit;
}

// ---------------------------------------------------------------------------
// Tail integrability

struct IntegrabilityResult {
  double holds_fraction = 0.0;
  double l1_tail = 0.0;        // trapezoid of Z on [t_star, t_end]
  double required_zeta = 0.0;  // max over samples of (tail Z^2)^alpha / Z^2
  std::size_t samples = 0;
};

/// Z = grad_mu_l2 on t >= t_star. The inequality (int_s^T Z^2)^alpha <= zeta
/// Z(s)^2 is checked at every sample s, tail integrals by trapezoid and cut
/// at the last sample. `rel_tol` absorbs the trapezoid's overestimate.
inline IntegrabilityResult integrability_check(const DiagnosticsSeries& s, double t_star, double alpha, double zeta,
                                               double rel_tol = 1e-6) {
  if (!(alpha > 1.0 && alpha < 2.0)) fail(ErrorKind::InvalidParams, "alpha must lie in (1, 2)");
  if (!(zeta > 0.0)) fail(ErrorKind::InvalidParams, "zeta must be positive");
  std::vector<double> t, z;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.times[i] >= t_star) {
      t.push_back(s.times[i]);
      z.push_back(s.grad_mu_l2[i]);
    }
  if (t.empty()) fail(ErrorKind::EmptyWindow, "no samples with t >= t_star");
  const std::size_t n = t.size();
  std::vector<double> tail(n, 0.0);
  for (std::size_t i = n - 1; i-- > 0;)
    tail[i] = tail[i + 1] + 0.5 * (t[i + 1] - t[i]) * (z[i] * z[i] + z[i + 1] * z[i + 1]);

  IntegrabilityResult r;
  r.samples = n;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lhs = std::pow(tail[i], alpha);
    const double rhs = zeta * z[i] * z[i];
    if (lhs <= rhs * (1.0 + rel_tol)) ++ok;
    if (z[i] > 0.0) r.required_zeta = std::max(r.required_zeta, lhs / (z[i] * z[i]));
    else if (lhs > 0.0) r.required_zeta = std::numeric_limits<double>::infinity();
    if (i + 1 < n) r.l1_tail += 0.5 * (t[i + 1] - t[i]) * (z[i] + z[i + 1]);
  }
  r.holds_fraction = static_cast<double>(ok) / static_cast<double>(n);
  return r;
}

}  // namespace chsep
