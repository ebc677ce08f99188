#pragma once

// Cahn-Hilliard flow with non-degenerate mobility and the Flory-Huggins
// potential. One step of the convex-splitting scheme
//
//   (phi' - phi) / dt + s = div(m(phi) grad mu'),
//   mu' = -Lap phi' + F'(phi') - theta0 phi,
//
// is solved for phi' by damped Newton (s is an optional explicit source, used
// by the coupled flow solver for advection). The mobility is lagged, the
// concave part explicit and the convex part implicit, which makes every
// accepted step dissipate the discrete energy.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chsep/error.hpp"
#include "chsep/grid.hpp"
#include "chsep/linear_solvers.hpp"
#include "chsep/physics.hpp"
#include "chsep/snapshot.hpp"

namespace chsep {

struct NewtonSettings {
  double tol = 1e-10;       // max-norm of dt * residual
  int max_iter = 50;
  double backtrack = 0.5;
  double guard_gap = 1e-9;  // iterates stay in (-1 + gap, 1 - gap)
};

struct InitialCondition {
  enum class Kind { Constant, Perturbation, Stratified, File };
  Kind kind = Kind::Constant;
  double mean = 0.0;
  double amplitude = 0.0;
  std::string file;
};

struct ChRunConfig {
  GridSpec grid;
  PotentialParams potential;
  MobilitySpec mobility = MobilitySpec::constant(1.0);
  double dt = 1e-3;
  double t_end = 1.0;
  int output_every = 1;
  NewtonSettings newton;
  InitialCondition initial;
  std::uint64_t seed = 1;
  bool stop_at_equilibrium = true;
  double eq_grad_tol = 1e-8;
  double eq_rate_tol = 1e-8;
  int eq_window = 5;

  void validate() const {
    grid.validate();
    potential.validate();
    if (!(dt > 0.0)) fail(ErrorKind::ValidationError, "dt must be positive");
    if (!(t_end >= dt)) fail(ErrorKind::ValidationError, "t_end must be >= dt");
    if (output_every < 1) fail(ErrorKind::ValidationError, "output_every must be >= 1");
    if (!(newton.tol > 0.0) || newton.max_iter < 1 || !(newton.backtrack > 0.0 && newton.backtrack < 1.0) ||
        !(newton.guard_gap > 0.0 && newton.guard_gap < 1e-3))
      fail(ErrorKind::ValidationError, "invalid Newton settings");
    if (initial.kind != InitialCondition::Kind::File) {
      if (!(std::abs(initial.mean) + initial.amplitude <= 1.0 - 1e-3) || initial.amplitude < 0.0)
        fail(ErrorKind::ValidationError,
             "initial datum needs |k| + amplitude <= 1 - 1e-3 so that |mean(phi0)| < 1");
    }
  }
};

struct ChState {
  ScalarField phi;
  ScalarField mu;  // -Lap phi + f'(phi), recomputed from phi
  double time = 0.0;
  std::size_t step = 0;
};

struct StepStats {
  int newton_iters = 0;
  double residual = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double energy_drop = 0.0;
  double dissipation = 0.0;  // dt * sum_faces m |grad mu'|^2 * vol, scheme mu'
  double rate = 0.0;         // ||phi' - phi||_2 / dt
};

// ---------------------------------------------------------------------------

/// Midpoint bulk quadrature plus half the face quadrature of |grad phi|^2,
/// summed with compensation so that late-time energy gaps stay resolvable.
inline double energy(const ScalarField& phi, const PotentialParams& p) {
  const GridSpec& g = phi.grid;
  const FaceField d = faces_from_cells(phi);
  CompensatedSum s;
  for (double v : phi.values) s.add(potential_eval(p, v, 0));
  for (int a = 0; a < g.dim; ++a)
    for (double v : d.axis[a]) s.add(0.5 * v * v);
  return s.value() * g.cell_volume();
}

inline ScalarField apply_pointwise(const ScalarField& u, const std::function<double(double)>& fn) {
  ScalarField out(u.grid);
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = fn(u[k]);
  return out;
}

inline ScalarField chemical_potential(const ScalarField& phi, const PotentialParams& p) {
  ScalarField mu = neumann_laplacian(phi);
  for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = -mu[k] + potential_eval(p, phi[k], 1);
  return mu;
}

inline ScalarField mobility_field(const ScalarField& phi, const MobilitySpec& m) {
  return apply_pointwise(phi, [&m](double s) { return m(std::clamp(s, -1.0, 1.0)); });
}

// ---------------------------------------------------------------------------

struct SchemeStep {
  ScalarField phi;
  ScalarField mu_scheme;  // -Lap phi' + F'(phi') - theta0 phi
  FaceField mobility;     // lagged face mobility
  int iters = 0;
  double residual = 0.0;
};

class ChStepper {
 public:
  ChStepper(const GridSpec& g, PotentialParams p, MobilitySpec m, NewtonSettings n)
      : grid_(g), pot_(p), mob_(std::move(m)), newton_(n), lap_(laplacian_matrix(g)) {}

  const PotentialParams& potential() const { return pot_; }
  const MobilitySpec& mobility() const { return mob_; }
  const NewtonSettings& newton() const { return newton_; }

  SchemeStep step(const ScalarField& phi_old, double dt, const ScalarField* source = nullptr) {
    require_same_grid(grid_, phi_old.grid);
    const double bound = 1.0 - newton_.guard_gap;
    if (!(max_abs(phi_old) < bound))
      fail(ErrorKind::BoundaryCollision, "step started outside the interior guard");

    SchemeStep out;
    out.mobility = face_mobility(mobility_field(phi_old, mob_));
    const SparseMatrix dm = face_weighted_laplacian_matrix(out.mobility);
    const SparseMatrix dm_lap = dm * lap_;
    const double target_mean = mean(phi_old);
    const std::size_t n = grid_.size();

    auto residual = [&](const ScalarField& phi) {
      ScalarField mu = scheme_mu(phi, phi_old);
      ScalarField flux_div = div_m_grad(out.mobility, mu);
      ScalarField r(grid_);
      for (std::size_t k = 0; k < n; ++k) {
        r[k] = (phi[k] - phi_old[k]) - dt * flux_div[k];
        if (source) r[k] += dt * (*source)[k];
      }
      return r;
    };

    ScalarField phi = phi_old;
    ScalarField r = residual(phi);
    double rnorm = max_abs(r);
    SparseDirectSolver lu;
    for (int it = 1; it <= newton_.max_iter; ++it) {
      // dt * Jacobian = I + dt * (Dm Lap - Dm diag(F''(phi)))
      Eigen::VectorXd f2(static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k) f2[k] = convex_potential(pot_, phi[k], 2);
      SparseMatrix jac = dm_lap - dm * f2.asDiagonal();
      jac *= dt;
      for (Eigen::Index k = 0; k < jac.rows(); ++k) jac.coeffRef(k, k) += 1.0;
      lu.factorize(jac);
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k) rhs[k] = -r[k];
      const Eigen::VectorXd delta = lu.solve(rhs);

      double alpha = 1.0;
      bool last_rejected_by_bound = false;
      while (true) {
        ScalarField cand = phi;
        for (std::size_t k = 0; k < n; ++k) cand[k] += alpha * delta[k];
        cand += target_mean - mean(cand);
        if (max_abs(cand) < bound) {
          ScalarField rc = residual(cand);
          const double cnorm = max_abs(rc);
          if (cnorm < rnorm || cnorm <= newton_.tol) {
            phi = std::move(cand);
            r = std::move(rc);
            rnorm = cnorm;
            break;
          }
          last_rejected_by_bound = false;
        } else {
          last_rejected_by_bound = true;
        }
        alpha *= newton_.backtrack;
        if (alpha < 1e-12) {
          if (last_rejected_by_bound)
            fail(ErrorKind::BoundaryCollision, "damping cannot keep the Newton iterate inside (-1, 1)");
          fail(ErrorKind::NewtonDiverged, "line search failed to reduce the residual");
        }
      }
      if (rnorm <= newton_.tol) {
        out.iters = it;
        out.residual = rnorm;
        out.mu_scheme = scheme_mu(phi, phi_old);
        out.phi = std::move(phi);
        return out;
      }
    }
    fail(ErrorKind::NewtonDiverged, "Newton residual did not reach tolerance in max_iter iterations");
  }

 private:
  ScalarField scheme_mu(const ScalarField& phi, const ScalarField& phi_old) const {
    ScalarField mu = neumann_laplacian(phi);
    for (std::size_t k = 0; k < mu.size(); ++k)
      mu[k] = -mu[k] + convex_potential(pot_, phi[k], 1) - pot_.theta0 * phi_old[k];
    return mu;
  }

  GridSpec grid_;
  PotentialParams pot_;
  MobilitySpec mob_;
  NewtonSettings newton_;
  SparseMatrix lap_;
};

/// One accepted step; the returned state carries mu recomputed from phi'.
inline std::pair<ChState, StepStats> ch_step(const ChState& state, const ChRunConfig& cfg,
                                             ChStepper* stepper = nullptr) {
  std::optional<ChStepper> local;
  if (!stepper) stepper = &local.emplace(cfg.grid, cfg.potential, cfg.mobility, cfg.newton);
  SchemeStep s = stepper->step(state.phi, cfg.dt);

  StepStats st;
  st.newton_iters = s.iters;
  st.residual = s.residual;
  st.energy_before = energy(state.phi, cfg.potential);
  st.energy_after = energy(s.phi, cfg.potential);
  st.energy_drop = st.energy_before - st.energy_after;
  st.dissipation = cfg.dt * face_quadrature(faces_from_cells(s.mu_scheme), &s.mobility);
  st.rate = l2_norm(s.phi - state.phi) / cfg.dt;

  ChState next;
  next.mu = chemical_potential(s.phi, cfg.potential);
  next.phi = std::move(s.phi);
  next.step = state.step + 1;
  next.time = static_cast<double>(next.step) * cfg.dt;
  return {std::move(next), st};
}

// ---------------------------------------------------------------------------
// Initial data

/// Uniform doubles in [-1, 1) from the top 53 bits of std::mt19937_64, whose
/// output sequence is fixed by the C++ standard.
class PortableUniform {
 public:
  explicit PortableUniform(std::uint64_t seed) : gen_(seed) {}
  double operator()() {
    const std::uint64_t bits = gen_() >> 11;
    return 2.0 * (static_cast<double>(bits) * 0x1.0p-53) - 1.0;
  }

 private:
  std::mt19937_64 gen_;
};

/// Deterministic perturbation field: mean `mean`, deviation at most
/// `amplitude`. Per-cell noise, or per-row noise for Stratified.
inline ScalarField make_initial_phi(const GridSpec& g, const InitialCondition& ic, std::uint64_t seed) {
  using Kind = InitialCondition::Kind;
  if (ic.kind == Kind::File) {
    Snapshot s = read_snapshot(ic.file);
    require_same_grid(g, s.field.grid);
    return s.field;
  }
  ScalarField phi(g, ic.mean);
  if (ic.kind == Kind::Constant || ic.amplitude == 0.0) return phi;

  PortableUniform rng(seed);
  ScalarField noise(g);
  if (ic.kind == Kind::Stratified && g.dim == 2) {
    for (int j = 0; j < g.ny(); ++j) {
      const double v = rng();
      for (int i = 0; i < g.nx(); ++i) noise.at(i, j) = v;
    }
  } else {
    for (double& v : noise.values) v = rng();
  }
  noise = minus_mean(noise);
  const double scale = max_abs(noise);
  for (std::size_t k = 0; k < phi.size(); ++k) phi[k] += ic.amplitude * noise[k] / scale;
  return phi;
}

// ---------------------------------------------------------------------------
// Time loop

struct DiagnosticsRecord {
  std::size_t step = 0;
  double t = 0.0;
  double E = 0.0;
  double mass_mean = 0.0;
  double grad_mu_l2 = 0.0;
  double max_abs_phi = 0.0;
  double ctr_ratio = 0.0;  // int |mu| / (1 + ||grad mu||)
  int newton_iters = 0;
  double rate = 0.0;       // ||phi^{n+1} - phi^n|| / dt of the last step
};

inline DiagnosticsRecord make_record(const ChState& s, const PotentialParams& p, int newton_iters,
                                     double rate) {
  DiagnosticsRecord r;
  r.step = s.step;
  r.t = s.time;
  r.E = energy(s.phi, p);
  r.mass_mean = mean(s.phi);
  r.grad_mu_l2 = std::sqrt(face_quadrature(faces_from_cells(s.mu)));
  r.max_abs_phi = max_abs(s.phi);
  r.ctr_ratio = l1_norm(s.mu) / (1.0 + r.grad_mu_l2);
  r.newton_iters = newton_iters;
  r.rate = rate;
  return r;
}

/// Per-step contract tallies over a whole run.
struct StepAudit {
  std::size_t steps = 0;
  double max_mass_drift = 0.0;
  double max_abs_phi = 0.0;
  std::size_t energy_increase_violations = 0;  // E' > E + 1e-10 (1 + |E|)
  std::size_t dissipation_violations = 0;      // E' + D > E + 1e-8 (1 + |E|)
  double worst_dissipation_slack = std::numeric_limits<double>::infinity();  // min (E - E' - D)/(1+|E|)
  int max_newton_iters = 0;

  void add(const StepStats& st, double mass_drift, double phi_max) {
    ++steps;
    max_mass_drift = std::max(max_mass_drift, mass_drift);
    max_abs_phi = std::max(max_abs_phi, phi_max);
    const double scale = 1.0 + std::abs(st.energy_before);
    if (st.energy_after > st.energy_before + 1e-10 * scale) ++energy_increase_violations;
    const double slack = (st.energy_before - st.energy_after - st.dissipation) / scale;
    if (slack < -1e-8) ++dissipation_violations;
    worst_dissipation_slack = std::min(worst_dissipation_slack, slack);
    max_newton_iters = std::max(max_newton_iters, st.newton_iters);
  }
};

enum class Termination { ReachedEnd, Equilibrium, Aborted };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::ReachedEnd: return "reached_t_end";
    case Termination::Equilibrium: return "equilibrium";
    case Termination::Aborted: return "aborted";
  }
  return "unknown";
}

struct RunAbort {
  ErrorKind kind;
  std::string message;
};

struct ChRunResult {
  ChState final_state;
  std::vector<DiagnosticsRecord> records;
  StepAudit audit;
  Termination termination = Termination::ReachedEnd;
  std::optional<RunAbort> abort;

  void throw_if_aborted() const {
    if (abort) throw Error(abort->kind, abort->message);
  }
};

/// Called on every output (including the initial one).
using ChObserver = std::function<void(const ChState&, const DiagnosticsRecord&)>;
/// Called after every accepted step.
using ChStepObserver = std::function<void(const ChState&, const StepStats&)>;

inline ChState initial_state(const ChRunConfig& cfg) {
  ChState s;
  s.phi = make_initial_phi(cfg.grid, cfg.initial, cfg.seed);
  if (!(max_abs(s.phi) < 1.0 - cfg.newton.guard_gap))
    fail(ErrorKind::ValidationError, "initial datum must satisfy |phi0| < 1");
  s.mu = chemical_potential(s.phi, cfg.potential);
  return s;
}

/// Advances to t_end or until ||grad mu|| and ||phi' - phi||/dt stay below
/// their thresholds for eq_window consecutive outputs. Step failures end the
/// run with termination Aborted; the partial series is kept.
inline ChRunResult run_ch(const ChRunConfig& cfg, const ChObserver& on_output = {},
                          const ChStepObserver& on_step = {}) {
  cfg.validate();
  ChRunResult res;
  ChState state = initial_state(cfg);
  const double mass0 = mean(state.phi);
  res.records.push_back(make_record(state, cfg.potential, 0, 0.0));
  if (on_output) on_output(state, res.records.back());

  ChStepper stepper(cfg.grid, cfg.potential, cfg.mobility, cfg.newton);
  const auto n_steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));
  int quiet_outputs = 0;
  int iters_since_output = 0;
  while (state.step < n_steps) {
    StepStats st;
    try {
      auto [next, stats] = ch_step(state, cfg, &stepper);
      state = std::move(next);
      st = stats;
    } catch (const Error& e) {
      res.termination = Termination::Aborted;
      res.abort = RunAbort{e.kind(), e.what()};
      break;
    }
    res.audit.add(st, std::abs(mean(state.phi) - mass0), max_abs(state.phi));
    if (on_step) on_step(state, st);
    iters_since_output = std::max(iters_since_output, st.newton_iters);

    if (state.step % static_cast<std::size_t>(cfg.output_every) == 0 || state.step == n_steps) {
      res.records.push_back(make_record(state, cfg.potential, iters_since_output, st.rate));
      iters_since_output = 0;
      if (on_output) on_output(state, res.records.back());
      const auto& rec = res.records.back();
      if (rec.grad_mu_l2 < cfg.eq_grad_tol && rec.rate < cfg.eq_rate_tol) ++quiet_outputs;
      else quiet_outputs = 0;
      if (cfg.stop_at_equilibrium && quiet_outputs >= cfg.eq_window) {
        res.termination = Termination::Equilibrium;
        break;
      }
    }
  }
  res.final_state = std::move(state);
  return res;
}

}  // namespace chsep
