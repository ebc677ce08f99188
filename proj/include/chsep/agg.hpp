#pragma once

// Coupled Cahn-Hilliard / Navier-Stokes flow with unmatched densities on a
// 2D staggered grid. One step:
//
//   1. Cahn-Hilliard step with explicit conservative advection div(phi u^n).
//   2. Momentum on rho u: explicit convection with mass flux rho u^n + J,
//      implicit viscous stress div(nu(phi) Du).
//   3. Capillary force -phi grad mu added before the projection, so a force
//      that is a discrete gradient is absorbed exactly by the pressure.
//   4. Variable-density projection div((1/rho) grad p) = div(u)/dt.
//
// The capillary force differs from mu grad phi by a gradient and pairs with
// the advection term so that the transfer term appears with opposite signs
// in the kinetic and Cahn-Hilliard budgets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chsep/ch_core.hpp"
#include "chsep/diagnostics.hpp"
#include "chsep/error.hpp"
#include "chsep/grid.hpp"
#include "chsep/linear_solvers.hpp"
#include "chsep/mac.hpp"
#include "chsep/physics.hpp"

namespace chsep {

struct VelocityInit {
  enum class Kind { Rest, Vortices };
  Kind kind = Kind::Rest;
  double amplitude = 0.0;  // max |u| of the seeded field
};

struct AggRunConfig {
  ChRunConfig ch;  // grid, potential, mobility, time stepping, phi0, seed
  FluidParams fluid;
  VelocityInit velocity;
  double div_tol = 1e-12;      // max |div u| targeted by the projection
  double viscous_rtol = 1e-13;
  double cfl_max = 0.5;
  double audit_factor = 1e-3;  // tol_audit = factor * |E_tot(0)|

  void validate() const {
    ch.validate();
    fluid.validate();
    if (ch.grid.dim != 2) fail(ErrorKind::ValidationError, "the coupled solver needs a 2D grid");
    if (!(velocity.amplitude >= 0.0)) fail(ErrorKind::ValidationError, "velocity amplitude must be >= 0");
    if (!(div_tol > 0.0 && div_tol <= 1e-10)) fail(ErrorKind::ValidationError, "div_tol must lie in (0, 1e-10]");
    if (!(viscous_rtol > 0.0)) fail(ErrorKind::ValidationError, "viscous_rtol must be positive");
    if (!(cfl_max > 0.0)) fail(ErrorKind::ValidationError, "cfl_max must be positive");
    if (!(audit_factor > 0.0)) fail(ErrorKind::ValidationError, "audit_factor must be positive");
  }
};

struct AggState {
  ScalarField phi;
  ScalarField mu;  // -Lap phi + f'(phi)
  VelocityField u;
  ScalarField p;
  double time = 0.0;
  std::size_t step = 0;
};

/// Energies after the step and per-step exchange terms (all times dt).
struct EnergyBudget {
  double kinetic = 0.0;      // 1/2 int rho(phi) |u|^2
  double interfacial = 0.0;  // E(phi)
  double total = 0.0;
  double dissipation_visc = 0.0;  // dt int nu |Du*|^2
  double dissipation_mix = 0.0;   // dt int m |grad mu|^2
  double transfer = 0.0;          // dt int u . grad mu phi
  double splitting_residual = 0.0;  // KE(n) - KE(n+1) - visc - transfer
};

struct AggStepInfo {
  int newton_iters = 0;
  double div_max = 0.0;
  double cfl = 0.0;
  double j_max = 0.0;  // max |J| over faces
  double u_l2_sq = 0.0;
  std::size_t projection_iters = 0;
  std::size_t viscous_iters = 0;
  double rate = 0.0;  // ||phi' - phi|| / dt
};

/// Cell density from the affine law on clamped phi, clamped to [rho_*, rho^*].
inline ScalarField density_field(const ScalarField& phi, const FluidParams& f) {
  return apply_pointwise(phi, [&f](double s) {
    return std::clamp(f.rho(std::clamp(s, -1.0, 1.0)), f.rho_star(), f.rho_sup());
  });
}

inline ScalarField viscosity_field(const ScalarField& phi, const FluidParams& f) {
  return apply_pointwise(phi, [&f](double s) { return f.nu(std::clamp(s, -1.0, 1.0)); });
}

/// Sum over interior faces of a * b, times the cell volume.
inline double face_dot(const FaceField& a, const FaceField& b) {
  const GridSpec& g = a.grid;
  CompensatedSum s;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) s.add(a.axis[0][a.xface(i, j)] * b.axis[0][b.xface(i, j)]);
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) s.add(a.axis[1][a.yface(i, j)] * b.axis[1][b.yface(i, j)]);
  return s.value() * g.cell_volume();
}

inline double kinetic_energy(const VelocityField& u, const FaceField& rho_face) {
  return 0.5 * velocity_l2_squared(u, &rho_face);
}

/// Variable-density projection of u in place; p is the warm start and the
/// result. Returns the iteration count. Throws ProjectionStall.
inline std::size_t project(VelocityField& u, ScalarField& p, const FaceField& rho_face, double dt, double div_tol) {
  const GridSpec& g = u.grid;
  FaceField inv_rho(g);
  for (int ax = 0; ax < 2; ++ax)
    for (std::size_t k = 0; k < inv_rho.axis[ax].size(); ++k) inv_rho.axis[ax][k] = 1.0 / rho_face.axis[ax][k];
  const SparseMatrix a = -face_weighted_laplacian_matrix(inv_rho);
  const ScalarField d = divergence(u);
  std::vector<double> b(g.size()), diag(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) b[k] = -d[k] / dt;
  for (Eigen::Index k = 0; k < a.rows(); ++k) diag[static_cast<std::size_t>(k)] = a.coeff(k, k);
  SolverSettings s;
  s.rtol = 0.0;
  s.atol = div_tol / dt;
  s.pin_mean = true;
  const LinearOp op = [&a](std::span<const double> x, std::span<double> y) {
    Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())) =
        a * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  };
  const SolveStats st = pcg(op, diag, b, p.values, s);
  const FaceField gp = faces_from_cells(p);
  for (int ax = 0; ax < 2; ++ax)
    for (std::size_t k = 0; k < u.axis[ax].size(); ++k) u.axis[ax][k] -= dt * inv_rho.axis[ax][k] * gp.axis[ax][k];
  const double div = max_abs(divergence(u));
  if (!(div <= 10.0 * div_tol))
    fail(ErrorKind::ProjectionStall,
         "pressure projection left max|div u| = " + std::to_string(div) + " after " +
             std::to_string(st.iterations) + " iterations");
  return st.iterations;
}

/// Seeded vortical field from a random combination of the stream-function
/// modes sin(a pi x / Lx) sin(b pi y / Ly), 1 <= a, b <= 3, scaled so that
/// max |u| equals the amplitude.
inline VelocityField seeded_vortices(const GridSpec& g, double amplitude, std::uint64_t seed) {
  if (amplitude == 0.0) return VelocityField(g);
  PortableUniform rng(seed ^ 0x9E3779B97F4A7C15ULL);
  double c[3][3];
  for (auto& row : c)
    for (double& v : row) v = rng();
  const int nx = g.nx(), ny = g.ny();
  std::vector<double> psi(static_cast<std::size_t>((nx + 1) * (ny + 1)), 0.0);
  for (int j = 1; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const double x = i * g.spacing(0) / g.length[0], y = j * g.spacing(1) / g.length[1];
      double s = 0.0;
      for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) s += c[a - 1][b - 1] / (a * a + b * b) * std::sin(a * M_PI * x) * std::sin(b * M_PI * y);
      psi[static_cast<std::size_t>(i + (nx + 1) * j)] = s;
    }
  VelocityField u = velocity_from_stream(g, psi);
  const double m = max_abs(u);
  for (auto& a : u.axis)
    for (double& v : a) v *= amplitude / m;
  return u;
}

class AggStepper {
 public:
  explicit AggStepper(const AggRunConfig& cfg)
      : cfg_(cfg), ch_(cfg.ch.grid, cfg.ch.potential, cfg.ch.mobility, cfg.ch.newton), ops_(cfg.ch.grid) {}

  const MacOperators& operators() const { return ops_; }

  std::pair<AggState, std::pair<EnergyBudget, AggStepInfo>> step(const AggState& s) {
    const GridSpec& g = cfg_.ch.grid;
    const double dt = cfg_.ch.dt;
    const FluidParams& fl = cfg_.fluid;
    AggStepInfo info;

    const double h = std::min(g.spacing(0), g.spacing(1));
    info.cfl = max_abs(s.u) * dt / h;
    if (info.cfl > cfg_.cfl_max)
      fail(ErrorKind::CFLViolation, "CFL number " + std::to_string(info.cfl) + " exceeds " +
                                        std::to_string(cfg_.cfl_max) + "; reduce dt");

    // 1. Cahn-Hilliard with advection.
    const FaceField phi_face = face_mean(s.phi);
    const ScalarField source = divergence(multiply(phi_face, s.u));
    SchemeStep ch = ch_.step(s.phi, dt, &source);
    info.newton_iters = ch.iters;
    info.rate = l2_norm(ch.phi - s.phi) / dt;
    const FaceField grad_mu = faces_from_cells(ch.mu_scheme);

    EnergyBudget b;
    b.dissipation_mix = dt * face_quadrature(grad_mu, &ch.mobility);
    b.transfer = dt * face_dot(multiply(phi_face, s.u), grad_mu);

    // 2. Momentum.
    const FaceField rho_old = face_mean(density_field(s.phi, fl));
    const FaceField rho_new = face_mean(density_field(ch.phi, fl));
    const double jc = -0.5 * (fl.rho1 - fl.rho2);
    FaceField mass_flux = multiply(rho_old, s.u);
    for (int ax = 0; ax < 2; ++ax)
      for (std::size_t k = 0; k < mass_flux.axis[ax].size(); ++k) {
        const double j = jc * ch.mobility.axis[ax][k] * grad_mu.axis[ax][k];
        info.j_max = std::max(info.j_max, std::abs(j));
        mass_flux.axis[ax][k] += j;
      }
    const VelocityField conv = convection(s.u, mass_flux);
    const MacDofs& dofs = ops_.dofs;
    const auto n = static_cast<Eigen::Index>(dofs.size());
    Eigen::VectorXd rhs(n), rho_n(n);
    const Eigen::VectorXd u_old = dofs.gather(s.u);
    const Eigen::VectorXd c_vec = dofs.gather(conv);
    const Eigen::VectorXd rho_o = dofs.gather(rho_old);
    rho_n = dofs.gather(rho_new);
    rhs = rho_o.cwiseProduct(u_old) - dt * c_vec;

    SparseMatrix k = ops_.viscous_matrix(viscosity_field(ch.phi, fl));
    SparseMatrix a = dt * k;
    for (Eigen::Index q = 0; q < n; ++q) a.coeffRef(q, q) += rho_n[q];
    std::vector<double> diag(static_cast<std::size_t>(n)), x(u_old.data(), u_old.data() + n);
    for (Eigen::Index q = 0; q < n; ++q) diag[static_cast<std::size_t>(q)] = a.coeff(q, q);
    SolverSettings vs;
    vs.rtol = cfg_.viscous_rtol;
    const LinearOp op = [&a](std::span<const double> in, std::span<double> out) {
      Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) =
          a * Eigen::Map<const Eigen::VectorXd>(in.data(), static_cast<Eigen::Index>(in.size()));
    };
    const SolveStats vst = pcg(op, diag, std::span<const double>(rhs.data(), static_cast<std::size_t>(n)), x, vs);
    if (!vst.converged) fail(ErrorKind::SolverStall, "viscous solve did not converge");
    info.viscous_iters = vst.iterations;
    const Eigen::VectorXd u_star = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    b.dissipation_visc = dt * u_star.dot(k * u_star) * g.cell_volume();

    // 3. Capillary force, 4. projection.
    VelocityField u = dofs.scatter(u_star);
    for (int ax = 0; ax < 2; ++ax)
      for (std::size_t q = 0; q < u.axis[ax].size(); ++q)
        u.axis[ax][q] -= dt * phi_face.axis[ax][q] * grad_mu.axis[ax][q] / rho_new.axis[ax][q];
    zero_boundary(u);
    AggState next;
    next.p = s.p;
    info.projection_iters = project(u, next.p, rho_new, dt, cfg_.div_tol);
    info.div_max = max_abs(divergence(u));

    const double ke_old = kinetic_energy(s.u, rho_old);
    b.kinetic = kinetic_energy(u, rho_new);
    b.interfacial = energy(ch.phi, cfg_.ch.potential);
    b.total = b.kinetic + b.interfacial;
    b.splitting_residual = ke_old - b.kinetic - b.dissipation_visc - b.transfer;
    info.u_l2_sq = velocity_l2_squared(u);

    next.mu = chemical_potential(ch.phi, cfg_.ch.potential);
    next.phi = std::move(ch.phi);
    next.u = std::move(u);
    next.step = s.step + 1;
    next.time = static_cast<double>(next.step) * dt;
    return {std::move(next), {b, info}};
  }

 private:
  static void zero_boundary(VelocityField& u) {
    const GridSpec& g = u.grid;
    for (int j = 0; j < g.ny(); ++j) u.axis[0][u.xface(0, j)] = u.axis[0][u.xface(g.nx(), j)] = 0.0;
    for (int i = 0; i < g.nx(); ++i) u.axis[1][u.yface(i, 0)] = u.axis[1][u.yface(i, g.ny())] = 0.0;
  }

  AggRunConfig cfg_;
  ChStepper ch_;
  MacOperators ops_;
};

inline std::pair<AggState, std::pair<EnergyBudget, AggStepInfo>> agg_step(const AggState& s, const AggRunConfig& cfg,
                                                                         AggStepper* stepper = nullptr) {
  std::optional<AggStepper> local;
  if (!stepper) stepper = &local.emplace(cfg);
  return stepper->step(s);
}

/// Initial phi from the Cahn-Hilliard initial condition, u0 projected with
/// the initial density.
inline AggState initial_agg_state(const AggRunConfig& cfg) {
  AggState s;
  const ChState ch = initial_state(cfg.ch);
  s.phi = ch.phi;
  s.mu = ch.mu;
  s.p = ScalarField(cfg.ch.grid, 0.0);
  s.u = cfg.velocity.kind == VelocityInit::Kind::Vortices
            ? seeded_vortices(cfg.ch.grid, cfg.velocity.amplitude, cfg.ch.seed)
            : VelocityField(cfg.ch.grid);
  if (max_abs(s.u) > 0.0) {
    project(s.u, s.p, face_mean(density_field(s.phi, cfg.fluid)), cfg.ch.dt, cfg.div_tol);
    s.p = ScalarField(cfg.ch.grid, 0.0);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Time loop

struct AggRecord {
  std::size_t step = 0;
  double t = 0.0;
  double E = 0.0;
  double kinetic = 0.0;
  double E_tot = 0.0;
  double grad_mu_l2 = 0.0;
  double mass_mean = 0.0;
  double max_abs_phi = 0.0;
  double ctr_ratio = 0.0;
  double div_max = 0.0;         // max over the steps since the last output
  double residual_kinetic = 0.0;  // KE(0) - transfer - KE(t) - visc, cumulative
  double residual_ch = 0.0;       // E(0) + transfer - E(t) - mix
  double residual_total = 0.0;    // E_tot(0) - E_tot(t) - visc - mix
  double splitting_residual = 0.0;  // last step
  KornRatios korn;
  int newton_iters = 0;
};

/// Per-step contract tallies over a run.
struct AggAudit {
  std::size_t steps = 0;
  double max_div = 0.0;
  double max_mass_drift = 0.0;
  double max_abs_phi = 0.0;
  double max_cfl = 0.0;
  double max_j = 0.0;
  std::size_t sandwich_violations = 0;  // rho_*/2 |u|^2 <= KE <= rho^*/2 |u|^2
  std::size_t negative_dissipation = 0;
  std::size_t korn_violations = 0;      // ||Du|| > ||grad u|| at an output
  double max_abs_splitting = 0.0;
  double min_residual_kinetic = std::numeric_limits<double>::infinity();
  double min_residual_ch = std::numeric_limits<double>::infinity();
  double min_residual_total = std::numeric_limits<double>::infinity();
};

struct AggRunResult {
  AggState final_state;
  std::vector<AggRecord> records;
  AggAudit audit;
  double tol_audit = 0.0;
  Termination termination = Termination::ReachedEnd;
  std::optional<RunAbort> abort;

  void throw_if_aborted() const {
    if (abort) throw Error(abort->kind, abort->message);
  }

  DiagnosticsSeries series() const {
    DiagnosticsSeries s;
    for (const AggRecord& r : records) {
      s.times.push_back(r.t);
      s.E.push_back(r.E);
      s.grad_mu_l2.push_back(r.grad_mu_l2);
      s.max_abs_phi.push_back(r.max_abs_phi);
      s.mass_mean.push_back(r.mass_mean);
      s.ctr_ratio.push_back(r.ctr_ratio);
      s.kinetic.push_back(r.kinetic);
      s.E_tot.push_back(r.E_tot);
    }
    return s;
  }
};

using AggObserver = std::function<void(const AggState&, const AggRecord&)>;

/// Advances to t_end. Step failures end the run with termination Aborted.
inline AggRunResult run_agg(const AggRunConfig& cfg, const AggObserver& on_output = {}) {
  cfg.validate();
  AggRunResult res;
  AggState state = initial_agg_state(cfg);
  AggStepper stepper(cfg);
  const MacOperators& ops = stepper.operators();
  const double mass0 = mean(state.phi);
  const double ke0 = kinetic_energy(state.u, face_mean(density_field(state.phi, cfg.fluid)));
  const double e0 = energy(state.phi, cfg.ch.potential);
  res.tol_audit = cfg.audit_factor * std::abs(ke0 + e0);

  CompensatedSum visc, mix, transfer;
  double div_since = max_abs(divergence(state.u));
  double last_split = 0.0;
  int iters_since = 0;
  auto record = [&](const AggState& s, double ke, double e) {
    AggRecord r;
    const DiagnosticsRecord cr = make_record(ChState{s.phi, s.mu, s.time, s.step}, cfg.ch.potential, 0, 0.0);
    r.step = s.step;
    r.t = s.time;
    r.E = e;
    r.kinetic = ke;
    r.E_tot = ke + e;
    r.grad_mu_l2 = cr.grad_mu_l2;
    r.mass_mean = cr.mass_mean;
    r.max_abs_phi = cr.max_abs_phi;
    r.ctr_ratio = cr.ctr_ratio;
    r.div_max = div_since;
    r.residual_kinetic = ke0 - transfer.value() - ke - visc.value();
    r.residual_ch = e0 + transfer.value() - e - mix.value();
    r.residual_total = ke0 + e0 - ke - e - visc.value() - mix.value();
    r.splitting_residual = last_split;
    r.korn = korn_ratios(ops, s.u);
    r.newton_iters = iters_since;
    AggAudit& a = res.audit;
    if (!r.korn.strain_le_grad) ++a.korn_violations;
    a.min_residual_kinetic = std::min(a.min_residual_kinetic, r.residual_kinetic);
    a.min_residual_ch = std::min(a.min_residual_ch, r.residual_ch);
    a.min_residual_total = std::min(a.min_residual_total, r.residual_total);
    res.records.push_back(r);
    if (on_output) on_output(s, res.records.back());
    div_since = 0.0;
    iters_since = 0;
  };
  record(state, ke0, e0);
  res.audit.max_div = div_since;

  const auto n_steps = static_cast<std::size_t>(std::llround(cfg.ch.t_end / cfg.ch.dt));
  while (state.step < n_steps) {
    try {
      auto [next, out] = stepper.step(state);
      const auto& [b, info] = out;
      state = std::move(next);
      visc.add(b.dissipation_visc);
      mix.add(b.dissipation_mix);
      transfer.add(b.transfer);
      last_split = b.splitting_residual;
      div_since = std::max(div_since, info.div_max);
      iters_since = std::max(iters_since, info.newton_iters);

      AggAudit& a = res.audit;
      ++a.steps;
      a.max_div = std::max(a.max_div, info.div_max);
      a.max_mass_drift = std::max(a.max_mass_drift, std::abs(mean(state.phi) - mass0));
      a.max_abs_phi = std::max(a.max_abs_phi, max_abs(state.phi));
      a.max_cfl = std::max(a.max_cfl, info.cfl);
      a.max_j = std::max(a.max_j, info.j_max);
      a.max_abs_splitting = std::max(a.max_abs_splitting, std::abs(b.splitting_residual));
      if (b.dissipation_visc < 0.0 || b.dissipation_mix < 0.0) ++a.negative_dissipation;
      const double slack = 1e-14 * b.kinetic;
      if (b.kinetic < 0.5 * cfg.fluid.rho_star() * info.u_l2_sq - slack ||
          b.kinetic > 0.5 * cfg.fluid.rho_sup() * info.u_l2_sq + slack)
        ++a.sandwich_violations;

      if (state.step % static_cast<std::size_t>(cfg.ch.output_every) == 0 || state.step == n_steps)
        record(state, b.kinetic, b.interfacial);
    } catch (const Error& e) {
      res.termination = Termination::Aborted;
      res.abort = RunAbort{e.kind(), e.what()};
      break;
    }
  }
  res.final_state = std::move(state);
  return res;
}

}  // namespace chsep
