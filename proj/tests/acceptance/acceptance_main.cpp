// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// line fails. Usage: acceptance [WORK_DIR]

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chsep/chsep.hpp"
#include "../oracles.hpp"

namespace fs = std::filesystem;
using namespace chsep;

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AppConfig shipped(const std::string& name) { return parse_config(fs::path(CHSEP_CONFIG_DIR) / name); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [x]");
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.check(false, std::string("error: ") + e.what());
  }
  if (!v.pass) ++failures;
  std::printf("%s  %-14s %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
  std::fflush(stdout);
}

bool audit_passed(const nlohmann::json& d, const char* name) { return d["audits"][name]["passed"].get<bool>(); }

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  return t;
}

DiagnosticsSeries synthetic(const std::vector<double>& t, double (*E)(double), double (*g)(double)) {
  DiagnosticsSeries s;
  s.times = t;
  for (double x : t) {
    s.E.push_back(E(x));
    s.grad_mu_l2.push_back(g(x));
    s.max_abs_phi.push_back(0.5);
    s.mass_mean.push_back(0.0);
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "chsep_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  std::printf("work directory: %s\n", work.string().c_str());

  // Shipped benchmark runs.
  const AppConfig bench_cfg = shipped("ch_benchmark.ini");
  const app::ChCommandResult bench = app::run_ch_in(bench_cfg, work / "ch_benchmark");
  const nlohmann::json diag = app::diagnose_in(work / "ch_benchmark").report["diagnose"];
  const app::ChCommandResult diss = app::run_ch_in(shipped("ch_dissipation.ini"), work / "ch_dissipation");
  const AppConfig sweep_base = shipped("ch_sweep_base.ini");
  const auto points = parse_sweep_text(read_text_file(fs::path(CHSEP_CONFIG_DIR) / "sweep_seeds50.ini"),
                                       "sweep_seeds50.ini", sweep_base);
  const app::SweepResult sweep =
      app::sweep_in(sweep_base, points, std::max(1u, std::thread::hardware_concurrency()), work / "sweep50");
  const AppConfig agg_cfg = shipped("agg_benchmark.ini");
  const app::AggCommandResult agg = app::run_agg_in(agg_cfg, work / "agg_benchmark");

  std::vector<const StepAudit*> ch_audits = {&bench.run.audit, &diss.run.audit};

  criterion("conservation", [&](Verdict& v) {
    double drift = std::max(agg.run.audit.max_mass_drift, 0.0);
    for (const StepAudit* a : ch_audits) drift = std::max(drift, a->max_mass_drift);
    for (const auto& r : sweep.rows) drift = std::max(drift, r.max_mass_drift);
    std::size_t outputs = 0;
    double output_drift = 0.0;
    for (const auto* recs : {&bench.run.records, &diss.run.records}) {
      for (const auto& r : *recs) output_drift = std::max(output_drift, std::abs(r.mass_mean - recs->front().mass_mean));
      outputs += recs->size();
    }
    for (const auto& r : agg.run.records)
      output_drift = std::max(output_drift, std::abs(r.mass_mean - agg.run.records.front().mass_mean));
    outputs += agg.run.records.size();
    v.check(drift <= 1e-12, fmt("max per-step |mean drift| %.2e over %zu runs", drift, 3 + sweep.rows.size()));
    v.check(output_drift <= 1e-12, fmt("max output drift %.2e over %zu outputs (tol 1e-12)", output_drift, outputs));
  });

  criterion("dissipation", [&](Verdict& v) {
    const StepAudit& a = diss.run.audit;
    v.check(a.steps == 10000, fmt("%zu-step run", a.steps));
    v.check(a.dissipation_violations == 0, fmt("%zu violations", a.dissipation_violations));
    std::size_t sweep_viol = 0, sweep_steps = 0, errors = 0;
    for (const auto& r : sweep.rows) {
      sweep_viol += r.dissipation_violations;
      sweep_steps += r.steps;
      errors += r.exit_code == app::kExitError;
    }
    v.check(sweep.rows.size() == 50 && errors == 0, fmt("%zu-seed sweep, %zu steps, %zu errors", sweep.rows.size(),
                                                         sweep_steps, errors));
    v.check(sweep_viol == 0, fmt("%zu sweep violations", sweep_viol));
    v.check(bench.run.audit.dissipation_violations == 0,
            fmt("benchmark %zu violations (tol 1e-8 (1+|E|))", bench.run.audit.dissipation_violations));
  });

  criterion("bounds", [&](Verdict& v) {
    double m = agg.run.audit.max_abs_phi;
    for (const StepAudit* a : ch_audits) m = std::max(m, a->max_abs_phi);
    for (const auto& r : sweep.rows) m = std::max(m, r.max_abs_phi);
    v.check(m <= 1.0 - 1e-9, fmt("max|phi| %.6f at any step of any benchmark (bound 1 - 1e-9)", m));
  });

  criterion("oracles", [&](Verdict& v) {
    const GridSpec g = GridSpec::line(8, 1.0);
    const PotentialParams p{1.0, 4.0};
    const MobilitySpec mob = MobilitySpec::quadratic_bump(0.1, 1.0);
    ChStepper stepper(g, p, mob, NewtonSettings{});
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const InitialCondition ic{InitialCondition::Kind::Perturbation, 0.3 * std::sin(double(seed)), 0.6, {}};
      const ScalarField phi0 = make_initial_phi(g, ic, seed);
      const double dt = seed % 2 ? 1e-3 : 1e-2;
      const SchemeStep s = stepper.step(phi0, dt);
      worst = std::max(worst, oracle::max_diff(s.phi.values, oracle::ch_step(g, phi0.values, mob, p, dt)));
    }
    v.check(worst <= 1e-9, fmt("ch_step vs dense Newton on 20 states: %.2e (tol 1e-9)", worst));

    std::mt19937_64 gen(5);
    double op = 0.0;
    for (const GridSpec& gg : {GridSpec::line(32, 1.3), GridSpec::box(32, 32, 1.0, 1.0), GridSpec::box(12, 7, 2.0, 0.7)}) {
      const oracle::Dense L = oracle::laplacian(gg);
      for (int trial = 0; trial < 3; ++trial) {
        const ScalarField u(gg, oracle::random_vector(gg.size(), gen));
        const ScalarField m(gg, oracle::random_vector(gg.size(), gen, 0.1, 1.0));
        const ScalarField lu = neumann_laplacian(u), du = div_m_grad(m, u);
        op = std::max(op, oracle::max_diff(lu.values, L.apply(oracle::to_real(u.values))) / max_abs(lu));
        op = std::max(op, oracle::max_diff(du.values, oracle::div_m_grad(gg, m.values).apply(oracle::to_real(u.values))) /
                              max_abs(du));
      }
    }
    v.check(op <= 1e-12, fmt("grid operators vs dense, N <= 32: relative %.2e (tol 1e-12)", op));
  });

  criterion("convergence", [&](Verdict& v) {
    v.check(bench.run.termination == Termination::Equilibrium,
            fmt("termination %s at t = %.3f", std::string(to_string(bench.run.termination)).c_str(), bench.run.final_state.time));
    v.check(diag["stationary"]["residual"].get<double>() / (1.0 + std::abs(diag["stationary"]["mu_inf"].get<double>())) <= 1e-10,
            fmt("stationary residual %.2e (tol 1e-10)", diag["stationary"]["residual"].get<double>()));
    v.check(diag["convergence"]["monotone"].get<bool>(), "H1 distance monotone over last quarter");
    v.check(diag["convergence"]["final_h1"].get<double>() < 1e-6,
            fmt("final H1 distance %.2e (tol 1e-6)", diag["convergence"]["final_h1"].get<double>()));
  });

  criterion("separation", [&](Verdict& v) {
    const auto& gt = diag["good_times"];
    v.check(audit_passed(diag, "separation"),
            fmt("measured delta %.4f (min 1e-3), M = %.3e, T = %.3f, %d good times",
                gt["measured_delta"].get<double>(), gt["M"].get<double>(), gt["T"].get<double>(), gt["good"].get<int>()));
    v.check(audit_passed(diag, "a_delta"), fmt("a_delta last-quarter max %.3g <= first-quarter min %.3g",
                                                diag["a_delta"]["last_quarter_max"].get<double>(),
                                                diag["a_delta"]["first_quarter_min"].get<double>()));
  });

  criterion("degiorgi", [&](Verdict& v) {
    v.check(audit_passed(diag, "degiorgi"), fmt("%d good snapshots reach y_n = 0 by n = %d (n_max 20)",
                                                 diag["degiorgi"]["audited"].get<int>(),
                                                 diag["degiorgi"]["max_first_zero"].get<int>()));
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> uc(-2.0, 2.0), ub(1.05, 10.0), ue(0.1, 2.0), uy(0.0, 1.0);
    int violations = 0;
    for (int draw = 0; draw < 1000; ++draw) {
      const double C = std::pow(10.0, uc(gen)), b = ub(gen), eps = ue(gen);
      const GeometricLemma gl = geometric_lemma(0.0, C, b, eps, 60);
      long double ly = std::log(static_cast<long double>(gl.theta * uy(gen)));
      const long double lt = std::log(static_cast<long double>(gl.theta));
      for (int n = 0; n <= 60 && std::isfinite(static_cast<double>(ly)); ++n) {
        const long double lbound = lt - n * std::log(static_cast<long double>(b)) / eps;
        if (ly > lbound + 1e-12L * std::fabs(lbound)) ++violations;
        ly = std::log(static_cast<long double>(C)) + n * std::log(static_cast<long double>(b)) + (1 + eps) * ly;
      }
    }
    v.check(violations == 0, fmt("geometric lemma 1000 random draws: %d violations", violations));
  });

  criterion("lojasiewicz", [&](Verdict& v) {
    const DiagnosticsSeries s = synthetic(linspace(0.0, 20.0, 401), [](double x) { return 1.0 + std::exp(-x); },
                                          [](double x) { return std::exp(-x / 2); });
    const LojasiewiczFit f = lojasiewicz_fit(s, classify_good_times(s, 10.0, 0.0), 1.0);
    v.check(std::abs(f.theta_hat - 0.5) <= 0.01 && f.r2 > 0.9999,
            fmt("synthetic theta %.4f (0.5 +- 0.01), r2 %.6f (> 0.9999)", f.theta_hat, f.r2));
    const auto& l = diag["lojasiewicz"];
    v.check(audit_passed(diag, "lojasiewicz"),
            l.contains("theta_hat") ? fmt("benchmark theta %.5f in (0, 0.5], r2 %.6f (>= 0.9)", l["theta_hat"].get<double>(),
                                          l["r2"].get<double>())
                                    : std::string("benchmark fit failed"));
  });

  criterion("integrability", [&](Verdict& v) {
    const DiagnosticsSeries e =
        synthetic(linspace(0.0, 20.0, 20001), [](double) { return 0.0; }, [](double x) { return std::exp(-x); });
    const IntegrabilityResult r = integrability_check(e, 0.0, 1.5, std::pow(2.0, -1.5));
    v.check(r.holds_fraction == 1.0 && std::abs(r.l1_tail - 1.0) <= 1e-4,
            fmt("exp(-t): holds at %.0f%% of samples, l1_tail %.6f", 100 * r.holds_fraction, r.l1_tail));
    bool fails = true;
    for (double zeta : {0.1, 1.0, 5.0}) {
      const DiagnosticsSeries h =
          synthetic(linspace(0.0, 1000.0, 100001), [](double) { return 0.0; }, [](double x) { return 1.0 / (1.0 + x); });
      fails = fails && integrability_check(h, 0.0, 1.5, zeta).holds_fraction < 1.0;
    }
    double prev = 0.0;
    bool grows = true;
    for (double T : {1e2, 1e3, 1e4, 1e5}) {
      const DiagnosticsSeries h =
          synthetic(linspace(0.0, T, 200001), [](double) { return 0.0; }, [](double x) { return 1.0 / (1.0 + x); });
      const double z = integrability_check(h, 0.0, 1.5, 1.0).required_zeta;
      grows = grows && z > 2.0 * prev;
      prev = z;
    }
    v.check(fails && grows, "1/(1+t) fails for zeta in {0.1, 1, 5}; required zeta unbounded in window length");
    v.check(audit_passed(diag, "integrability"),
            fmt("benchmark l1_tail %.2e (tol 1e-2)", diag["integrability"]["l1_tail"].get<double>()));
  });

  criterion("agg", [&](Verdict& v) {
    const AggAudit& a = agg.run.audit;
    v.check(agg.run.termination == Termination::ReachedEnd && a.steps == 2500, fmt("32^2, %zu steps", a.steps));
    v.check(a.max_div <= 1e-10, fmt("max|div u| %.2e (tol 1e-10)", a.max_div));
    const double ke0 = agg.run.records.front().kinetic, ke1 = agg.run.records.back().kinetic;
    v.check(ke1 < 1e-3 * ke0, fmt("kinetic %.3e -> %.3e (ratio %.2e, tol 1e-3)", ke0, ke1, ke1 / ke0));
    const double tol = 1e-3 * std::abs(agg.run.records.front().E_tot);
    v.check(a.min_residual_total >= -tol, fmt("min total-energy residual %.2e (>= -%.2e)", a.min_residual_total, tol));

    AggRunConfig c = agg_cfg.agg();
    c.ch.grid = GridSpec::box(16, 16, 2.0, 2.0);
    c.fluid = {1.0, 1.0, 0.4, 0.4};
    c.velocity = {};
    c.ch.t_end = 0.1;
    c.ch.output_every = 10;
    std::vector<ScalarField> pa, pb;
    run_agg(c, [&](const AggState& s, const AggRecord&) { pa.push_back(s.phi); });
    ChRunConfig cc = c.ch;
    cc.stop_at_equilibrium = false;
    run_ch(cc, [&](const ChState& s, const DiagnosticsRecord&) { pb.push_back(s.phi); });
    double diff = pa.size() == pb.size() ? 0.0 : 1.0;
    for (std::size_t k = 0; k < std::min(pa.size(), pb.size()); ++k) diff = std::max(diff, max_abs(pa[k] - pb[k]));
    v.check(diff <= 1e-10, fmt("matched rest vs run_ch: %.2e (tol 1e-10)", diff));
  });

  criterion("determinism", [&](Verdict& v) {
    app::run_ch_in(bench_cfg, work / "ch_benchmark_repeat");
    app::run_agg_in(agg_cfg, work / "agg_benchmark_repeat", false);
    const bool ch_same = slurp(work / "ch_benchmark" / "diagnostics.csv") == slurp(work / "ch_benchmark_repeat" / "diagnostics.csv");
    const bool agg_same = slurp(work / "agg_benchmark" / "diagnostics.csv") == slurp(work / "agg_benchmark_repeat" / "diagnostics.csv");
    v.check(ch_same, "CH benchmark diagnostics.csv byte-identical");
    v.check(agg_same, "AGG benchmark diagnostics.csv byte-identical");
  });

  std::printf("acceptance: %d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
