#pragma once

// Subcommand implementations behind the chsep executable. Every command
// writes into its own directory and returns an exit status:
//   0  finished, all required audits passed
//   1  finished, a required audit failed
//   2  error; failure.json {kind, message} written where possible

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "chsep/agg.hpp"
#include "chsep/ch_core.hpp"
#include "chsep/config.hpp"
#include "chsep/diagnostics.hpp"
#include "chsep/error.hpp"
#include "chsep/series_io.hpp"
#include "chsep/snapshot.hpp"
#include "chsep/stationary.hpp"

#ifndef CHSEP_VERSION
#define CHSEP_VERSION "0.1.0"
#endif

namespace chsep::app {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitAuditFailed = 1;
inline constexpr int kExitError = 2;

// Contract tolerances.
inline constexpr double kMassTol = 1e-12;
inline constexpr double kBoundGap = 1e-9;
inline constexpr double kDivTol = 1e-10;
inline constexpr double kKineticDecay = 1e-3;
inline constexpr double kStationaryTol = 1e-10;
inline constexpr double kDistanceTol = 1e-6;
inline constexpr double kMinDelta = 1e-3;
inline constexpr double kMinR2 = 0.9;
inline constexpr double kL1TailTol = 1e-2;
inline constexpr double kCtrGrowth = 100.0;

// ---------------------------------------------------------------------------

class AuditBook {
 public:
  explicit AuditBook(const AuditSettings& s) : settings_(s) {}

  void add(const std::string& name, bool passed, json detail = json::object()) {
    detail["passed"] = passed;
    detail["required"] = settings_.is_required(name);
    entries_[name] = std::move(detail);
    if (!passed && settings_.is_required(name)) required_failed_ = true;
  }

  bool required_passed() const { return !required_failed_; }
  const json& to_json() const { return entries_; }

 private:
  AuditSettings settings_;
  json entries_ = json::object();
  bool required_failed_ = false;
};

inline std::string wall_time() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline void write_json(const fs::path& path, const json& j) {
  detail::write_file(path, j.dump(2) + "\n");
}

inline json read_json(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline json failure_json(ErrorKind kind, const std::string& message) {
  return {{"kind", std::string(to_string(kind))}, {"message", message}};
}

/// Reports a failure on stderr and, when `dir` is usable, in failure.json.
inline int report_failure(const std::optional<fs::path>& dir, ErrorKind kind, const std::string& message) {
  const json j = failure_json(kind, message);
  std::cerr << j.dump() << "\n";
  if (dir) {
    std::error_code ec;
    fs::create_directories(*dir, ec);
    if (!ec) {
      try {
        write_json(*dir / "failure.json", j);
      } catch (const Error&) {
      }
    }
  }
  return kExitError;
}

/// Files written by a command, relative to its directory.
struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  fs::path add(const std::string& rel) {
    files.push_back(rel);
    return dir / rel;
  }
};

inline void write_manifest(Outputs& out, const AppConfig& cfg, const std::string& command, const std::string& start,
                           const std::string& termination) {
  std::vector<std::string> files = out.files;
  files.push_back("manifest.json");
  json m = {{"command", command},
            {"config_hash", config_hash(cfg)},
            {"seed", cfg.ch.seed},
            {"version", CHSEP_VERSION},
            {"start_time", start},
            {"end_time", wall_time()},
            {"termination", termination},
            {"outputs", files},
            {"config", config_to_json(cfg)}};
  write_json(out.dir / "manifest.json", m);
}

inline std::string snapshot_stem(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshots/phi_%09zu", step);
  return buf;
}

inline void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "snapshots", ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// run-ch

struct ChCommandResult {
  int exit_code = kExitOk;
  ChRunResult run;
  json report;
};

inline ChCommandResult run_ch_in(const AppConfig& cfg, const fs::path& dir, bool write_snapshots = true) {
  const std::string start = wall_time();
  prepare_dir(dir);
  Outputs out{dir, {}};
  detail::write_file(out.add("config.ini"), cfg.source_text);

  ChCommandResult res;
  res.run = run_ch(cfg.ch, [&](const ChState& s, const DiagnosticsRecord&) {
    if (write_snapshots) {
      const std::string stem = snapshot_stem(s.step);
      write_snapshot(dir / stem, s.phi, "phi", s.time);
      out.files.push_back(stem + ".bin");
      out.files.push_back(stem + ".json");
    }
  });
  const ChRunResult& r = res.run;
  write_ch_csv(out.add("diagnostics.csv"), r.records);
  write_snapshot(dir / "final_phi", r.final_state.phi, "phi", r.final_state.time);
  out.files.push_back("final_phi.bin");
  out.files.push_back("final_phi.json");

  AuditBook audits(cfg.audit);
  const StepAudit& a = r.audit;
  audits.add("conservation", a.max_mass_drift <= kMassTol, {{"max_mass_drift", a.max_mass_drift}, {"tol", kMassTol}});
  audits.add("dissipation", a.dissipation_violations == 0,
             {{"violations", a.dissipation_violations},
              {"energy_increases", a.energy_increase_violations},
              {"worst_relative_slack", std::isfinite(a.worst_dissipation_slack) ? json(a.worst_dissipation_slack) : json()},
              {"tol", 1e-8}});
  audits.add("bounds", a.max_abs_phi <= 1.0 - kBoundGap, {{"max_abs_phi", a.max_abs_phi}, {"bound", 1.0 - kBoundGap}});
  audits.add("equilibrium", r.termination == Termination::Equilibrium, {{"termination", to_string(r.termination)}});

  res.report = {{"command", "run-ch"},
                {"termination", to_string(r.termination)},
                {"steps", r.final_state.step},
                {"final_time", r.final_state.time},
                {"final_energy", r.records.back().E},
                {"max_newton_iters", a.max_newton_iters},
                {"audits", audits.to_json()}};
  if (r.abort) res.report["failure"] = failure_json(r.abort->kind, r.abort->message);
  write_json(out.add("report.json"), res.report);
  write_manifest(out, cfg, "run-ch", start, to_string(r.termination));

  if (r.abort) {
    res.exit_code = report_failure(dir, r.abort->kind, r.abort->message);
    return res;
  }
  res.exit_code = audits.required_passed() ? kExitOk : kExitAuditFailed;
  return res;
}

// ---------------------------------------------------------------------------
// run-agg

struct AggCommandResult {
  int exit_code = kExitOk;
  AggRunResult run;
  json report;
};

inline AggCommandResult run_agg_in(const AppConfig& cfg, const fs::path& dir, bool write_snapshots = true) {
  if (!cfg.has_fluid) fail(ErrorKind::ValidationError, "run-agg needs a [fluid] section");
  const std::string start = wall_time();
  prepare_dir(dir);
  Outputs out{dir, {}};
  detail::write_file(out.add("config.ini"), cfg.source_text);

  AggCommandResult res;
  res.run = run_agg(cfg.agg(), [&](const AggState& s, const AggRecord&) {
    if (write_snapshots) {
      const std::string stem = snapshot_stem(s.step);
      write_snapshot(dir / stem, s.phi, "phi", s.time);
      out.files.push_back(stem + ".bin");
      out.files.push_back(stem + ".json");
    }
  });
  const AggRunResult& r = res.run;
  write_agg_csv(out.add("diagnostics.csv"), r.records);
  write_snapshot(dir / "final_phi", r.final_state.phi, "phi", r.final_state.time);
  write_snapshot(dir / "final_p", r.final_state.p, "p", r.final_state.time);
  for (const char* f : {"final_phi.bin", "final_phi.json", "final_p.bin", "final_p.json"}) out.files.push_back(f);

  AuditBook audits(cfg.audit);
  const AggAudit& a = r.audit;
  const double tol = r.tol_audit;
  const double ke0 = r.records.front().kinetic, ke1 = r.records.back().kinetic;
  audits.add("conservation", a.max_mass_drift <= kMassTol, {{"max_mass_drift", a.max_mass_drift}, {"tol", kMassTol}});
  audits.add("bounds", a.max_abs_phi <= 1.0 - kBoundGap, {{"max_abs_phi", a.max_abs_phi}, {"bound", 1.0 - kBoundGap}});
  audits.add("divergence", a.max_div <= kDivTol, {{"max_div", a.max_div}, {"tol", kDivTol}});
  audits.add("total_energy", a.min_residual_total >= -tol, {{"min_residual", a.min_residual_total}, {"tol_audit", tol}});
  audits.add("kinetic_budget", a.min_residual_kinetic >= -tol, {{"min_residual", a.min_residual_kinetic}, {"tol_audit", tol}});
  audits.add("ch_budget", a.min_residual_ch >= -tol, {{"min_residual", a.min_residual_ch}, {"tol_audit", tol}});
  audits.add("splitting", a.max_abs_splitting <= tol, {{"max_abs_splitting_residual", a.max_abs_splitting}, {"tol_audit", tol}});
  audits.add("kinetic_decay", ke1 < kKineticDecay * ke0,
             {{"kinetic_initial", ke0}, {"kinetic_final", ke1}, {"factor", kKineticDecay}});
  audits.add("dissipation", a.negative_dissipation == 0 && a.sandwich_violations == 0,
             {{"negative_dissipation", a.negative_dissipation}, {"sandwich_violations", a.sandwich_violations}});
  double max_u_du = 0.0, max_gu_du = 0.0;
  for (const AggRecord& rec : r.records) {
    max_u_du = std::max(max_u_du, rec.korn.u_over_strain);
    max_gu_du = std::max(max_gu_du, rec.korn.grad_over_strain);
  }

  res.report = {{"command", "run-agg"},
                {"termination", to_string(r.termination)},
                {"steps", r.final_state.step},
                {"final_time", r.final_state.time},
                {"tol_audit", tol},
                {"max_cfl", a.max_cfl},
                {"max_relative_flux", a.max_j},
                {"korn", {{"violations", a.korn_violations},
                          {"max_u_over_Du", max_u_du},
                          {"max_grad_over_Du", max_gu_du},
                          {"reference_constant", std::sqrt(2.0)}}},
                {"audits", audits.to_json()}};
  if (r.abort) res.report["failure"] = failure_json(r.abort->kind, r.abort->message);
  write_json(out.add("report.json"), res.report);
  write_manifest(out, cfg, "run-agg", start, to_string(r.termination));

  if (r.abort) {
    res.exit_code = report_failure(dir, r.abort->kind, r.abort->message);
    return res;
  }
  res.exit_code = audits.required_passed() ? kExitOk : kExitAuditFailed;
  return res;
}

// ---------------------------------------------------------------------------
// stationary

/// guess is a snapshot stem or "constant:k".
inline int stationary_in(const AppConfig& cfg, const std::string& guess, double mass, const fs::path& dir) {
  const std::string start = wall_time();
  ScalarField g;
  if (guess.rfind("constant:", 0) == 0) {
    double k = 0.0;
    const std::string v = guess.substr(9);
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
    if (ec != std::errc() || p != v.data() + v.size()) fail(ErrorKind::ParseError, "bad constant guess '" + guess + "'");
    g = ScalarField(cfg.ch.grid, k);
  } else {
    g = read_snapshot(guess).field;
    require_same_grid(cfg.ch.grid, g.grid);
  }
  const StationaryState s = solve_stationary(g, mass, cfg.ch.potential);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string());
  Outputs out{dir, {}};
  write_snapshot(dir / "stationary", s.phi_inf, "phi_inf", 0.0);
  out.files.push_back("stationary.bin");
  out.files.push_back("stationary.json");
  const SecondOrderBound b = second_order_bound(s.phi_inf, cfg.ch.potential);
  write_json(out.add("stationary_report.json"),
             {{"mu_inf", s.mu_inf},
              {"residual", s.residual},
              {"delta_sep", s.delta_sep},
              {"mass", s.mass},
              {"iters", s.iters},
              {"energy", energy(s.phi_inf, cfg.ch.potential)},
              {"lap_l2", b.lap_l2},
              {"grad_l2", b.grad_l2}});
  write_manifest(out, cfg, "stationary", start, "converged");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOverrides {
  std::optional<double> M, T, delta;
};

inline std::vector<TimedField> load_snapshots(const fs::path& dir) {
  std::vector<fs::path> stems;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".json") stems.push_back(e.path());
  std::sort(stems.begin(), stems.end());
  std::vector<TimedField> out;
  for (const fs::path& p : stems) {
    Snapshot s = read_snapshot(p);
    out.push_back({s.time, std::move(s.field)});
  }
  return out;
}

struct DiagnoseResult {
  int exit_code = kExitOk;
  json report;
};

inline DiagnoseResult diagnose_in(const fs::path& run_dir, const DiagnoseOverrides& ov = {}) {
  if (!fs::is_directory(run_dir)) fail(ErrorKind::Io, "run directory " + run_dir.string() + " does not exist");
  const AppConfig cfg = parse_config_text(read_text_file(run_dir / "config.ini"), (run_dir / "config.ini").string(), run_dir);
  const PotentialParams& pot = cfg.ch.potential;
  const DiagnosticsSeries series = series_from_csv(read_csv(run_dir / "diagnostics.csv"));
  json run_report = fs::exists(run_dir / "report.json") ? read_json(run_dir / "report.json") : json::object();
  const std::vector<TimedField> snaps = load_snapshots(run_dir / "snapshots");
  if (snaps.empty()) fail(ErrorKind::InsufficientData, "no snapshots in " + (run_dir / "snapshots").string());
  const ScalarField final_phi = read_snapshot(run_dir / "final_phi").field;

  AuditBook audits(cfg.audit);
  json d = json::object();

  // Refined equilibrium.
  const StationaryState eq = solve_stationary(final_phi, mean(final_phi), pot);
  const double e_inf = energy(eq.phi_inf, pot);
  const double delta1 = eq.delta_sep / 2.0;
  write_snapshot(run_dir / "stationary", eq.phi_inf, "phi_inf", 0.0);
  d["stationary"] = {{"residual", eq.residual}, {"mu_inf", eq.mu_inf}, {"delta_sep", eq.delta_sep},
                     {"delta1", delta1},        {"E_inf", e_inf},       {"iters", eq.iters}};
  const double merit = eq.residual / (1.0 + std::abs(eq.mu_inf));
  audits.add("stationary", merit <= kStationaryTol, {{"relative_residual", merit}, {"tol", kStationaryTol}});

  // Distance to the equilibrium over the last quarter of outputs.
  {
    const std::size_t start = snaps.size() * 3 / 4;
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity(), last = 0.0;
    json dist = json::array();
    for (std::size_t k = start; k < snaps.size(); ++k) {
      const double h1 = distance_to(snaps[k].phi, eq).h1;
      monotone = monotone && h1 <= prev;
      prev = last = h1;
      dist.push_back({snaps[k].time, h1});
    }
    const bool reached = run_report.value("termination", std::string()) == "equilibrium";
    d["convergence"] = {{"termination", run_report.value("termination", std::string("unknown"))},
                        {"h1_last_quarter", dist},
                        {"monotone", monotone},
                        {"final_h1", last}};
    audits.add("convergence", reached && merit <= kStationaryTol && monotone && last < kDistanceTol,
               {{"equilibrium_detected", reached}, {"monotone", monotone}, {"final_h1", last}, {"tol", kDistanceTol}});
  }

  // Good times and separation.
  const GoodTimeDefaults def = default_good_time_params(series);
  const double T = ov.T ? *ov.T : (cfg.diagnose.T ? *cfg.diagnose.T : def.T);
  const double M = ov.M ? *ov.M : (cfg.diagnose.M ? *cfg.diagnose.M : def.M);
  const GoodTimes gt = classify_good_times(series, M, T);
  const double measured = gt.good_idx.empty() ? 0.0 : gt.measured_delta();
  d["good_times"] = {{"M", M},
                     {"T", T},
                     {"M_source", ov.M ? "cli" : (cfg.diagnose.M ? "config" : "default: 2 x median grad_mu_l2 over t >= T")},
                     {"T_source", ov.T ? "cli" : (cfg.diagnose.T ? "config" : "default: t_final / 2")},
                     {"good", gt.good_idx.size()},
                     {"bad", gt.bad_idx.size()},
                     {"sup_max_abs_phi", gt.good_idx.empty() ? json() : json(gt.sup_max_abs_phi)},
                     {"measured_delta", measured}};
  audits.add("separation", !gt.good_idx.empty() && measured >= kMinDelta,
             {{"measured_delta", measured}, {"min_delta", kMinDelta}});

  // Near-pure-phase fraction.
  {
    std::vector<double> frac;
    for (const TimedField& s : snaps) frac.push_back(a_delta_fraction(s.phi, delta1));
    const std::size_t q = std::max<std::size_t>(1, frac.size() / 4);
    const double first_min = *std::min_element(frac.begin(), frac.begin() + static_cast<std::ptrdiff_t>(q));
    const double last_max = *std::max_element(frac.end() - static_cast<std::ptrdiff_t>(q), frac.end());
    d["a_delta"] = {{"delta1", delta1}, {"first_quarter_min", first_min}, {"last_quarter_max", last_max}};
    audits.add("a_delta", last_max <= first_min, {{"first_quarter_min", first_min}, {"last_quarter_max", last_max}});
  }

  // De Giorgi.
  const double level_delta = ov.delta ? *ov.delta : (cfg.diagnose.delta ? *cfg.diagnose.delta : delta1 / 2.0);
  try {
    const DeGiorgiReport dg = degiorgi_audit(snaps, pot, level_delta, M, T, cfg.diagnose.n_max);
    json per = json::array();
    for (const auto& s : dg.snapshots) {
      auto side = [](const DeGiorgiSide& x) {
        return json{{"y_n", x.seq.y_n},
                    {"first_zero", x.first_zero},
                    {"separated", x.separated},
                    {"C_hat", x.C_hat ? json(*x.C_hat) : json()},
                    {"threshold", std::isfinite(x.threshold) ? json(x.threshold) : json()},
                    {"below_threshold", x.below_threshold}};
      };
      per.push_back({{"t", s.time}, {"grad_mu_l2", s.grad_mu_l2}, {"upper", side(s.upper)}, {"lower", side(s.lower)}});
    }
    d["degiorgi"] = {{"delta", level_delta},
                     {"n_max", dg.n_max},
                     {"audited", dg.snapshots.size()},
                     {"skipped", dg.skipped},
                     {"all_reach_zero", dg.all_reach_zero()},
                     {"max_first_zero", dg.max_first_zero()},
                     {"snapshots", per}};
    audits.add("degiorgi", dg.all_reach_zero() && dg.max_first_zero() <= cfg.diagnose.n_max,
               {{"max_first_zero", dg.max_first_zero()}, {"n_max", cfg.diagnose.n_max}});
  } catch (const Error& e) {
    d["degiorgi"] = {{"error", failure_json(e.kind(), e.what())}};
    audits.add("degiorgi", false, {{"error", e.what()}});
  }

  // Lojasiewicz.
  try {
    const LojasiewiczFit f = lojasiewicz_fit(series, gt, e_inf, cfg.diagnose.gap_tol,
                                             static_cast<std::size_t>(cfg.diagnose.min_samples));
    d["lojasiewicz"] = {{"theta_hat", f.theta_hat},
                        {"C_hat", f.C_hat},
                        {"r2", f.r2},
                        {"slope", f.slope},
                        {"used", f.used},
                        {"dropped_nonpositive_gap", f.dropped_nonpositive_gap},
                        {"in_open_range", f.in_open_range},
                        {"in_admitted_range", f.in_admitted_range},
                        {"at_boundary", f.at_boundary},
                        {"E_inf", e_inf}};
    audits.add("lojasiewicz", f.in_admitted_range && f.r2 >= kMinR2,
               {{"theta_hat", f.theta_hat}, {"r2", f.r2}, {"min_r2", kMinR2}});
  } catch (const Error& e) {
    d["lojasiewicz"] = {{"error", failure_json(e.kind(), e.what())}};
    audits.add("lojasiewicz", false, {{"error", e.what()}});
  }

  // Tail integrability.
  try {
    const IntegrabilityResult ir = integrability_check(series, T, cfg.diagnose.alpha, cfg.diagnose.zeta);
    d["integrability"] = {{"t_star", T},
                          {"alpha", cfg.diagnose.alpha},
                          {"zeta", cfg.diagnose.zeta},
                          {"holds_fraction", ir.holds_fraction},
                          {"required_zeta", ir.required_zeta},
                          {"l1_tail", ir.l1_tail},
                          {"samples", ir.samples}};
    audits.add("integrability", ir.l1_tail < kL1TailTol, {{"l1_tail", ir.l1_tail}, {"tol", kL1TailTol}});
  } catch (const Error& e) {
    d["integrability"] = {{"error", failure_json(e.kind(), e.what())}};
    audits.add("integrability", false, {{"error", e.what()}});
  }

  double ctr_max = 0.0;
  for (double c : series.ctr_ratio) ctr_max = std::max(ctr_max, c);
  const double ctr0 = series.ctr_ratio.empty() ? 0.0 : series.ctr_ratio.front();
  d["ctr_ratio"] = {{"initial", ctr0}, {"max", ctr_max}};
  audits.add("ctr", ctr_max <= kCtrGrowth * ctr0, {{"initial", ctr0}, {"max", ctr_max}, {"factor", kCtrGrowth}});
  d["audits"] = audits.to_json();

  run_report["diagnose"] = d;
  write_json(run_dir / "report.json", run_report);
  DiagnoseResult res;
  res.report = run_report;
  res.exit_code = audits.required_passed() ? kExitOk : kExitAuditFailed;
  return res;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  std::size_t index = 0;
  SweepPoint point;
  int exit_code = kExitOk;
  std::string termination;
  std::size_t steps = 0;
  double final_time = 0.0;
  double final_energy = 0.0;
  double max_mass_drift = 0.0;
  double max_abs_phi = 0.0;
  std::size_t dissipation_violations = 0;
  double worst_slack = 0.0;
  std::string error;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  using detail::fmt_real;
  std::string s =
      "run,seed,theta0,mobility_kind,dt,termination,steps,final_time,final_energy,max_mass_drift,max_abs_phi,"
      "dissipation_violations,worst_dissipation_slack,exit_code\n";
  for (const SweepRow& r : rows)
    s += std::to_string(r.index) + "," + std::to_string(r.point.seed) + "," + fmt_real(r.point.theta0) + "," +
         r.point.mobility_kind + "," + fmt_real(r.point.dt) + "," + r.termination + "," + std::to_string(r.steps) + "," +
         fmt_real(r.final_time) + "," + fmt_real(r.final_energy) + "," + fmt_real(r.max_mass_drift) + "," +
         fmt_real(r.max_abs_phi) + "," + std::to_string(r.dissipation_violations) + "," + fmt_real(r.worst_slack) +
         "," + std::to_string(r.exit_code) + "\n";
  return s;
}

struct SweepResult {
  int exit_code = kExitOk;
  std::vector<SweepRow> rows;
};

/// Runs every grid point in dir/run_XXXX with up to `workers` threads. Rows
/// come back in grid order regardless of completion order.
inline SweepResult sweep_in(const AppConfig& base, const std::vector<SweepPoint>& points, unsigned workers,
                            const fs::path& dir, bool write_snapshots = false) {
  const std::string start = wall_time();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string());
  SweepResult res;
  res.rows.resize(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < points.size(); k = next++) {
      SweepRow& row = res.rows[k];
      row.index = k;
      row.point = points[k];
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu", k);
      try {
        const AppConfig cfg = apply_sweep_point(base, points[k]);
        const ChCommandResult r = run_ch_in(cfg, dir / name, write_snapshots);
        row.exit_code = r.exit_code;
        row.termination = to_string(r.run.termination);
        row.steps = r.run.final_state.step;
        row.final_time = r.run.final_state.time;
        row.final_energy = r.run.records.back().E;
        row.max_mass_drift = r.run.audit.max_mass_drift;
        row.max_abs_phi = r.run.audit.max_abs_phi;
        row.dissipation_violations = r.run.audit.dissipation_violations;
        row.worst_slack = r.run.audit.worst_dissipation_slack;
      } catch (const Error& e) {
        row.exit_code = kExitError;
        row.termination = "error";
        row.error = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Outputs out{dir, {}};
  detail::write_file(out.add("summary.csv"), sweep_csv(res.rows));
  for (const SweepRow& r : res.rows) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%04zu/", r.index);
    out.files.push_back(name);
  }
  write_manifest(out, base, "sweep", start, "completed");
  for (const SweepRow& r : res.rows) res.exit_code = std::max(res.exit_code, r.exit_code);
  return res;
}

}  // namespace chsep::app
