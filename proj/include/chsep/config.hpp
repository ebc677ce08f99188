#pragma once

// Run configuration: a sectioned key = value text file. Unknown sections and
// keys are parse errors; values out of range are validation errors.
//
//   [grid]      cells (1 or 2 ints), length (1 or 2 reals)
//   [potential] theta, theta0
//   [mobility]  kind = constant | bump | table, m_star, m_sup, table = s:m ...
//   [time]      dt, t_end, output_every, stop_at_equilibrium, eq_grad_tol,
//               eq_rate_tol, eq_window
//   [newton]    tol, max_iter, backtrack, guard_gap
//   [initial]   kind = constant | perturbation | stratified | file, mean,
//               amplitude, file, seed, velocity = rest | vortices,
//               velocity_amplitude
//   [fluid]     rho1, rho2, nu_star, nu_sup, div_tol, cfl_max
//   [diagnose]  M, T, delta, n_max, alpha, zeta, gap_tol, min_samples
//   [audit]     required (audit names), tol_factor

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chsep/agg.hpp"
#include "chsep/ch_core.hpp"
#include "chsep/error.hpp"
#include "chsep/physics.hpp"

namespace chsep {

// ---------------------------------------------------------------------------
// Generic sectioned key-value document

class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static IniDocument parse(const std::string& text, const std::string& source,
                           const std::map<std::string, std::set<std::string>>& schema) {
    IniDocument doc;
    doc.source_ = source;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find_first_of("#;");
      std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') doc.error(line, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!schema.count(section)) doc.error(line, "unknown section [" + section + "]");
        doc.sections_[section];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) doc.error(line, "expected key = value");
      if (section.empty()) doc.error(line, "key outside of any section");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) doc.error(line, "empty key");
      if (!schema.at(section).count(key)) doc.error(line, "unknown key '" + key + "' in [" + section + "]");
      auto& sec = doc.sections_[section];
      if (sec.count(key)) doc.error(line, "duplicate key '" + key + "' in [" + section + "]");
      sec[key] = Entry{value, line};
    }
    return doc;
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  double real(const std::string& sec, const std::string& key, double dflt) const {
    const Entry* e = find(sec, key);
    return e ? parse_real(*e, key) : dflt;
  }

  std::optional<double> optional_real(const std::string& sec, const std::string& key) const {
    const Entry* e = find(sec, key);
    if (!e || e->value == "auto") return std::nullopt;
    return parse_real(*e, key);
  }

  long long integer(const std::string& sec, const std::string& key, long long dflt) const {
    const Entry* e = find(sec, key);
    return e ? parse_integer(*e, key) : dflt;
  }

  bool boolean(const std::string& sec, const std::string& key, bool dflt) const {
    const Entry* e = find(sec, key);
    if (!e) return dflt;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    error(e->line, "'" + key + "' expects true or false, got '" + e->value + "'");
  }

  std::string text(const std::string& sec, const std::string& key, const std::string& dflt) const {
    const Entry* e = find(sec, key);
    return e ? e->value : dflt;
  }

  std::vector<std::string> words(const std::string& sec, const std::string& key) const {
    const Entry* e = find(sec, key);
    if (!e) return {};
    return split_words(e->value);
  }

  int line_of(const std::string& sec, const std::string& key) const {
    const Entry* e = find(sec, key);
    return e ? e->line : 0;
  }

  [[noreturn]] void error(int line, const std::string& what) const {
    fail(ErrorKind::ParseError, source_ + ":" + std::to_string(line) + ": " + what);
  }

  double parse_real(const Entry& e, const std::string& key) const {
    double v = 0.0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    const auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end) error(e.line, "'" + key + "' expects a number, got '" + e.value + "'");
    return v;
  }

  long long parse_integer(const Entry& e, const std::string& key) const {
    long long v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    const auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end) error(e.line, "'" + key + "' expects an integer, got '" + e.value + "'");
    return v;
  }

  static std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Application configuration

inline const std::vector<std::string>& known_audits() {
  static const std::vector<std::string> names = {
      "conservation", "dissipation",  "bounds",     "equilibrium", "divergence",  "kinetic_budget",
      "ch_budget",    "total_energy", "splitting",  "kinetic_decay", "stationary", "convergence",
      "separation",   "a_delta",      "degiorgi",   "lojasiewicz", "integrability", "ctr"};
  return names;
}

struct DiagnoseSettings {
  std::optional<double> M;      // default 2 x median of grad_mu_l2 over t >= T
  std::optional<double> T;      // default t_final / 2
  std::optional<double> delta;  // level-set delta, default delta_sep / 4
  int n_max = 20;
  double alpha = 1.5;
  double zeta = 1.0;
  double gap_tol = 1e-14;
  int min_samples = 5;
};

struct AuditSettings {
  std::vector<std::string> required = {"conservation", "dissipation", "bounds", "divergence", "total_energy"};
  double tol_factor = 1e-3;

  bool is_required(const std::string& name) const {
    return std::find(required.begin(), required.end(), name) != required.end();
  }
};

struct AppConfig {
  ChRunConfig ch;
  bool has_fluid = false;
  FluidParams fluid;
  VelocityInit velocity;
  double div_tol = 1e-12;
  double cfl_max = 0.5;
  DiagnoseSettings diagnose;
  AuditSettings audit;
  std::string source_text;  // verbatim input, copied into run directories

  AggRunConfig agg() const {
    AggRunConfig a;
    a.ch = ch;
    a.fluid = fluid;
    a.velocity = velocity;
    a.div_tol = div_tol;
    a.cfl_max = cfl_max;
    a.audit_factor = audit.tol_factor;
    return a;
  }
};

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"grid", {"cells", "length"}},
      {"potential", {"theta", "theta0"}},
      {"mobility", {"kind", "m_star", "m_sup", "table"}},
      {"time", {"dt", "t_end", "output_every", "stop_at_equilibrium", "eq_grad_tol", "eq_rate_tol", "eq_window"}},
      {"newton", {"tol", "max_iter", "backtrack", "guard_gap"}},
      {"initial", {"kind", "mean", "amplitude", "file", "seed", "velocity", "velocity_amplitude"}},
      {"fluid", {"rho1", "rho2", "nu_star", "nu_sup", "div_tol", "cfl_max"}},
      {"diagnose", {"M", "T", "delta", "n_max", "alpha", "zeta", "gap_tol", "min_samples"}},
      {"audit", {"required", "tol_factor"}},
  };
  return s;
}

namespace detail {

inline std::vector<double> reals(const IniDocument& d, const std::string& sec, const std::string& key) {
  std::vector<double> out;
  for (const std::string& w : d.words(sec, key)) out.push_back(d.parse_real({w, d.line_of(sec, key)}, key));
  return out;
}

/// Rethrows library validation failures as ValidationError with the line.
template <class Fn>
auto validated(const std::string& where, int line, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    fail(ErrorKind::ValidationError, where + (line ? " (line " + std::to_string(line) + ")" : std::string()) +
                                         ": " + e.what());
  }
}

}  // namespace detail

/// Parses and validates a configuration. Relative `file` paths resolve
/// against `base_dir`.
inline AppConfig parse_config_text(const std::string& text, const std::string& source,
                                   const std::filesystem::path& base_dir = {}) {
  const IniDocument d = IniDocument::parse(text, source, config_schema());
  AppConfig c;
  c.source_text = text;

  // [grid]
  std::vector<long long> cells;
  for (const std::string& w : d.words("grid", "cells"))
    cells.push_back(d.parse_integer({w, d.line_of("grid", "cells")}, "cells"));
  if (cells.empty()) fail(ErrorKind::ValidationError, source + ": [grid] cells is required");
  if (cells.size() > 2) d.error(d.line_of("grid", "cells"), "cells takes one or two integers");
  std::vector<double> len = detail::reals(d, "grid", "length");
  if (len.empty()) len.assign(cells.size(), 1.0);
  if (len.size() != cells.size()) d.error(d.line_of("grid", "length"), "length must have one entry per axis");
  c.ch.grid = cells.size() == 1 ? GridSpec::line(static_cast<int>(cells[0]), len[0])
                                : GridSpec::box(static_cast<int>(cells[0]), static_cast<int>(cells[1]), len[0], len[1]);
  detail::validated("[grid]", d.line_of("grid", "cells"), [&] { c.ch.grid.validate(); return 0; });

  // [potential]
  c.ch.potential.theta = d.real("potential", "theta", 1.0);
  c.ch.potential.theta0 = d.real("potential", "theta0", 4.0);
  detail::validated("[potential]", d.line_of("potential", "theta0"), [&] { c.ch.potential.validate(); return 0; });

  // [mobility]
  const std::string kind = d.text("mobility", "kind", "bump");
  const int mline = d.line_of("mobility", "kind");
  c.ch.mobility = detail::validated("[mobility]", mline, [&] {
    if (kind == "constant") return MobilitySpec::constant(d.real("mobility", "m_star", 1.0));
    if (kind == "bump") return MobilitySpec::quadratic_bump(d.real("mobility", "m_star", 0.1), d.real("mobility", "m_sup", 1.0));
    if (kind == "table") {
      std::vector<std::pair<double, double>> nodes;
      for (const std::string& w : d.words("mobility", "table")) {
        const auto colon = w.find(':');
        if (colon == std::string::npos) d.error(d.line_of("mobility", "table"), "table entries are s:m pairs");
        const int tl = d.line_of("mobility", "table");
        nodes.emplace_back(d.parse_real({w.substr(0, colon), tl}, "table"), d.parse_real({w.substr(colon + 1), tl}, "table"));
      }
      return MobilitySpec::table(std::move(nodes));
    }
    d.error(mline, "mobility kind must be constant, bump or table");
  });

  // [time]
  c.ch.dt = d.real("time", "dt", 1e-3);
  c.ch.t_end = d.real("time", "t_end", 1.0);
  c.ch.output_every = static_cast<int>(d.integer("time", "output_every", 1));
  c.ch.stop_at_equilibrium = d.boolean("time", "stop_at_equilibrium", true);
  c.ch.eq_grad_tol = d.real("time", "eq_grad_tol", 1e-8);
  c.ch.eq_rate_tol = d.real("time", "eq_rate_tol", 1e-8);
  c.ch.eq_window = static_cast<int>(d.integer("time", "eq_window", 5));

  // [newton]
  c.ch.newton.tol = d.real("newton", "tol", 1e-10);
  c.ch.newton.max_iter = static_cast<int>(d.integer("newton", "max_iter", 50));
  c.ch.newton.backtrack = d.real("newton", "backtrack", 0.5);
  c.ch.newton.guard_gap = d.real("newton", "guard_gap", 1e-9);

  // [initial]
  const std::string ik = d.text("initial", "kind", "perturbation");
  using IK = InitialCondition::Kind;
  if (ik == "constant") c.ch.initial.kind = IK::Constant;
  else if (ik == "perturbation") c.ch.initial.kind = IK::Perturbation;
  else if (ik == "stratified") c.ch.initial.kind = IK::Stratified;
  else if (ik == "file") c.ch.initial.kind = IK::File;
  else d.error(d.line_of("initial", "kind"), "initial kind must be constant, perturbation, stratified or file");
  c.ch.initial.mean = d.real("initial", "mean", 0.0);
  c.ch.initial.amplitude = d.real("initial", "amplitude", ik == "constant" ? 0.0 : 0.1);
  if (const auto* f = d.find("initial", "file")) {
    std::filesystem::path p = f->value;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.ch.initial.file = p.string();
  }
  if (c.ch.initial.kind == IK::File && c.ch.initial.file.empty())
    fail(ErrorKind::ValidationError, source + ": initial kind = file needs a file key");
  const long long seed = d.integer("initial", "seed", 1);
  if (seed < 0) d.error(d.line_of("initial", "seed"), "seed must be non-negative");
  c.ch.seed = static_cast<std::uint64_t>(seed);
  const std::string vk = d.text("initial", "velocity", "rest");
  if (vk == "rest") c.velocity.kind = VelocityInit::Kind::Rest;
  else if (vk == "vortices") c.velocity.kind = VelocityInit::Kind::Vortices;
  else d.error(d.line_of("initial", "velocity"), "velocity must be rest or vortices");
  c.velocity.amplitude = d.real("initial", "velocity_amplitude", vk == "vortices" ? 1.0 : 0.0);
  detail::validated("[time]/[newton]/[initial]", 0, [&] { c.ch.validate(); return 0; });

  // [fluid]
  c.has_fluid = d.has_section("fluid");
  c.fluid.rho1 = d.real("fluid", "rho1", 1.0);
  c.fluid.rho2 = d.real("fluid", "rho2", 1.0);
  c.fluid.nu_star = d.real("fluid", "nu_star", 1.0);
  c.fluid.nu_sup = d.real("fluid", "nu_sup", c.fluid.nu_star);
  c.div_tol = d.real("fluid", "div_tol", 1e-12);
  c.cfl_max = d.real("fluid", "cfl_max", 0.5);
  detail::validated("[fluid]", d.line_of("fluid", "rho1"), [&] { c.fluid.validate(); return 0; });

  // [diagnose]
  c.diagnose.M = d.optional_real("diagnose", "M");
  c.diagnose.T = d.optional_real("diagnose", "T");
  c.diagnose.delta = d.optional_real("diagnose", "delta");
  c.diagnose.n_max = static_cast<int>(d.integer("diagnose", "n_max", 20));
  c.diagnose.alpha = d.real("diagnose", "alpha", 1.5);
  c.diagnose.zeta = d.real("diagnose", "zeta", 1.0);
  c.diagnose.gap_tol = d.real("diagnose", "gap_tol", 1e-14);
  c.diagnose.min_samples = static_cast<int>(d.integer("diagnose", "min_samples", 5));
  if (c.diagnose.n_max < 1 || c.diagnose.min_samples < 2 || !(c.diagnose.alpha > 1.0) || !(c.diagnose.zeta > 0.0))
    fail(ErrorKind::ValidationError, source + ": [diagnose] needs n_max >= 1, min_samples >= 2, alpha > 1, zeta > 0");

  // [audit]
  if (d.find("audit", "required")) {
    c.audit.required = d.words("audit", "required");
    for (const std::string& r : c.audit.required)
      if (std::find(known_audits().begin(), known_audits().end(), r) == known_audits().end())
        d.error(d.line_of("audit", "required"), "unknown audit '" + r + "'");
  }
  c.audit.tol_factor = d.real("audit", "tol_factor", 1e-3);
  if (c.has_fluid) detail::validated("[fluid]", 0, [&] { c.agg().validate(); return 0; });
  return c;
}

inline AppConfig parse_config(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Echo and hash

inline nlohmann::json config_to_json(const AppConfig& c) {
  using nlohmann::json;
  json j;
  j["grid"] = grid_to_json(c.ch.grid);
  j["potential"] = {{"theta", c.ch.potential.theta}, {"theta0", c.ch.potential.theta0}};
  json mob = {{"kind", c.ch.mobility.kind_name()}, {"m_star", c.ch.mobility.m_star()}, {"m_sup", c.ch.mobility.m_sup()}};
  if (c.ch.mobility.kind() == MobilitySpec::Kind::Table) {
    json t = json::array();
    for (const auto& [s, m] : c.ch.mobility.nodes()) t.push_back({s, m});
    mob["table"] = t;
  }
  j["mobility"] = mob;
  j["time"] = {{"dt", c.ch.dt},
               {"t_end", c.ch.t_end},
               {"output_every", c.ch.output_every},
               {"stop_at_equilibrium", c.ch.stop_at_equilibrium},
               {"eq_grad_tol", c.ch.eq_grad_tol},
               {"eq_rate_tol", c.ch.eq_rate_tol},
               {"eq_window", c.ch.eq_window}};
  j["newton"] = {{"tol", c.ch.newton.tol},
                 {"max_iter", c.ch.newton.max_iter},
                 {"backtrack", c.ch.newton.backtrack},
                 {"guard_gap", c.ch.newton.guard_gap}};
  static const char* kinds[] = {"constant", "perturbation", "stratified", "file"};
  j["initial"] = {{"kind", kinds[static_cast<int>(c.ch.initial.kind)]},
                  {"mean", c.ch.initial.mean},
                  {"amplitude", c.ch.initial.amplitude},
                  {"file", c.ch.initial.file},
                  {"seed", c.ch.seed},
                  {"velocity", c.velocity.kind == VelocityInit::Kind::Rest ? "rest" : "vortices"},
                  {"velocity_amplitude", c.velocity.amplitude}};
  if (c.has_fluid)
    j["fluid"] = {{"rho1", c.fluid.rho1},       {"rho2", c.fluid.rho2},     {"nu_star", c.fluid.nu_star},
                  {"nu_sup", c.fluid.nu_sup},   {"div_tol", c.div_tol},     {"cfl_max", c.cfl_max}};
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json("auto"); };
  j["diagnose"] = {{"M", opt(c.diagnose.M)},         {"T", opt(c.diagnose.T)},
                   {"delta", opt(c.diagnose.delta)}, {"n_max", c.diagnose.n_max},
                   {"alpha", c.diagnose.alpha},      {"zeta", c.diagnose.zeta},
                   {"gap_tol", c.diagnose.gap_tol},  {"min_samples", c.diagnose.min_samples}};
  j["audit"] = {{"required", c.audit.required}, {"tol_factor", c.audit.tol_factor}};
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the effective configuration (defaults filled, seed included).
inline std::string config_hash(const AppConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Sweep grids: [sweep] seed, theta0, mobility_kind, dt. Seeds accept a..b.

struct SweepPoint {
  std::uint64_t seed = 1;
  double theta0 = 4.0;
  std::string mobility_kind;
  double dt = 1e-3;
};

inline std::vector<SweepPoint> parse_sweep_text(const std::string& text, const std::string& source, const AppConfig& base) {
  const IniDocument d = IniDocument::parse(text, source, {{"sweep", {"seed", "theta0", "mobility_kind", "dt"}}});
  std::vector<std::uint64_t> seeds;
  const int sl = d.line_of("sweep", "seed");
  for (const std::string& w : d.words("sweep", "seed")) {
    const auto dots = w.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(static_cast<std::uint64_t>(d.parse_integer({w, sl}, "seed")));
    } else {
      const long long a = d.parse_integer({w.substr(0, dots), sl}, "seed");
      const long long b = d.parse_integer({w.substr(dots + 2), sl}, "seed");
      if (a < 0 || b < a) d.error(sl, "seed range must satisfy 0 <= a <= b");
      for (long long s = a; s <= b; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (seeds.empty()) seeds.push_back(base.ch.seed);
  std::vector<double> theta0 = detail::reals(d, "sweep", "theta0");
  if (theta0.empty()) theta0.push_back(base.ch.potential.theta0);
  std::vector<std::string> kinds = d.words("sweep", "mobility_kind");
  if (kinds.empty()) kinds.push_back(base.ch.mobility.kind_name());
  for (const std::string& k : kinds)
    if (k != "constant" && k != "bump" && k != "table")
      d.error(d.line_of("sweep", "mobility_kind"), "mobility_kind must be constant, bump or table");
  std::vector<double> dts = detail::reals(d, "sweep", "dt");
  if (dts.empty()) dts.push_back(base.ch.dt);

  std::vector<SweepPoint> out;
  for (double th : theta0)
    for (const std::string& k : kinds)
      for (double dt : dts)
        for (std::uint64_t s : seeds) out.push_back({s, th, k, dt});
  return out;
}

/// Sets `key` in `section` of INI text, replacing an existing assignment or
/// appending one (and the section header) when absent.
inline std::string set_ini_value(const std::string& text, const std::string& section, const std::string& key,
                                 const std::string& value) {
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
  };
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  std::string current;
  std::ptrdiff_t header = -1, end_of_section = -1;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto hash = lines[i].find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? lines[i] : lines[i].substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      current = trim(s.substr(1, s.size() - 2));
      if (current == section) header = static_cast<std::ptrdiff_t>(i);
      continue;
    }
    if (current != section) continue;
    end_of_section = static_cast<std::ptrdiff_t>(i);
    const auto eq = s.find('=');
    if (eq != std::string::npos && trim(s.substr(0, eq)) == key) lines[i] = key + " = " + value;
    else continue;
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
  }
  const std::string entry = key + " = " + value;
  if (header < 0) {
    lines.push_back("");
    lines.push_back("[" + section + "]");
    lines.push_back(entry);
  } else {
    lines.insert(lines.begin() + std::max(header, end_of_section) + 1, entry);
  }
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

/// Applies a sweep point to a copy of the base configuration; the copied
/// source text carries the overrides so a run directory reparses to the
/// same configuration.
inline AppConfig apply_sweep_point(const AppConfig& base, const SweepPoint& p) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  AppConfig c = base;
  c.source_text = set_ini_value(c.source_text, "initial", "seed", std::to_string(p.seed));
  c.source_text = set_ini_value(c.source_text, "potential", "theta0", num(p.theta0));
  c.source_text = set_ini_value(c.source_text, "time", "dt", num(p.dt));
  c.ch.seed = p.seed;
  c.ch.potential.theta0 = p.theta0;
  c.ch.dt = p.dt;
  if (p.mobility_kind != c.ch.mobility.kind_name()) {
    if (p.mobility_kind == "constant") {
      c.ch.mobility = MobilitySpec::constant(c.ch.mobility.m_sup());
      c.source_text = set_ini_value(c.source_text, "mobility", "m_star", num(c.ch.mobility.m_star()));
    } else if (p.mobility_kind == "bump") {
      c.ch.mobility = MobilitySpec::quadratic_bump(c.ch.mobility.m_star(), std::max(c.ch.mobility.m_sup(), c.ch.mobility.m_star()));
      c.source_text = set_ini_value(c.source_text, "mobility", "m_star", num(c.ch.mobility.m_star()));
      c.source_text = set_ini_value(c.source_text, "mobility", "m_sup", num(c.ch.mobility.m_sup()));
    } else {
      fail(ErrorKind::ValidationError, "sweep cannot switch to a table mobility without nodes");
    }
    c.source_text = set_ini_value(c.source_text, "mobility", "kind", p.mobility_kind);
  }
  try {
    c.ch.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ValidationError, std::string("sweep point: ") + e.what());
  }
  return c;
}

}  // namespace chsep
