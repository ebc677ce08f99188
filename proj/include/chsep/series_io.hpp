#pragma once

// diagnostics.csv: one row per output, reals printed with %.17g so that a
// read-back reproduces the stored doubles exactly.
//
// Cahn-Hilliard columns:
//   step,t,E,mass_mean,grad_mu_l2,max_abs_phi,ctr_ratio,newton_iters
// Coupled runs append:
//   kinetic,E_tot,residual_kinetic,residual_ch,residual_total,
//   splitting_residual,div_max,korn_u_over_Du,korn_grad_over_Du

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chsep/agg.hpp"
#include "chsep/ch_core.hpp"
#include "chsep/diagnostics.hpp"
#include "chsep/error.hpp"

namespace chsep {

inline const std::vector<std::string>& ch_csv_columns() {
  static const std::vector<std::string> c = {"step",        "t",         "E",         "mass_mean",
                                             "grad_mu_l2",  "max_abs_phi", "ctr_ratio", "newton_iters"};
  return c;
}

inline const std::vector<std::string>& agg_csv_columns() {
  static const std::vector<std::string> c = [] {
    std::vector<std::string> v = ch_csv_columns();
    for (const char* s : {"kinetic", "E_tot", "residual_kinetic", "residual_ch", "residual_total", "splitting_residual",
                          "div_max", "korn_u_over_Du", "korn_grad_over_Du"})
      v.push_back(s);
    return v;
  }();
  return c;
}

namespace detail {

inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_header(const std::vector<std::string>& cols) {
  std::string s;
  for (std::size_t k = 0; k < cols.size(); ++k) s += (k ? "," : "") + cols[k];
  return s + "\n";
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "short write on " + path.string());
}

}  // namespace detail

inline std::string ch_csv_row(const DiagnosticsRecord& r) {
  using detail::fmt_real;
  return std::to_string(r.step) + "," + fmt_real(r.t) + "," + fmt_real(r.E) + "," + fmt_real(r.mass_mean) + "," +
         fmt_real(r.grad_mu_l2) + "," + fmt_real(r.max_abs_phi) + "," + fmt_real(r.ctr_ratio) + "," +
         std::to_string(r.newton_iters) + "\n";
}

inline std::string agg_csv_row(const AggRecord& r) {
  using detail::fmt_real;
  return std::to_string(r.step) + "," + fmt_real(r.t) + "," + fmt_real(r.E) + "," + fmt_real(r.mass_mean) + "," +
         fmt_real(r.grad_mu_l2) + "," + fmt_real(r.max_abs_phi) + "," + fmt_real(r.ctr_ratio) + "," +
         std::to_string(r.newton_iters) + "," + fmt_real(r.kinetic) + "," + fmt_real(r.E_tot) + "," +
         fmt_real(r.residual_kinetic) + "," + fmt_real(r.residual_ch) + "," + fmt_real(r.residual_total) + "," +
         fmt_real(r.splitting_residual) + "," + fmt_real(r.div_max) + "," + fmt_real(r.korn.u_over_strain) + "," +
         fmt_real(r.korn.grad_over_strain) + "\n";
}

inline void write_ch_csv(const std::filesystem::path& path, const std::vector<DiagnosticsRecord>& rows) {
  std::string s = detail::join_header(ch_csv_columns());
  for (const auto& r : rows) s += ch_csv_row(r);
  detail::write_file(path, s);
}

inline void write_agg_csv(const std::filesystem::path& path, const std::vector<AggRecord>& rows) {
  std::string s = detail::join_header(agg_csv_columns());
  for (const auto& r : rows) s += agg_csv_row(r);
  detail::write_file(path, s);
}

/// Column-name keyed table of a diagnostics CSV.
struct CsvTable {
  std::vector<std::string> header;
  std::map<std::string, std::vector<double>> columns;

  bool has(const std::string& c) const { return columns.count(c) > 0; }
  const std::vector<double>& at(const std::string& c) const {
    const auto it = columns.find(c);
    if (it == columns.end()) fail(ErrorKind::ParseError, "diagnostics.csv lacks column '" + c + "'");
    return it->second;
  }
  std::size_t rows() const { return columns.empty() ? 0 : columns.begin()->second.size(); }
};

/// Reads the numeric columns named in `wanted` (all columns when empty);
/// other columns may hold text.
inline CsvTable read_csv_columns(const std::filesystem::path& path, const std::vector<std::string>& wanted) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, path.string() + ": empty file");
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) {
    t.header.push_back(c);
    if (wanted.empty() || std::find(wanted.begin(), wanted.end(), c) != wanted.end()) t.columns[c];
  }
  for (const std::string& w : wanted)
    if (!t.columns.count(w)) fail(ErrorKind::ParseError, path.string() + ": missing column '" + w + "'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::size_t k = 0;
    for (std::string cell; std::getline(ls, cell, ','); ++k) {
      if (k >= t.header.size()) fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": too many fields");
      if (!t.columns.count(t.header[k])) continue;
      double v = 0.0;
      const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size())
        fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      t.columns[t.header[k]].push_back(v);
    }
    if (k != t.header.size()) fail(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": too few fields");
  }
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return read_csv_columns(path, {}); }

inline DiagnosticsSeries series_from_csv(const CsvTable& t) {
  for (const std::string& c : ch_csv_columns()) (void)t.at(c);
  DiagnosticsSeries s;
  s.times = t.at("t");
  s.E = t.at("E");
  s.grad_mu_l2 = t.at("grad_mu_l2");
  s.max_abs_phi = t.at("max_abs_phi");
  s.mass_mean = t.at("mass_mean");
  s.ctr_ratio = t.at("ctr_ratio");
  if (t.has("kinetic")) s.kinetic = t.at("kinetic");
  if (t.has("E_tot")) s.E_tot = t.at("E_tot");
  s.validate();
  return s;
}

}  // namespace chsep
