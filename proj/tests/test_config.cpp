#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "chsep/config.hpp"
#include "chsep/series_io.hpp"

using namespace chsep;

namespace {

const char* kMinimal = R"(
[grid]
cells = 128

[potential]
theta = 1
theta0 = 4

[time]
dt = 1e-3
)";

Error error_of(const std::string& text) {
  try {
    parse_config_text(text, "test.ini");
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error";
  return Error(ErrorKind::Io, "none");
}

}  // namespace

TEST(Config, MinimalParsesAndEchoesDefaults) {
  const AppConfig c = parse_config_text(kMinimal, "min.ini");
  EXPECT_EQ(c.ch.grid.cells[0], 128);
  EXPECT_DOUBLE_EQ(c.ch.potential.theta, 1.0);
  EXPECT_DOUBLE_EQ(c.ch.potential.theta0, 4.0);
  const nlohmann::json j = config_to_json(c);
  EXPECT_EQ(j["mobility"]["kind"], "bump");
  EXPECT_DOUBLE_EQ(j["mobility"]["m_star"].get<double>(), 0.1);
  EXPECT_DOUBLE_EQ(j["newton"]["tol"].get<double>(), 1e-10);
  EXPECT_EQ(j["newton"]["max_iter"], 50);
  EXPECT_DOUBLE_EQ(j["newton"]["backtrack"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["newton"]["guard_gap"].get<double>(), 1e-9);
  EXPECT_EQ(j["time"]["eq_window"], 5);
  EXPECT_DOUBLE_EQ(j["time"]["eq_grad_tol"].get<double>(), 1e-8);
  EXPECT_EQ(j["initial"]["kind"], "perturbation");
  EXPECT_EQ(j["initial"]["seed"], 1);
  EXPECT_EQ(j["diagnose"]["M"], "auto");
  EXPECT_EQ(j["diagnose"]["n_max"], 20);
  EXPECT_FALSE(j.contains("fluid"));
  for (const char* sec : {"grid", "potential", "mobility", "time", "newton", "initial", "diagnose", "audit"})
    EXPECT_TRUE(j.contains(sec)) << sec;
}

TEST(Config, ThetaNotBelowTheta0IsValidationError) {
  const Error e = error_of("[grid]\ncells = 16\n[potential]\ntheta = 4\ntheta0 = 4\n");
  EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
  EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos);
}

TEST(Config, ZeroMobilityFloorIsValidationError) {
  const Error e = error_of("[grid]\ncells = 16\n[mobility]\nkind = bump\nm_star = 0\nm_sup = 1\n");
  EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
}

TEST(Config, UnknownKeyReportsLine) {
  const Error e = error_of("[grid]\ncells = 16\n\n[time]\ndt = 1e-3\nbogus = 2\n");
  EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  EXPECT_NE(std::string(e.what()).find("test.ini:6"), std::string::npos) << e.what();
}

TEST(Config, UnknownSectionAndDuplicateKey) {
  EXPECT_EQ(error_of("[grid]\ncells = 16\n[extra]\nx = 1\n").kind(), ErrorKind::ParseError);
  const Error d = error_of("[grid]\ncells = 16\ncells = 32\n");
  EXPECT_EQ(d.kind(), ErrorKind::ParseError);
  EXPECT_NE(std::string(d.what()).find("test.ini:3"), std::string::npos) << d.what();
}

TEST(Config, BadNumberIsParseError) {
  EXPECT_EQ(error_of("[grid]\ncells = 16\n[time]\ndt = fast\n").kind(), ErrorKind::ParseError);
}

TEST(Config, UnknownAuditRejected) {
  EXPECT_EQ(error_of("[grid]\ncells = 16\n[audit]\nrequired = conservation, nonsense\n").kind(), ErrorKind::ParseError);
}

TEST(Config, HashIsStableAndSensitive) {
  const AppConfig a = parse_config_text(kMinimal, "a.ini");
  const AppConfig b = parse_config_text(std::string("# comment\n") + kMinimal, "b.ini");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  AppConfig c = a;
  c.ch.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Config, FluidSectionBuildsCoupledConfig) {
  const AppConfig c = parse_config_text(
      "[grid]\ncells = 8, 8\nlength = 2, 2\n[fluid]\nrho1 = 3\nrho2 = 1\nnu_star = 0.2\nnu_sup = 0.5\n"
      "[initial]\nkind = stratified\nvelocity = vortices\n",
      "f.ini");
  ASSERT_TRUE(c.has_fluid);
  const AggRunConfig a = c.agg();
  EXPECT_DOUBLE_EQ(a.fluid.rho1, 3.0);
  EXPECT_EQ(a.velocity.kind, VelocityInit::Kind::Vortices);
  EXPECT_DOUBLE_EQ(a.velocity.amplitude, 1.0);
  EXPECT_DOUBLE_EQ(a.div_tol, 1e-12);
}

TEST(Config, FluidOn1DIsValidationError) {
  EXPECT_EQ(error_of("[grid]\ncells = 16\n[fluid]\nrho1 = 1\n").kind(), ErrorKind::ValidationError);
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& e : std::filesystem::directory_iterator(CHSEP_CONFIG_DIR)) {
    if (e.path().filename().string().rfind("sweep_", 0) == 0) continue;
    EXPECT_NO_THROW(parse_config(e.path())) << e.path();
  }
}

TEST(Sweep, CartesianProductAndRanges) {
  const AppConfig base = parse_config_text(kMinimal, "base.ini");
  const auto pts = parse_sweep_text("[sweep]\nseed = 1..3, 7\ntheta0 = 3, 4\nmobility_kind = constant, bump\n", "s.ini", base);
  EXPECT_EQ(pts.size(), 4u * 2u * 2u);
  const auto seeds = parse_sweep_text("[sweep]\nseed = 1..3\n", "s.ini", base);
  ASSERT_EQ(seeds.size(), 3u);
  EXPECT_EQ(seeds[2].seed, 3u);
  EXPECT_DOUBLE_EQ(seeds[2].dt, base.ch.dt);
}

TEST(Sweep, AppliedPointReparsesIdentically) {
  const AppConfig base = parse_config_text(kMinimal, "base.ini");
  const AppConfig c = apply_sweep_point(base, {9, 3.5, "constant", 5e-4});
  const AppConfig r = parse_config_text(c.source_text, "again.ini");
  EXPECT_EQ(config_hash(c), config_hash(r));
  EXPECT_EQ(r.ch.seed, 9u);
  EXPECT_EQ(r.ch.mobility.kind_name(), "constant");
}

TEST(Sweep, BadRangeIsParseError) {
  const AppConfig base = parse_config_text(kMinimal, "base.ini");
  EXPECT_THROW(parse_sweep_text("[sweep]\nseed = 5..2\n", "s.ini", base), Error);
}

TEST(SeriesIo, CsvRoundTripIsExact) {
  std::vector<DiagnosticsRecord> rows;
  for (int k = 0; k < 4; ++k)
    rows.push_back({static_cast<std::size_t>(10 * k), 0.1 * k + 1e-17, std::exp(-k) / 3.0, 1e-17 * k, 0.3 / (k + 1),
                    0.9 - 0.01 * k, 2.0 + k, k + 1, 0.0});
  const auto path = std::filesystem::temp_directory_path() / "chsep_series_io.csv";
  write_ch_csv(path, rows);
  const CsvTable t = read_csv(path);
  ASSERT_EQ(t.rows(), rows.size());
  EXPECT_EQ(t.header, ch_csv_columns());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(t.at("t")[k], rows[k].t);
    EXPECT_EQ(t.at("E")[k], rows[k].E);
    EXPECT_EQ(t.at("grad_mu_l2")[k], rows[k].grad_mu_l2);
  }
  const DiagnosticsSeries s = series_from_csv(t);
  EXPECT_EQ(s.size(), rows.size());
  std::filesystem::remove(path);
}

TEST(SeriesIo, TruncatedCsvIsParseError) {
  const auto path = std::filesystem::temp_directory_path() / "chsep_truncated.csv";
  detail::write_file(path, "step,t,E\n0,0.0\n");
  try {
    read_csv(path);
    ADD_FAILURE() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
  std::filesystem::remove(path);
  EXPECT_EQ([&] {
    try {
      read_csv(path);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ParseError;
  }(), ErrorKind::Io);
}
