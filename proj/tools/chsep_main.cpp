// chsep: command-line front end.
//
//   chsep run-ch     --config F [--seed S] [--out DIR]
//   chsep run-agg    --config F [--seed S] [--out DIR]
//   chsep stationary --config F --guess G --mass K [--out DIR]
//   chsep diagnose   --run DIR [--M x] [--T x] [--delta x]
//   chsep sweep      --config F --grid G [--workers W] [--out DIR]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chsep/chsep.hpp"

namespace {

namespace fs = std::filesystem;
using namespace chsep;

std::string default_out(const std::string& config, const std::string& tag, std::uint64_t seed) {
  return "runs/" + fs::path(config).stem().string() + "_" + tag + "_s" + std::to_string(seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Cahn-Hilliard separation solver and diagnostics"};
  cli.set_version_flag("--version", CHSEP_VERSION);
  cli.require_subcommand(1);

  std::string config, out, guess, run_dir, grid;
  std::optional<std::uint64_t> seed;
  std::optional<double> M, T, delta;
  double mass = 0.0;
  unsigned workers = 1;

  auto* run_ch = cli.add_subcommand("run-ch", "Cahn-Hilliard run");
  auto* run_agg = cli.add_subcommand("run-agg", "coupled Cahn-Hilliard / Navier-Stokes run");
  for (auto* sc : {run_ch, run_agg}) {
    sc->add_option("--config", config, "configuration file")->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", seed, "override [initial] seed");
    sc->add_option("--out", out, "output directory");
  }
  auto* stat = cli.add_subcommand("stationary", "solve the stationary problem at fixed mass");
  stat->add_option("--config", config, "configuration file")->required()->check(CLI::ExistingFile);
  stat->add_option("--guess", guess, "snapshot stem or constant:k")->required();
  stat->add_option("--mass", mass, "mean value of phi")->required();
  stat->add_option("--out", out, "output directory");
  auto* diag = cli.add_subcommand("diagnose", "separation diagnostics on a finished run");
  diag->add_option("--run", run_dir, "run directory")->required();
  diag->add_option("--M", M, "good-time threshold on ||grad mu||");
  diag->add_option("--T", T, "good-time window start");
  diag->add_option("--delta", delta, "level-set delta");
  auto* sweep = cli.add_subcommand("sweep", "Cahn-Hilliard parameter sweep");
  sweep->add_option("--config", config, "base configuration")->required()->check(CLI::ExistingFile);
  sweep->add_option("--grid", grid, "sweep grid file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "output directory");

  CLI11_PARSE(cli, argc, argv);

  std::optional<fs::path> failure_dir;
  if (!out.empty()) failure_dir = out;
  try {
    if (*run_ch || *run_agg) {
      AppConfig cfg = parse_config(config);
      if (seed) {
        cfg.ch.seed = *seed;
        cfg.source_text = set_ini_value(cfg.source_text, "initial", "seed", std::to_string(*seed));
      }
      if (out.empty()) out = default_out(config, *run_ch ? "ch" : "agg", cfg.ch.seed);
      failure_dir = out;
      return *run_ch ? app::run_ch_in(cfg, out).exit_code : app::run_agg_in(cfg, out).exit_code;
    }
    if (*stat) {
      const AppConfig cfg = parse_config(config);
      if (out.empty()) out = "runs/" + fs::path(config).stem().string() + "_stationary";
      failure_dir = out;
      return app::stationary_in(cfg, guess, mass, out);
    }
    if (*diag) {
      if (fs::is_directory(run_dir)) failure_dir = run_dir;
      const app::DiagnoseResult r = app::diagnose_in(run_dir, {M, T, delta});
      std::cout << r.report["diagnose"]["audits"].dump(2) << "\n";
      return r.exit_code;
    }
    if (*sweep) {
      const AppConfig base = parse_config(config);
      const auto points = parse_sweep_text(read_text_file(grid), grid, base);
      if (out.empty()) out = "runs/" + fs::path(grid).stem().string();
      failure_dir = out;
      return app::sweep_in(base, points, workers, out).exit_code;
    }
  } catch (const Error& e) {
    return app::report_failure(failure_dir, e.kind(), e.what());
  } catch (const std::exception& e) {
    return app::report_failure(failure_dir, ErrorKind::Io, e.what());
  }
  return app::kExitError;
}
