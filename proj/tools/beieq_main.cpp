// Command-line driver: run, verify, convergence, energy-report.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "beieq/diagnostics_io.hpp"
#include "beieq/verification.hpp"

namespace fs = std::filesystem;
using namespace beieq;

namespace {

RunConfig standard_config() {
  RunConfig cfg;
  cfg.scheme.grid = GridSpec{32, 32, 1.0, 1.0, Boundary::kDirichlet};
  cfg.scheme.dt = 0.01;
  cfg.scheme.t_end = 1.0;
  return cfg;
}

RunConfig config_or_standard(const std::string& path) { return path.empty() ? standard_config() : load_config(path); }

fs::path resolve(const fs::path& out_dir, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute() || out_dir.empty()) return p;
  return out_dir / p;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  RunConfig cfg = config_or_standard(config_path);
  if (seed) cfg.initial.seed = *seed;
  const fs::path out_dir(out);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const fs::path csv = resolve(out_dir, cfg.output.energy_csv.empty() ? "energy.csv" : cfg.output.energy_csv);
  fs::path snap_dir;
  if (!cfg.output.snapshot_dir.empty() && cfg.output.snapshot_every > 0) {
    snap_dir = resolve(out_dir, cfg.output.snapshot_dir);
    fs::create_directories(snap_dir);
  }
  auto snapshot = [&](const State& s) {
    if (snap_dir.empty() || s.n % cfg.output.snapshot_every != 0) return;
    char name[32];
    std::snprintf(name, sizeof name, "snap_%06d.bin", s.n);
    write_snapshot(snapshot_of(s), snap_dir / name);
  };

  const SchemeConfig& sc = cfg.scheme;
  const InitialData init = make_initial(cfg);
  State s = init_state(init.u0, init.q_in, init.p0, sc);
  EnergyLedger ledger = start_ledger(s, sc);
  snapshot(s);
  const int steps = sc.step_count();
  log_info("run: " + std::to_string(sc.grid.nx) + "x" + std::to_string(sc.grid.ny) + ", dt = " +
           std::to_string(sc.dt) + ", " + std::to_string(steps) + " steps");
  for (int k = 0; k < steps; ++k) {
    const StepDiagnostics d = advance(s, sc, ledger);
    snapshot(s);
    const EnergyRow& row = ledger.rows().back();
    log_debug("step " + std::to_string(s.n) + " E = " + std::to_string(row.E_total) + " residual = " +
              std::to_string(row.ledger_residual) + " iters = " + std::to_string(d.step1.iterations) + "/" +
              std::to_string(d.poisson.iterations));
  }
  write_energy_csv(ledger.rows(), csv);
  std::printf("steps %d\nE0 %.17g\nE_final %.17g\nledger_residual %.3e\nh2_budget %.17g\nenergy_csv %s\n", steps,
              ledger.E0(), ledger.rows().back().E_total, ledger_residual(ledger), h2_budget(ledger),
              csv.string().c_str());
  return 0;
}

int cmd_verify(std::uint64_t seed, int trials) {
  bool ok = true;
  const FuzzReport r = fuzz_identities(seed, trials);
  std::printf("fuzz (seed %llu, %d pointwise / %d field trials)\n", static_cast<unsigned long long>(seed),
              r.pointwise_trials, r.field_trials);
  std::printf("  cancellation_2d     %.3e\n  cancellation_3d     %.3e\n  s_trace             %.3e\n"
              "  p_variational       %.3e\n  skew_vv             %.3e\n  skew_antisym        %.3e\n"
              "  div_grad_duality    %.3e\n  advect_force        %.3e\n  field_cancellation  %.3e\n"
              "  sbp_cells           %.3e\n  sbp_faces           %.3e\n",
              r.cancellation_2d, r.cancellation_3d, r.s_trace, r.p_variational, r.skew_vv, r.skew_antisym,
              r.div_grad_duality, r.advect_force, r.field_cancellation, r.sbp_cells, r.sbp_faces);
  for (const auto& f : fuzz_failures(r)) {
    std::printf("  FAIL %s\n", f.c_str());
    ok = false;
  }

  // Dense oracle on small grids, from a state a few steps into the standard problem.
  for (const Boundary bc : {Boundary::kDirichlet, Boundary::kPeriodic}) {
    for (const double dt : {1e-2, 1.0}) {
      SchemeConfig sc;
      sc.grid = GridSpec{6, 6, 1.0, 1.0, bc};
      sc.dt = dt;
      sc.t_end = 3 * dt;
      const InitialData init = preset_initial(sc.grid, "smooth-modes", 0.1, seed);
      const State s = run_to_end(sc, init);
      const DenseOracleReport d = dense_step1_oracle(s, sc, seed);
      const bool pass = d.relative_difference <= 1e-9 && d.min_eig_sym > 0.0 && d.probe_linearity <= 1e-12;
      ok = ok && pass;
      std::printf("dense oracle %s dt=%g: n=%zu diff=%.3e min_eig_sym=%.6g probe=%.1e %s\n",
                  bc == Boundary::kDirichlet ? "dirichlet" : "periodic", dt, d.unknowns, d.relative_difference,
                  d.min_eig_sym, d.probe_linearity, pass ? "ok" : "FAIL");
    }
  }
  std::printf("%s\n", ok ? "verify: PASS" : "verify: FAIL");
  return ok ? 0 : 1;
}

int cmd_convergence(const std::string& config_path, int levels, const std::string& out) {
  RunConfig cfg;
  if (config_path.empty()) {
    cfg = standard_config();
    cfg.scheme.dt = 0.02;
    cfg.scheme.t_end = 0.5;
  } else {
    cfg = load_config(config_path);
  }
  const InitialData init = make_initial(cfg);
  const ConvergenceReport rep = run_convergence_study(cfg.scheme, init, cfg.scheme.dt, levels);
  std::string text = "dt,error_u,error_Q,error_r,r_equivalence\n";
  char buf[256];
  for (const auto& row : rep.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", row.dt, row.error_u, row.error_Q, row.error_r,
                  row.r_equivalence);
    text += buf;
  }
  std::printf("%s", text.c_str());
  std::printf("reference_dt %.17g\norder_u %.4f\norder_Q %.4f\norder_r %.4f\n", rep.reference_dt, rep.order_u,
              rep.order_Q, rep.order_r);
  if (!out.empty()) {
    fs::create_directories(out);
    write_file_atomic(fs::path(out) / "convergence.csv", text);
  }
  if (!rep.complete) {
    std::fprintf(stderr, "convergence study incomplete: %s\n", rep.message.c_str());
    return 1;
  }
  return 0;
}

int cmd_energy_report(const std::string& csv_path, const std::string& config_path) {
  const std::vector<EnergyRow> rows = read_energy_csv(csv_path);
  if (rows.empty()) {
    std::fprintf(stderr, "%s: no rows\n", csv_path.c_str());
    return 1;
  }
  const double E0 = rows.front().E_total;
  double max_dev = 0.0;
  double max_res = 0.0;
  for (const EnergyRow& r : rows) {
    const double recomputed = row_residual(r, E0);
    max_dev = std::max(max_dev, std::abs(recomputed - r.ledger_residual));
    max_res = std::max(max_res, recomputed);
  }
  bool ok = max_dev <= 1e-12;
  std::printf("rows %zu\nmax_ledger_residual %.3e\nmax_recompute_deviation %.3e\n", rows.size(), max_res, max_dev);

  if (!config_path.empty()) {
    const RunConfig cfg = load_config(config_path);
    EnergyLedger ledger;
    run_to_end(cfg.scheme, make_initial(cfg), &ledger);
    const auto& rerun = ledger.rows();
    double max_rerun = 0.0;
    const bool same_len = rerun.size() == rows.size();
    for (std::size_t k = 0; k < std::min(rerun.size(), rows.size()); ++k) {
      max_rerun = std::max(max_rerun, std::abs(rerun[k].ledger_residual - rows[k].ledger_residual));
    }
    std::printf("rerun_rows %zu\nmax_rerun_deviation %.3e\n", rerun.size(), max_rerun);
    ok = ok && same_len && max_rerun <= 1e-12;
  }
  std::printf("%s\n", ok ? "energy-report: PASS" : "energy-report: FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-tensor liquid-crystal flow simulator (IEQ + projection)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 7;
  int trials = 10000;
  int levels = 3;
  std::string csv;

  auto* run = app.add_subcommand("run", "time-step to t_end, writing the energy CSV and snapshots");
  run->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  auto* run_seed = run->add_option("--seed", seed, "override initial.seed");
  run->add_option("--out", out, "output directory");

  auto* verify = app.add_subcommand("verify", "identity fuzzing and dense-oracle checks");
  verify->add_option("--seed", seed, "RNG seed");
  verify->add_option("--trials", trials, "pointwise trials")->check(CLI::NonNegativeNumber);

  auto* conv = app.add_subcommand("convergence", "temporal self-convergence study");
  conv->add_option("--config", config_path, "JSON config (time.dt is the coarsest step)")->check(CLI::ExistingFile);
  conv->add_option("--levels", levels, "refinement levels")->check(CLI::PositiveNumber);
  conv->add_option("--out", out, "output directory");

  auto* report = app.add_subcommand("energy-report", "audit an energy CSV");
  report->add_option("--csv", csv, "energy CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--config", config_path, "re-run this config and compare")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, out);
    if (*verify) return cmd_verify(seed, trials);
    if (*conv) return cmd_convergence(config_path, levels, out);
    if (*report) return cmd_energy_report(csv, config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
