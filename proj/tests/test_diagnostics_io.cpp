#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beieq/diagnostics_io.hpp"
#include "doctest.h"

using namespace beieq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path = fs::temp_directory_path() / ("beieq_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::vector<EnergyRow> short_run(int steps, std::uint64_t seed = 0) {
  RunConfig cfg;
  cfg.scheme.grid = GridSpec{8, 8, 1.0, 1.0, Boundary::kDirichlet};
  cfg.scheme.dt = 0.05;
  cfg.scheme.t_end = steps * 0.05;
  cfg.initial.preset = "random-perturbation";
  cfg.initial.seed = seed;
  EnergyLedger ledger;
  run_to_end(cfg.scheme, make_initial(cfg), &ledger);
  return ledger.rows();
}

}  // namespace

TEST_SUITE("diagnostics_io") {
  TEST_CASE("minimal config takes defaults") {
    const RunConfig cfg = parse_config(R"({"grid": {"nx": 8, "ny": 8}, "time": {"dt": 0.1, "t_end": 1.0}})");
    CHECK(cfg.scheme.grid.nx == 8);
    CHECK(cfg.scheme.grid.bc == Boundary::kDirichlet);
    CHECK(cfg.scheme.params.a == -0.2);
    CHECK(cfg.scheme.params.A0 == MaterialParams::default_A0(-0.2, 1.0));
    CHECK(cfg.scheme.solver.tol == 1e-11);
    CHECK(cfg.scheme.layout == TensorLayout::kSymTraceless);
    CHECK(cfg.initial.preset == "smooth-modes");
    CHECK(cfg.scheme.step_count() == 10);
  }

  TEST_CASE("config errors name the field") {
    const std::string a0 = error_of(R"({"params": {"a": -2.0, "c": 1.0, "A0": 0.5}})");
    CHECK(a0.rfind("params.A0", 0) == 0);
    CHECK(a0.find("a^2/(4c)") != std::string::npos);
    CHECK(error_of(R"({"grid": {"nx": 8, "nz": 3}})").rfind("grid.nz: unknown key", 0) == 0);
    CHECK(error_of(R"({"bogus": 1})").rfind("bogus: unknown key", 0) == 0);
    CHECK(error_of(R"({"time": {"dt": -1}})").rfind("time.dt", 0) == 0);
    CHECK(error_of(R"({"grid": {"bc": "neumann"}})").rfind("grid.bc", 0) == 0);
    CHECK(error_of(R"({"grid": {"nx": 2}})").rfind("grid.nx", 0) == 0);
    CHECK(error_of(R"({"grid": {"nx": "eight"}})").rfind("grid.nx", 0) == 0);
    CHECK(error_of("{not json").rfind("config", 0) == 0);
  }

  TEST_CASE("config round trip") {
    RunConfig cfg;
    cfg.scheme.grid = GridSpec{12, 10, 2.0, 1.5, Boundary::kPeriodic};
    cfg.scheme.params.xi = -0.3;
    cfg.scheme.params.A0 = 2.5;
    cfg.scheme.dt = 0.125;
    cfg.scheme.t_end = 3.0;
    cfg.scheme.solver.tol = 1e-10;
    cfg.scheme.layout = TensorLayout::kFull;
    cfg.initial.preset = "random-perturbation";
    cfg.initial.seed = 12345678901234ull;
    cfg.initial.amplitude = 0.01;
    cfg.output.energy_csv = "e.csv";
    cfg.output.snapshot_dir = "snaps";
    cfg.output.snapshot_every = 5;
    CHECK(parse_config(dump_config(cfg)) == cfg);

    TempDir dir;
    save_config(cfg, dir.path / "cfg.json");
    CHECK(load_config(dir.path / "cfg.json") == cfg);
    CHECK_THROWS_AS(load_config(dir.path / "missing.json"), IoError);
  }

  TEST_CASE("energy CSV") {
    const std::vector<EnergyRow> rows = short_run(3);
    REQUIRE(rows.size() == 4);
    const std::string text = format_energy_csv(rows);
    CHECK(text.rfind(std::string(kEnergyCsvHeader) + "\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);

    TempDir dir;
    write_energy_csv(rows, dir.path / "energy.csv");
    const std::vector<EnergyRow> back = read_energy_csv(dir.path / "energy.csv");
    REQUIRE(back.size() == rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      CHECK(back[k].step == rows[k].step);
      CHECK(back[k].E_total == rows[k].E_total);
      CHECK(back[k].D_H == rows[k].D_H);
      CHECK(back[k].ledger_residual == rows[k].ledger_residual);
      CHECK(back[k].solver_iters == rows[k].solver_iters);
      CHECK(row_residual(back[k], back[0].E_total) == rows[k].ledger_residual);
    }

    std::ofstream(dir.path / "bad.csv") << "step,t\n0,0\n";
    CHECK_THROWS_AS(read_energy_csv(dir.path / "bad.csv"), IoError);
  }

  TEST_CASE("energy CSV bytes are deterministic") {
    CHECK(format_energy_csv(short_run(3, 4)) == format_energy_csv(short_run(3, 4)));
    CHECK(format_energy_csv(short_run(3, 4)) != format_energy_csv(short_run(3, 5)));
  }

  TEST_CASE("snapshots") {
    SchemeConfig cfg;
    cfg.grid = GridSpec{6, 5, 1.0, 1.2, Boundary::kDirichlet};
    cfg.dt = 0.1;
    cfg.t_end = 0.2;
    TempDir dir;

    SUBCASE("zero state field lengths") {
      const InitialData init = preset_initial(cfg.grid, "zero", 0.0, 0);
      const Snapshot snap = snapshot_of(init_state(init.u0, init.q_in, init.p0, cfg));
      CHECK(snap.nx == 6);
      CHECK(snap.ny == 5);
      for (const SnapshotField& f : snap.fields) CHECK(f.data.size() == snapshot_field_length(f.name, 6, 5));
      REQUIRE(snap.find("u1") != nullptr);
      CHECK(snap.find("u1")->data.size() == 7u * 5u);
      CHECK(snap.find("u2")->data.size() == 6u * 6u);
      CHECK(snap.find("p")->data.size() == 30u);
      CHECK(snap.find("nope") == nullptr);
    }
    SUBCASE("bit-exact round trip") {
      const State s = run_to_end(cfg, preset_initial(cfg.grid, "random-perturbation", 0.1, 3));
      const Snapshot snap = snapshot_of(s);
      write_snapshot(snap, dir.path / "s.bin");
      const Snapshot back = read_snapshot(dir.path / "s.bin");
      CHECK(back == snap);
      CHECK(slurp(dir.path / "s.bin").rfind("BEIEQ1 ", 0) == 0);
      CHECK_FALSE(fs::exists(dir.path / "s.bin.tmp"));
    }
    SUBCASE("restart from a snapshot") {
      const State s = run_to_end(cfg, preset_initial(cfg.grid, "random-perturbation", 0.1, 3));
      write_snapshot(snapshot_of(s), dir.path / "s.bin");
      RunConfig rc;
      rc.scheme = cfg;
      rc.initial.snapshot = (dir.path / "s.bin").string();
      const InitialData init = make_initial(rc);
      CHECK(norm_l2(init.q_in - s.Q) == 0.0);
      CHECK(norm_l2(init.u0 - s.u) == 0.0);
    }
    SUBCASE("truncated file is rejected") {
      write_file_atomic(dir.path / "t.bin", "BEIEQ1 6 5 0.1 0.2 0\np\n1234");
      CHECK_THROWS_AS(read_snapshot(dir.path / "t.bin"), IoError);
    }
  }
}
