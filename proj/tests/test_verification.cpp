#include <cmath>

#include "beieq/diagnostics_io.hpp"
#include "beieq/verification.hpp"
#include "doctest.h"

using namespace beieq;

namespace {

SchemeConfig small_config(Boundary bc, double dt) {
  SchemeConfig cfg;
  cfg.grid = GridSpec{6, 6, 1.0, 1.0, bc};
  cfg.dt = dt;
  cfg.t_end = 3 * dt;
  return cfg;
}

}  // namespace

TEST_SUITE("verification") {
  TEST_CASE("dense LU and symmetric eigenvalues") {
    DenseMatrix a(3);
    const double v[9] = {2, -1, 0, -1, 2, -1, 0, -1, 2};
    std::copy(v, v + 9, a.a.begin());
    const Vec x = lu_solve(a, {1.0, 0.0, 1.0});
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(1.0));
    CHECK(x[2] == doctest::Approx(1.0));
    // eigenvalues of tridiag(-1, 2, -1): 2 - sqrt(2), 2, 2 + sqrt(2)
    const std::vector<double> ev = symmetric_eigenvalues(a);
    CHECK(ev[0] == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-13));
    CHECK(ev[1] == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(ev[2] == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-13));

    DenseMatrix skew(2);
    skew(0, 0) = 1.0;
    skew(0, 1) = 5.0;
    skew(1, 0) = -5.0;
    skew(1, 1) = 3.0;
    CHECK(min_eig_symmetric_part(skew) == doctest::Approx(1.0));

    DenseMatrix singular(2);
    singular(0, 0) = 1.0;
    singular(0, 1) = 2.0;
    singular(1, 0) = 2.0;
    singular(1, 1) = 4.0;
    CHECK_THROWS(lu_solve(singular, {1.0, 1.0}));
  }

  TEST_CASE("fitted order of exact power laws") {
    const std::vector<double> dt = {0.1, 0.05, 0.025};
    CHECK(fitted_order(dt, {0.3, 0.15, 0.075}) == doctest::Approx(1.0));
    CHECK(fitted_order(dt, {0.01, 0.0025, 0.000625}) == doctest::Approx(2.0));
  }

  TEST_CASE("dense step-1 oracle") {
    for (const Boundary bc : {Boundary::kDirichlet, Boundary::kPeriodic}) {
      for (const double dt : {1e-2, 1.0}) {
        const SchemeConfig cfg = small_config(bc, dt);
        const State s = run_to_end(cfg, preset_initial(cfg.grid, "smooth-modes", 0.1, 0));
        const DenseOracleReport r = dense_step1_oracle(s, cfg, 3);
        CHECK(r.unknowns <= kMaxDenseUnknowns);
        CHECK(r.probe_linearity <= 1e-12);
        CHECK(r.min_eig_sym > 0.0);
        CHECK(r.relative_difference <= 1e-9);
        CHECK(r.krylov.converged);
      }
    }
  }

  TEST_CASE("dense assembly rejects large grids") {
    SchemeConfig cfg = small_config(Boundary::kDirichlet, 0.1);
    cfg.grid.nx = 10;
    const InitialData init = preset_initial(cfg.grid, "zero", 0.0, 0);
    const State s = init_state(init.u0, init.q_in, init.p0, cfg);
    CHECK_THROWS_AS(assemble_dense_step1(s, cfg), std::invalid_argument);
  }

  TEST_CASE("fuzzing") {
    SUBCASE("zero trials give an empty report") { CHECK(fuzz_identities(1, 0) == FuzzReport{}); }
    SUBCASE("fixed seed is reproducible") {
      const FuzzReport a = fuzz_identities(42, 200);
      const FuzzReport b = fuzz_identities(42, 200);
      CHECK(a == b);
      CHECK(a.pointwise_trials == 200);
      CHECK(a.field_trials == 20);
      CHECK(fuzz_failures(a).empty());
    }
    SUBCASE("failures are named") {
      FuzzReport r;
      r.skew_vv = 1.0;
      const auto f = fuzz_failures(r);
      REQUIRE(f.size() == 1);
      CHECK(f[0].find("skew_vv") != std::string::npos);
    }
  }

  TEST_CASE("convergence study on a small problem") {
    SchemeConfig cfg;
    cfg.grid = GridSpec{12, 12, 1.0, 1.0, Boundary::kDirichlet};
    cfg.t_end = 0.2;
    const InitialData init = preset_initial(cfg.grid, "smooth-modes", 0.1, 0);
    const ConvergenceReport r = run_convergence_study(cfg, init, 0.02, 3);
    REQUIRE(r.complete);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.reference_dt == doctest::Approx(0.02 / 16));
    for (std::size_t k = 1; k < r.rows.size(); ++k) {
      CHECK(r.rows[k].dt == doctest::Approx(r.rows[k - 1].dt / 2));
      CHECK(r.rows[k].error_Q < r.rows[k - 1].error_Q);
      CHECK(r.rows[k].r_equivalence < r.rows[k - 1].r_equivalence);
    }
    CHECK(r.order_u > 0.5);
    CHECK(r.order_Q > 0.5);
  }

  TEST_CASE("identical step sizes give zero error") {
    SchemeConfig cfg;
    cfg.grid = GridSpec{8, 8, 1.0, 1.0, Boundary::kPeriodic};
    cfg.dt = 0.05;
    cfg.t_end = 0.2;
    const InitialData init = preset_initial(cfg.grid, "random-perturbation", 0.05, 9);
    const State a = run_to_end(cfg, init);
    const State b = run_to_end(cfg, init);
    CHECK(norm_l2(a.u - b.u) == 0.0);
    CHECK(norm_l2(a.Q - b.Q) == 0.0);
    CHECK(norm_l2(a.r - b.r) == 0.0);
  }
}
