#include <cmath>
#include <random>

#include "beieq/diagnostics_io.hpp"
#include "beieq/scheme.hpp"
#include "beieq/verification.hpp"
#include "doctest.h"

using namespace beieq;

namespace {

SchemeConfig standard(int n, double dt, double t_end) {
  SchemeConfig cfg;
  cfg.grid = GridSpec{n, n, 1.0, 1.0, Boundary::kDirichlet};
  cfg.dt = dt;
  cfg.t_end = t_end;
  return cfg;
}

State standard_state(const SchemeConfig& cfg) {
  const InitialData init = preset_initial(cfg.grid, "smooth-modes", 0.1, 0);
  return init_state(init.u0, init.q_in, init.p0, cfg);
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

MacVectorField random_velocity(const GridSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  MacVectorField u(g);
  for (std::size_t k : u.free_indices()) u[k] = uni(rng);
  u.enforce_constraints();
  return u;
}

}  // namespace

TEST_SUITE("scheme") {
  TEST_CASE("config validation and step count") {
    SchemeConfig cfg = standard(8, 0.1, 1.0);
    CHECK(cfg.step_count() == 10);
    cfg.dt = 0.3;
    CHECK(cfg.step_count() == 3);
    cfg.dt = 2.0;
    CHECK(cfg.step_count() == 0);
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.dt = 0.01;
    cfg.params.dim = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("zero state is a fixed point with r0 = sqrt(2 A0)") {
    const SchemeConfig cfg = standard(8, 0.1, 0.5);
    const GridSpec& g = cfg.grid;
    State s = init_state(MacVectorField(g), TensorField(g, cfg.layout), ScalarField(g), cfg);
    for (std::size_t k = 0; k < s.r.size(); ++k) CHECK(s.r[k] == doctest::Approx(std::sqrt(2.0 * cfg.params.A0)));
    EnergyLedger ledger = start_ledger(s, cfg);
    for (int n = 0; n < 3; ++n) advance(s, cfg, ledger);
    CHECK(max_abs(s.u.values()) == 0.0);
    CHECK(max_abs(s.Q.comp(0).values()) == 0.0);
    CHECK(max_abs(s.Q.comp(1).values()) == 0.0);
    for (std::size_t k = 0; k < s.r.size(); ++k) CHECK(s.r[k] == doctest::Approx(std::sqrt(2.0)));
    CHECK(h2_budget(ledger) == 0.0);
    CHECK(ledger_residual(ledger) == 0.0);
  }

  TEST_CASE("init_state caches r and P cellwise and projects u0") {
    const SchemeConfig cfg = standard(10, 0.05, 0.5);
    std::mt19937_64 rng(2);
    const InitialData init = preset_initial(cfg.grid, "smooth-modes", 0.1, 0);
    const MacVectorField u0 = random_velocity(cfg.grid, rng);
    const State s = init_state(u0, init.q_in, init.p0, cfg);
    CHECK(norm_l2(div_u(s.u)) <= 1e-10);
    for (std::size_t c = 0; c < s.r.size(); ++c) {
      const Sym2 q = Sym2::from_matrix(s.Q.matrix(c));
      CHECK(s.r[c] == r_of_Q(q, cfg.params));
      const Mat2 p = P_of_Q(q, cfg.params).to_matrix();
      CHECK(s.P.matrix(c)(0, 0) == doctest::Approx(p(0, 0)).epsilon(1e-15));
      CHECK(s.P.matrix(c)(0, 1) == doctest::Approx(p(0, 1)).epsilon(1e-15));
    }
  }

  TEST_CASE("initial smoothing") {
    const GridSpec g{16, 12, 1.0, 1.5, Boundary::kDirichlet};
    SUBCASE("zero input") {
      const TensorField q0 = smooth_initial_Q(TensorField(g, TensorLayout::kSymTraceless), 0.1);
      CHECK(max_abs(q0.comp(0).values()) == 0.0);
      CHECK(max_abs(q0.comp(1).values()) == 0.0);
    }
    SUBCASE("energy bound on random input") {
      std::mt19937_64 rng(11);
      std::uniform_real_distribution<double> uni(-1.0, 1.0);
      for (const double dt : {1e-3, 1e-1, 10.0}) {
        TensorField q(g, TensorLayout::kSymTraceless);
        for (int k = 0; k < 2; ++k)
          for (double& v : q.comp(k).values()) v = uni(rng);
        const TensorField q0 = smooth_initial_Q(q, dt);
        const TensorField lap = laplace_q(q0);
        CHECK(norm_grad_sq(q0) + 2.0 * dt * inner(lap, lap) <= norm_grad_sq(q) + 1e-12);
      }
    }
    SUBCASE("first-order approach to the input as dt -> 0") {
      const SchemeConfig cfg = standard(24, 0.01, 0.1);
      const InitialData init = preset_initial(cfg.grid, "smooth-modes", 0.1, 0);
      double prev = 0.0;
      for (const double dt : {1e-3, 5e-4, 2.5e-4}) {
        const double err = norm_l2(smooth_initial_Q(init.q_in, dt) - init.q_in);
        if (prev > 0.0) CHECK(prev / err == doctest::Approx(2.0).epsilon(0.05));
        prev = err;
      }
    }
  }

  TEST_CASE("projection") {
    const GridSpec g{12, 10, 1.0, 1.0, Boundary::kDirichlet};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const ScalarField p0(g);
    SUBCASE("divergence-free input is left alone") {
      ScalarField phi(g);
      for (double& v : phi.values()) v = uni(rng);
      const ProjectionResult first = step2_project(random_velocity(g, rng), p0, 0.1);
      const ProjectionResult again = step2_project(first.u, p0, 0.1);
      CHECK(norm_l2(again.u - first.u) <= 1e-11 * norm_l2(first.u));
      CHECK(norm_l2(again.dp) <= 1e-10);
    }
    SUBCASE("pure gradients are removed") {
      ScalarField phi(g);
      for (double& v : phi.values()) v = uni(rng);
      const ProjectionResult r = step2_project(grad_p(phi), p0, 0.1);
      CHECK(norm_l2(r.u) <= 1e-10 * norm_l2(grad_p(phi)));
    }
    SUBCASE("Pythagoras and divergence") {
      const double dt = 0.05;
      const MacVectorField ut = random_velocity(g, rng);
      const ProjectionResult r = step2_project(ut, p0, dt);
      CHECK(r.report.converged);
      CHECK(norm_l2(div_u(r.u)) <= 1e-10);
      const MacVectorField d = r.u - ut;
      const double lhs = inner(r.u, r.u) + inner(d, d);
      CHECK(std::abs(lhs - inner(ut, ut)) <= 1e-12 * inner(ut, ut));
      // u = u_tilde - 2 dt grad(dp)
      CHECK(norm_l2(r.u - (ut - 2.0 * dt * grad_p(r.dp))) <= 1e-13 * norm_l2(ut));
    }
  }

  TEST_CASE("r update and elimination consistency") {
    const SchemeConfig cfg = standard(12, 0.02, 0.2);
    State s = standard_state(cfg);
    const Step1Result st = step1_solve(s, cfg);
    const ScalarField r_new = update_r(s, st.Q);
    const TensorField dq = st.Q - s.Q;
    for (std::size_t c = 0; c < r_new.size(); ++c)
      CHECK(r_new[c] == doctest::Approx(s.r[c] + s.P.frob_at(dq, c)).epsilon(1e-15));
    const TensorField h = molecular_field(st.Q, r_new, s.P, cfg.params.L);
    CHECK(norm_l2(st.H - h) <= 1e-11 * norm_l2(st.H));

    EnergyLedger ledger = start_ledger(s, cfg);
    for (int n = 0; n < 5; ++n) {
      const StepDiagnostics d = advance(s, cfg, ledger);
      CHECK(d.elimination_residual <= 1e-11);
      CHECK(d.div_u_norm <= 1e-10);
      CHECK(d.pythagoras_residual <= 1e-12);
    }
  }

  TEST_CASE("energy ledger") {
    const SchemeConfig cfg = standard(16, 0.02, 0.2);
    State s = standard_state(cfg);
    EnergyLedger ledger = start_ledger(s, cfg);
    REQUIRE(ledger.rows().size() == 1);
    CHECK(ledger.rows()[0].ledger_residual == 0.0);
    CHECK(ledger.rows()[0].dissipation() == 0.0);
    CHECK(ledger.rows()[0].E_kin_tilde == ledger.rows()[0].E_kin);

    advance(s, cfg, ledger);
    const TensorField lap = laplace_q(s.Q);
    CHECK(h2_budget(ledger) == doctest::Approx(cfg.dt * inner(lap, lap)).epsilon(1e-14));

    for (int n = 1; n < cfg.step_count(); ++n) advance(s, cfg, ledger);
    REQUIRE(ledger.rows().size() == static_cast<std::size_t>(cfg.step_count()) + 1);
    for (const EnergyRow& row : ledger.rows()) {
      CHECK(row.D_proj >= -1e-14);
      CHECK(row.D_u_incr >= -1e-14);
      CHECK(row.D_Q_incr >= -1e-14);
      CHECK(row.D_r_incr >= -1e-14);
      CHECK(row.D_visc >= -1e-14);
      CHECK(row.D_H >= -1e-14);
      CHECK(row.ledger_residual <= 1e-10);
    }
    for (std::size_t k = 1; k < ledger.rows().size(); ++k)
      CHECK(ledger.rows()[k].E_total <= ledger.rows()[k - 1].E_total + 1e-13);
  }

  TEST_CASE("h2 budget is stable under dt refinement") {
    double prev = 0.0;
    for (const double dt : {0.01, 0.005}) {
      const SchemeConfig cfg = standard(16, dt, 0.4);
      State s = standard_state(cfg);
      EnergyLedger ledger = start_ledger(s, cfg);
      for (int n = 0; n < cfg.step_count(); ++n) advance(s, cfg, ledger);
      const double b = h2_budget(ledger);
      if (prev > 0.0) CHECK(std::abs(b - prev) < 0.5 * prev);
      prev = b;
    }
  }

  TEST_CASE("full-matrix layout keeps Q symmetric and trace-free") {
    SchemeConfig cfg = standard(8, 0.05, 0.5);
    cfg.layout = TensorLayout::kFull;
    State s = standard_state(cfg);
    REQUIRE(s.Q.comp_count() == 4);
    EnergyLedger ledger = start_ledger(s, cfg);
    for (int n = 0; n < cfg.step_count(); ++n) advance(s, cfg, ledger);
    double tr = 0.0, asym = 0.0;
    for (std::size_t c = 0; c < s.Q.comp(0).size(); ++c) {
      const Mat2 q = s.Q.matrix(c);
      tr = std::max(tr, std::abs(q.trace()));
      asym = std::max(asym, std::abs(q(0, 1) - q(1, 0)));
    }
    CHECK(tr <= 1e-10);
    CHECK(asym <= 1e-10);
    CHECK(ledger_residual(ledger) <= 1e-10);

    // Agrees with the compact layout.
    SchemeConfig sym = cfg;
    sym.layout = TensorLayout::kSymTraceless;
    State t = standard_state(sym);
    EnergyLedger l2 = start_ledger(t, sym);
    for (int n = 0; n < sym.step_count(); ++n) advance(t, sym, l2);
    CHECK(norm_l2(to_layout(s.Q, TensorLayout::kSymTraceless) - t.Q) <= 1e-9 * norm_l2(t.Q));
  }

  TEST_CASE("step1 solve failure is explicit") {
    SchemeConfig cfg = standard(8, 0.1, 1.0);
    cfg.solver.max_iter = 1;
    cfg.solver.tol = 1e-15;
    const State s = standard_state(cfg);
    CHECK_THROWS_AS(step1_solve(s, cfg), SolverError);
  }
}
