#pragma once

/// @file scheme.hpp
/// @brief Linearly implicit IEQ + projection time stepping and its energy
/// ledger.
///
/// One step:
///   1. solve the coupled linear system for (u_tilde, Q) with the molecular
///      field H eliminated,
///   2. update r explicitly from the frozen P,
///   3. project u_tilde onto discretely divergence-free fields.
///
/// Energy (per state):
///   E = 1/4 |u_tilde|^2 + 1/4 |u|^2 + L/2 |grad Q|^2 + 1/2 |r|^2 + dt^2 |grad p|^2
/// and E_N + (dissipation sums) = E_0 holds up to linear-solver residuals.

#include <vector>

#include "beieq/grid.hpp"
#include "beieq/linsolve.hpp"
#include "beieq/tensor_core.hpp"

namespace beieq {

struct SolverSettings {
  double tol = 1e-11;
  int max_iter = 0;  // 0: 10 * unknowns
  double poisson_tol = 1e-12;
  int poisson_max_iter = 0;

  bool operator==(const SolverSettings&) const = default;
};

struct SchemeConfig {
  GridSpec grid;
  MaterialParams params;
  double dt = 0.01;
  double t_end = 1.0;
  SolverSettings solver;
  TensorLayout layout = TensorLayout::kSymTraceless;

  /// Throws ConfigError / std::invalid_argument.
  void validate() const;
  /// floor(t_end / dt), robust to t_end being an exact multiple of dt.
  int step_count() const;

  bool operator==(const SchemeConfig&) const = default;
};

struct State {
  MacVectorField u;
  MacVectorField u_tilde;
  ScalarField p;
  TensorField Q;
  TensorField H;
  TensorField P;
  ScalarField r;
  double t = 0.0;
  int n = 0;
};

struct EnergyRow {
  int step = 0;
  double t = 0.0;
  double E_total = 0.0;
  double E_kin_tilde = 0.0;
  double E_kin = 0.0;
  double E_elastic = 0.0;
  double E_r = 0.0;
  double E_pterm = 0.0;
  // Cumulative dissipation sums.
  double D_proj = 0.0;
  double D_u_incr = 0.0;
  double D_Q_incr = 0.0;
  double D_r_incr = 0.0;
  double D_visc = 0.0;
  double D_H = 0.0;
  double ledger_residual = 0.0;
  double div_u_norm = 0.0;
  int solver_iters = 0;

  double dissipation() const { return D_proj + D_u_incr + D_Q_incr + D_r_incr + D_visc + D_H; }
};

class EnergyLedger {
 public:
  const std::vector<EnergyRow>& rows() const { return rows_; }
  double E0() const { return rows_.empty() ? 0.0 : rows_.front().E_total; }
  /// Projection defect 1/4 |u - u_tilde|^2 of the latest state, not yet
  /// part of D_proj.
  double pending_projection_defect() const { return pending_proj_; }
  double h2_budget() const { return h2_; }

  void start(const EnergyRow& row0);
  /// Appends a row. `row` carries the energy components of the new state;
  /// the increments are the per-step dissipation terms.
  struct Increments {
    double u_incr = 0.0, Q_incr = 0.0, r_incr = 0.0, visc = 0.0, H = 0.0;
    double projection_defect = 0.0;  // 1/4 |u^{n+1} - u_tilde^{n+1}|^2
    double h2 = 0.0;                 // dt |lap Q^{n+1}|^2
  };
  void append(EnergyRow row, const Increments& inc);

 private:
  std::vector<EnergyRow> rows_;
  double pending_proj_ = 0.0;
  double h2_ = 0.0;
};

/// |E_total + D - E0| / E0 for one row given the ledger's E0.
double row_residual(const EnergyRow& row, double E0);
/// Residual of the latest row.
double ledger_residual(const EnergyLedger& ledger);
/// dt * sum_{k>=1} |lap_h Q^k|^2.
double h2_budget(const EnergyLedger& ledger);

/// Convert between tensor layouts (projecting when going to kSymTraceless).
TensorField to_layout(const TensorField& q, TensorLayout layout);

/// Solve (I - dt lap_h) Q0 = Q_in componentwise.
TensorField smooth_initial_Q(const TensorField& q_in, double dt, const SolverSettings& solver = {});

/// r(Q) and P(Q) cellwise.
ScalarField r_field(const TensorField& q, const MaterialParams& p);
TensorField P_field(const TensorField& q, const MaterialParams& p);

/// L lap_h Q - r P with the given r and P fields.
TensorField molecular_field(const TensorField& q, const ScalarField& r, const TensorField& p, double L);

State init_state(const MacVectorField& u0, const TensorField& q_in, const ScalarField& p0, const SchemeConfig& cfg);

/// The Step-1 linear system in packed unknowns [free faces of u_tilde, Q comps].
struct Step1System {
  LinearOperator op;
  Vec rhs;
  Vec guess;
  std::size_t n_u = 0;

  Vec pack(const MacVectorField& u, const TensorField& q) const;
  void unpack(std::span<const double> x, MacVectorField& u, TensorField& q) const;
};

Step1System build_step1_system(const State& s, const SchemeConfig& cfg);

struct Step1Result {
  MacVectorField u_tilde;
  TensorField Q;
  TensorField H;
  SolveReport report;
};

/// Throws SolverError on non-convergence.
Step1Result step1_solve(const State& s, const SchemeConfig& cfg);

/// r^{n+1} = r^n + P^n : (Q^{n+1} - Q^n).
ScalarField update_r(const State& s, const TensorField& q_new);

struct ProjectionResult {
  MacVectorField u;
  ScalarField p;
  ScalarField dp;
  SolveReport report;
};

/// Throws SolverError on non-convergence.
ProjectionResult step2_project(const MacVectorField& u_tilde, const ScalarField& p_old, double dt,
                               const SolverSettings& solver = {});

struct StepDiagnostics {
  SolveReport step1;
  SolveReport poisson;
  double div_u_norm = 0.0;
  /// |1/4|u|^2 - 1/4|u_tilde|^2 + 1/4|u - u_tilde|^2| / (1/4 |u_tilde|^2).
  double pythagoras_residual = 0.0;
  /// |H - (L lap Q - r P^n)| / |H|.
  double elimination_residual = 0.0;
};

/// Energy components of a state; cumulative fields left zero.
EnergyRow energy(const State& s, const SchemeConfig& cfg);

/// Advance one step in place and append a ledger row.
StepDiagnostics advance(State& s, const SchemeConfig& cfg, EnergyLedger& ledger);

/// Fresh ledger with row 0 for `s`.
EnergyLedger start_ledger(const State& s, const SchemeConfig& cfg);

}  // namespace beieq
