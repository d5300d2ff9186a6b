#pragma once

/// @file verification.hpp
/// @brief Dense oracles, identity fuzzing and the temporal self-convergence
/// study.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "beieq/linsolve.hpp"
#include "beieq/scheme.hpp"

namespace beieq {

/// Row-major dense square matrix.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  Vec multiply(std::span<const double> x) const;
};

/// Gaussian elimination with partial pivoting. Throws on singular input.
Vec lu_solve(DenseMatrix m, Vec b);

/// All eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
std::vector<double> symmetric_eigenvalues(DenseMatrix m);

/// Smallest eigenvalue of (A + A^T) / 2.
double min_eig_symmetric_part(const DenseMatrix& m);

/// Apply `op` to every unit vector.
DenseMatrix probe(const LinearOperator& op);

inline constexpr std::size_t kMaxDenseUnknowns = 400;

struct DenseSystem {
  DenseMatrix a;
  Vec rhs;
};

/// Probe the Step-1 operator. Throws std::invalid_argument on grids larger
/// than 8x8 or systems with more than kMaxDenseUnknowns unknowns.
DenseSystem assemble_dense_step1(const State& s, const SchemeConfig& cfg);

struct DenseOracleReport {
  std::size_t unknowns = 0;
  /// max |A_probed x - A x| / max |A x| over random x.
  double probe_linearity = 0.0;
  double min_eig_sym = 0.0;
  /// |x_krylov - x_lu| / |x_lu|.
  double relative_difference = 0.0;
  SolveReport krylov;
};

/// Compare the matrix-free Step-1 solve against dense LU on the probed matrix.
DenseOracleReport dense_step1_oracle(const State& s, const SchemeConfig& cfg, std::uint64_t seed = 1);

// --- convergence study --------------------------------------------------------

/// Builds the initial (u0, Q_in, p0) for a given grid.
struct InitialData {
  MacVectorField u0;
  TensorField q_in;
  ScalarField p0;
};

struct ConvergenceRow {
  double dt = 0.0;
  double error_u = 0.0;
  double error_Q = 0.0;
  double error_r = 0.0;
  /// |r - r(Q)| at t_end for this run.
  double r_equivalence = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double reference_dt = 0.0;
  double reference_r_equivalence = 0.0;
  double order_u = 0.0;
  double order_Q = 0.0;
  double order_r = 0.0;
  bool complete = false;
  std::string message;
};

/// Least-squares slope of log(err) against log(dt).
double fitted_order(const std::vector<double>& dt, const std::vector<double>& err);

/// Runs `levels` levels dt0 / 2^k and a reference at dt0 / 2^(levels+1), all
/// to cfg.t_end. On failure returns a partial report with complete = false.
ConvergenceReport run_convergence_study(const SchemeConfig& cfg, const InitialData& init, double dt0, int levels);

/// Runs the scheme to cfg.t_end. Returns the final state; the ledger is
/// filled if non-null.
State run_to_end(const SchemeConfig& cfg, const InitialData& init, EnergyLedger* ledger = nullptr,
                 const std::function<void(const State&, const StepDiagnostics&)>& on_step = {});

// --- identity fuzzing ------------------------------------------------------------

struct FuzzReport {
  int pointwise_trials = 0;
  int field_trials = 0;
  double cancellation_2d = 0.0;   // |gradU : Sigma + H : s| / scale
  double cancellation_3d = 0.0;
  double s_trace = 0.0;           // |tr s| for random gradU (2D and 3D)
  double p_variational = 0.0;     // |FD(r) - P : dQ| absolute
  double skew_vv = 0.0;           // |<B(u,v),v>| / (|u||v|^2)
  double skew_antisym = 0.0;      // |<B(u,v),w> + <B(u,w),v>| / (|u||v||w|)
  double div_grad_duality = 0.0;  // |<div u,p> + <u,grad p>| / (|u||p|)
  double advect_force = 0.0;      // |<force(H,Q),u> - <advect(u,Q),H>| / scale
  double field_cancellation = 0.0;
  double sbp_cells = 0.0;         // |<-lap f,f> - |grad f|^2| / |grad f|^2
  double sbp_faces = 0.0;

  bool operator==(const FuzzReport&) const = default;
};

struct FuzzThresholds {
  double cancellation = 1e-13;
  double s_trace = 1e-14;
  double p_variational = 1e-6;
  double skew = 1e-13;
  double duality = 1e-13;
  double field_cancellation = 1e-12;
  double sbp = 1e-13;
};

/// Pointwise identities run `trials` times, field identities max(1, trials/10)
/// times on 8x8 .. 16x16 grids in both boundary modes.
FuzzReport fuzz_identities(std::uint64_t seed, int trials);

/// Names of failing checks; empty when all pass.
std::vector<std::string> fuzz_failures(const FuzzReport& r, const FuzzThresholds& t = {});

}  // namespace beieq
