#pragma once

/// @file linsolve.hpp
/// @brief Matrix-free Krylov solvers (CG, Jacobi-preconditioned BiCGSTAB).

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace beieq {

using Vec = std::vector<double>;

struct LinearOperator {
  std::size_t size = 0;
  std::function<void(std::span<const double> x, std::span<double> y)> apply;
  /// Optional (approximate) diagonal for Jacobi preconditioning.
  Vec diagonal;

  Vec operator()(std::span<const double> x) const {
    Vec y(size, 0.0);
    apply(x, y);
    return y;
  }
};

struct SolveReport {
  int iterations = 0;
  /// ||b - A x|| / ||b||, recomputed from scratch after the iteration.
  double relative_residual = 0.0;
  bool converged = false;
  int restarts = 0;
  std::string message;
};

/// Raised when a solver does not reach its tolerance. Carries the report.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, SolveReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

struct CgOptions {
  double tol = 1e-12;
  int max_iter = 0;  // 0: 10 * n
  /// Operator kernel is the constant vector: project b and x to mean zero.
  bool mean_zero_kernel = false;
  /// Called with (iteration, x) after each update; used to audit convergence.
  std::function<void(int, std::span<const double>)> observer;
};

struct BicgstabOptions {
  double tol = 1e-11;
  int max_iter = 0;  // 0: 10 * n
  bool jacobi = true;
};

/// Conjugate gradients for symmetric positive (semi-)definite operators.
/// `x` is the initial guess on entry. Never throws on non-convergence;
/// inspect report.converged.
SolveReport cg(const LinearOperator& a, std::span<const double> b, Vec& x, const CgOptions& opt = {});

/// BiCGSTAB with optional Jacobi preconditioning. On breakdown the
/// iteration restarts once from the current iterate with a perturbed
/// shadow residual.
SolveReport bicgstab(const LinearOperator& a, std::span<const double> b, Vec& x, const BicgstabOptions& opt = {});

/// Relative residual ||b - A x|| / ||b|| (||b - A x|| when b = 0).
double relative_residual(const LinearOperator& a, std::span<const double> b, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace beieq
