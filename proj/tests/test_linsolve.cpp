#include <cmath>
#include <random>

#include "beieq/grid.hpp"
#include "beieq/linsolve.hpp"
#include "beieq/verification.hpp"
#include "doctest.h"

using namespace beieq;

namespace {

LinearOperator dense_op(const DenseMatrix& m) {
  LinearOperator op;
  op.size = m.n;
  op.apply = [&m](std::span<const double> x, std::span<double> y) {
    const Vec r = m.multiply(x);
    std::copy(r.begin(), r.end(), y.begin());
  };
  op.diagonal.resize(m.n);
  for (std::size_t i = 0; i < m.n; ++i) op.diagonal[i] = m(i, i);
  return op;
}

LinearOperator identity(std::size_t n) {
  LinearOperator op;
  op.size = n;
  op.apply = [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); };
  op.diagonal.assign(n, 1.0);
  return op;
}

LinearOperator neg_poisson(const GridSpec& g) {
  LinearOperator op;
  op.size = g.cell_count();
  op.apply = [g](std::span<const double> x, std::span<double> y) {
    ScalarField f(g);
    std::copy(x.begin(), x.end(), f.values().begin());
    const ScalarField l = laplace_p(f);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = -l[k];
  };
  return op;
}

}  // namespace

TEST_SUITE("linsolve") {
  TEST_CASE("identity converges in one iteration") {
    const Vec b = {1.0, -2.0, 3.5, 0.25};
    Vec x(4, 0.0);
    const SolveReport r = cg(identity(4), b, x);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(b[i]));
    Vec y(4, 0.0);
    const SolveReport r2 = bicgstab(identity(4), b, y);
    CHECK(r2.converged);
    CHECK(r2.iterations == 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(b[i]));
  }

  TEST_CASE("cg on a 2x2 SPD system") {
    DenseMatrix m(2);
    m(0, 0) = 4.0;
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    m(1, 1) = 3.0;
    const Vec b = {1.0, 2.0};
    Vec x(2, 0.0);
    CgOptions opt;
    opt.tol = 1e-14;
    const SolveReport r = cg(dense_op(m), b, x, opt);
    CHECK(r.converged);
    CHECK(x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-14));
  }

  TEST_CASE("cg A-norm error decays monotonically on SPD") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::size_t n = 30;
    DenseMatrix b(n), a(n);
    for (double& v : b.a) v = uni(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += b(k, i) * b(k, j);
        a(i, j) = s + (i == j ? 0.5 : 0.0);
      }
    Vec rhs(n);
    for (double& v : rhs) v = uni(rng);
    const Vec exact = lu_solve(a, rhs);
    std::vector<double> errs;
    CgOptions opt;
    opt.tol = 1e-13;
    opt.observer = [&](int, std::span<const double> x) {
      Vec e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = x[i] - exact[i];
      const Vec ae = a.multiply(e);
      errs.push_back(std::sqrt(dot(e, ae)));
    };
    Vec x(n, 0.0);
    const SolveReport r = cg(dense_op(a), rhs, x, opt);
    CHECK(r.converged);
    REQUIRE(errs.size() >= 2);
    for (std::size_t k = 1; k < errs.size(); ++k) CHECK(errs[k] <= errs[k - 1] * (1.0 + 1e-10) + 1e-14);
  }

  TEST_CASE("cg on the Neumann Poisson problem recovers a mean-zero field") {
    const GridSpec g{12, 10, 1.0, 1.0, Boundary::kDirichlet};
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    ScalarField phi(g);
    for (double& v : phi.values()) v = uni(rng);
    double mean = 0.0;
    for (double v : phi.values()) mean += v;
    mean /= static_cast<double>(phi.size());
    for (double& v : phi.values()) v -= mean;
    const LinearOperator op = neg_poisson(g);
    const Vec b = op(phi.values());
    Vec x(op.size, 0.0);
    CgOptions opt;
    opt.tol = 1e-12;
    opt.mean_zero_kernel = true;
    const SolveReport r = cg(op, b, x, opt);
    CHECK(r.converged);
    double err = 0.0, xm = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      err = std::max(err, std::abs(x[k] - phi[k]));
      xm += x[k];
    }
    CHECK(err <= 1e-9);
    CHECK(std::abs(xm) <= 1e-10);
    CHECK(r.relative_residual == doctest::Approx(relative_residual(op, b, x)).epsilon(1e-6));
  }

  TEST_CASE("cg reports non-convergence instead of failing silently") {
    const GridSpec g{16, 16, 1.0, 1.0, Boundary::kDirichlet};
    const LinearOperator op = neg_poisson(g);
    Vec b(op.size, 0.0);
    b[0] = 1.0;
    b[op.size - 1] = -1.0;
    Vec x(op.size, 0.0);
    CgOptions opt;
    opt.tol = 1e-14;
    opt.max_iter = 3;
    opt.mean_zero_kernel = true;
    const SolveReport r = cg(op, b, x, opt);
    CHECK_FALSE(r.converged);
    CHECK_FALSE(r.message.empty());
    CHECK(r.iterations == 3);
  }

  TEST_CASE("bicgstab vs dense LU on a nonsymmetric diagonally dominant system") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::size_t n = 50;
    DenseMatrix a(n);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        a(i, j) = uni(rng);
        row += std::abs(a(i, j));
      }
      a(i, i) = row + 1.0 + std::abs(uni(rng));
    }
    Vec b(n);
    for (double& v : b) v = uni(rng);
    const Vec ref = lu_solve(a, b);
    Vec x(n, 0.0);
    BicgstabOptions opt;
    opt.tol = 1e-13;
    const SolveReport r = bicgstab(dense_op(a), b, x, opt);
    CHECK(r.converged);
    Vec d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - ref[i];
    CHECK(norm2(d) / norm2(ref) <= 1e-10);
    CHECK(r.relative_residual == doctest::Approx(relative_residual(dense_op(a), b, x)));
  }

  TEST_CASE("bicgstab reported residual is the recomputed one") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::size_t n = 40;
    DenseMatrix a(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.2 * uni(rng);
      a(i, i) += 4.0;
    }
    Vec b(n);
    for (double& v : b) v = uni(rng);
    for (const double tol : {1e-6, 1e-10, 1e-13}) {
      Vec x(n, 0.0);
      BicgstabOptions opt;
      opt.tol = tol;
      const SolveReport r = bicgstab(dense_op(a), b, x, opt);
      CHECK(r.converged);
      CHECK(r.relative_residual <= tol);
      CHECK(r.relative_residual == relative_residual(dense_op(a), b, x));
    }
  }

  TEST_CASE("bicgstab breakdown on a non-coercive operator is reported") {
    // A = [[0, 1], [-1, 0]] is skew: r0 . A r0 = 0, so the first step breaks
    // down with the unperturbed shadow residual, and omega = 0 afterwards.
    DenseMatrix a(2);
    a(0, 1) = 1.0;
    a(1, 0) = -1.0;
    const Vec b = {1.0, 0.0};
    Vec x(2, 0.0);
    BicgstabOptions opt;
    opt.jacobi = false;
    const SolveReport r = bicgstab(dense_op(a), b, x, opt);
    CHECK(r.restarts >= 1);
    if (!r.converged) CHECK_FALSE(r.message.empty());
    CHECK(r.relative_residual == relative_residual(dense_op(a), b, x));
  }

  TEST_CASE("operator linearity") {
    const GridSpec g{9, 7, 1.0, 1.0, Boundary::kDirichlet};
    const LinearOperator op = neg_poisson(g);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vec x(op.size), y(op.size), z(op.size);
    for (std::size_t i = 0; i < op.size; ++i) {
      x[i] = uni(rng);
      y[i] = uni(rng);
    }
    const double al = 0.3, be = -1.7;
    for (std::size_t i = 0; i < op.size; ++i) z[i] = al * x[i] + be * y[i];
    const Vec az = op(z), ax = op(x), ay = op(y);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < op.size; ++i) {
      diff = std::max(diff, std::abs(az[i] - al * ax[i] - be * ay[i]));
      scale = std::max(scale, std::abs(az[i]));
    }
    CHECK(diff <= 1e-12 * scale);
  }
}
