#include "beieq/verification.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace beieq {

// --- dense linear algebra --------------------------------------------------------

Vec DenseMatrix::multiply(std::span<const double> x) const {
  Vec y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * x[j];
    y[i] = s;
  }
  return y;
}

Vec lu_solve(DenseMatrix m, Vec b) {
  const std::size_t n = m.n;
  if (b.size() != n) throw std::invalid_argument("lu_solve: size mismatch");
  double max_abs = 0.0;
  for (double v : m.a) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
    if (std::abs(m(piv, k)) <= 1e-300 + 1e-15 * max_abs) throw std::runtime_error("lu_solve: matrix is singular");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = m(i, k) / m(k, k);
      if (l == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) m(i, j) -= l * m(k, j);
      b[i] -= l * b[k];
    }
  }
  Vec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= m(ii, j) * x[j];
    x[ii] = s / m(ii, ii);
  }
  return x;
}

std::vector<double> symmetric_eigenvalues(DenseMatrix m) {
  const std::size_t n = m.n;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += m(i, j) * m(i, j);
        if (i != j) off += m(i, j) * m(i, j);
      }
    if (off <= 1e-30 * total) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double min_eig_symmetric_part(const DenseMatrix& m) {
  DenseMatrix s(m.n);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return symmetric_eigenvalues(std::move(s)).front();
}

DenseMatrix probe(const LinearOperator& op) {
  DenseMatrix m(op.size);
  Vec e(op.size, 0.0), col(op.size);
  for (std::size_t j = 0; j < op.size; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    for (std::size_t i = 0; i < op.size; ++i) m(i, j) = col[i];
    e[j] = 0.0;
  }
  return m;
}

DenseSystem assemble_dense_step1(const State& s, const SchemeConfig& cfg) {
  if (cfg.grid.nx > 8 || cfg.grid.ny > 8) throw std::invalid_argument("assemble_dense_step1: grid larger than 8x8");
  const Step1System sys = build_step1_system(s, cfg);
  if (sys.op.size > kMaxDenseUnknowns) {
    throw std::invalid_argument("assemble_dense_step1: " + std::to_string(sys.op.size) + " unknowns exceed " +
                                std::to_string(kMaxDenseUnknowns));
  }
  return DenseSystem{probe(sys.op), sys.rhs};
}

DenseOracleReport dense_step1_oracle(const State& s, const SchemeConfig& cfg, std::uint64_t seed) {
  DenseOracleReport rep;
  const DenseSystem dense = assemble_dense_step1(s, cfg);
  const Step1System sys = build_step1_system(s, cfg);
  rep.unknowns = dense.a.n;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Vec x(rep.unknowns);
    for (double& v : x) v = uni(rng);
    const Vec y1 = dense.a.multiply(x);
    const Vec y2 = sys.op(x);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < y1.size(); ++i) {
      diff = std::max(diff, std::abs(y1[i] - y2[i]));
      ref = std::max(ref, std::abs(y2[i]));
    }
    rep.probe_linearity = std::max(rep.probe_linearity, ref > 0.0 ? diff / ref : diff);
  }

  rep.min_eig_sym = min_eig_symmetric_part(dense.a);
  const Vec x_lu = lu_solve(dense.a, dense.rhs);
  Vec x = sys.guess;
  BicgstabOptions opt;
  opt.tol = cfg.solver.tol;
  opt.max_iter = cfg.solver.max_iter;
  rep.krylov = bicgstab(sys.op, sys.rhs, x, opt);
  Vec d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - x_lu[i];
  const double nlu = norm2(x_lu);
  rep.relative_difference = nlu > 0.0 ? norm2(d) / nlu : norm2(d);
  return rep;
}

// --- convergence study --------------------------------------------------------------

State run_to_end(const SchemeConfig& cfg, const InitialData& init, EnergyLedger* ledger,
                 const std::function<void(const State&, const StepDiagnostics&)>& on_step) {
  State s = init_state(init.u0, init.q_in, init.p0, cfg);
  EnergyLedger local = start_ledger(s, cfg);
  EnergyLedger& led = ledger ? *ledger : local;
  if (ledger) led = local;
  const int steps = cfg.step_count();
  for (int k = 0; k < steps; ++k) {
    const StepDiagnostics d = advance(s, cfg, led);
    if (on_step) on_step(s, d);
  }
  return s;
}

double fitted_order(const std::vector<double>& dt, const std::vector<double>& err) {
  const std::size_t n = std::min(dt.size(), err.size());
  if (n < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(dt[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  return denom != 0.0 ? (static_cast<double>(n) * sxy - sx * sy) / denom : 0.0;
}

namespace {

double r_equivalence(const State& s, const MaterialParams& p) {
  const ScalarField rq = r_field(s.Q, p);
  return norm_l2(s.r - rq);
}

}  // namespace

ConvergenceReport run_convergence_study(const SchemeConfig& cfg, const InitialData& init, double dt0, int levels) {
  ConvergenceReport rep;
  if (levels < 1) {
    rep.message = "levels must be >= 1";
    return rep;
  }
  if (!(dt0 > 0.0)) {
    rep.message = "dt0 must be > 0";
    return rep;
  }
  try {
    SchemeConfig ref_cfg = cfg;
    ref_cfg.dt = dt0 / std::pow(2.0, levels + 1);
    rep.reference_dt = ref_cfg.dt;
    const State ref = run_to_end(ref_cfg, init);
    rep.reference_r_equivalence = r_equivalence(ref, cfg.params);

    std::vector<double> dts, eu, eq, er;
    for (int k = 0; k < levels; ++k) {
      SchemeConfig c = cfg;
      c.dt = dt0 / std::pow(2.0, k);
      const State s = run_to_end(c, init);
      ConvergenceRow row;
      row.dt = c.dt;
      row.error_u = norm_l2(s.u - ref.u);
      row.error_Q = norm_l2(s.Q - ref.Q);
      row.error_r = norm_l2(s.r - ref.r);
      row.r_equivalence = r_equivalence(s, cfg.params);
      rep.rows.push_back(row);
      dts.push_back(row.dt);
      eu.push_back(row.error_u);
      eq.push_back(row.error_Q);
      er.push_back(row.error_r);
    }
    rep.order_u = fitted_order(dts, eu);
    rep.order_Q = fitted_order(dts, eq);
    rep.order_r = fitted_order(dts, er);
    rep.complete = true;
  } catch (const std::exception& e) {
    rep.message = e.what();
  }
  return rep;
}

// --- fuzzing ------------------------------------------------------------------------

namespace {

template <int D>
Matrix<D> random_matrix(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Matrix<D> m;
  for (double& v : m.m) v = uni(rng);
  return m;
}

template <int D>
SymTraceless<D> random_sym(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SymTraceless<D> q;
  for (int k = 0; k < SymTraceless<D>::kComps; ++k) q[k] = scale * uni(rng);
  return q;
}

template <int D>
double pointwise_cancellation(std::mt19937_64& rng, double xi) {
  const Matrix<D> g = random_matrix<D>(rng);
  const SymTraceless<D> q = random_sym<D>(rng);
  const SymTraceless<D> h = random_sym<D>(rng);
  MaterialParams p;
  p.xi = xi;
  p.dim = D;
  const double lhs = frob(g, sigma_tensor(q, h, p)) + frob(h.to_matrix(), s_tensor(g, q, p).to_matrix());
  const double nq = frob_norm(q.to_matrix());
  const double scale = frob_norm(g) * frob_norm(h.to_matrix()) * (1.0 + nq) * (1.0 + nq);
  return std::abs(lhs) / scale;
}

template <int D>
double s_trace(std::mt19937_64& rng, double xi) {
  const Matrix<D> g = random_matrix<D>(rng);
  const Matrix<D> q = random_sym<D>(rng).to_matrix();
  return std::abs(s_tensor(g, q, xi).trace());
}

template <int D>
double p_variational(std::mt19937_64& rng, const MaterialParams& p) {
  const SymTraceless<D> q = random_sym<D>(rng);
  const SymTraceless<D> dq = random_sym<D>(rng);
  const double eps = 1e-5;
  const double fd = (r_of_Q(q + eps * dq, p) - r_of_Q(q - eps * dq, p)) / (2.0 * eps);
  return std::abs(fd - frob_dot(P_of_Q(q, p), dq));
}

GridSpec random_grid(std::mt19937_64& rng, Boundary bc) {
  std::uniform_int_distribution<int> n(8, 16);
  std::uniform_real_distribution<double> len(0.5, 2.0);
  GridSpec g;
  g.nx = n(rng);
  g.ny = n(rng);
  g.lx = len(rng);
  g.ly = len(rng);
  g.bc = bc;
  return g;
}

void fill(std::mt19937_64& rng, std::span<double> v) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (double& x : v) x = uni(rng);
}

MacVectorField random_velocity(std::mt19937_64& rng, const GridSpec& g) {
  MacVectorField u(g);
  fill(rng, u.values());
  u.enforce_constraints();
  return u;
}

TensorField random_tensor(std::mt19937_64& rng, const GridSpec& g) {
  TensorField q(g, TensorLayout::kSymTraceless);
  for (int m = 0; m < q.comp_count(); ++m) fill(rng, q.comp(m).values());
  return q;
}

double max_abs(const TensorField& q) {
  double m = 0.0;
  for (int k = 0; k < q.comp_count(); ++k)
    for (double v : q.comp(k).values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

FuzzReport fuzz_identities(std::uint64_t seed, int trials) {
  FuzzReport r;
  if (trials <= 0) return r;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xi_dist(-1.0, 1.0);

  MaterialParams p2;
  MaterialParams p3;
  p3.dim = 3;
  p3.a = -0.2;
  p3.b = 1.0;
  p3.c = 1.0;
  p3.A0 = MaterialParams::default_A0(p3.a, p3.c) + 1.0;

  r.pointwise_trials = trials;
  for (int t = 0; t < trials; ++t) {
    const double xi = xi_dist(rng);
    r.cancellation_2d = std::max(r.cancellation_2d, pointwise_cancellation<2>(rng, xi));
    r.cancellation_3d = std::max(r.cancellation_3d, pointwise_cancellation<3>(rng, xi));
    r.s_trace = std::max({r.s_trace, s_trace<2>(rng, xi), s_trace<3>(rng, xi)});
    r.p_variational = std::max({r.p_variational, p_variational<2>(rng, p2), p_variational<3>(rng, p3)});
  }

  r.field_trials = std::max(1, trials / 10);
  for (int t = 0; t < r.field_trials; ++t) {
    const GridSpec g = random_grid(rng, (t % 2 == 0) ? Boundary::kDirichlet : Boundary::kPeriodic);
    const double h = std::min(g.hx(), g.hy());
    const MacVectorField u = random_velocity(rng, g);
    const MacVectorField v = random_velocity(rng, g);
    const MacVectorField w = random_velocity(rng, g);
    ScalarField pf(g);
    fill(rng, pf.values());
    const TensorField q = random_tensor(rng, g);
    const TensorField hf = random_tensor(rng, g);
    const double xi = xi_dist(rng);

    const double nu = norm_l2(u), nv = norm_l2(v), nw = norm_l2(w), np = norm_l2(pf);
    const double nh = norm_l2(hf);

    r.skew_vv = std::max(r.skew_vv, std::abs(inner(convect(u, v), v)) / (nu * nv * nv / h));
    r.skew_antisym = std::max(
        r.skew_antisym, std::abs(inner(convect(u, v), w) + inner(convect(u, w), v)) / (nu * nv * nw / h));
    r.div_grad_duality =
        std::max(r.div_grad_duality, std::abs(inner(div_u(u), pf) + inner(u, grad_p(pf))) / (nu * np / h));
    r.advect_force = std::max(r.advect_force, std::abs(inner(force_HgradQ(hf, q), u) - inner(advect_Q(u, q), hf)) /
                                                  (nu * nh * max_abs(q) / h));

    // <grad_h u, Sigma> + <H, s(u, Q)>, with the first term through sigma_force.
    const double qmax = max_abs(q);
    const double cancel = -inner(sigma_force(q, hf, xi), u) + inner(hf, s_field(u, q, xi));
    r.field_cancellation =
        std::max(r.field_cancellation, std::abs(cancel) / (nu * nh * (1.0 + qmax) * (1.0 + qmax) / h));

    const double gc = norm_grad_sq(pf);
    r.sbp_cells = std::max(r.sbp_cells, std::abs(-inner(laplace_q(pf), pf) - gc) / gc);
    const double gf = norm_grad_sq(u);
    r.sbp_faces = std::max(r.sbp_faces, std::abs(-inner(laplace_u(u), u) - gf) / gf);
  }
  return r;
}

std::vector<std::string> fuzz_failures(const FuzzReport& r, const FuzzThresholds& t) {
  std::vector<std::string> out;
  auto check = [&](const char* name, double v, double tol) {
    if (!(v <= tol)) out.push_back(std::string(name) + " = " + std::to_string(v));
  };
  check("cancellation_2d", r.cancellation_2d, t.cancellation);
  check("cancellation_3d", r.cancellation_3d, t.cancellation);
  check("s_trace", r.s_trace, t.s_trace);
  check("p_variational", r.p_variational, t.p_variational);
  check("skew_vv", r.skew_vv, t.skew);
  check("skew_antisym", r.skew_antisym, t.skew);
  check("div_grad_duality", r.div_grad_duality, t.duality);
  check("advect_force", r.advect_force, t.duality);
  check("field_cancellation", r.field_cancellation, t.field_cancellation);
  check("sbp_cells", r.sbp_cells, t.sbp);
  check("sbp_faces", r.sbp_faces, t.sbp);
  return out;
}

}  // namespace beieq
