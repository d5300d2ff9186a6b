#include "beieq/scheme.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace beieq {

namespace {

double sq(double x) { return x * x; }

// Diagonal of -lap_h on an interior cell (exact away from walls).
double laplacian_diagonal(const GridSpec& g) { return 2.0 / sq(g.hx()) + 2.0 / sq(g.hy()); }

ScalarField frob_field(const TensorField& a, const TensorField& b) {
  ScalarField out(a.grid());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = a.frob_at(b, c);
  return out;
}

// out_m += coef[c] * p_m[c]
void add_scaled(TensorField& out, const ScalarField& coef, const TensorField& p) {
  for (int m = 0; m < out.comp_count(); ++m) {
    auto& o = out.comp(m);
    const auto& pm = p.comp(m);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] += coef[c] * pm[c];
  }
}

// Linear part of the eliminated molecular field: L lap Q - (P : Q) P.
TensorField h_linear(const TensorField& q, const TensorField& p, double L) {
  TensorField h = laplace_q(q);
  h *= L;
  ScalarField pq = frob_field(p, q);
  pq *= -1.0;
  add_scaled(h, pq, p);
  return h;
}

}  // namespace

void SchemeConfig::validate() const {
  grid.validate();
  params.validate();
  if (params.dim != 2) throw ConfigError("params.dim: the time stepper is two-dimensional");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time.dt: must be > 0");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("time.t_end: must be >= 0");
  if (!(solver.tol > 0.0)) throw ConfigError("solver.tol: must be > 0");
  if (!(solver.poisson_tol > 0.0)) throw ConfigError("solver.poisson_tol: must be > 0");
  if (solver.max_iter < 0) throw ConfigError("solver.max_iter: must be >= 0");
  if (solver.poisson_max_iter < 0) throw ConfigError("solver.poisson_max_iter: must be >= 0");
}

int SchemeConfig::step_count() const {
  const double ratio = t_end / dt;
  return static_cast<int>(std::floor(ratio * (1.0 + 1e-12) + 1e-12));
}

// --- ledger --------------------------------------------------------------------

void EnergyLedger::start(const EnergyRow& row0) {
  rows_.assign(1, row0);
  rows_.front().ledger_residual = 0.0;
  pending_proj_ = 0.0;
  h2_ = 0.0;
}

void EnergyLedger::append(EnergyRow row, const Increments& inc) {
  if (rows_.empty()) throw std::logic_error("EnergyLedger::append before start");
  const EnergyRow& prev = rows_.back();
  row.D_proj = prev.D_proj + pending_proj_;
  row.D_u_incr = prev.D_u_incr + inc.u_incr;
  row.D_Q_incr = prev.D_Q_incr + inc.Q_incr;
  row.D_r_incr = prev.D_r_incr + inc.r_incr;
  row.D_visc = prev.D_visc + inc.visc;
  row.D_H = prev.D_H + inc.H;
  pending_proj_ = inc.projection_defect;
  h2_ += inc.h2;
  row.ledger_residual = row_residual(row, E0());
  rows_.push_back(row);
}

double row_residual(const EnergyRow& row, double E0) {
  const double diff = std::abs(row.E_total + row.dissipation() - E0);
  return E0 > 0.0 ? diff / E0 : diff;
}

double ledger_residual(const EnergyLedger& ledger) {
  return ledger.rows().empty() ? 0.0 : row_residual(ledger.rows().back(), ledger.E0());
}

double h2_budget(const EnergyLedger& ledger) { return ledger.h2_budget(); }

// --- fields ----------------------------------------------------------------------

TensorField to_layout(const TensorField& q, TensorLayout layout) {
  if (q.layout() == layout) return q;
  TensorField out(q.grid(), layout);
  for (std::size_t c = 0; c < q.grid().cell_count(); ++c) out.set_matrix(c, q.matrix(c));
  return out;
}

TensorField smooth_initial_Q(const TensorField& q_in, double dt, const SolverSettings& solver) {
  const GridSpec& g = q_in.grid();
  LinearOperator op;
  op.size = g.cell_count();
  op.apply = [&](std::span<const double> x, std::span<double> y) {
    ScalarField f(g);
    std::copy(x.begin(), x.end(), f.values().begin());
    const ScalarField lap = laplace_q(f);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] - dt * lap[k];
  };
  TensorField out(g, q_in.layout());
  CgOptions opt;
  opt.tol = solver.poisson_tol;
  opt.max_iter = solver.poisson_max_iter;
  for (int m = 0; m < q_in.comp_count(); ++m) {
    const auto b = q_in.comp(m).values();
    Vec x(b.begin(), b.end());
    const SolveReport rep = cg(op, b, x, opt);
    if (!rep.converged) throw SolverError("smooth_initial_Q: " + rep.message, rep);
    std::copy(x.begin(), x.end(), out.comp(m).values().begin());
  }
  return out;
}

ScalarField r_field(const TensorField& q, const MaterialParams& p) {
  ScalarField out(q.grid());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = r_of_Q(q.matrix(c), p);
  return out;
}

TensorField P_field(const TensorField& q, const MaterialParams& p) {
  TensorField out(q.grid(), q.layout());
  for (std::size_t c = 0; c < q.grid().cell_count(); ++c) out.set_matrix(c, P_of_Q(q.matrix(c), p));
  return out;
}

TensorField molecular_field(const TensorField& q, const ScalarField& r, const TensorField& p, double L) {
  TensorField h = laplace_q(q);
  h *= L;
  ScalarField neg_r = r;
  neg_r *= -1.0;
  add_scaled(h, neg_r, p);
  return h;
}

State init_state(const MacVectorField& u0, const TensorField& q_in, const ScalarField& p0, const SchemeConfig& cfg) {
  cfg.validate();
  const GridSpec& g = cfg.grid;
  if (!(u0.grid() == g) || !(q_in.grid() == g) || !(p0.grid() == g)) {
    throw std::invalid_argument("init_state: field grid does not match config grid");
  }
  State s;
  s.u = u0;
  s.u.enforce_constraints();
  if (norm_l2(div_u(s.u)) > cfg.solver.poisson_tol * std::max(1.0, norm_l2(s.u))) {
    // Remove the gradient part once; the pressure is left untouched.
    const ProjectionResult pr = step2_project(s.u, ScalarField(g), 0.5, cfg.solver);
    s.u = pr.u;
  }
  s.u_tilde = s.u;
  s.p = p0;
  s.Q = smooth_initial_Q(to_layout(q_in, cfg.layout), cfg.dt, cfg.solver);
  s.r = r_field(s.Q, cfg.params);
  s.P = P_field(s.Q, cfg.params);
  s.H = molecular_field(s.Q, s.r, s.P, cfg.params.L);
  s.t = 0.0;
  s.n = 0;
  return s;
}

// --- Step 1 ---------------------------------------------------------------------

Vec Step1System::pack(const MacVectorField& u, const TensorField& q) const {
  Vec x;
  x.reserve(op.size);
  for (std::size_t f : u.free_indices()) x.push_back(u[f]);
  for (int m = 0; m < q.comp_count(); ++m) {
    const auto v = q.comp(m).values();
    x.insert(x.end(), v.begin(), v.end());
  }
  return x;
}

void Step1System::unpack(std::span<const double> x, MacVectorField& u, TensorField& q) const {
  const auto& idx = u.free_indices();
  for (std::size_t k = 0; k < idx.size(); ++k) u[idx[k]] = x[k];
  u.enforce_constraints();
  std::size_t off = idx.size();
  for (int m = 0; m < q.comp_count(); ++m) {
    auto v = q.comp(m).values();
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(off), x.begin() + static_cast<std::ptrdiff_t>(off + v.size()),
              v.begin());
    off += v.size();
  }
}

Step1System build_step1_system(const State& s, const SchemeConfig& cfg) {
  const GridSpec& g = cfg.grid;
  const MaterialParams& mp = cfg.params;
  const double dt = cfg.dt;
  const TensorLayout layout = s.Q.layout();

  Step1System sys;
  sys.n_u = s.u.free_indices().size();
  const std::size_t n_q = static_cast<std::size_t>(s.Q.comp_count()) * g.cell_count();
  sys.op.size = sys.n_u + n_q;

  // F^n = (P^n : Q^n) P^n - r^n P^n
  TensorField f(g, layout);
  {
    ScalarField coef = frob_field(s.P, s.Q);
    coef -= s.r;
    add_scaled(f, coef, s.P);
  }

  // Captures by value so the operator outlives the State reference.
  const MacVectorField u_old = s.u;
  const TensorField q_old = s.Q;
  const TensorField p_old = s.P;
  const std::size_t n_u = sys.n_u;

  auto unpack = [g, layout, n_u](std::span<const double> x, MacVectorField& u, TensorField& q) {
    u = MacVectorField(g);
    q = TensorField(g, layout);
    const auto& idx = u.free_indices();
    for (std::size_t k = 0; k < n_u; ++k) u[idx[k]] = x[k];
    u.enforce_constraints();
    std::size_t off = n_u;
    for (int m = 0; m < q.comp_count(); ++m) {
      auto v = q.comp(m).values();
      for (std::size_t c = 0; c < v.size(); ++c) v[c] = x[off + c];
      off += v.size();
    }
  };
  auto pack = [n_u](const MacVectorField& u, const TensorField& q, std::span<double> y) {
    const auto& idx = u.free_indices();
    for (std::size_t k = 0; k < n_u; ++k) y[k] = u[idx[k]];
    std::size_t off = n_u;
    for (int m = 0; m < q.comp_count(); ++m) {
      const auto v = q.comp(m).values();
      for (std::size_t c = 0; c < v.size(); ++c) y[off + c] = v[c];
      off += v.size();
    }
  };

  sys.op.apply = [=](std::span<const double> x, std::span<double> y) {
    MacVectorField ut;
    TensorField q;
    unpack(x, ut, q);
    const TensorField h = h_linear(q, p_old, mp.L);

    MacVectorField mom = (1.0 / dt) * ut;
    mom += convect(u_old, ut);
    mom -= mp.mu * laplace_u(ut);
    mom -= sigma_force(q_old, h, mp.xi);
    mom += force_HgradQ(h, q_old);

    TensorField ten = (1.0 / dt) * q;
    ten += advect_Q(ut, q_old);
    ten -= s_field(ut, q_old, mp.xi);
    ten -= mp.M * h;
    pack(mom, ten, y);
  };

  sys.op.diagonal.assign(sys.op.size, 0.0);
  const double lap_d = laplacian_diagonal(g);
  for (std::size_t k = 0; k < n_u; ++k) sys.op.diagonal[k] = 1.0 / dt + mp.mu * lap_d;
  for (int m = 0; m < q_old.comp_count(); ++m) {
    const auto& pm = p_old.comp(m);
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      sys.op.diagonal[n_u + static_cast<std::size_t>(m) * g.cell_count() + c] =
          1.0 / dt + mp.M * (mp.L * lap_d + p_old.weight(m) * pm[c] * pm[c]);
    }
  }

  MacVectorField mom_rhs = (1.0 / dt) * u_old;
  mom_rhs -= grad_p(s.p);
  mom_rhs += sigma_force(q_old, f, mp.xi);
  mom_rhs -= force_HgradQ(f, q_old);
  TensorField ten_rhs = (1.0 / dt) * q_old;
  ten_rhs += mp.M * f;

  sys.rhs.assign(sys.op.size, 0.0);
  pack(mom_rhs, ten_rhs, sys.rhs);
  sys.guess.assign(sys.op.size, 0.0);
  pack(u_old, q_old, sys.guess);
  return sys;
}

Step1Result step1_solve(const State& s, const SchemeConfig& cfg) {
  const Step1System sys = build_step1_system(s, cfg);
  Vec x = sys.guess;
  BicgstabOptions opt;
  opt.tol = cfg.solver.tol;
  opt.max_iter = cfg.solver.max_iter;
  Step1Result res;
  res.report = bicgstab(sys.op, sys.rhs, x, opt);
  if (!res.report.converged) throw SolverError("step 1 (t = " + std::to_string(s.t) + "): " + res.report.message, res.report);
  res.u_tilde = MacVectorField(cfg.grid);
  res.Q = TensorField(cfg.grid, s.Q.layout());
  sys.unpack(x, res.u_tilde, res.Q);

  // H = L lap Q - (P : Q) P + F  with  F = (P : Q^n) P - r^n P.
  res.H = h_linear(res.Q, s.P, cfg.params.L);
  ScalarField coef = frob_field(s.P, s.Q);
  coef -= s.r;
  add_scaled(res.H, coef, s.P);
  return res;
}

ScalarField update_r(const State& s, const TensorField& q_new) {
  ScalarField r = s.r;
  const TensorField dq = q_new - s.Q;
  for (std::size_t c = 0; c < r.size(); ++c) r[c] += s.P.frob_at(dq, c);
  return r;
}

// --- Step 2 ---------------------------------------------------------------------

ProjectionResult step2_project(const MacVectorField& u_tilde, const ScalarField& p_old, double dt,
                               const SolverSettings& solver) {
  const GridSpec& g = u_tilde.grid();
  LinearOperator op;
  op.size = g.cell_count();
  op.apply = [&](std::span<const double> x, std::span<double> y) {
    ScalarField f(g);
    std::copy(x.begin(), x.end(), f.values().begin());
    const ScalarField lap = laplace_p(f);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = -lap[k];
  };
  // -lap dp = -div(u_tilde) / (2 dt)
  ScalarField b = div_u(u_tilde);
  b *= -1.0 / (2.0 * dt);
  Vec x(op.size, 0.0);
  CgOptions opt;
  opt.tol = solver.poisson_tol;
  opt.max_iter = solver.poisson_max_iter;
  opt.mean_zero_kernel = true;

  ProjectionResult res;
  res.report = cg(op, b.values(), x, opt);
  if (!res.report.converged) throw SolverError("pressure projection: " + res.report.message, res.report);
  res.dp = ScalarField(g);
  std::copy(x.begin(), x.end(), res.dp.values().begin());
  res.u = u_tilde;
  res.u -= (2.0 * dt) * grad_p(res.dp);
  res.u.enforce_constraints();
  res.p = p_old;
  res.p += res.dp;
  return res;
}

// --- energy and stepping --------------------------------------------------------

EnergyRow energy(const State& s, const SchemeConfig& cfg) {
  EnergyRow row;
  row.step = s.n;
  row.t = s.t;
  row.E_kin_tilde = 0.25 * inner(s.u_tilde, s.u_tilde);
  row.E_kin = 0.25 * inner(s.u, s.u);
  row.E_elastic = 0.5 * cfg.params.L * norm_grad_sq(s.Q);
  row.E_r = 0.5 * inner(s.r, s.r);
  const MacVectorField gp = grad_p(s.p);
  row.E_pterm = cfg.dt * cfg.dt * inner(gp, gp);
  row.E_total = row.E_kin_tilde + row.E_kin + row.E_elastic + row.E_r + row.E_pterm;
  row.div_u_norm = norm_l2(div_u(s.u));
  return row;
}

EnergyLedger start_ledger(const State& s, const SchemeConfig& cfg) {
  EnergyLedger ledger;
  ledger.start(energy(s, cfg));
  return ledger;
}

StepDiagnostics advance(State& s, const SchemeConfig& cfg, EnergyLedger& ledger) {
  const MaterialParams& mp = cfg.params;
  const double dt = cfg.dt;
  StepDiagnostics diag;

  Step1Result s1 = step1_solve(s, cfg);
  diag.step1 = s1.report;
  ScalarField r_new = update_r(s, s1.Q);

  {
    const TensorField h_check = molecular_field(s1.Q, r_new, s.P, mp.L);
    const double nh = norm_l2(s1.H);
    const double err = norm_l2(s1.H - h_check);
    diag.elimination_residual = nh > 0.0 ? err / nh : err;
  }

  ProjectionResult pr = step2_project(s1.u_tilde, s.p, dt, cfg.solver);
  diag.poisson = pr.report;

  EnergyLedger::Increments inc;
  const MacVectorField du = s1.u_tilde - s.u;
  inc.u_incr = 0.5 * inner(du, du);
  inc.Q_incr = 0.5 * mp.L * norm_grad_sq(s1.Q - s.Q);
  const ScalarField dr = r_new - s.r;
  inc.r_incr = 0.5 * inner(dr, dr);
  inc.visc = mp.mu * dt * norm_grad_sq(s1.u_tilde);
  inc.H = mp.M * dt * inner(s1.H, s1.H);
  const MacVectorField defect = pr.u - s1.u_tilde;
  inc.projection_defect = 0.25 * inner(defect, defect);
  const TensorField lapq = laplace_q(s1.Q);
  inc.h2 = dt * inner(lapq, lapq);

  {
    const double ut2 = inner(s1.u_tilde, s1.u_tilde);
    const double res = std::abs(0.25 * inner(pr.u, pr.u) - 0.25 * ut2 + inc.projection_defect);
    diag.pythagoras_residual = ut2 > 0.0 ? res / (0.25 * ut2) : res;
  }

  s.u = std::move(pr.u);
  s.u_tilde = std::move(s1.u_tilde);
  s.p = std::move(pr.p);
  s.Q = std::move(s1.Q);
  s.H = std::move(s1.H);
  s.r = std::move(r_new);
  s.P = P_field(s.Q, mp);
  s.n += 1;
  s.t = s.n * dt;

  EnergyRow row = energy(s, cfg);
  row.solver_iters = diag.step1.iterations + diag.poisson.iterations;
  diag.div_u_norm = row.div_u_norm;
  ledger.append(row, inc);
  return diag;
}

}  // namespace beieq
