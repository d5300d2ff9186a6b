#include "beieq/grid.hpp"

#include <stdexcept>
#include <string>

namespace beieq {

namespace {

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

// Reflect an index that is at most one layer outside [0, n).
int reflect(int i, int n, double& sign, bool& ghost) {
  if (i < 0) {
    sign = -sign;
    ghost = true;
    return -1 - i;
  }
  if (i >= n) {
    sign = -sign;
    ghost = true;
    return 2 * n - 1 - i;
  }
  return i;
}

double value(std::span<const double> x, const std::optional<Ref>& r) {
  return r ? r->sign * x[r->index] : 0.0;
}

// Visit every difference edge of the cell-centered Laplacian. The callback
// receives both endpoints, the spacing and the edge weight (1/2 on edges
// that reach a reflected ghost, so the wall edge has half-cell measure).
template <class Visit>
void for_each_cell_edge(const GridSpec& g, Visit&& visit) {
  const bool periodic = g.bc == Boundary::kPeriodic;
  const int lo = periodic ? 0 : -1;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = lo; i < g.nx; ++i) {
      const auto a = cell_ref(g, i, j);
      const auto b = cell_ref(g, i + 1, j);
      visit(a, b, g.hx(), (a->ghost || b->ghost) ? 0.5 : 1.0);
    }
  }
  for (int j = lo; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const auto a = cell_ref(g, i, j);
      const auto b = cell_ref(g, i, j + 1);
      visit(a, b, g.hy(), (a->ghost || b->ghost) ? 0.5 : 1.0);
    }
  }
}

// Same for the two face-centered velocity components.
template <class Visit>
void for_each_face_edge(const MacVectorField& f, Visit&& visit) {
  const GridSpec& g = f.grid();
  const bool periodic = g.bc == Boundary::kPeriodic;
  for (int comp = 0; comp < 2; ++comp) {
    // Storage extent along x and y for this component (aliases excluded).
    const int ext_x = (comp == 0 && !periodic) ? g.nx + 1 : g.nx;
    const int ext_y = (comp == 1 && !periodic) ? g.ny + 1 : g.ny;
    for (int dir = 0; dir < 2; ++dir) {
      const bool normal = dir == comp;
      const int n_dir = dir == 0 ? g.nx : g.ny;
      const int lo = (periodic || normal) ? 0 : -1;
      const double h = dir == 0 ? g.hx() : g.hy();
      const int other_ext = dir == 0 ? ext_y : ext_x;
      for (int o = 0; o < other_ext; ++o) {
        for (int s = lo; s < n_dir; ++s) {
          const int ia = dir == 0 ? s : o;
          const int ja = dir == 0 ? o : s;
          const int ib = dir == 0 ? s + 1 : o;
          const int jb = dir == 0 ? o : s + 1;
          const auto a = face_ref(f, comp, ia, ja);
          const auto b = face_ref(f, comp, ib, jb);
          if (!a && !b) continue;
          const bool ghost = (a && a->ghost) || (b && b->ghost);
          visit(a, b, h, ghost ? 0.5 : 1.0);
        }
      }
    }
  }
}

template <class Visit>
void for_each_edge(const ScalarField& f, Visit&& visit) { for_each_cell_edge(f.grid(), visit); }
template <class Visit>
void for_each_edge(const MacVectorField& f, Visit&& visit) { for_each_face_edge(f, visit); }

template <class Field>
void apply_laplacian(const Field& in, std::span<double> out) {
  const auto x = in.values();
  for_each_edge(in, [&](const std::optional<Ref>& a, const std::optional<Ref>& b, double h, double w) {
    const double d = (value(x, b) - value(x, a)) / h;
    if (a) out[a->index] += w * d * a->sign / h;
    if (b) out[b->index] -= w * d * b->sign / h;
  });
}

template <class Field>
double grad_energy(const Field& in) {
  const auto x = in.values();
  std::vector<double> terms;
  terms.reserve(2 * x.size() + 8);
  for_each_edge(in, [&](const std::optional<Ref>& a, const std::optional<Ref>& b, double h, double w) {
    const double d = (value(x, b) - value(x, a)) / h;
    terms.push_back(w * d * d);
  });
  return in.grid().cell_volume() * pairwise_sum(terms);
}

// Face -> cell interpolation entries: (cell, component k, face ref, coef).
template <class Visit>
void for_each_interp_entry(const MacVectorField& f, Visit&& visit) {
  const GridSpec& g = f.grid();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = static_cast<std::size_t>(i) + static_cast<std::size_t>(g.nx) * j;
      if (auto r = face_ref(f, 0, i, j)) visit(c, 0, *r, 0.5);
      if (auto r = face_ref(f, 0, i + 1, j)) visit(c, 0, *r, 0.5);
      if (auto r = face_ref(f, 1, i, j)) visit(c, 1, *r, 0.5);
      if (auto r = face_ref(f, 1, i, j + 1)) visit(c, 1, *r, 0.5);
    }
  }
}

// Face -> cell velocity gradient entries: (cell, k, l, face ref, coef) for
// (grad u)_kl = d_l u_k. Diagonal entries are compact MAC differences; the
// off-diagonal ones are centered differences of face-averaged values.
template <class Visit>
void for_each_gradient_entry(const MacVectorField& f, Visit&& visit) {
  const GridSpec& g = f.grid();
  const double hx = g.hx();
  const double hy = g.hy();
  auto emit = [&](std::size_t c, int k, int l, int comp, int i, int j, double coef) {
    if (auto r = face_ref(f, comp, i, j)) visit(c, k, l, *r, coef);
  };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = static_cast<std::size_t>(i) + static_cast<std::size_t>(g.nx) * j;
      emit(c, 0, 0, 0, i + 1, j, 1.0 / hx);
      emit(c, 0, 0, 0, i, j, -1.0 / hx);
      emit(c, 1, 1, 1, i, j + 1, 1.0 / hy);
      emit(c, 1, 1, 1, i, j, -1.0 / hy);
      const double qy = 0.25 / hy;
      emit(c, 0, 1, 0, i, j + 1, qy);
      emit(c, 0, 1, 0, i + 1, j + 1, qy);
      emit(c, 0, 1, 0, i, j - 1, -qy);
      emit(c, 0, 1, 0, i + 1, j - 1, -qy);
      const double qx = 0.25 / hx;
      emit(c, 1, 0, 1, i + 1, j, qx);
      emit(c, 1, 0, 1, i + 1, j + 1, qx);
      emit(c, 1, 0, 1, i - 1, j, -qx);
      emit(c, 1, 0, 1, i - 1, j + 1, -qx);
    }
  }
}

// Face <- cell pressure gradient entries: (face index, cell index, coef).
template <class Visit>
void for_each_pressure_gradient_entry(const MacVectorField& f, Visit&& visit) {
  const GridSpec& g = f.grid();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      if (!f.is_free_u1(i, j)) continue;
      const std::size_t face = f.u1_index(i, j);
      visit(face, cell_ref(g, i, j)->index, 1.0 / g.hx());
      visit(face, cell_ref(g, i - 1, j)->index, -1.0 / g.hx());
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (!f.is_free_u2(i, j)) continue;
      const std::size_t face = f.u2_index(i, j);
      visit(face, cell_ref(g, i, j)->index, 1.0 / g.hy());
      visit(face, cell_ref(g, i, j - 1)->index, -1.0 / g.hy());
    }
  }
}

// Centered cell derivative d_k q (k = 0: x, 1: y).
double cell_derivative(const ScalarField& q, int i, int j, int k) {
  const GridSpec& g = q.grid();
  const auto x = q.values();
  if (k == 0) {
    return (value(x, cell_ref(g, i + 1, j)) - value(x, cell_ref(g, i - 1, j))) / (2.0 * g.hx());
  }
  return (value(x, cell_ref(g, i, j + 1)) - value(x, cell_ref(g, i, j - 1))) / (2.0 * g.hy());
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

void GridSpec::validate() const {
  if (nx < 4 || ny < 4) throw std::invalid_argument("grid: nx, ny must be >= 4");
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("grid: lx, ly must be > 0");
}

// --- ScalarField ---------------------------------------------------------------

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "ScalarField +=");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
  return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "ScalarField -=");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
  return *this;
}
ScalarField& ScalarField::operator*=(double s) {
  for (auto& v : v_) v *= s;
  return *this;
}
ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// --- MacVectorField ------------------------------------------------------------

MacVectorField::MacVectorField(const GridSpec& grid) : grid_(grid) {
  v_.assign(u1_count() + u2_count(), 0.0);
  for (int j = 0; j < grid_.ny; ++j)
    for (int i = 0; i <= grid_.nx; ++i)
      if (is_free_u1(i, j)) free_.push_back(u1_index(i, j));
  for (int j = 0; j <= grid_.ny; ++j)
    for (int i = 0; i < grid_.nx; ++i)
      if (is_free_u2(i, j)) free_.push_back(u2_index(i, j));
}

bool MacVectorField::is_free_u1(int i, int /*j*/) const {
  if (grid_.bc == Boundary::kPeriodic) return i < grid_.nx;
  return i > 0 && i < grid_.nx;
}

bool MacVectorField::is_free_u2(int /*i*/, int j) const {
  if (grid_.bc == Boundary::kPeriodic) return j < grid_.ny;
  return j > 0 && j < grid_.ny;
}

void MacVectorField::enforce_constraints() {
  const int nx = grid_.nx;
  const int ny = grid_.ny;
  if (grid_.bc == Boundary::kPeriodic) {
    for (int j = 0; j < ny; ++j) u1(nx, j) = u1(0, j);
    for (int i = 0; i < nx; ++i) u2(i, ny) = u2(i, 0);
  } else {
    for (int j = 0; j < ny; ++j) u1(0, j) = u1(nx, j) = 0.0;
    for (int i = 0; i < nx; ++i) u2(i, 0) = u2(i, ny) = 0.0;
  }
}

MacVectorField& MacVectorField::operator+=(const MacVectorField& o) {
  require_same_grid(grid_, o.grid_, "MacVectorField +=");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
  return *this;
}
MacVectorField& MacVectorField::operator-=(const MacVectorField& o) {
  require_same_grid(grid_, o.grid_, "MacVectorField -=");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
  return *this;
}
MacVectorField& MacVectorField::operator*=(double s) {
  for (auto& v : v_) v *= s;
  return *this;
}
MacVectorField operator+(MacVectorField a, const MacVectorField& b) { return a += b; }
MacVectorField operator-(MacVectorField a, const MacVectorField& b) { return a -= b; }
MacVectorField operator*(double s, MacVectorField a) { return a *= s; }

// --- TensorField ---------------------------------------------------------------

TensorField::TensorField(const GridSpec& grid, TensorLayout layout)
    : grid_(grid), layout_(layout), comps_(layout == TensorLayout::kSymTraceless ? 2 : 4, ScalarField(grid)) {}

Mat2 TensorField::matrix(std::size_t cell) const {
  Mat2 m;
  if (layout_ == TensorLayout::kSymTraceless) {
    m(0, 0) = comps_[0][cell];
    m(0, 1) = m(1, 0) = comps_[1][cell];
    m(1, 1) = -comps_[0][cell];
  } else {
    for (int k = 0; k < 4; ++k) m.m[k] = comps_[k][cell];
  }
  return m;
}

void TensorField::set_matrix(std::size_t cell, const Mat2& m) {
  if (layout_ == TensorLayout::kSymTraceless) {
    const Sym2 s = Sym2::from_matrix(m);
    comps_[0][cell] = s[0];
    comps_[1][cell] = s[1];
  } else {
    for (int k = 0; k < 4; ++k) comps_[k][cell] = m.m[k];
  }
}

double TensorField::frob_at(const TensorField& o, std::size_t cell) const {
  double s = 0.0;
  for (int k = 0; k < comp_count(); ++k) s += weight(k) * comps_[k][cell] * o.comps_[k][cell];
  return s;
}

TensorField& TensorField::operator+=(const TensorField& o) {
  for (int k = 0; k < comp_count(); ++k) comps_[k] += o.comps_[k];
  return *this;
}
TensorField& TensorField::operator-=(const TensorField& o) {
  for (int k = 0; k < comp_count(); ++k) comps_[k] -= o.comps_[k];
  return *this;
}
TensorField& TensorField::operator*=(double s) {
  for (auto& c : comps_) c *= s;
  return *this;
}
TensorField operator+(TensorField a, const TensorField& b) { return a += b; }
TensorField operator-(TensorField a, const TensorField& b) { return a -= b; }
TensorField operator*(double s, TensorField a) { return a *= s; }

// --- references --------------------------------------------------------------

std::optional<Ref> cell_ref(const GridSpec& g, int i, int j) {
  if (g.bc == Boundary::kPeriodic) {
    return Ref{static_cast<std::size_t>(wrap(i, g.nx)) + static_cast<std::size_t>(g.nx) * wrap(j, g.ny), 1.0, false};
  }
  double sign = 1.0;
  bool ghost = false;
  const int ri = reflect(i, g.nx, sign, ghost);
  const int rj = reflect(j, g.ny, sign, ghost);
  return Ref{static_cast<std::size_t>(ri) + static_cast<std::size_t>(g.nx) * rj, sign, ghost};
}

std::optional<Ref> face_ref(const MacVectorField& f, int comp, int i, int j) {
  const GridSpec& g = f.grid();
  if (g.bc == Boundary::kPeriodic) {
    const int wi = wrap(i, g.nx);
    const int wj = wrap(j, g.ny);
    return Ref{comp == 0 ? f.u1_index(wi, wj) : f.u2_index(wi, wj), 1.0, false};
  }
  double sign = 1.0;
  bool ghost = false;
  if (comp == 0) {
    if (i <= 0 || i >= g.nx) return std::nullopt;
    const int rj = reflect(j, g.ny, sign, ghost);
    return Ref{f.u1_index(i, rj), sign, ghost};
  }
  if (j <= 0 || j >= g.ny) return std::nullopt;
  const int ri = reflect(i, g.nx, sign, ghost);
  return Ref{f.u2_index(ri, j), sign, ghost};
}

// --- inner products ------------------------------------------------------------

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double inner(const ScalarField& f, const ScalarField& g) {
  require_same_grid(f.grid(), g.grid(), "inner");
  std::vector<double> t(f.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = f[k] * g[k];
  return f.grid().cell_volume() * pairwise_sum(t);
}

double inner(const MacVectorField& f, const MacVectorField& g) {
  require_same_grid(f.grid(), g.grid(), "inner");
  const auto& idx = f.free_indices();
  std::vector<double> t(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) t[k] = f[idx[k]] * g[idx[k]];
  return f.grid().cell_volume() * pairwise_sum(t);
}

double inner(const TensorField& f, const TensorField& g) {
  if (f.layout() != g.layout()) throw std::invalid_argument("inner: tensor layout mismatch");
  double s = 0.0;
  for (int k = 0; k < f.comp_count(); ++k) s += f.weight(k) * inner(f.comp(k), g.comp(k));
  return s;
}

double norm_l2(const ScalarField& f) { return std::sqrt(inner(f, f)); }
double norm_l2(const MacVectorField& f) { return std::sqrt(inner(f, f)); }
double norm_l2(const TensorField& f) { return std::sqrt(inner(f, f)); }

double norm_grad_sq(const ScalarField& f) { return grad_energy(f); }
double norm_grad_sq(const MacVectorField& f) { return grad_energy(f); }
double norm_grad_sq(const TensorField& f) {
  double s = 0.0;
  for (int k = 0; k < f.comp_count(); ++k) s += f.weight(k) * grad_energy(f.comp(k));
  return s;
}

// --- operators -----------------------------------------------------------------

MacVectorField grad_p(const ScalarField& p) {
  MacVectorField out(p.grid());
  for_each_pressure_gradient_entry(out, [&](std::size_t face, std::size_t cell, double coef) {
    out[face] += coef * p[cell];
  });
  out.enforce_constraints();
  return out;
}

ScalarField div_u(const MacVectorField& u) {
  ScalarField out(u.grid());
  for_each_pressure_gradient_entry(u, [&](std::size_t face, std::size_t cell, double coef) {
    out[cell] -= coef * u[face];
  });
  return out;
}

ScalarField laplace_p(const ScalarField& p) { return div_u(grad_p(p)); }

ScalarField laplace_q(const ScalarField& q) {
  ScalarField out(q.grid());
  apply_laplacian(q, out.values());
  return out;
}

TensorField laplace_q(const TensorField& q) {
  TensorField out(q.grid(), q.layout());
  for (int k = 0; k < q.comp_count(); ++k) apply_laplacian(q.comp(k), out.comp(k).values());
  return out;
}

MacVectorField laplace_u(const MacVectorField& u) {
  MacVectorField out(u.grid());
  apply_laplacian(u, out.values());
  out.enforce_constraints();
  return out;
}

MacVectorField convect(const MacVectorField& a, const MacVectorField& v) {
  const GridSpec& g = a.grid();
  require_same_grid(g, v.grid(), "convect");
  MacVectorField out(g);
  const auto av = a.values();
  const auto vv = v.values();
  // Entry C[f][col] = coef: accumulate (C v - C^T v) / 2.
  auto entry = [&](std::size_t f, const std::optional<Ref>& col, double coef) {
    if (!col) return;
    const double c = 0.5 * coef * col->sign;
    out[f] += c * vv[col->index];
    out[col->index] -= c * vv[f];
  };
  const double ix = 0.5 / g.hx();
  const double iy = 0.5 / g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      if (!a.is_free_u1(i, j)) continue;
      const std::size_t f = a.u1_index(i, j);
      const double a1 = av[f];
      const double a2 = 0.25 * (value(av, face_ref(a, 1, i - 1, j)) + value(av, face_ref(a, 1, i, j)) +
                                value(av, face_ref(a, 1, i - 1, j + 1)) + value(av, face_ref(a, 1, i, j + 1)));
      entry(f, face_ref(a, 0, i + 1, j), a1 * ix);
      entry(f, face_ref(a, 0, i - 1, j), -a1 * ix);
      entry(f, face_ref(a, 0, i, j + 1), a2 * iy);
      entry(f, face_ref(a, 0, i, j - 1), -a2 * iy);
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (!a.is_free_u2(i, j)) continue;
      const std::size_t f = a.u2_index(i, j);
      const double a2 = av[f];
      const double a1 = 0.25 * (value(av, face_ref(a, 0, i, j - 1)) + value(av, face_ref(a, 0, i + 1, j - 1)) +
                                value(av, face_ref(a, 0, i, j)) + value(av, face_ref(a, 0, i + 1, j)));
      entry(f, face_ref(a, 1, i + 1, j), a1 * ix);
      entry(f, face_ref(a, 1, i - 1, j), -a1 * ix);
      entry(f, face_ref(a, 1, i, j + 1), a2 * iy);
      entry(f, face_ref(a, 1, i, j - 1), -a2 * iy);
    }
  }
  out.enforce_constraints();
  return out;
}

std::vector<std::array<double, 2>> cell_velocity(const MacVectorField& u) {
  std::vector<std::array<double, 2>> out(u.grid().cell_count(), {0.0, 0.0});
  const auto uv = u.values();
  for_each_interp_entry(u, [&](std::size_t c, int k, const Ref& r, double coef) {
    out[c][k] += coef * r.sign * uv[r.index];
  });
  return out;
}

std::vector<Mat2> cell_velocity_gradient(const MacVectorField& u) {
  std::vector<Mat2> out(u.grid().cell_count());
  const auto uv = u.values();
  for_each_gradient_entry(u, [&](std::size_t c, int k, int l, const Ref& r, double coef) {
    out[c](k, l) += coef * r.sign * uv[r.index];
  });
  return out;
}

MacVectorField cell_velocity_gradient_transpose(const std::vector<Mat2>& g, const GridSpec& grid) {
  MacVectorField out(grid);
  for_each_gradient_entry(out, [&](std::size_t c, int k, int l, const Ref& r, double coef) {
    out[r.index] += coef * r.sign * g[c](k, l);
  });
  out.enforce_constraints();
  return out;
}

TensorField advect_Q(const MacVectorField& u, const TensorField& q) {
  const GridSpec& g = q.grid();
  require_same_grid(g, u.grid(), "advect_Q");
  const auto vel = cell_velocity(u);
  TensorField out(g, q.layout());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = static_cast<std::size_t>(i) + static_cast<std::size_t>(g.nx) * j;
      for (int m = 0; m < q.comp_count(); ++m) {
        out.comp(m)[c] = vel[c][0] * cell_derivative(q.comp(m), i, j, 0) +
                         vel[c][1] * cell_derivative(q.comp(m), i, j, 1);
      }
    }
  }
  return out;
}

MacVectorField force_HgradQ(const TensorField& h, const TensorField& q) {
  const GridSpec& g = q.grid();
  if (h.layout() != q.layout()) throw std::invalid_argument("force_HgradQ: layout mismatch");
  std::vector<std::array<double, 2>> f(g.cell_count(), {0.0, 0.0});
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = static_cast<std::size_t>(i) + static_cast<std::size_t>(g.nx) * j;
      for (int m = 0; m < q.comp_count(); ++m) {
        const double hm = q.weight(m) * h.comp(m)[c];
        f[c][0] += hm * cell_derivative(q.comp(m), i, j, 0);
        f[c][1] += hm * cell_derivative(q.comp(m), i, j, 1);
      }
    }
  }
  MacVectorField out(g);
  for_each_interp_entry(out, [&](std::size_t c, int k, const Ref& r, double coef) {
    out[r.index] += coef * r.sign * f[c][k];
  });
  out.enforce_constraints();
  return out;
}

TensorField s_field(const MacVectorField& u, const TensorField& q, double xi) {
  const auto grad = cell_velocity_gradient(u);
  TensorField out(q.grid(), q.layout());
  for (std::size_t c = 0; c < grad.size(); ++c) out.set_matrix(c, s_tensor(grad[c], q.matrix(c), xi));
  return out;
}

std::vector<Mat2> sigma_field(const TensorField& q, const TensorField& h, double xi) {
  std::vector<Mat2> out(q.grid().cell_count());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = sigma_tensor(q.matrix(c), h.matrix(c), xi);
  return out;
}

MacVectorField sigma_force(const TensorField& q, const TensorField& h, double xi) {
  MacVectorField out = cell_velocity_gradient_transpose(sigma_field(q, h, xi), q.grid());
  out *= -1.0;
  return out;
}

}  // namespace beieq
