#pragma once

/// @file tensor_core.hpp
/// @brief Pointwise Q-tensor algebra: bulk energy, the quadratized auxiliary
/// variable r, its derivative P, and the flow coupling tensors S and Sigma.
///
/// Everything here is a pure function over small value types and is generic
/// over the spatial dimension d in {2, 3}. A dimension mismatch between
/// arguments is a compile-time error.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace beieq {

/// Raised for material or run configurations that violate a hard constraint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense d x d matrix, row-major. Used for velocity gradients and for
/// intermediate products before symmetrization.
template <int D>
struct Matrix {
  static_assert(D == 2 || D == 3, "only d = 2, 3 are supported");
  std::array<double, D * D> m{};

  double& operator()(int i, int j) { return m[i * D + j]; }
  double operator()(int i, int j) const { return m[i * D + j]; }

  static Matrix identity() {
    Matrix r;
    for (int i = 0; i < D; ++i) r(i, i) = 1.0;
    return r;
  }

  Matrix transpose() const {
    Matrix r;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < D; ++i) t += (*this)(i, i);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    for (int k = 0; k < D * D; ++k) m[k] += o.m[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (int k = 0; k < D * D; ++k) m[k] -= o.m[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (auto& v : m) v *= s;
    return *this;
  }

  bool operator==(const Matrix&) const = default;
};

template <int D>
Matrix<D> operator+(Matrix<D> a, const Matrix<D>& b) { return a += b; }
template <int D>
Matrix<D> operator-(Matrix<D> a, const Matrix<D>& b) { return a -= b; }
template <int D>
Matrix<D> operator*(Matrix<D> a, double s) { return a *= s; }
template <int D>
Matrix<D> operator*(double s, Matrix<D> a) { return a *= s; }

template <int D>
Matrix<D> operator*(const Matrix<D>& a, const Matrix<D>& b) {
  Matrix<D> r;
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < D; ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

/// Frobenius inner product A:B = sum_ij A_ij B_ij.
template <int D>
double frob(const Matrix<D>& a, const Matrix<D>& b) {
  double s = 0.0;
  for (int k = 0; k < D * D; ++k) s += a.m[k] * b.m[k];
  return s;
}

template <int D>
double frob_norm(const Matrix<D>& a) { return std::sqrt(frob(a, a)); }

/// Symmetric trace-free d x d tensor stored by its independent components.
///
/// 2D: (Q11, Q12). 3D: (Q11, Q12, Q13, Q22, Q23); Q33 = -Q11 - Q22.
template <int D>
class SymTraceless {
 public:
  static constexpr int kComps = (D == 2) ? 2 : 5;

  SymTraceless() = default;
  explicit SymTraceless(const std::array<double, kComps>& c) : c_(c) {}

  double operator[](int k) const { return c_[k]; }
  double& operator[](int k) { return c_[k]; }
  const std::array<double, kComps>& comps() const { return c_; }

  Matrix<D> to_matrix() const {
    Matrix<D> q;
    if constexpr (D == 2) {
      q(0, 0) = c_[0];
      q(0, 1) = c_[1];
      q(1, 0) = c_[1];
      q(1, 1) = -c_[0];
    } else {
      q(0, 0) = c_[0];
      q(0, 1) = q(1, 0) = c_[1];
      q(0, 2) = q(2, 0) = c_[2];
      q(1, 1) = c_[3];
      q(1, 2) = q(2, 1) = c_[4];
      q(2, 2) = -c_[0] - c_[3];
    }
    return q;
  }

  /// Frobenius-orthogonal projection of an arbitrary matrix onto the
  /// symmetric trace-free subspace. Exact (up to rounding) on inputs that
  /// already lie in it.
  static SymTraceless from_matrix(const Matrix<D>& m) {
    const double third = m.trace() / D;
    SymTraceless r;
    if constexpr (D == 2) {
      r.c_[0] = m(0, 0) - third;
      r.c_[1] = 0.5 * (m(0, 1) + m(1, 0));
    } else {
      r.c_[0] = m(0, 0) - third;
      r.c_[1] = 0.5 * (m(0, 1) + m(1, 0));
      r.c_[2] = 0.5 * (m(0, 2) + m(2, 0));
      r.c_[3] = m(1, 1) - third;
      r.c_[4] = 0.5 * (m(1, 2) + m(2, 1));
    }
    return r;
  }

  SymTraceless& operator+=(const SymTraceless& o) {
    for (int k = 0; k < kComps; ++k) c_[k] += o.c_[k];
    return *this;
  }
  SymTraceless& operator-=(const SymTraceless& o) {
    for (int k = 0; k < kComps; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  SymTraceless& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }

  bool operator==(const SymTraceless&) const = default;

 private:
  std::array<double, kComps> c_{};
};

template <int D>
SymTraceless<D> operator+(SymTraceless<D> a, const SymTraceless<D>& b) { return a += b; }
template <int D>
SymTraceless<D> operator-(SymTraceless<D> a, const SymTraceless<D>& b) { return a -= b; }
template <int D>
SymTraceless<D> operator*(double s, SymTraceless<D> a) { return a *= s; }

using Sym2 = SymTraceless<2>;
using Sym3 = SymTraceless<3>;
using Mat2 = Matrix<2>;
using Mat3 = Matrix<3>;

/// Material constants of the bulk/elastic energy and the flow coupling.
struct MaterialParams {
  double a = -0.2;
  double b = 1.0;  // inert in 2D: tr(Q^3) = 0 there
  double c = 1.0;
  double L = 0.01;
  double M = 1.0;
  double xi = 0.5;
  double mu = 1.0;
  double A0 = 1.0;
  int dim = 2;

  /// A0 = max(1, a^2 / (2c)); strictly above the 2D minimum a^2 / (4c).
  static double default_A0(double a, double c) { return std::max(1.0, a * a / (2.0 * c)); }

  /// Infimum of the bulk density over trace-free symmetric tensors of
  /// dimension `dim`.
  double bulk_lower_bound() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const MaterialParams&) const = default;
};

// --- full-matrix kernels ---------------------------------------------------
// These take general d x d matrices so that a non-symmetric debug evolution
// can use exactly the same formulas.

template <int D>
double bulk_density(const Matrix<D>& q, const MaterialParams& p) {
  const Matrix<D> q2 = q * q;
  const double t = q2.trace();
  const double s = (q2 * q).trace();
  return 0.5 * p.a * t - p.b / 3.0 * s + 0.25 * p.c * t * t;
}

template <int D>
double r_of_Q(const Matrix<D>& q, const MaterialParams& p) {
  const double radicand = 2.0 * (bulk_density(q, p) + p.A0);
  if (!(radicand > 0.0)) {
    throw ConfigError("r_of_Q: non-positive radicand " + std::to_string(radicand) +
                      "; A0 = " + std::to_string(p.A0) + " is too small");
  }
  return std::sqrt(radicand);
}

template <int D>
Matrix<D> V_of_Q(const Matrix<D>& q, const MaterialParams& p) {
  const Matrix<D> q2 = q * q;
  const double t = q2.trace();
  const Matrix<D> dev = q2 - (t / D) * Matrix<D>::identity();
  return p.a * q - p.b * dev + (p.c * t) * q;
}

template <int D>
Matrix<D> P_of_Q(const Matrix<D>& q, const MaterialParams& p) {
  return (1.0 / r_of_Q(q, p)) * V_of_Q(q, p);
}

/// Symmetric and skew-symmetric parts of a velocity gradient.
template <int D>
std::pair<Matrix<D>, Matrix<D>> dw_split(const Matrix<D>& grad_u) {
  const Matrix<D> gt = grad_u.transpose();
  return {0.5 * (grad_u + gt), 0.5 * (grad_u - gt)};
}

/// s(u, Q) = S(u, Q) - (2 xi / d^2)(div u) I, with (grad_u)_ij = d_j u_i.
/// Trace-free for trace-free Q even when div u != 0.
template <int D>
Matrix<D> s_tensor(const Matrix<D>& grad_u, const Matrix<D>& q, double xi) {
  const auto [d, w] = dw_split(grad_u);
  const Matrix<D> id = Matrix<D>::identity();
  const double dq = frob(d, q);
  Matrix<D> s = w * q - q * w;
  s += xi * (q * d + d * q);
  s += (2.0 * xi / D) * d;
  s -= (2.0 * xi * dq) * (q + (1.0 / D) * id);
  s -= (2.0 * xi / (D * D) * grad_u.trace()) * id;
  return s;
}

/// Elastic stress with the isotropic part absorbed into the pressure:
/// QH - HQ - xi(HQ + QH) - (2 xi / d) H + 2 xi (Q:H) Q.
template <int D>
Matrix<D> sigma_tensor(const Matrix<D>& q, const Matrix<D>& h, double xi) {
  const Matrix<D> qh = q * h;
  const Matrix<D> hq = h * q;
  Matrix<D> sig = qh - hq;
  sig -= xi * (hq + qh);
  sig -= (2.0 * xi / D) * h;
  sig += (2.0 * xi * frob(q, h)) * q;
  return sig;
}

// --- SymTraceless front end -------------------------------------------------

template <int D>
double frob_dot(const SymTraceless<D>& a, const SymTraceless<D>& b) {
  if constexpr (D == 2) {
    return 2.0 * (a[0] * b[0] + a[1] * b[1]);
  } else {
    return frob(a.to_matrix(), b.to_matrix());
  }
}

template <int D>
double bulk_density(const SymTraceless<D>& q, const MaterialParams& p) {
  if constexpr (D == 2) {
    const double t = 2.0 * (q[0] * q[0] + q[1] * q[1]);
    return 0.5 * p.a * t + 0.25 * p.c * t * t;
  } else {
    return bulk_density(q.to_matrix(), p);
  }
}

template <int D>
double r_of_Q(const SymTraceless<D>& q, const MaterialParams& p) {
  const double radicand = 2.0 * (bulk_density(q, p) + p.A0);
  if (!(radicand > 0.0)) {
    throw ConfigError("r_of_Q: non-positive radicand " + std::to_string(radicand) +
                      "; A0 = " + std::to_string(p.A0) + " is too small");
  }
  return std::sqrt(radicand);
}

template <int D>
SymTraceless<D> V_of_Q(const SymTraceless<D>& q, const MaterialParams& p) {
  if constexpr (D == 2) {
    // Q^2 = (1/2) tr(Q^2) I in 2D, so the b-term drops out.
    const double t = 2.0 * (q[0] * q[0] + q[1] * q[1]);
    return (p.a + p.c * t) * q;
  } else {
    return SymTraceless<D>::from_matrix(V_of_Q(q.to_matrix(), p));
  }
}

template <int D>
SymTraceless<D> P_of_Q(const SymTraceless<D>& q, const MaterialParams& p) {
  return (1.0 / r_of_Q(q, p)) * V_of_Q(q, p);
}

template <int D>
SymTraceless<D> s_tensor(const Matrix<D>& grad_u, const SymTraceless<D>& q,
                         const MaterialParams& p) {
  return SymTraceless<D>::from_matrix(s_tensor(grad_u, q.to_matrix(), p.xi));
}

template <int D>
Matrix<D> sigma_tensor(const SymTraceless<D>& q, const SymTraceless<D>& h,
                       const MaterialParams& p) {
  return sigma_tensor(q.to_matrix(), h.to_matrix(), p.xi);
}

}  // namespace beieq
