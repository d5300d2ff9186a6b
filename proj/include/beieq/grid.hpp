#pragma once

/// @file grid.hpp
/// @brief 2D staggered (MAC) grid and its discrete calculus.
///
/// Layout:
///   - scalars and tensor components live at cell centers (i, j), i < nx, j < ny
///   - u1 lives on vertical faces (i, j), i <= nx, j < ny  (x = i hx)
///   - u2 lives on horizontal faces (i, j), i < nx, j <= ny (y = j hy)
///
/// Dirichlet walls: the wall-normal faces are pinned to zero and excluded
/// from every inner product; tangential and cell-centered ghosts use linear
/// reflection (ghost = -interior), i.e. the value is zero on the wall.
/// Periodic mode keeps the same storage; face nx (resp. ny) is an alias of
/// face 0 and is not a degree of freedom.
///
/// Every operator that appears in a pair of the energy argument is built as
/// the exact transpose of its partner (div/grad, advection/force, s/Sigma,
/// and the skew convection form), so the corresponding discrete identities
/// hold to rounding.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "beieq/tensor_core.hpp"

namespace beieq {

enum class Boundary { kDirichlet, kPeriodic };

struct GridSpec {
  int nx = 32;
  int ny = 32;
  double lx = 1.0;
  double ly = 1.0;
  Boundary bc = Boundary::kDirichlet;

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double cell_volume() const { return hx() * hy(); }
  std::size_t cell_count() const { return static_cast<std::size_t>(nx) * ny; }

  /// Throws std::invalid_argument unless nx, ny >= 4 and lx, ly > 0.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

/// Cell-centered scalar, stored x-fastest: index i + nx * j.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& grid, double value = 0.0)
      : grid_(grid), v_(grid.cell_count(), value) {}

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid_.nx) * j; }

  double& operator()(int i, int j) { return v_[index(i, j)]; }
  double operator()(int i, int j) const { return v_[index(i, j)]; }
  double& operator[](std::size_t k) { return v_[k]; }
  double operator[](std::size_t k) const { return v_[k]; }

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

 private:
  GridSpec grid_;
  std::vector<double> v_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// Face-centered velocity; u1 block followed by u2 block in one buffer.
class MacVectorField {
 public:
  MacVectorField() = default;
  explicit MacVectorField(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }

  std::size_t u1_count() const { return static_cast<std::size_t>(grid_.nx + 1) * grid_.ny; }
  std::size_t u2_count() const { return static_cast<std::size_t>(grid_.nx) * (grid_.ny + 1); }
  std::size_t size() const { return v_.size(); }

  std::size_t u1_index(int i, int j) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid_.nx + 1) * j; }
  std::size_t u2_index(int i, int j) const { return u1_count() + static_cast<std::size_t>(i) + static_cast<std::size_t>(grid_.nx) * j; }

  double& u1(int i, int j) { return v_[u1_index(i, j)]; }
  double u1(int i, int j) const { return v_[u1_index(i, j)]; }
  double& u2(int i, int j) { return v_[u2_index(i, j)]; }
  double u2(int i, int j) const { return v_[u2_index(i, j)]; }
  double& operator[](std::size_t k) { return v_[k]; }
  double operator[](std::size_t k) const { return v_[k]; }

  /// True for faces that carry a degree of freedom (not a pinned wall face
  /// and not a periodic alias).
  bool is_free_u1(int i, int j) const;
  bool is_free_u2(int i, int j) const;
  /// Flat indices of all free faces in storage order.
  const std::vector<std::size_t>& free_indices() const { return free_; }

  /// Zero pinned faces (Dirichlet) or copy face 0 onto its alias (periodic).
  void enforce_constraints();

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  MacVectorField& operator+=(const MacVectorField& o);
  MacVectorField& operator-=(const MacVectorField& o);
  MacVectorField& operator*=(double s);

 private:
  GridSpec grid_;
  std::vector<double> v_;
  std::vector<std::size_t> free_;
};

MacVectorField operator+(MacVectorField a, const MacVectorField& b);
MacVectorField operator-(MacVectorField a, const MacVectorField& b);
MacVectorField operator*(double s, MacVectorField a);

/// Storage of a 2x2 tensor field. kSymTraceless keeps (Q11, Q12); kFull keeps
/// all four entries (Q11, Q12, Q21, Q22) and is used to check numerically
/// that the scheme preserves symmetry and trace-freeness.
enum class TensorLayout { kSymTraceless, kFull };

class TensorField {
 public:
  TensorField() = default;
  TensorField(const GridSpec& grid, TensorLayout layout);

  const GridSpec& grid() const { return grid_; }
  TensorLayout layout() const { return layout_; }
  int comp_count() const { return static_cast<int>(comps_.size()); }

  /// Frobenius weight of component k: 2 for the symmetric trace-free
  /// layout, 1 for the full layout.
  double weight([[maybe_unused]] int k) const { return layout_ == TensorLayout::kSymTraceless ? 2.0 : 1.0; }

  ScalarField& comp(int k) { return comps_[k]; }
  const ScalarField& comp(int k) const { return comps_[k]; }

  Mat2 matrix(std::size_t cell) const;
  /// For kSymTraceless the matrix is projected onto the symmetric
  /// trace-free subspace.
  void set_matrix(std::size_t cell, const Mat2& m);

  /// Frobenius product of two layout-identical tensors at one cell.
  double frob_at(const TensorField& o, std::size_t cell) const;

  TensorField& operator+=(const TensorField& o);
  TensorField& operator-=(const TensorField& o);
  TensorField& operator*=(double s);

 private:
  GridSpec grid_;
  TensorLayout layout_ = TensorLayout::kSymTraceless;
  std::vector<ScalarField> comps_;
};

TensorField operator+(TensorField a, const TensorField& b);
TensorField operator-(TensorField a, const TensorField& b);
TensorField operator*(double s, TensorField a);

/// A resolved stencil reference: storage index, reflection sign, and whether
/// it came through a wall reflection.
struct Ref {
  std::size_t index;
  double sign;
  bool ghost;
};

/// Resolve a possibly out-of-range cell index. Never empty.
std::optional<Ref> cell_ref(const GridSpec& g, int i, int j);
/// Resolve a face index of component `comp` (0 = u1, 1 = u2). Empty for
/// pinned wall faces, whose value is identically zero.
std::optional<Ref> face_ref(const MacVectorField& f, int comp, int i, int j);

// --- inner products and norms ------------------------------------------------

/// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> v);

double inner(const ScalarField& f, const ScalarField& g);
double inner(const MacVectorField& f, const MacVectorField& g);
double inner(const TensorField& f, const TensorField& g);

double norm_l2(const ScalarField& f);
double norm_l2(const MacVectorField& f);
double norm_l2(const TensorField& f);

/// ||grad_h f||^2 with the difference operator underlying laplace_q /
/// laplace_u, so that <-lap f, f> = norm_grad_sq(f) exactly.
double norm_grad_sq(const ScalarField& f);
double norm_grad_sq(const TensorField& f);
double norm_grad_sq(const MacVectorField& f);

// --- operators ---------------------------------------------------------------

MacVectorField grad_p(const ScalarField& p);
/// Negative transpose of grad_p.
ScalarField div_u(const MacVectorField& u);
/// div_u(grad_p(p)): the Neumann pressure Laplacian.
ScalarField laplace_p(const ScalarField& p);

ScalarField laplace_q(const ScalarField& q);
TensorField laplace_q(const TensorField& q);
MacVectorField laplace_u(const MacVectorField& u);

/// Skew convection B_h(u_old, v) ~ (u.grad) v + (1/2)(div u) v, constructed
/// as (C - C^T) / 2 with C the centered advection matrix of u_old.
MacVectorField convect(const MacVectorField& u_old, const MacVectorField& v);

/// Cell-centered velocity (face averages).
std::vector<std::array<double, 2>> cell_velocity(const MacVectorField& u);
/// Cell-centered velocity gradient, (grad u)_kl = d_l u_k.
std::vector<Mat2> cell_velocity_gradient(const MacVectorField& u);
/// Transpose of cell_velocity_gradient (plain, unweighted).
MacVectorField cell_velocity_gradient_transpose(const std::vector<Mat2>& g, const GridSpec& grid);

/// (u . grad) Q at cell centers, centered component differences.
TensorField advect_Q(const MacVectorField& u, const TensorField& q);
/// (H grad Q)_k = H : d_k Q, mapped to faces as the exact adjoint of advect_Q.
MacVectorField force_HgradQ(const TensorField& h, const TensorField& q);

/// s(grad_h u, Q) per cell.
TensorField s_field(const MacVectorField& u, const TensorField& q, double xi);
/// Sigma(Q, H) per cell.
std::vector<Mat2> sigma_field(const TensorField& q, const TensorField& h, double xi);
/// Discrete div Sigma, defined by <sigma_force, u> = -<Sigma, grad_h u>.
MacVectorField sigma_force(const TensorField& q, const TensorField& h, double xi);

}  // namespace beieq
