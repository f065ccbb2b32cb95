#pragma once

#include "nlrec/types.hpp"

#include <cmath>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

namespace nlrec {

/// Orthonormal basis of an r-dimensional subspace of R^p.
///
/// The represented object is the subspace; any basis B·Q with Q orthogonal
/// denotes the same point. r == p is accepted and denotes the whole space.
class GrassmannPoint {
 public:
  /// Validates orthonormality (basisᵀbasis = I within 1e-10) and 1 <= r <= p.
  explicit GrassmannPoint(Matrix basis);

  /// Orthonormalizes the columns of `m` (qf with positive R diagonal).
  static GrassmannPoint from_span(const Matrix& m);

  const Matrix& basis() const { return basis_; }
  Eigen::Index ambient() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }

 private:
  Matrix basis_;
};

/// Horizontal lift of a tangent vector: Uᵀ·value = 0.
struct GrassmannTangent {
  Matrix value;
};

/// Q factor of the reduced QR decomposition with a positive R diagonal.
/// Throws DegenerateError when |R_ii| < 1e-12·|R_11| for some i.
Matrix qf(const Matrix& m);

GrassmannTangent grass_project(const GrassmannPoint& u, const Matrix& z);
GrassmannPoint grass_retract(const GrassmannPoint& u, const GrassmannTangent& h);

/// sqrt(Σ sin²θᵢ) over the principal angles between the two subspaces.
double grass_distance(const GrassmannPoint& u1, const GrassmannPoint& u2);

/// Element of null(A); all observed entries zero in the entry-mask case.
struct AffineTangent {
  Matrix value;
};

/// The affine set {X ∈ R^{n×s} : A(X) = b}.
///
/// Two forms: an entry mask (matrix completion) and a dense sensing matrix
/// acting on the column-major vectorization of X.
class MeasurementSubspace {
 public:
  struct EntryMask {
    BoolMatrix mask;
    Matrix values;  // observed values on the mask, zero elsewhere
    std::vector<std::pair<Eigen::Index, Eigen::Index>> omega;  // column-major order
  };
  struct DenseSensing {
    Matrix a;  // m × (n·s)
    Vector b;
    Matrix q;  // orthonormal basis of range(Aᵀ)
    Matrix r;  // triangular factor of Aᵀ·P = Q·R, leading rank×rank block
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> perm;
  };

  /// Observed entries given as (row, col) indices with one value each.
  static MeasurementSubspace entry_mask(Eigen::Index n, Eigen::Index s,
                                        std::vector<std::pair<Eigen::Index, Eigen::Index>> omega,
                                        const Vector& values);
  /// Observed entries given by a boolean mask; values are read from `target`.
  static MeasurementSubspace entry_mask(const BoolMatrix& mask, const Matrix& target);

  /// Dense sensing A(X) = A·vec(X). Rejects a rank-deficient A when m <= n·s.
  static MeasurementSubspace dense(Eigen::Index n, Eigen::Index s, Matrix a, Vector b);

  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return s_; }
  Eigen::Index count() const;
  bool is_entry_mask() const { return std::holds_alternative<EntryMask>(form_); }
  const EntryMask& mask_form() const { return std::get<EntryMask>(form_); }
  const DenseSensing& dense_form() const { return std::get<DenseSensing>(form_); }

  const Vector& rhs() const { return b_; }
  Vector apply(const Matrix& x) const;
  Matrix adjoint(const Vector& y) const;
  double residual(const Matrix& x) const { return (apply(x) - b_).norm(); }

  /// Same operator with a different right-hand side.
  MeasurementSubspace with_rhs(const Vector& b) const;

  AffineTangent project(const Matrix& delta) const;

  /// Minimum-norm solution of A(X) = b.
  Matrix feasible_point() const;

 private:
  MeasurementSubspace(Eigen::Index n, Eigen::Index s, std::variant<EntryMask, DenseSensing> form,
                      Vector b)
      : n_(n), s_(s), form_(std::move(form)), b_(std::move(b)) {}

  Eigen::Index n_ = 0;
  Eigen::Index s_ = 0;
  std::variant<EntryMask, DenseSensing> form_;
  Vector b_;
};

AffineTangent meas_project(const MeasurementSubspace& l, const Matrix& delta);
Matrix meas_feasible_point(const MeasurementSubspace& l);

/// Iterate z = (X, U) on the product of the measurement set and a Grassmannian.
struct ProductPoint {
  Matrix x;
  GrassmannPoint u;
};

struct ProductTangent {
  Matrix dx;
  Matrix du;

  ProductTangent& operator+=(const ProductTangent& o) {
    dx += o.dx;
    du += o.du;
    return *this;
  }
  ProductTangent& operator-=(const ProductTangent& o) {
    dx -= o.dx;
    du -= o.du;
    return *this;
  }
  ProductTangent& operator*=(double a) {
    dx *= a;
    du *= a;
    return *this;
  }
  friend ProductTangent operator+(ProductTangent a, const ProductTangent& b) { return a += b; }
  friend ProductTangent operator-(ProductTangent a, const ProductTangent& b) { return a -= b; }
  friend ProductTangent operator*(double s, ProductTangent a) { return a *= s; }
  friend ProductTangent operator-(ProductTangent a) { return a *= -1.0; }
};

/// Componentwise geometry of L_{A,b} × Grass(p, r).
///
/// Without a measurement the X factor is all of R^{n×s} (penalized mode).
/// A frozen factor has a zero tangent space; that is how the X-only inner
/// trust-region of the second-order alternating scheme is expressed.
class ProductManifold {
 public:
  enum class Freeze { None, X, U };

  explicit ProductManifold(std::shared_ptr<const MeasurementSubspace> meas,
                           Freeze freeze = Freeze::None);

  const MeasurementSubspace* measurement() const { return meas_.get(); }
  Freeze freeze() const { return freeze_; }

  ProductTangent project(const ProductPoint& z, const Matrix& dx, const Matrix& du) const;
  ProductPoint retract(const ProductPoint& z, const ProductTangent& xi) const;
  double inner(const ProductTangent& a, const ProductTangent& b) const;
  double norm(const ProductTangent& a) const { return std::sqrt(inner(a, a)); }
  ProductTangent zero(const ProductPoint& z) const;

  /// Dimension of the tangent space at z.
  Eigen::Index dimension(const ProductPoint& z) const;

  /// sqrt(‖X1 − X2‖² + dist(U1, U2)²).
  static double distance(const ProductPoint& a, const ProductPoint& b);

 private:
  void check_anchor(const ProductPoint& z, const ProductTangent& xi) const;

  std::shared_ptr<const MeasurementSubspace> meas_;
  Freeze freeze_;
};

}  // namespace nlrec
