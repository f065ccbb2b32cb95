#pragma once

#include "nlrec/manifold.hpp"
#include "nlrec/types.hpp"

#include <cstdint>
#include <map>
#include <variant>
#include <vector>

namespace nlrec {

inline constexpr std::int64_t kDefaultFeatureCap = 20000;

struct MonomialFeatures {
  int degree = 2;
};

struct MonomialKernel {
  int degree = 2;
  double offset = 1.0;  // c in (XᵀY + c)^d; c = 0 gives homogeneous monomials
};

struct GaussianKernel {
  double sigma = 2.5;
};

/// Choice of lifting applied columnwise to the data matrix.
struct LiftingSpec {
  std::variant<MonomialFeatures, MonomialKernel, GaussianKernel> kind;
  Eigen::Index n = 0;  // ambient dimension of the columns

  bool is_kernel() const { return !std::holds_alternative<MonomialFeatures>(kind); }
  /// Throws ParameterError on a bad degree, width or feature count.
  void validate() const;
};

/// C(n + d, n), the number of monomials of degree <= d in n variables.
/// Throws ParameterError on overflow of a signed 64-bit integer.
std::int64_t count_monomials(std::int64_t n, std::int64_t d);

/// Multi-indices α ∈ ℕⁿ with |α| <= d in graded lexicographic order: total
/// degree ascending, then x1 > x2 > ... within a degree.
class MultiIndexTable {
 public:
  MultiIndexTable(int n, int d);

  Eigen::Index size() const { return static_cast<Eigen::Index>(alphas_.size()); }
  int vars() const { return n_; }
  int degree() const { return d_; }
  const std::vector<int>& operator[](Eigen::Index i) const { return alphas_[static_cast<std::size_t>(i)]; }

  /// Index of α − e_var, or −1 when α_var = 0.
  Eigen::Index lower(Eigen::Index i, int var) const { return lower_[static_cast<std::size_t>(i)][static_cast<std::size_t>(var)]; }
  /// Row of the multi-index, or −1 if absent.
  Eigen::Index index_of(const std::vector<int>& alpha) const;

  /// For |α| >= 1: α = parent + e_var with var the first nonzero coordinate.
  Eigen::Index parent(Eigen::Index i) const { return parent_[static_cast<std::size_t>(i)]; }
  int parent_var(Eigen::Index i) const { return parent_var_[static_cast<std::size_t>(i)]; }

 private:
  int n_;
  int d_;
  std::vector<std::vector<int>> alphas_;
  std::map<std::vector<int>, Eigen::Index> lookup_;
  std::vector<std::vector<Eigen::Index>> lower_;
  std::vector<Eigen::Index> parent_;
  std::vector<int> parent_var_;
};

/// Φ_d(X): all monomials of each column, coefficient one, in table order.
Matrix monomial_features(const Matrix& x, int d, std::int64_t cap = kDefaultFeatureCap);
Matrix monomial_features(const Matrix& x, const MultiIndexTable& table);

/// (XᵀY + c·1)^{⊙d}.
Matrix monomial_kernel(const Matrix& x, const Matrix& y, int d, double c);

/// exp(−‖xᵢ − yⱼ‖² / (2σ²)).
Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double sigma);

// L(X + D) − L(X) without forming both terms, so small steps keep full
// relative accuracy.
Matrix monomial_features_change(const Matrix& x, const Matrix& dx, const MultiIndexTable& table);
Matrix monomial_kernel_change(const Matrix& x, const Matrix& dx, int d, double c);
Matrix gaussian_kernel_change(const Matrix& x, const Matrix& dx, double sigma);

/// Euclidean Hessian-vector product split into the X and W blocks.
struct HessianBlocks {
  Matrix dx;
  Matrix dw;
};

// Derivatives of f(X, W) = trace((I − WWᵀ)·K(X, X)). W need not be
// orthonormal; the formulas are those of this Euclidean extension.

/// 2d·X·(K_{d−1} ⊙ P_{W⊥}).
Matrix monomial_grad_x(const Matrix& x, const Matrix& w, int d, double c);
Matrix monomial_grad_x(const Matrix& x, const GrassmannPoint& w, int d, double c);

HessianBlocks monomial_hess(const Matrix& x, const Matrix& w, int d, double c, const Matrix& dx,
                            const Matrix& dw);

/// −(2/σ²)·X·(diag(colsum(K ⊙ P_{W⊥})) − K ⊙ P_{W⊥}).
Matrix gaussian_grad_x(const Matrix& x, const Matrix& w, double sigma);
Matrix gaussian_grad_x(const Matrix& x, const GrassmannPoint& w, double sigma);

/// Hessian-vector product from central differences of the gradient, with a
/// perturbation of norm 1e-6·(1 + ‖X‖).
HessianBlocks gaussian_hess_fd(const Matrix& x, const Matrix& w, double sigma, const Matrix& dx,
                               const Matrix& dw);

/// −2·K·W, the W-gradient for any kernel.
Matrix lift_grad_w(const Matrix& k, const Matrix& w);
Matrix lift_grad_w(const Matrix& k, const GrassmannPoint& w);

// Feature form f(X, U) = ‖(I − UUᵀ)·Φ(X)‖²_F.

/// Directional derivative of Φ at X along Δ, same shape as Φ.
Matrix feature_directional(const Matrix& x, const MultiIndexTable& table, const Matrix& phi,
                           const Matrix& delta);

/// Jᵀ·G where J is the Jacobian of the columnwise feature map; `phi` supplies
/// the monomial values used for the lowered indices.
Matrix feature_jacobian_t(const MultiIndexTable& table, const Matrix& phi, const Matrix& g);

Matrix feature_grad_x(const Matrix& x, const MultiIndexTable& table, const Matrix& u);
Matrix feature_grad_u(const Matrix& phi, const Matrix& u);
HessianBlocks feature_hess(const Matrix& x, const MultiIndexTable& table, const Matrix& u,
                           const Matrix& dx, const Matrix& du);

}  // namespace nlrec
