#pragma once

#include "nlrec/lifting.hpp"
#include "nlrec/manifold.hpp"

#include <cstdint>
#include <memory>
#include <optional>

namespace nlrec {

enum class CostForm {
  Feature,      // ‖Φ(X) − P_U Φ(X)‖², U ∈ Grass(N, r)
  KernelTrace,  // trace(P_{W⊥} K(X, X)), W ∈ Grass(s, r)
};

/// Rank-r lifting cost on L_{A,b} × Grass(p, r), optionally with the
/// measurement constraint replaced by the penalty λ‖A(X) − b‖².
class Objective {
 public:
  Objective(LiftingSpec lifting, Eigen::Index rank, CostForm form,
            std::shared_ptr<const MeasurementSubspace> measurement,
            std::optional<double> lambda = std::nullopt);

  const LiftingSpec& lifting() const { return lifting_; }
  Eigen::Index rank() const { return rank_; }
  CostForm form() const { return form_; }
  std::optional<double> penalty() const { return lambda_; }
  const MeasurementSubspace& measurement() const { return *meas_; }
  std::shared_ptr<const MeasurementSubspace> measurement_ptr() const { return meas_; }

  /// Copy with a different penalty weight (λ-continuation).
  Objective with_penalty(double lambda) const;

  /// p in Grass(p, r): N(n, d) for the feature form, s for the kernel form.
  Eigen::Index grassmann_ambient() const;

  /// The search space: affine X factor when constrained, all of R^{n×s} when penalized.
  ProductManifold manifold(ProductManifold::Freeze freeze = ProductManifold::Freeze::None) const;

  /// Φ(X) for the feature form, K(X, X) for the kernel forms. Its r leading
  /// left singular vectors minimize the cost over U for fixed X.
  Matrix lifted(const Matrix& x) const;

  /// ‖Φ(X)‖² or trace(K(X, X)): the cost at U = {0}, used as a scale.
  double lifted_energy(const Matrix& x) const;

  /// Lifting term only (no penalty).
  double lifted_residual(const ProductPoint& z) const;
  double cost(const ProductPoint& z) const;
  /// cost(X + dx, U) − cost(X, U), accurate when the change is tiny.
  double cost_change(const ProductPoint& z, const Matrix& dx) const;
  /// cost(X, U') − cost(X, U), accurate when span U' is close to span U.
  double cost_change_u(const ProductPoint& z, const GrassmannPoint& u_new) const;

  /// Euclidean gradient of the extension to R^{n×s} × R^{p×r}.
  HessianBlocks egrad(const ProductPoint& z) const;
  /// Euclidean Hessian-vector product of the same extension.
  HessianBlocks ehess(const ProductPoint& z, const ProductTangent& xi) const;

  ProductTangent rgrad(const ProductPoint& z) const;
  ProductTangent rhess(const ProductPoint& z, const ProductTangent& xi) const;

  /// (X0, truncated SVD of the lifted X0).
  ProductPoint initial_point(const Matrix& x0) const;

 private:
  void check_point(const ProductPoint& z) const;

  LiftingSpec lifting_;
  Eigen::Index rank_;
  CostForm form_;
  std::shared_ptr<const MeasurementSubspace> meas_;
  std::optional<double> lambda_;
  std::shared_ptr<const MultiIndexTable> table_;
};

/// Result of comparing analytic derivatives with finite differences.
struct FdReport {
  double grad_error = 0.0;  // max |fd − ⟨grad, ξ⟩| / (‖grad‖·‖ξ‖) over directions
  double hess_error = 0.0;  // max ‖fd − Hess ξ‖ / ‖Hess ξ‖ over directions
  double symmetry_error = 0.0;
  bool grad_pass = false;
  bool hess_pass = false;
  bool pass = false;
};

/// Checks rgrad against central differences of the pullback and rhess against
/// central differences of rgrad along the retraction, over random tangent
/// directions and a step sweep h ∈ {1e-4, …, 1e-7}.
FdReport fd_check(const Objective& obj, const ProductPoint& z, double tol, std::uint64_t seed = 1,
                  int directions = 4);

}  // namespace nlrec
