#include "nlrec/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace nlrec {

namespace {

constexpr double kOrthonormalTol = 1e-10;
constexpr double kRankTol = 1e-12;

}  // namespace

GrassmannPoint::GrassmannPoint(Matrix basis) : basis_(std::move(basis)) {
  const auto p = basis_.rows();
  const auto r = basis_.cols();
  if (r < 1 || r > p) {
    throw DimensionError("GrassmannPoint: need 1 <= r <= p, got p=" + std::to_string(p) +
                         " r=" + std::to_string(r));
  }
  const double defect = (basis_.transpose() * basis_ - Matrix::Identity(r, r)).norm();
  if (!(defect <= kOrthonormalTol)) {
    throw ParameterError("GrassmannPoint: basis is not orthonormal (defect " +
                         std::to_string(defect) + ")");
  }
}

GrassmannPoint GrassmannPoint::from_span(const Matrix& m) { return GrassmannPoint(qf(m)); }

Matrix qf(const Matrix& m) {
  const auto p = m.rows();
  const auto r = m.cols();
  if (r < 1 || r > p) throw DimensionError("qf: need 1 <= cols <= rows");
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(p, r);
  const Matrix& packed = qr.matrixQR();
  const double r11 = std::abs(packed(0, 0));
  for (Eigen::Index i = 0; i < r; ++i) {
    const double rii = packed(i, i);
    if (!(std::abs(rii) >= kRankTol * r11) || r11 == 0.0) {
      throw DegenerateError("qf: rank-deficient input (|R_" + std::to_string(i) + "| = " +
                            std::to_string(std::abs(rii)) + ")");
    }
    if (rii < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

GrassmannTangent grass_project(const GrassmannPoint& u, const Matrix& z) {
  require_shape(z, u.ambient(), u.dim(), "grass_project");
  const Matrix& b = u.basis();
  return {z - b * (b.transpose() * z)};
}

GrassmannPoint grass_retract(const GrassmannPoint& u, const GrassmannTangent& h) {
  require_shape(h.value, u.ambient(), u.dim(), "grass_retract");
  return GrassmannPoint(qf(u.basis() + h.value));
}

double grass_distance(const GrassmannPoint& u1, const GrassmannPoint& u2) {
  if (u1.ambient() != u2.ambient() || u1.dim() != u2.dim()) {
    throw DimensionError("grass_distance: subspaces live in different Grassmannians");
  }
  // ‖(I − U1U1ᵀ)U2‖ avoids the cancellation in 1 − cos² for nearby subspaces.
  const Matrix& b1 = u1.basis();
  const Matrix& b2 = u2.basis();
  return (b2 - b1 * (b1.transpose() * b2)).norm();
}

// ---------------------------------------------------------------------------

MeasurementSubspace MeasurementSubspace::entry_mask(
    Eigen::Index n, Eigen::Index s, std::vector<std::pair<Eigen::Index, Eigen::Index>> omega,
    const Vector& values) {
  if (static_cast<Eigen::Index>(omega.size()) != values.size()) {
    throw DimensionError("entry_mask: one value per observed index is required");
  }
  EntryMask em{BoolMatrix::Constant(n, s, false), Matrix::Zero(n, s), {}};
  for (std::size_t k = 0; k < omega.size(); ++k) {
    const auto [i, j] = omega[k];
    if (i < 0 || i >= n || j < 0 || j >= s) {
      throw DimensionError("entry_mask: index (" + std::to_string(i) + "," + std::to_string(j) +
                           ") out of range");
    }
    if (em.mask(i, j)) {
      throw ParameterError("entry_mask: duplicate index (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
    }
    em.mask(i, j) = true;
    em.values(i, j) = values(static_cast<Eigen::Index>(k));
  }
  return entry_mask(em.mask, em.values);
}

MeasurementSubspace MeasurementSubspace::entry_mask(const BoolMatrix& mask, const Matrix& target) {
  require_shape(target, mask.rows(), mask.cols(), "entry_mask");
  EntryMask em{mask, Matrix::Zero(mask.rows(), mask.cols()), {}};
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
      if (mask(i, j)) {
        em.omega.emplace_back(i, j);
        em.values(i, j) = target(i, j);
      }
    }
  }
  Vector b(static_cast<Eigen::Index>(em.omega.size()));
  for (std::size_t k = 0; k < em.omega.size(); ++k) {
    b(static_cast<Eigen::Index>(k)) = em.values(em.omega[k].first, em.omega[k].second);
  }
  const auto n = mask.rows();
  const auto s = mask.cols();
  return MeasurementSubspace(n, s, std::move(em), std::move(b));
}

MeasurementSubspace MeasurementSubspace::dense(Eigen::Index n, Eigen::Index s, Matrix a, Vector b) {
  if (a.cols() != n * s) throw DimensionError("dense: A must have n*s columns");
  if (a.rows() != b.size()) throw DimensionError("dense: A and b disagree on m");
  if (a.rows() < 1) throw DimensionError("dense: need at least one measurement");
  const auto m = a.rows();
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  const Matrix& packed = qr.matrixQR();
  const auto k = std::min(m, n * s);
  const double r11 = std::abs(packed(0, 0));
  Eigen::Index rank = 0;
  while (rank < k && r11 > 0.0 && std::abs(packed(rank, rank)) >= kRankTol * r11) ++rank;
  if (m <= n * s && rank < m) {
    throw DegenerateError("dense: sensing matrix is rank deficient (rank " + std::to_string(rank) +
                          " < m = " + std::to_string(m) + ")");
  }
  DenseSensing ds;
  ds.q = qr.householderQ() * Matrix::Identity(n * s, rank);
  ds.r = packed.topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
  ds.perm = qr.colsPermutation();
  ds.a = std::move(a);
  ds.b = b;
  return MeasurementSubspace(n, s, std::move(ds), std::move(b));
}

Eigen::Index MeasurementSubspace::count() const { return b_.size(); }

Vector MeasurementSubspace::apply(const Matrix& x) const {
  require_shape(x, n_, s_, "MeasurementSubspace::apply");
  if (const auto* em = std::get_if<EntryMask>(&form_)) {
    Vector out(static_cast<Eigen::Index>(em->omega.size()));
    for (std::size_t k = 0; k < em->omega.size(); ++k) {
      out(static_cast<Eigen::Index>(k)) = x(em->omega[k].first, em->omega[k].second);
    }
    return out;
  }
  const auto& ds = std::get<DenseSensing>(form_);
  return ds.a * x.reshaped();
}

Matrix MeasurementSubspace::adjoint(const Vector& y) const {
  if (y.size() != count()) throw DimensionError("MeasurementSubspace::adjoint: wrong length");
  if (const auto* em = std::get_if<EntryMask>(&form_)) {
    Matrix out = Matrix::Zero(n_, s_);
    for (std::size_t k = 0; k < em->omega.size(); ++k) {
      out(em->omega[k].first, em->omega[k].second) = y(static_cast<Eigen::Index>(k));
    }
    return out;
  }
  const auto& ds = std::get<DenseSensing>(form_);
  Vector v = ds.a.transpose() * y;
  return v.reshaped(n_, s_);
}

MeasurementSubspace MeasurementSubspace::with_rhs(const Vector& b) const {
  if (b.size() != count()) throw DimensionError("with_rhs: wrong length");
  if (const auto* em = std::get_if<EntryMask>(&form_)) {
    Matrix values = Matrix::Zero(n_, s_);
    for (std::size_t k = 0; k < em->omega.size(); ++k) {
      values(em->omega[k].first, em->omega[k].second) = b(static_cast<Eigen::Index>(k));
    }
    return entry_mask(em->mask, values);
  }
  DenseSensing ds = std::get<DenseSensing>(form_);
  ds.b = b;
  return MeasurementSubspace(n_, s_, std::move(ds), b);
}

AffineTangent MeasurementSubspace::project(const Matrix& delta) const {
  require_shape(delta, n_, s_, "meas_project");
  if (const auto* em = std::get_if<EntryMask>(&form_)) {
    return {em->mask.select(Matrix::Zero(n_, s_), delta)};
  }
  const auto& ds = std::get<DenseSensing>(form_);
  Vector v = delta.reshaped();
  v -= ds.q * (ds.q.transpose() * v);
  return {v.reshaped(n_, s_)};
}

Matrix MeasurementSubspace::feasible_point() const {
  if (const auto* em = std::get_if<EntryMask>(&form_)) return em->values;
  const auto& ds = std::get<DenseSensing>(form_);
  if (ds.r.rows() < count()) {
    throw DegenerateError("feasible_point: A has more rows than rank; no generic solution");
  }
  const Vector pb = ds.perm.transpose() * b_;
  const Vector y = ds.r.transpose().triangularView<Eigen::Lower>().solve(pb);
  Vector x = ds.q * y;
  return x.reshaped(n_, s_);
}

AffineTangent meas_project(const MeasurementSubspace& l, const Matrix& delta) {
  return l.project(delta);
}

Matrix meas_feasible_point(const MeasurementSubspace& l) { return l.feasible_point(); }

// ---------------------------------------------------------------------------

ProductManifold::ProductManifold(std::shared_ptr<const MeasurementSubspace> meas, Freeze freeze)
    : meas_(std::move(meas)), freeze_(freeze) {}

void ProductManifold::check_anchor(const ProductPoint& z, const ProductTangent& xi) const {
  if (xi.dx.rows() != z.x.rows() || xi.dx.cols() != z.x.cols() ||
      xi.du.rows() != z.u.ambient() || xi.du.cols() != z.u.dim()) {
    throw DimensionError("ProductManifold: tangent is not anchored at this point");
  }
}

ProductTangent ProductManifold::project(const ProductPoint& z, const Matrix& dx,
                                        const Matrix& du) const {
  require_shape(dx, z.x.rows(), z.x.cols(), "ProductManifold::project (X)");
  require_shape(du, z.u.ambient(), z.u.dim(), "ProductManifold::project (U)");
  ProductTangent out;
  if (freeze_ == Freeze::X) {
    out.dx = Matrix::Zero(dx.rows(), dx.cols());
  } else {
    out.dx = meas_ ? meas_->project(dx).value : dx;
  }
  if (freeze_ == Freeze::U) {
    out.du = Matrix::Zero(du.rows(), du.cols());
  } else {
    out.du = grass_project(z.u, du).value;
  }
  return out;
}

ProductPoint ProductManifold::retract(const ProductPoint& z, const ProductTangent& xi) const {
  check_anchor(z, xi);
  return {z.x + xi.dx, grass_retract(z.u, GrassmannTangent{xi.du})};
}

double ProductManifold::inner(const ProductTangent& a, const ProductTangent& b) const {
  if (a.dx.rows() != b.dx.rows() || a.dx.cols() != b.dx.cols() || a.du.rows() != b.du.rows() ||
      a.du.cols() != b.du.cols()) {
    throw DimensionError("ProductManifold::inner: tangents anchored at different points");
  }
  return a.dx.cwiseProduct(b.dx).sum() + a.du.cwiseProduct(b.du).sum();
}

ProductTangent ProductManifold::zero(const ProductPoint& z) const {
  return {Matrix::Zero(z.x.rows(), z.x.cols()), Matrix::Zero(z.u.ambient(), z.u.dim())};
}

Eigen::Index ProductManifold::dimension(const ProductPoint& z) const {
  Eigen::Index dim_x = 0;
  if (freeze_ != Freeze::X) {
    dim_x = z.x.size();
    if (meas_) {
      const Eigen::Index constrained =
          meas_->is_entry_mask() ? meas_->count() : meas_->dense_form().q.cols();
      dim_x -= constrained;
    }
  }
  Eigen::Index dim_u = 0;
  if (freeze_ != Freeze::U) dim_u = z.u.dim() * (z.u.ambient() - z.u.dim());
  return dim_x + dim_u;
}

double ProductManifold::distance(const ProductPoint& a, const ProductPoint& b) {
  const double dx = (a.x - b.x).norm();
  const double du = grass_distance(a.u, b.u);
  return std::sqrt(dx * dx + du * du);
}

}  // namespace nlrec
