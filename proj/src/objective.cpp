#include "nlrec/objective.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

namespace nlrec {

namespace {

Matrix leading_left_vectors(const Matrix& y, Eigen::Index r) {
  Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(r);
}

}  // namespace

Objective::Objective(LiftingSpec lifting, Eigen::Index rank, CostForm form,
                     std::shared_ptr<const MeasurementSubspace> measurement,
                     std::optional<double> lambda)
    : lifting_(std::move(lifting)), rank_(rank), form_(form), meas_(std::move(measurement)),
      lambda_(lambda) {
  if (!meas_) throw ParameterError("Objective: a measurement operator is required");
  lifting_.validate();
  if (lifting_.n != meas_->rows()) {
    throw DimensionError("Objective: lifting width does not match the measurement rows");
  }
  if (form_ == CostForm::Feature && lifting_.is_kernel()) {
    throw ParameterError("Objective: the feature form needs MonomialFeatures");
  }
  if (form_ == CostForm::KernelTrace && !lifting_.is_kernel()) {
    throw ParameterError("Objective: the kernel form needs a kernel lifting");
  }
  if (lambda_ && !(*lambda_ > 0.0)) throw ParameterError("Objective: lambda must be positive");
  if (form_ == CostForm::Feature) {
    const auto& mf = std::get<MonomialFeatures>(lifting_.kind);
    table_ = std::make_shared<const MultiIndexTable>(static_cast<int>(lifting_.n), mf.degree);
  }
  if (rank_ < 1 || rank_ > grassmann_ambient()) {
    throw ParameterError("Objective: rank must lie in [1, p]");
  }
}

Objective Objective::with_penalty(double lambda) const {
  Objective o = *this;
  if (!(lambda > 0.0)) throw ParameterError("Objective: lambda must be positive");
  o.lambda_ = lambda;
  return o;
}

Eigen::Index Objective::grassmann_ambient() const {
  return form_ == CostForm::Feature ? table_->size() : meas_->cols();
}

ProductManifold Objective::manifold(ProductManifold::Freeze freeze) const {
  return ProductManifold(lambda_ ? nullptr : meas_, freeze);
}

Matrix Objective::lifted(const Matrix& x) const {
  require_shape(x, meas_->rows(), meas_->cols(), "Objective::lifted");
  if (form_ == CostForm::Feature) return monomial_features(x, *table_);
  if (const auto* mk = std::get_if<MonomialKernel>(&lifting_.kind)) {
    return monomial_kernel(x, x, mk->degree, mk->offset);
  }
  return gaussian_kernel(x, x, std::get<GaussianKernel>(lifting_.kind).sigma);
}

double Objective::lifted_energy(const Matrix& x) const {
  const Matrix l = lifted(x);
  return form_ == CostForm::Feature ? l.squaredNorm() : l.trace();
}

void Objective::check_point(const ProductPoint& z) const {
  require_shape(z.x, meas_->rows(), meas_->cols(), "Objective (X)");
  if (z.u.ambient() != grassmann_ambient() || z.u.dim() != rank_) {
    throw DimensionError("Objective: U has the wrong shape");
  }
}

double Objective::lifted_residual(const ProductPoint& z) const {
  check_point(z);
  const Matrix& u = z.u.basis();
  const Matrix l = lifted(z.x);
  if (form_ == CostForm::Feature) return (l - u * (u.transpose() * l)).squaredNorm();
  return l.trace() - (u.transpose() * l * u).trace();
}

double Objective::cost(const ProductPoint& z) const {
  double f = lifted_residual(z);
  if (lambda_) f += *lambda_ * (meas_->apply(z.x) - meas_->rhs()).squaredNorm();
  return f;
}

double Objective::cost_change(const ProductPoint& z, const Matrix& dx) const {
  check_point(z);
  require_shape(dx, z.x.rows(), z.x.cols(), "Objective::cost_change");
  const Matrix& u = z.u.basis();
  double df = 0.0;
  if (form_ == CostForm::Feature) {
    const Matrix phi = monomial_features(z.x, *table_);
    const Matrix delta = monomial_features_change(z.x, dx, *table_);
    const Matrix r = phi - u * (u.transpose() * phi);
    const Matrix rd = delta - u * (u.transpose() * delta);
    df = 2.0 * (r.array() * rd.array()).sum() + rd.squaredNorm();
  } else {
    Matrix dk;
    if (const auto* mk = std::get_if<MonomialKernel>(&lifting_.kind)) {
      dk = monomial_kernel_change(z.x, dx, mk->degree, mk->offset);
    } else {
      dk = gaussian_kernel_change(z.x, dx, std::get<GaussianKernel>(lifting_.kind).sigma);
    }
    df = dk.trace() - (u.transpose() * dk * u).trace();
  }
  if (lambda_) {
    const Vector r = meas_->apply(z.x) - meas_->rhs();
    const Vector ad = meas_->apply(dx);
    df += *lambda_ * (2.0 * r.dot(ad) + ad.squaredNorm());
  }
  return df;
}

double Objective::cost_change_u(const ProductPoint& z, const GrassmannPoint& u_new) const {
  check_point(z);
  if (u_new.ambient() != z.u.ambient() || u_new.dim() != z.u.dim()) {
    throw DimensionError("Objective::cost_change_u: U has the wrong shape");
  }
  const Matrix& p = z.u.basis();
  // rotate the new basis onto the old one so that E = Q − P is as small as the subspace change
  Eigen::JacobiSVD<Matrix> svd(u_new.basis().transpose() * p, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix e = u_new.basis() * (svd.matrixU() * svd.matrixV().transpose()) - p;
  const Matrix l = lifted(z.x);
  const auto apply = [&](const Matrix& v) -> Matrix {
    if (form_ == CostForm::Feature) return l * (l.transpose() * v);
    return l * v;
  };
  const Matrix kp = apply(p);
  const Matrix a = p.transpose() * kp;
  const Matrix g = kp - p * a;
  // PᵀE + EᵀP = −EᵀE removes the O(‖K‖) cross term
  return -2.0 * (e.array() * g.array()).sum() + ((e.transpose() * e) * a).trace() -
         (e.transpose() * apply(e)).trace();
}

HessianBlocks Objective::egrad(const ProductPoint& z) const {
  check_point(z);
  const Matrix& u = z.u.basis();
  HessianBlocks g;
  if (form_ == CostForm::Feature) {
    const Matrix phi = monomial_features(z.x, *table_);
    g.dx = feature_jacobian_t(*table_, phi, 2.0 * (phi - u * (u.transpose() * phi)));
    g.dw = feature_grad_u(phi, u);
  } else if (const auto* mk = std::get_if<MonomialKernel>(&lifting_.kind)) {
    g.dx = monomial_grad_x(z.x, u, mk->degree, mk->offset);
    g.dw = lift_grad_w(monomial_kernel(z.x, z.x, mk->degree, mk->offset), u);
  } else {
    const double sigma = std::get<GaussianKernel>(lifting_.kind).sigma;
    g.dx = gaussian_grad_x(z.x, u, sigma);
    g.dw = lift_grad_w(gaussian_kernel(z.x, z.x, sigma), u);
  }
  if (lambda_) g.dx += 2.0 * *lambda_ * meas_->adjoint(meas_->apply(z.x) - meas_->rhs());
  return g;
}

HessianBlocks Objective::ehess(const ProductPoint& z, const ProductTangent& xi) const {
  check_point(z);
  const Matrix& u = z.u.basis();
  HessianBlocks h;
  if (form_ == CostForm::Feature) {
    h = feature_hess(z.x, *table_, u, xi.dx, xi.du);
  } else if (const auto* mk = std::get_if<MonomialKernel>(&lifting_.kind)) {
    h = monomial_hess(z.x, u, mk->degree, mk->offset, xi.dx, xi.du);
  } else {
    h = gaussian_hess_fd(z.x, u, std::get<GaussianKernel>(lifting_.kind).sigma, xi.dx, xi.du);
  }
  if (lambda_) h.dx += 2.0 * *lambda_ * meas_->adjoint(meas_->apply(xi.dx));
  return h;
}

ProductTangent Objective::rgrad(const ProductPoint& z) const {
  const HessianBlocks g = egrad(z);
  return manifold().project(z, g.dx, g.dw);
}

ProductTangent Objective::rhess(const ProductPoint& z, const ProductTangent& xi) const {
  const HessianBlocks g = egrad(z);
  const HessianBlocks h = ehess(z, xi);
  const Matrix& u = z.u.basis();
  // Quotient correction on the Grassmann factor: −ξ_U·(Uᵀ∇_U f).
  const Matrix du = h.dw - xi.du * (u.transpose() * g.dw);
  return manifold().project(z, h.dx, du);
}

ProductPoint Objective::initial_point(const Matrix& x0) const {
  require_shape(x0, meas_->rows(), meas_->cols(), "Objective::initial_point");
  return {x0, GrassmannPoint(leading_left_vectors(lifted(x0), rank_))};
}

FdReport fd_check(const Objective& obj, const ProductPoint& z, double tol, std::uint64_t seed,
                  int directions) {
  const ProductManifold mf = obj.manifold();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto random_tangent = [&]() {
    Matrix dx(z.x.rows(), z.x.cols());
    Matrix du(z.u.ambient(), z.u.dim());
    for (Eigen::Index i = 0; i < dx.size(); ++i) dx.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < du.size(); ++i) du.data()[i] = normal(rng);
    ProductTangent t = mf.project(z, dx, du);
    const double nt = mf.norm(t);
    if (nt > 0.0) t *= 1.0 / nt;
    return t;
  };
  const double steps[] = {1e-4, 1e-5, 1e-6, 1e-7};

  FdReport rep;
  const ProductTangent g = obj.rgrad(z);
  const double gn = mf.norm(g);
  const double fscale = std::max(1.0, std::abs(obj.cost(z)));
  std::vector<ProductTangent> dirs;
  for (int i = 0; i < directions; ++i) dirs.push_back(random_tangent());

  for (const auto& xi : dirs) {
    const double an = mf.inner(g, xi);
    // A vanishing gradient is compared on the cost scale instead.
    const double denom = gn > 1e-12 * fscale ? gn : fscale;
    double best = INFINITY;
    for (double h : steps) {
      const double fp = obj.cost(mf.retract(z, h * xi));
      const double fm = obj.cost(mf.retract(z, -h * xi));
      best = std::min(best, std::abs((fp - fm) / (2.0 * h) - an) / denom);
    }
    rep.grad_error = std::max(rep.grad_error, best);

    const ProductTangent hx = obj.rhess(z, xi);
    const double hn = mf.norm(hx);
    double hbest = INFINITY;
    for (double h : steps) {
      const ProductTangent gp = obj.rgrad(mf.retract(z, h * xi));
      const ProductTangent gm = obj.rgrad(mf.retract(z, -h * xi));
      ProductTangent fd = mf.project(z, gp.dx - gm.dx, gp.du - gm.du);
      fd *= 1.0 / (2.0 * h);
      const double err = mf.norm(fd - hx);
      const double scale = hn > 1e-12 * fscale ? hn : fscale;
      hbest = std::min(hbest, err / scale);
    }
    rep.hess_error = std::max(rep.hess_error, hbest);
  }
  for (std::size_t i = 0; i + 1 < dirs.size(); ++i) {
    const ProductTangent a = obj.rhess(z, dirs[i]);
    const ProductTangent b = obj.rhess(z, dirs[i + 1]);
    const double scale = std::max({mf.norm(a), mf.norm(b), 1e-300});
    rep.symmetry_error = std::max(
        rep.symmetry_error, std::abs(mf.inner(dirs[i + 1], a) - mf.inner(dirs[i], b)) / scale);
  }
  rep.grad_pass = rep.grad_error <= tol;
  rep.hess_pass = rep.hess_error <= tol;
  rep.pass = rep.grad_pass && rep.hess_pass;
  return rep;
}

}  // namespace nlrec
