#include "nlrec/lifting.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace nlrec {

namespace {

// Entrywise integer power; exponent 0 gives the all-ones matrix.
Matrix entry_pow(const Matrix& base, int e) {
  Matrix out = Matrix::Ones(base.rows(), base.cols());
  for (int k = 0; k < e; ++k) out.array() *= base.array();
  return out;
}

Matrix perp_projector(const Matrix& w) {
  return Matrix::Identity(w.rows(), w.rows()) - w * w.transpose();
}

void enumerate_degree(int n, int t, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  const auto pos = static_cast<int>(prefix.size());
  if (pos == n - 1) {
    prefix.push_back(t);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int a = t; a >= 0; --a) {
    prefix.push_back(a);
    enumerate_degree(n, t - a, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

void LiftingSpec::validate() const {
  if (n < 1) throw ParameterError("LiftingSpec: ambient dimension must be >= 1");
  if (const auto* mf = std::get_if<MonomialFeatures>(&kind)) {
    if (mf->degree < 1) throw ParameterError("MonomialFeatures: degree must be >= 1");
    count_monomials(n, mf->degree);
  } else if (const auto* mk = std::get_if<MonomialKernel>(&kind)) {
    if (mk->degree < 1) throw ParameterError("MonomialKernel: degree must be >= 1");
    if (!std::isfinite(mk->offset)) throw ParameterError("MonomialKernel: offset must be finite");
  } else {
    const auto& gk = std::get<GaussianKernel>(kind);
    if (!(gk.sigma > 0.0) || !std::isfinite(gk.sigma)) {
      throw ParameterError("GaussianKernel: sigma must be > 0");
    }
  }
}

std::int64_t count_monomials(std::int64_t n, std::int64_t d) {
  if (n < 1 || d < 0) throw ParameterError("count_monomials: need n >= 1 and d >= 0");
  const std::int64_t k = std::min(n, d);
  const std::int64_t big = std::max(n, d);
  __int128 acc = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    acc = acc * (big + i) / i;
    if (acc > std::numeric_limits<std::int64_t>::max()) {
      throw ParameterError("count_monomials: C(" + std::to_string(n + d) + ", " +
                           std::to_string(n) + ") overflows 64-bit integers");
    }
  }
  return static_cast<std::int64_t>(acc);
}

MultiIndexTable::MultiIndexTable(int n, int d) : n_(n), d_(d) {
  if (n < 1 || d < 0) throw ParameterError("MultiIndexTable: need n >= 1 and d >= 0");
  const auto total = count_monomials(n, d);
  alphas_.reserve(static_cast<std::size_t>(total));
  std::vector<int> prefix;
  for (int t = 0; t <= d; ++t) enumerate_degree(n, t, prefix, alphas_);

  for (std::size_t i = 0; i < alphas_.size(); ++i) {
    lookup_.emplace(alphas_[i], static_cast<Eigen::Index>(i));
  }
  lower_.assign(alphas_.size(), std::vector<Eigen::Index>(static_cast<std::size_t>(n), -1));
  parent_.assign(alphas_.size(), -1);
  parent_var_.assign(alphas_.size(), -1);
  for (std::size_t i = 0; i < alphas_.size(); ++i) {
    std::vector<int> beta = alphas_[i];
    for (int v = 0; v < n; ++v) {
      auto& bv = beta[static_cast<std::size_t>(v)];
      if (bv == 0) continue;
      --bv;
      lower_[i][static_cast<std::size_t>(v)] = lookup_.at(beta);
      ++bv;
      if (parent_var_[i] < 0) {
        parent_var_[i] = v;
        parent_[i] = lower_[i][static_cast<std::size_t>(v)];
      }
    }
  }
}

Eigen::Index MultiIndexTable::index_of(const std::vector<int>& alpha) const {
  const auto it = lookup_.find(alpha);
  return it == lookup_.end() ? -1 : it->second;
}

Matrix monomial_features(const Matrix& x, int d, std::int64_t cap) {
  if (d < 1) throw ParameterError("monomial_features: degree must be >= 1");
  const auto count = count_monomials(x.rows(), d);
  if (count > cap) {
    throw ParameterError("monomial_features: N(" + std::to_string(x.rows()) + "," +
                         std::to_string(d) + ") = " + std::to_string(count) +
                         " exceeds the feature cap " + std::to_string(cap));
  }
  return monomial_features(x, MultiIndexTable(static_cast<int>(x.rows()), d));
}

Matrix monomial_features(const Matrix& x, const MultiIndexTable& table) {
  if (x.rows() != table.vars()) throw DimensionError("monomial_features: table/data mismatch");
  Matrix phi(table.size(), x.cols());
  phi.row(0).setOnes();
  for (Eigen::Index i = 1; i < table.size(); ++i) {
    phi.row(i) = phi.row(table.parent(i)).cwiseProduct(x.row(table.parent_var(i)));
  }
  return phi;
}

Matrix monomial_kernel(const Matrix& x, const Matrix& y, int d, double c) {
  if (x.rows() != y.rows()) throw DimensionError("monomial_kernel: row counts differ");
  if (d < 0) throw ParameterError("monomial_kernel: negative degree");
  Matrix base = x.transpose() * y;
  base.array() += c;
  return entry_pow(base, d);
}

Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double sigma) {
  if (x.rows() != y.rows()) throw DimensionError("gaussian_kernel: row counts differ");
  if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel: sigma must be > 0");
  const double scale = -1.0 / (2.0 * sigma * sigma);
  Matrix k(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      k(i, j) = std::exp(scale * (x.col(i) - y.col(j)).squaredNorm());
    }
  }
  return k;
}

Matrix monomial_features_change(const Matrix& x, const Matrix& dx, const MultiIndexTable& table) {
  require_shape(dx, x.rows(), x.cols(), "monomial_features_change");
  const Matrix y = x + dx;
  const Matrix phi_y = monomial_features(y, table);
  // φ_α = x_v·φ_parent, so Δφ_α = d_v·φ_parent(X + D) + x_v·Δφ_parent.
  Matrix delta(table.size(), x.cols());
  delta.row(0).setZero();
  for (Eigen::Index i = 1; i < table.size(); ++i) {
    const Eigen::Index p = table.parent(i);
    const int v = table.parent_var(i);
    delta.row(i) = dx.row(v).cwiseProduct(phi_y.row(p)) + x.row(v).cwiseProduct(delta.row(p));
  }
  return delta;
}

Matrix monomial_kernel_change(const Matrix& x, const Matrix& dx, int d, double c) {
  require_shape(dx, x.rows(), x.cols(), "monomial_kernel_change");
  if (d < 0) throw ParameterError("monomial_kernel_change: negative degree");
  Matrix a = x.transpose() * x;
  a.array() += c;
  Matrix e = x.transpose() * dx;
  e += e.transpose().eval();
  e += dx.transpose() * dx;
  const Matrix b = a + e;
  // bᵈ − aᵈ = (b − a)·Σ_k b^k a^{d−1−k}
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double sum = 0.0, bk = 1.0;
      for (int k = 0; k < d; ++k) {
        sum += bk * std::pow(a(i, j), d - 1 - k);
        bk *= b(i, j);
      }
      out(i, j) = e(i, j) * sum;
    }
  }
  return out;
}

Matrix gaussian_kernel_change(const Matrix& x, const Matrix& dx, double sigma) {
  require_shape(dx, x.rows(), x.cols(), "gaussian_kernel_change");
  if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel_change: sigma must be > 0");
  const double scale = -1.0 / (2.0 * sigma * sigma);
  const Eigen::Index s = x.cols();
  Matrix out(s, s);
  for (Eigen::Index j = 0; j < s; ++j) {
    for (Eigen::Index i = 0; i < s; ++i) {
      const Vector u = x.col(i) - x.col(j);
      const Vector e = dx.col(i) - dx.col(j);
      const double grow = 2.0 * u.dot(e) + e.squaredNorm();
      out(i, j) = std::exp(scale * u.squaredNorm()) * std::expm1(scale * grow);
    }
  }
  return out;
}

Matrix monomial_grad_x(const Matrix& x, const Matrix& w, int d, double c) {
  if (d < 1) throw ParameterError("monomial_grad_x: degree must be >= 1");
  if (w.rows() != x.cols()) throw DimensionError("monomial_grad_x: W must have s rows");
  const Matrix kd1 = monomial_kernel(x, x, d - 1, c);
  return 2.0 * d * x * kd1.cwiseProduct(perp_projector(w));
}

Matrix monomial_grad_x(const Matrix& x, const GrassmannPoint& w, int d, double c) {
  return monomial_grad_x(x, w.basis(), d, c);
}

HessianBlocks monomial_hess(const Matrix& x, const Matrix& w, int d, double c, const Matrix& dx,
                            const Matrix& dw) {
  if (d < 1) throw ParameterError("monomial_hess: degree must be >= 1");
  require_shape(dx, x.rows(), x.cols(), "monomial_hess (dX)");
  require_shape(dw, w.rows(), w.cols(), "monomial_hess (dW)");
  const Matrix perp = perp_projector(w);
  const Matrix kd = monomial_kernel(x, x, d, c);
  const Matrix kd1 = monomial_kernel(x, x, d - 1, c);
  const Matrix sym = x.transpose() * dx + dx.transpose() * x;
  const Matrix wsym = w * dw.transpose() + dw * w.transpose();

  HessianBlocks out;
  out.dx = 2.0 * d * dx * kd1.cwiseProduct(perp) - 2.0 * d * x * kd1.cwiseProduct(wsym);
  if (d >= 2) {
    const Matrix kd2 = monomial_kernel(x, x, d - 2, c);
    out.dx += 2.0 * d * (d - 1) * x * kd2.cwiseProduct(sym).cwiseProduct(perp);
  }
  out.dw = -2.0 * d * kd1.cwiseProduct(sym) * w - 2.0 * kd * dw;
  return out;
}

Matrix gaussian_grad_x(const Matrix& x, const Matrix& w, double sigma) {
  if (w.rows() != x.cols()) throw DimensionError("gaussian_grad_x: W must have s rows");
  const Matrix kp = gaussian_kernel(x, x, sigma).cwiseProduct(perp_projector(w));
  Matrix m = -kp;
  m.diagonal() += kp.colwise().sum().transpose();
  return -(2.0 / (sigma * sigma)) * x * m;
}

Matrix gaussian_grad_x(const Matrix& x, const GrassmannPoint& w, double sigma) {
  return gaussian_grad_x(x, w.basis(), sigma);
}

HessianBlocks gaussian_hess_fd(const Matrix& x, const Matrix& w, double sigma, const Matrix& dx,
                               const Matrix& dw) {
  require_shape(dx, x.rows(), x.cols(), "gaussian_hess_fd (dX)");
  require_shape(dw, w.rows(), w.cols(), "gaussian_hess_fd (dW)");
  const double dir_norm = std::sqrt(dx.squaredNorm() + dw.squaredNorm());
  if (dir_norm == 0.0) return {Matrix::Zero(dx.rows(), dx.cols()), Matrix::Zero(dw.rows(), dw.cols())};
  const double t = 1e-6 * (1.0 + x.norm()) / dir_norm;
  const auto grads = [&](double sign) {
    const Matrix xs = x + sign * t * dx;
    const Matrix ws = w + sign * t * dw;
    return HessianBlocks{gaussian_grad_x(xs, ws, sigma),
                         lift_grad_w(gaussian_kernel(xs, xs, sigma), ws)};
  };
  const HessianBlocks plus = grads(1.0);
  const HessianBlocks minus = grads(-1.0);
  return {(plus.dx - minus.dx) / (2.0 * t), (plus.dw - minus.dw) / (2.0 * t)};
}

Matrix lift_grad_w(const Matrix& k, const Matrix& w) {
  if (k.rows() != k.cols() || k.cols() != w.rows()) {
    throw DimensionError("lift_grad_w: K must be s×s and W s×r");
  }
  return -2.0 * k * w;
}

Matrix lift_grad_w(const Matrix& k, const GrassmannPoint& w) { return lift_grad_w(k, w.basis()); }

Matrix feature_directional(const Matrix& x, const MultiIndexTable& table, const Matrix& phi,
                           const Matrix& delta) {
  require_shape(delta, x.rows(), x.cols(), "feature_directional");
  Matrix out = Matrix::Zero(table.size(), x.cols());
  for (Eigen::Index i = 1; i < table.size(); ++i) {
    const auto& alpha = table[i];
    for (int v = 0; v < table.vars(); ++v) {
      const int a = alpha[static_cast<std::size_t>(v)];
      if (a == 0) continue;
      out.row(i) += a * phi.row(table.lower(i, v)).cwiseProduct(delta.row(v));
    }
  }
  return out;
}

Matrix feature_jacobian_t(const MultiIndexTable& table, const Matrix& phi, const Matrix& g) {
  Matrix out = Matrix::Zero(table.vars(), g.cols());
  for (Eigen::Index i = 1; i < table.size(); ++i) {
    const auto& alpha = table[i];
    for (int v = 0; v < table.vars(); ++v) {
      const int a = alpha[static_cast<std::size_t>(v)];
      if (a == 0) continue;
      out.row(v) += a * phi.row(table.lower(i, v)).cwiseProduct(g.row(i));
    }
  }
  return out;
}

Matrix feature_grad_x(const Matrix& x, const MultiIndexTable& table, const Matrix& u) {
  const Matrix phi = monomial_features(x, table);
  const Matrix resid = phi - u * (u.transpose() * phi);
  return feature_jacobian_t(table, phi, 2.0 * resid);
}

Matrix feature_grad_u(const Matrix& phi, const Matrix& u) {
  return -2.0 * phi * (phi.transpose() * u);
}

HessianBlocks feature_hess(const Matrix& x, const MultiIndexTable& table, const Matrix& u,
                           const Matrix& dx, const Matrix& du) {
  const Matrix phi = monomial_features(x, table);
  require_shape(du, phi.rows(), u.cols(), "feature_hess (dU)");
  const Matrix dphi = feature_directional(x, table, phi, dx);
  const Matrix resid = phi - u * (u.transpose() * phi);
  const Matrix dresid_x = dphi - u * (u.transpose() * dphi);
  const Matrix dresid_u = -(du * (u.transpose() * phi) + u * (du.transpose() * phi));

  HessianBlocks out;
  out.dx = feature_jacobian_t(table, phi, 2.0 * (dresid_x + dresid_u)) +
           feature_jacobian_t(table, dphi, 2.0 * resid);
  out.dw = -2.0 * (dphi * (phi.transpose() * u) + phi * (dphi.transpose() * u)) -
           2.0 * phi * (phi.transpose() * du);
  return out;
}

}  // namespace nlrec
