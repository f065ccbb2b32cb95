#include "nlrec/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace nlrec {

namespace {

double tangent_inner(const ProductTangent& a, const ProductTangent& b) {
  return a.dx.cwiseProduct(b.dx).sum() + a.du.cwiseProduct(b.du).sum();
}

double rmse_or_nan(const Matrix& x, const Matrix* truth) {
  if (truth == nullptr) return std::numeric_limits<double>::quiet_NaN();
  return (x - *truth).norm() / std::sqrt(static_cast<double>(x.size()));
}

double infeasibility(const ProductManifold& mf, const Matrix& x) {
  const MeasurementSubspace* l = mf.measurement();
  return l ? l->residual(x) : 0.0;
}

Matrix orth(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

// Smallest eigenpair of the Riemannian Hessian, assembled densely in ambient
// coordinates as P·Hess·P. Normal directions contribute zero eigenvalues.
std::pair<double, ProductTangent> min_curvature(const ProductManifold& mf, const ProductPoint& z,
                                                const HessOp& hess) {
  const Eigen::Index nx = z.x.size();
  const Eigen::Index nu = z.u.basis().size();
  const Eigen::Index n = nx + nu;
  Matrix h(n, n);
  Matrix ex = Matrix::Zero(z.x.rows(), z.x.cols());
  Matrix eu = Matrix::Zero(z.u.ambient(), z.u.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i < nx) ex.data()[i] = 1.0; else eu.data()[i - nx] = 1.0;
    const ProductTangent hv = hess(mf.project(z, ex, eu));
    h.col(i).head(nx) = hv.dx.reshaped();
    h.col(i).tail(nu) = hv.du.reshaped();
    if (i < nx) ex.data()[i] = 0.0; else eu.data()[i - nx] = 0.0;
  }
  const Matrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector v = es.eigenvectors().col(0);
  const Matrix vx = v.head(nx).reshaped(z.x.rows(), z.x.cols());
  const Matrix vu = v.tail(nu).reshaped(z.u.ambient(), z.u.dim());
  ProductTangent t = mf.project(z, vx, vu);
  const double tn = mf.norm(t);
  if (tn > 0.0) t *= 1.0 / tn;
  return {es.eigenvalues()(0), t};
}

}  // namespace

const char* to_string(SvdMode m) {
  switch (m) {
    case SvdMode::None: return "none";
    case SvdMode::Exact: return "exact";
    case SvdMode::RandomizedPower: return "randomized_power";
    case SvdMode::RandomizedPlain: return "randomized_plain";
  }
  return "?";
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::GradTol: return "grad_tol";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::Stalled: return "stalled";
  }
  return "?";
}

double SolveTrace::final_gnorm() const {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const TraceRow& r = rows.back();
  return std::hypot(r.gnorm_x, r.gnorm_u);
}

void SolveTrace::write_csv(std::ostream& os) const {
  os << "k,f,gnorm_x,gnorm_u,step,delta,rho,svd_mode,inner_iters,rmse\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << r.k << ',' << num(r.f) << ',' << num(r.gnorm_x) << ',' << num(r.gnorm_u) << ','
       << num(r.step) << ',' << num(r.delta) << ',' << num(r.rho) << ',' << to_string(r.svd_mode)
       << ',' << r.inner_iters << ',' << num(r.rmse) << '\n';
  }
}

void RtrConfig::validate() const {
  if (!(delta0 > 0.0)) throw ParameterError("RtrConfig: delta0 must be positive");
  if (delta_bar != 0.0 && !(delta0 < delta_bar)) {
    throw ParameterError("RtrConfig: need 0 < delta0 < delta_bar");
  }
  if (!(rho_prime > 0.0 && rho_prime < 0.25)) {
    throw ParameterError("RtrConfig: rho_prime must lie in (0, 1/4)");
  }
  if (!(eps_g >= 0.0) || !(eps_h > 0.0)) throw ParameterError("RtrConfig: bad tolerances");
  if (max_iter < 0) throw ParameterError("RtrConfig: max_iter must be >= 0");
  if (!(tcg.kappa > 0.0 && tcg.kappa < 1.0) || !(tcg.theta > 0.0)) {
    throw ParameterError("RtrConfig: tcg kappa must lie in (0, 1) and theta be positive");
  }
}

TcgResult tcg_subproblem(const ProductTangent& grad, const HessOp& hess, double delta,
                         const TcgConfig& cfg, int dimension) {
  if (!(delta > 0.0)) throw ParameterError("tcg_subproblem: radius must be positive");
  TcgResult out;
  out.eta = 0.0 * grad;
  out.h_eta = out.eta;
  ProductTangent r = grad;
  double r_r = tangent_inner(r, r);
  const double r0 = std::sqrt(r_r);
  if (r0 == 0.0) return out;

  const int max_inner = cfg.max_inner > 0 ? cfg.max_inner : std::max(dimension, 1);
  ProductTangent d = -r;
  double e_e = 0.0;  // ‖η‖²
  double e_d = 0.0;  // ⟨η, d⟩
  double d_d = r_r;  // ‖d‖²
  double model = 0.0;
  const double stop = r0 * std::min(std::pow(r0, cfg.theta), cfg.kappa);

  for (int j = 0; j < max_inner; ++j) {
    const ProductTangent hd = hess(d);
    const double d_hd = tangent_inner(d, hd);
    if (!std::isfinite(d_hd)) throw NumericalFailure("tcg_subproblem: non-finite curvature");
    const double alpha = r_r / d_hd;
    const double e_e_new = e_e + 2.0 * alpha * e_d + alpha * alpha * d_d;
    out.iterations = j + 1;

    if (d_hd <= 0.0 || e_e_new >= delta * delta) {
      const double tau = (-e_d + std::sqrt(e_d * e_d + d_d * (delta * delta - e_e))) / d_d;
      out.eta += tau * d;
      out.h_eta += tau * hd;
      out.on_boundary = true;
      out.negative_curvature = d_hd <= 0.0;
      return out;
    }

    ProductTangent eta_new = out.eta + alpha * d;
    ProductTangent h_new = out.h_eta + alpha * hd;
    const double model_new = tangent_inner(eta_new, grad) + 0.5 * tangent_inner(eta_new, h_new);
    if (model_new >= model) return out;  // roundoff has taken over
    out.eta = std::move(eta_new);
    out.h_eta = std::move(h_new);
    model = model_new;
    e_e = e_e_new;

    r += alpha * hd;
    const double r_r_new = tangent_inner(r, r);
    if (std::sqrt(r_r_new) <= stop) return out;
    const double beta = r_r_new / r_r;
    r_r = r_r_new;
    d = beta * d - r;
    e_d = beta * (e_d + alpha * d_d);
    d_d = r_r + beta * beta * d_d;
  }
  return out;
}

namespace {

SolveResult rtr_on(const Objective& obj, const ProductManifold& mf, const ProductPoint& z0,
                   const RtrConfig& cfg, const Matrix* truth) {
  cfg.validate();
  SolveResult res{z0, {}};
  ProductPoint& z = res.z;
  const auto dim = static_cast<int>(mf.dimension(z));
  const double delta_bar = cfg.delta_bar > 0.0 ? cfg.delta_bar : 2.0 * std::sqrt(std::max(dim, 1));
  if (!(cfg.delta0 < delta_bar) && cfg.delta_bar > 0.0) {
    throw ParameterError("rtr_solve: need delta0 < delta_bar");
  }
  double radius = std::min(cfg.delta0, delta_bar);

  double f = obj.cost(z);
  const auto grad_at = [&](const ProductPoint& p) {
    const ProductTangent g = obj.rgrad(p);
    return mf.project(p, g.dx, g.du);
  };
  ProductTangent g = grad_at(z);

  for (int k = 0;; ++k) {
    if (!std::isfinite(f)) throw NumericalFailure("rtr_solve: non-finite cost");
    const double gn = mf.norm(g);
    TraceRow row;
    row.k = k;
    row.f = f;
    row.gnorm_x = g.dx.norm();
    row.gnorm_u = g.du.norm();
    row.delta = radius;
    row.rmse = rmse_or_nan(z.x, truth);
    row.infeasibility = infeasibility(mf, z.x);

    const HessOp hess = [&](const ProductTangent& v) {
      if (!cfg.second_order) return v;
      const ProductTangent h = obj.rhess(z, v);
      return mf.project(z, h.dx, h.du);
    };

    TcgResult step;
    if (gn <= cfg.eps_g) {
      bool done = true;
      if (std::isfinite(cfg.eps_h) && k < cfg.max_iter) {
        const auto [lmin, v] = min_curvature(mf, z, hess);
        if (lmin < -cfg.eps_h) {
          done = false;
          const double sgn = tangent_inner(g, v) > 0.0 ? -1.0 : 1.0;
          step.eta = (sgn * radius) * v;
          step.h_eta = hess(step.eta);
          step.on_boundary = true;
          step.negative_curvature = true;
        }
      }
      if (done) {
        res.trace.status = SolveStatus::GradTol;
        row.kind = RowKind::Final;
        row.step = 0.0;
        res.trace.rows.push_back(row);
        return res;
      }
    } else {
      if (k >= cfg.max_iter) {
        res.trace.status = SolveStatus::MaxIter;
        row.kind = RowKind::Final;
        res.trace.rows.push_back(row);
        return res;
      }
      step = tcg_subproblem(g, hess, radius, cfg.tcg, dim);
    }

    const ProductPoint trial = mf.retract(z, step.eta);
    const double f_trial = obj.cost(trial);
    const double model_decrease =
        -(tangent_inner(g, step.eta) + 0.5 * tangent_inner(step.eta, step.h_eta));
    const double actual = f - f_trial;
    double rho;
    if (model_decrease <= 1e-15 * (1.0 + std::abs(f))) {
      rho = actual >= 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    } else {
      rho = actual / model_decrease;
    }
    if (!std::isfinite(f_trial)) rho = -std::numeric_limits<double>::infinity();

    row.step = mf.norm(step.eta);
    row.rho = rho;
    row.inner_iters = step.iterations;
    row.f_next = f_trial;
    row.accepted = rho > cfg.rho_prime;
    res.trace.rows.push_back(row);

    if (rho < 0.25) {
      radius *= 0.25;
    } else if (rho > 0.75 && step.on_boundary) {
      radius = std::min(2.0 * radius, delta_bar);
    }
    if (row.accepted) {
      z = trial;
      f = f_trial;
      g = grad_at(z);
    }
    if (radius < std::numeric_limits<double>::epsilon() * delta_bar) {
      res.trace.status = SolveStatus::Stalled;
      TraceRow last;
      last.k = k + 1;
      last.f = f;
      last.gnorm_x = g.dx.norm();
      last.gnorm_u = g.du.norm();
      last.delta = radius;
      last.rmse = rmse_or_nan(z.x, truth);
      last.infeasibility = infeasibility(mf, z.x);
      last.kind = RowKind::Final;
      res.trace.rows.push_back(last);
      return res;
    }
  }
}

}  // namespace

SolveResult rtr_solve(const Objective& obj, const ProductPoint& z0, const RtrConfig& cfg,
                      const Matrix* truth) {
  return rtr_on(obj, obj.manifold(), z0, cfg, truth);
}

SolveResult rtr_solve(const Objective& obj, const ProductPoint& z0, const RtrConfig& cfg,
                      ProductManifold::Freeze freeze, const Matrix* truth) {
  return rtr_on(obj, obj.manifold(freeze), z0, cfg, truth);
}

double armijo(const std::function<double(double)>& f_along, double f0, double g_dot_d,
              const ArmijoConfig& cfg) {
  if (!(g_dot_d < 0.0)) throw ParameterError("armijo: direction is not a descent direction");
  if (!(cfg.alpha0 > 0.0) || !(cfg.tau > 0.0 && cfg.tau < 1.0) ||
      !(cfg.beta > 0.0 && cfg.beta < 1.0)) {
    throw ParameterError("armijo: need alpha0 > 0 and tau, beta in (0, 1)");
  }
  double alpha = cfg.alpha0;
  for (int i = 0; i <= cfg.max_backtracks; ++i) {
    const double fa = f_along(alpha);
    if (fa <= f0 + cfg.beta * alpha * g_dot_d) return alpha;
    alpha *= cfg.tau;
  }
  throw LineSearchFailure("armijo: no sufficient decrease after " +
                          std::to_string(cfg.max_backtracks) + " backtracks");
}

SvdResult truncated_svd(const Matrix& y, Eigen::Index r) {
  const Eigen::Index k = std::min(y.rows(), y.cols());
  if (r < 1 || r > y.rows()) throw ParameterError("truncated_svd: need 1 <= r <= rows");
  const bool full = r > k;
  Eigen::BDCSVD<Matrix> svd(y, full ? Eigen::ComputeFullU : Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  SvdResult out{GrassmannPoint(svd.matrixU().leftCols(r)), false};
  if (r < k) out.tie = sv(r - 1) - sv(r) <= 1e-12 * sv(0);
  return out;
}

GrassmannPoint randomized_svd(const Matrix& y, Eigen::Index r, int oversample, int power_q,
                              std::mt19937_64& rng) {
  const Eigen::Index width = r + oversample;
  if (r < 1 || oversample < 0 || width > std::min(y.rows(), y.cols())) {
    throw ParameterError("randomized_svd: need r + oversample <= min(p, s)");
  }
  if (power_q < 0) throw ParameterError("randomized_svd: power_q must be >= 0");
  std::normal_distribution<double> normal;
  Matrix omega(y.cols(), width);
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = normal(rng);
  Matrix q = orth(y * omega);
  for (int i = 0; i < power_q; ++i) {
    const Matrix w = orth(y.transpose() * q);
    q = orth(y * w);
  }
  const Matrix b = q.transpose() * y;
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU);
  return GrassmannPoint(qf(q * svd.matrixU().leftCols(r)));
}

SvdMode svd_policy(double f_val, double tau1, double tau2) {
  if (!(tau1 > 0.0 && tau1 < tau2 && tau2 < 1.0)) {
    throw ParameterError("svd_policy: need 0 < tau1 < tau2 < 1");
  }
  if (f_val > tau2) return SvdMode::Exact;
  if (f_val > tau1) return SvdMode::RandomizedPower;
  return SvdMode::RandomizedPlain;
}

void AltminConfig::validate() const {
  if (!(eps_x > 0.0) || !(eps_u >= 0.0)) throw ParameterError("AltminConfig: bad tolerances");
  if (schedule == Schedule::Adaptive && !(theta > 0.0 && theta < 1.0)) {
    throw ParameterError("AltminConfig: theta must lie in (0, 1)");
  }
  if (!(svd.tau1 > 0.0 && svd.tau1 < svd.tau2 && svd.tau2 < 1.0)) {
    throw ParameterError("AltminConfig: need 0 < tau1 < tau2 < 1");
  }
  if (svd.oversample < 0 || svd.power_q < 0) throw ParameterError("AltminConfig: bad SVD sketch");
  if (max_outer < 0 || max_inner < 1) throw ParameterError("AltminConfig: bad iteration limits");
  if (!(armijo.alpha0 > 0.0) || !(armijo.tau > 0.0 && armijo.tau < 1.0) ||
      !(armijo.beta > 0.0 && armijo.beta < 1.0)) {
    throw ParameterError("AltminConfig: bad Armijo parameters");
  }
}

namespace {

struct GradState {
  ProductTangent g;
  double gx = 0.0;
  double gu = 0.0;
};

GradState grad_state(const Objective& obj, const ProductManifold& mf, const ProductPoint& z) {
  const ProductTangent g = obj.rgrad(z);
  GradState s{mf.project(z, g.dx, g.du), 0.0, 0.0};
  s.gx = s.g.dx.norm();
  s.gu = s.g.du.norm();
  return s;
}

// One projected-gradient Armijo step in X; logs the row and updates z.
void armijo_x_step(const Objective& obj, ProductPoint& z, const GradState& gs,
                   const ArmijoConfig& cfg, int k, const ProductManifold& mf, const Matrix* truth,
                   SolveTrace& trace) {
  const double f0 = obj.cost(z);
  const Matrix d = -gs.g.dx;
  const double g_dot_d = -gs.gx * gs.gx;
  // Sufficient decrease is tested on the exact cost change; near convergence
  // βα‖g‖² drops below the roundoff of f itself.
  const double alpha = armijo([&](double a) { return obj.cost_change(z, a * d); }, 0.0, g_dot_d, cfg);
  TraceRow row;
  row.k = k;
  row.f = f0;
  row.gnorm_x = gs.gx;
  row.gnorm_u = gs.gu;
  row.step = alpha;
  row.inner_iters = 1;
  row.rmse = rmse_or_nan(z.x, truth);
  row.kind = RowKind::Inner;
  row.infeasibility = infeasibility(mf, z.x);
  row.dir_dot = g_dot_d;
  // logged from the certified change; a fresh cost() is only good to ~eps·trace(K)
  row.f_next = f0 + obj.cost_change(z, alpha * d);
  z.x += alpha * d;
  trace.rows.push_back(row);
}

TraceRow final_row(const Objective& obj, const ProductManifold& mf, const ProductPoint& z,
                   const GradState& gs, int k, const Matrix* truth) {
  TraceRow row;
  row.k = k;
  row.f = obj.cost(z);
  row.gnorm_x = gs.gx;
  row.gnorm_u = gs.gu;
  row.rmse = rmse_or_nan(z.x, truth);
  row.kind = RowKind::Final;
  row.infeasibility = infeasibility(mf, z.x);
  return row;
}

}  // namespace

SolveResult altmin_solve(const Objective& obj, const ProductPoint& z0, const AltminConfig& cfg,
                         const Matrix* truth) {
  cfg.validate();
  if (obj.penalty()) throw ParameterError("altmin_solve: needs the constrained objective");
  const ProductManifold mf = obj.manifold();
  std::mt19937_64 rng(cfg.seed);
  SolveResult res{z0, {}};
  ProductPoint& z = res.z;
  const double scale = std::max(obj.lifted_energy(z0.x), std::numeric_limits<double>::min());
  const Eigen::Index r = obj.rank();
  int row_k = 0;

  for (int outer = 0;; ++outer) {
    GradState gs = grad_state(obj, mf, z);
    if (!std::isfinite(gs.gx) || !std::isfinite(gs.gu)) {
      throw NumericalFailure("altmin_solve: non-finite gradient");
    }
    if (gs.gx <= cfg.eps_x && gs.gu <= cfg.eps_u) {
      res.trace.status = SolveStatus::GradTol;
      res.trace.rows.push_back(final_row(obj, mf, z, gs, row_k, truth));
      return res;
    }
    if (outer >= cfg.max_outer) {
      res.trace.status = SolveStatus::MaxIter;
      res.trace.rows.push_back(final_row(obj, mf, z, gs, row_k, truth));
      return res;
    }
    const double eps_k = cfg.schedule == AltminConfig::Schedule::Greedy
                             ? cfg.eps_x
                             : std::max(cfg.eps_x, cfg.theta * gs.gx);

    if (cfg.inner == AltminConfig::Inner::GradientDescent) {
      for (int i = 0; i < cfg.max_inner && gs.gx > eps_k; ++i) {
        armijo_x_step(obj, z, gs, cfg.armijo, row_k++, mf, truth, res.trace);
        gs = grad_state(obj, mf, z);
      }
    } else if (gs.gx > eps_k) {
      RtrConfig inner = cfg.inner_rtr;
      inner.eps_g = eps_k;
      inner.max_iter = cfg.max_inner;
      SolveResult sub = rtr_solve(obj, z, inner, ProductManifold::Freeze::U, truth);
      for (auto& row : sub.trace.rows) {
        if (row.kind == RowKind::Final) continue;
        row.k = row_k++;
        row.kind = RowKind::Inner;
        row.gnorm_u = std::numeric_limits<double>::quiet_NaN();
        res.trace.rows.push_back(row);
      }
      z = sub.z;
      gs = grad_state(obj, mf, z);
    }

    // U-update, skipped when the old U is already stationary at the new X.
    if (gs.gu <= cfg.eps_u) continue;
    const double f_old = obj.cost(z);
    const Matrix lifted = obj.lifted(z.x);
    const Eigen::Index sketch_room = std::min(lifted.rows(), lifted.cols()) - r;
    SvdMode mode = cfg.svd.exact_only ? SvdMode::Exact
                                      : svd_policy(f_old / scale, cfg.svd.tau1, cfg.svd.tau2);
    if (sketch_room < 1) mode = SvdMode::Exact;
    ProductPoint cand = z;
    bool tie = false;
    if (mode == SvdMode::Exact) {
      const SvdResult s = truncated_svd(lifted, r);
      cand.u = s.u;
      tie = s.tie;
    } else {
      const int over = static_cast<int>(std::min<Eigen::Index>(cfg.svd.oversample, sketch_room));
      const int q = mode == SvdMode::RandomizedPower ? cfg.svd.power_q : 0;
      cand.u = randomized_svd(lifted, r, over, q, rng);
      if (obj.cost_change_u(z, cand.u) > 0.0) {
        const SvdResult s = truncated_svd(lifted, r);
        cand.u = s.u;
        tie = s.tie;
        mode = SvdMode::Exact;
      }
    }
    TraceRow row;
    row.k = row_k++;
    row.f = f_old;
    row.gnorm_x = gs.gx;
    row.gnorm_u = gs.gu;
    row.svd_mode = mode;
    row.rmse = rmse_or_nan(z.x, truth);
    row.kind = RowKind::SvdUpdate;
    row.infeasibility = infeasibility(mf, z.x);
    row.svd_tie = tie;
    // logged from the accurate change, as for the X-steps
    const double du = obj.cost_change_u(z, cand.u);
    row.step = grass_distance(z.u, cand.u);
    row.accepted = du <= 0.0;
    row.f_next = row.accepted ? f_old + du : f_old;
    res.trace.rows.push_back(row);
    if (row.accepted) z = std::move(cand);
  }
}

SolveResult simple_altmin_solve(const Objective& obj, const ProductPoint& z0,
                                const AltminConfig& cfg, const Matrix* truth) {
  cfg.validate();
  if (obj.penalty()) throw ParameterError("simple_altmin_solve: needs the constrained objective");
  const ProductManifold mf = obj.manifold();
  SolveResult res{z0, {}};
  ProductPoint& z = res.z;
  int row_k = 0;
  for (int it = 0;; ++it) {
    const GradState gs = grad_state(obj, mf, z);
    if (!std::isfinite(gs.gx)) throw NumericalFailure("simple_altmin_solve: non-finite gradient");
    if (gs.gx <= cfg.eps_x || it >= cfg.max_outer) {
      res.trace.status = gs.gx <= cfg.eps_x ? SolveStatus::GradTol : SolveStatus::MaxIter;
      res.trace.rows.push_back(final_row(obj, mf, z, gs, row_k, truth));
      return res;
    }
    armijo_x_step(obj, z, gs, cfg.armijo, row_k++, mf, truth, res.trace);

    TraceRow row;
    row.k = row_k++;
    row.f = obj.cost(z);
    row.gnorm_x = std::numeric_limits<double>::quiet_NaN();
    row.gnorm_u = std::numeric_limits<double>::quiet_NaN();
    row.svd_mode = SvdMode::Exact;
    row.rmse = rmse_or_nan(z.x, truth);
    row.kind = RowKind::SvdUpdate;
    row.infeasibility = infeasibility(mf, z.x);
    const SvdResult s = truncated_svd(obj.lifted(z.x), obj.rank());
    row.svd_tie = s.tie;
    row.step = grass_distance(z.u, s.u);
    z.u = s.u;
    row.f_next = obj.cost(z);
    res.trace.rows.push_back(row);
  }
}

bool wedin_gap_check(const Matrix& y1, const Matrix& y2, Eigen::Index r, double delta) {
  require_shape(y2, y1.rows(), y1.cols(), "wedin_gap_check");
  if (!(delta > 0.0)) throw ParameterError("wedin_gap_check: delta must be positive");
  const Eigen::Index k = std::min(y1.rows(), y1.cols());
  if (r < 1 || r >= k) throw ParameterError("wedin_gap_check: need 1 <= r < min(p, s)");
  Eigen::BDCSVD<Matrix> s1(y1, Eigen::ComputeThinU);
  Eigen::BDCSVD<Matrix> s2(y2, Eigen::ComputeThinU);
  const auto gap = [r](const Vector& sv) { return sv(r - 1) - sv(r); };
  if (gap(s1.singularValues()) < delta || gap(s2.singularValues()) < delta) return true;
  const GrassmannPoint u1(s1.matrixU().leftCols(r));
  const GrassmannPoint u2(s2.matrixU().leftCols(r));
  const double dist = grass_distance(u1, u2);
  const double bound = 2.0 * (y1 - y2).squaredNorm() / (delta * delta);
  return dist * dist <= bound + 1e-12;
}

}  // namespace nlrec
