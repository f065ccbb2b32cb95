#pragma once

#include "nlrec/objective.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace nlrec {

struct TcgConfig {
  int max_inner = 0;  // 0: the tangent space dimension
  double kappa = 0.1;
  double theta = 1.0;
};

struct RtrConfig {
  double delta0 = 1.0;
  double delta_bar = 0.0;  // 0: 2·sqrt(dim)
  double rho_prime = 0.1;
  double eps_g = 1e-6;
  double eps_h = std::numeric_limits<double>::infinity();
  int max_iter = 500;
  bool second_order = true;  // false: model Hessian H_k = Id
  TcgConfig tcg;

  void validate() const;
};

enum class SvdMode { None, Exact, RandomizedPower, RandomizedPlain };
const char* to_string(SvdMode m);

enum class SolveStatus { GradTol, MaxIter, Stalled };
const char* to_string(SolveStatus s);

enum class RowKind { Step, Inner, SvdUpdate, Final };

struct TraceRow {
  int k = 0;
  double f = 0.0;        // cost before the step
  double gnorm_x = 0.0;  // at the point before the step
  double gnorm_u = 0.0;
  double step = 0.0;     // ‖η‖ for trust-region rows, α for Armijo rows
  double delta = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  SvdMode svd_mode = SvdMode::None;
  int inner_iters = 0;
  double rmse = std::numeric_limits<double>::quiet_NaN();

  // Not serialized.
  RowKind kind = RowKind::Step;
  bool accepted = true;
  double f_next = std::numeric_limits<double>::quiet_NaN();  // cost at the trial point
  double infeasibility = 0.0;                                 // ‖A(X) − b‖ before the step
  double dir_dot = 0.0;                                       // ⟨grad, d⟩ for Armijo rows
  bool svd_tie = false;
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  SolveStatus status = SolveStatus::MaxIter;

  /// Gradient norm at the returned point.
  double final_gnorm() const;
  void write_csv(std::ostream& os) const;
};

struct SolveResult {
  ProductPoint z;
  SolveTrace trace;
};

using HessOp = std::function<ProductTangent(const ProductTangent&)>;

struct TcgResult {
  ProductTangent eta;
  ProductTangent h_eta;
  int iterations = 0;
  bool on_boundary = false;
  bool negative_curvature = false;
};

/// Steihaug–Toint truncated CG on the model ⟨g, η⟩ + ½⟨η, Hη⟩, ‖η‖ <= Δ.
TcgResult tcg_subproblem(const ProductTangent& grad, const HessOp& hess, double delta,
                         const TcgConfig& cfg, int dimension);

SolveResult rtr_solve(const Objective& obj, const ProductPoint& z0, const RtrConfig& cfg,
                      const Matrix* truth = nullptr);
SolveResult rtr_solve(const Objective& obj, const ProductPoint& z0, const RtrConfig& cfg,
                      ProductManifold::Freeze freeze, const Matrix* truth = nullptr);

struct ArmijoConfig {
  double alpha0 = 2.0;
  double tau = 0.5;
  double beta = 1e-4;
  int max_backtracks = 60;
};

/// Largest α in {α0, τα0, τ²α0, …} with f(α) <= f0 + β·α·g_dot_d.
double armijo(const std::function<double(double)>& f_along, double f0, double g_dot_d,
              const ArmijoConfig& cfg);

struct SvdResult {
  GrassmannPoint u;
  bool tie = false;  // σ_r and σ_{r+1} equal to roundoff
};

SvdResult truncated_svd(const Matrix& y, Eigen::Index r);
GrassmannPoint randomized_svd(const Matrix& y, Eigen::Index r, int oversample, int power_q,
                              std::mt19937_64& rng);

struct SvdPolicyConfig {
  double tau1 = 1e-3;
  double tau2 = 1e-1;
  int oversample = 10;
  int power_q = 1;
  bool exact_only = false;
};

SvdMode svd_policy(double f_val, double tau1, double tau2);

struct AltminConfig {
  enum class Schedule { Greedy, Adaptive };
  enum class Inner { GradientDescent, TrustRegion };

  double eps_x = 1e-6;
  double eps_u = 1e-6;
  Schedule schedule = Schedule::Greedy;
  double theta = 0.5;
  ArmijoConfig armijo;
  SvdPolicyConfig svd;
  int max_outer = 500;
  int max_inner = 200;
  Inner inner = Inner::GradientDescent;
  RtrConfig inner_rtr;  // used by the trust-region inner solver
  std::uint64_t seed = 1;

  void validate() const;
};

SolveResult altmin_solve(const Objective& obj, const ProductPoint& z0, const AltminConfig& cfg,
                         const Matrix* truth = nullptr);

/// One Armijo step in X then one exact SVD per iteration; stops on ‖grad_X‖ <= eps_x.
SolveResult simple_altmin_solve(const Objective& obj, const ProductPoint& z0,
                                const AltminConfig& cfg, const Matrix* truth = nullptr);

/// dist(U1, U2)² <= 2‖Y1 − Y2‖²/δ² for the leading r left singular subspaces,
/// when both spectra satisfy σ_r − σ_{r+1} >= δ; vacuously true otherwise.
bool wedin_gap_check(const Matrix& y1, const Matrix& y2, Eigen::Index r, double delta);

}  // namespace nlrec
