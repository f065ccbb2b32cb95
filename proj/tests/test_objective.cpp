#include "nlrec/objective.hpp"
#include "nlrec/synth.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace nlrec;

namespace {

struct Instance {
  Matrix m;
  std::shared_ptr<const MeasurementSubspace> meas;
};

Instance uos_instance(std::uint64_t seed, Eigen::Index n = 4, int pts = 5, double delta = 0.7) {
  std::mt19937_64 rng(seed);
  UosSpec spec;
  spec.n = n;
  spec.dims = {1, 1};
  spec.pts_per = pts;
  Matrix m = gen_uos(spec, rng).m;
  auto meas = std::make_shared<const MeasurementSubspace>(gen_entry_mask(m, delta, rng));
  return {m, meas};
}

ProductPoint random_point(const Objective& obj, std::mt19937_64& rng) {
  const auto& meas = obj.measurement();
  ProductPoint z = obj.initial_point(meas.feasible_point());
  const ProductManifold man(obj.measurement_ptr());
  ProductTangent xi = man.project(z, oracle::randn(z.x.rows(), z.x.cols(), rng),
                                  oracle::randn(z.u.ambient(), z.u.dim(), rng));
  return man.retract(z, 0.5 * xi);
}

}  // namespace

TEST(Objective, RejectsMismatchedForm) {
  auto inst = uos_instance(1);
  EXPECT_THROW(Objective({MonomialKernel{2, 1.0}, 4}, 2, CostForm::Feature, inst.meas), ParameterError);
  EXPECT_THROW(Objective({MonomialFeatures{2}, 4}, 2, CostForm::KernelTrace, inst.meas), ParameterError);
  EXPECT_THROW(Objective({MonomialKernel{2, 1.0}, 4}, 0, CostForm::KernelTrace, inst.meas), ParameterError);
  EXPECT_THROW(Objective({MonomialKernel{2, 1.0}, 4}, 2, CostForm::KernelTrace, inst.meas, -1.0),
               ParameterError);
}

TEST(Objective, GrassmannAmbient) {
  auto inst = uos_instance(2);
  Objective f({MonomialFeatures{2}, 4}, 3, CostForm::Feature, inst.meas);
  Objective k({MonomialKernel{2, 1.0}, 4}, 3, CostForm::KernelTrace, inst.meas);
  EXPECT_EQ(f.grassmann_ambient(), count_monomials(4, 2));
  EXPECT_EQ(k.grassmann_ambient(), inst.m.cols());
}

TEST(Objective, ZeroAtExactSolution) {
  auto inst = uos_instance(3, 5, 10, 0.9);
  // two lines through the origin: lifted rank 5 for d = 2
  const Eigen::Index r = numerical_rank(monomial_kernel(inst.m, inst.m, 2, 1.0));
  EXPECT_EQ(r, 5);
  Objective obj({MonomialKernel{2, 1.0}, 5}, r, CostForm::KernelTrace, inst.meas);
  ProductPoint z = obj.initial_point(inst.m);
  EXPECT_LE(std::abs(obj.cost(z)), 1e-10 * obj.lifted_energy(inst.m));
  ProductTangent g = obj.rgrad(z);
  EXPECT_LE(g.dx.norm(), 1e-8);
  EXPECT_LE(g.du.norm(), 1e-8);
}

TEST(Objective, TailEigenvalueCost) {
  // K = diag(3,2,1) arises from X = diag(√3, √2, 1) with the linear kernel.
  Matrix x = Eigen::Vector3d(std::sqrt(3.0), std::sqrt(2.0), 1.0).asDiagonal();
  auto meas = std::make_shared<const MeasurementSubspace>(
      MeasurementSubspace::entry_mask(BoolMatrix::Constant(3, 3, true), x));
  Objective obj({MonomialKernel{1, 0.0}, 3}, 2, CostForm::KernelTrace, meas);
  ProductPoint z{x, GrassmannPoint(Matrix::Identity(3, 2))};
  EXPECT_NEAR(obj.cost(z), 1.0, 1e-14);
}

TEST(Objective, TraceKernelIdentity) {
  std::mt19937_64 rng(4);
  for (int n = 1; n <= 4; ++n)
    for (int d = 1; d <= 2; ++d) {
      Matrix x = oracle::randn(n, 9, rng);
      auto meas = std::make_shared<const MeasurementSubspace>(
          MeasurementSubspace::entry_mask(BoolMatrix::Constant(n, 9, true), x));
      Objective obj({MonomialKernel{d, 1.0}, n}, 3, CostForm::KernelTrace, meas);
      GrassmannPoint w = GrassmannPoint::from_span(oracle::randn(9, 3, rng));
      const Matrix phit = oracle::scaled_features(x, d, 1.0).transpose();
      const double frob = (phit - w.basis() * (w.basis().transpose() * phit)).squaredNorm();
      const double trace_form = obj.cost({x, w});
      EXPECT_NEAR(trace_form, frob, 1e-9 * std::abs(frob));
    }
}

TEST(Objective, QuotientInvariance) {
  std::mt19937_64 rng(5);
  auto inst = uos_instance(5);
  Objective obj({MonomialKernel{2, 1.0}, 4}, 3, CostForm::KernelTrace, inst.meas);
  ProductPoint z = random_point(obj, rng);
  Matrix q = oracle::orth(oracle::randn(3, 3, rng));
  ProductPoint zq{z.x, GrassmannPoint(z.u.basis() * q)};
  const ProductManifold man(inst.meas);
  EXPECT_NEAR(obj.cost(zq), obj.cost(z), 1e-10 * obj.cost(z));
  EXPECT_NEAR(man.norm(obj.rgrad(zq)), man.norm(obj.rgrad(z)), 1e-10 * man.norm(obj.rgrad(z)));
}

TEST(Objective, GradientInTangentSpace) {
  std::mt19937_64 rng(6);
  auto inst = uos_instance(6);
  for (CostForm form : {CostForm::Feature, CostForm::KernelTrace}) {
    LiftingSpec l = form == CostForm::Feature ? LiftingSpec{MonomialFeatures{2}, 4}
                                              : LiftingSpec{MonomialKernel{2, 1.0}, 4};
    Objective obj(l, 3, form, inst.meas);
    ProductPoint z = random_point(obj, rng);
    ProductTangent g = obj.rgrad(z);
    EXPECT_LE(inst.meas->apply(g.dx).norm(), 1e-10 * (1 + g.dx.norm()));
    EXPECT_LE((z.u.basis().transpose() * g.du).norm(), 1e-10 * (1 + g.du.norm()));
  }
}

TEST(Objective, UGradientVanishesOnInvariantSubspace) {
  std::mt19937_64 rng(7);
  auto inst = uos_instance(7);
  Objective obj({MonomialKernel{2, 1.0}, 4}, 3, CostForm::KernelTrace, inst.meas);
  Matrix x = inst.meas->feasible_point();
  Eigen::SelfAdjointEigenSolver<Matrix> es(monomial_kernel(x, x, 2, 1.0));
  ProductPoint z{x, GrassmannPoint(Matrix(es.eigenvectors().rightCols(3)))};
  EXPECT_LE(obj.rgrad(z).du.norm(), 1e-9 * obj.lifted_energy(x));
  ProductPoint other = random_point(obj, rng);
  EXPECT_GT(obj.rgrad(other).du.norm(), 1e-6);
}

TEST(Objective, PenaltyVanishesAtFeasiblePoints) {
  std::mt19937_64 rng(8);
  auto inst = uos_instance(8);
  Objective obj({MonomialKernel{2, 1.0}, 4}, 3, CostForm::KernelTrace, inst.meas);
  ProductPoint z = random_point(obj, rng);
  for (double lambda : {1e-3, 1.0, 1e8}) {
    EXPECT_DOUBLE_EQ(obj.with_penalty(lambda).cost(z), obj.cost(z));
  }
  EXPECT_FALSE(obj.penalty().has_value());
  EXPECT_EQ(obj.with_penalty(2.0).manifold().measurement(), nullptr);
}

TEST(Objective, HessianSymmetryAndZeroInput) {
  std::mt19937_64 rng(9);
  auto inst = uos_instance(9);
  for (CostForm form : {CostForm::Feature, CostForm::KernelTrace}) {
    LiftingSpec l = form == CostForm::Feature ? LiftingSpec{MonomialFeatures{2}, 4}
                                              : LiftingSpec{MonomialKernel{2, 1.0}, 4};
    Objective obj(l, 3, form, inst.meas);
    ProductPoint z = random_point(obj, rng);
    const ProductManifold man = obj.manifold();
    ProductTangent a = man.project(z, oracle::randn(4, 10, rng), oracle::randn(z.u.ambient(), 3, rng));
    ProductTangent b = man.project(z, oracle::randn(4, 10, rng), oracle::randn(z.u.ambient(), 3, rng));
    const double ab = man.inner(a, obj.rhess(z, b));
    const double ba = man.inner(b, obj.rhess(z, a));
    EXPECT_NEAR(ab, ba, 1e-8 * (1 + std::abs(ab)));
    ProductTangent h0 = obj.rhess(z, man.zero(z));
    EXPECT_EQ(man.norm(h0), 0.0);
  }
}

TEST(Objective, SecondOrderTaylorModel) {
  std::mt19937_64 rng(10);
  auto inst = uos_instance(10);
  for (bool penalized : {false, true}) {
    Objective base({MonomialKernel{2, 1.0}, 4}, 3, CostForm::KernelTrace, inst.meas);
    Objective obj = penalized ? base.with_penalty(3.0) : base;
    ProductPoint z = random_point(base, rng);
    const ProductManifold man = obj.manifold();
    ProductTangent xi = man.project(z, oracle::randn(4, 10, rng), oracle::randn(10, 3, rng));
    xi *= 1.0 / man.norm(xi);
    const double f0 = obj.cost(z);
    const double g = man.inner(obj.rgrad(z), xi);
    const double h = man.inner(xi, obj.rhess(z, xi));
    std::vector<double> ts{1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    std::vector<double> errs;
    for (double t : ts) {
      const double ft = obj.cost(man.retract(z, t * xi));
      errs.push_back(std::abs(ft - f0 - t * g - 0.5 * t * t * h));
    }
    EXPECT_GE(oracle::loglog_slope(ts, errs), 2.7) << (penalized ? "penalized" : "constrained");
  }
}

TEST(Objective, FdCheckAllLiftings) {
  std::mt19937_64 rng(11);
  auto inst = uos_instance(11);
  const std::vector<std::pair<LiftingSpec, CostForm>> cases{
      {{MonomialKernel{1, 1.0}, 4}, CostForm::KernelTrace},
      {{MonomialKernel{2, 1.0}, 4}, CostForm::KernelTrace},
      {{MonomialKernel{3, 1.0}, 4}, CostForm::KernelTrace},
      {{MonomialFeatures{2}, 4}, CostForm::Feature},
      {{GaussianKernel{2.5}, 4}, CostForm::KernelTrace}};
  for (const auto& [lifting, form] : cases) {
    Objective obj(lifting, 3, form, inst.meas);
    FdReport r = fd_check(obj, random_point(obj, rng), 1e-5);
    EXPECT_TRUE(r.grad_pass) << r.grad_error;
    EXPECT_TRUE(r.hess_pass) << r.hess_error;
  }
}

TEST(Objective, FdCheckFullRankSubspace) {
  auto inst = uos_instance(12);
  Objective obj({MonomialKernel{2, 1.0}, 4}, 10, CostForm::KernelTrace, inst.meas);
  ProductPoint z = obj.initial_point(inst.meas->feasible_point());
  EXPECT_LE(std::abs(obj.cost(z)), 1e-10 * obj.lifted_energy(z.x));
  EXPECT_LE(obj.manifold().norm(obj.rgrad(z)), 1e-8);
  EXPECT_TRUE(fd_check(obj, z, 1e-5).pass);
}

TEST(Objective, CostChangeAccuracy) {
  std::mt19937_64 rng(13);
  auto inst = uos_instance(13);
  const std::vector<std::pair<LiftingSpec, CostForm>> cases{
      {{MonomialKernel{2, 1.0}, 4}, CostForm::KernelTrace},
      {{MonomialKernel{3, 0.5}, 4}, CostForm::KernelTrace},
      {{MonomialFeatures{3}, 4}, CostForm::Feature},
      {{GaussianKernel{1.5}, 4}, CostForm::KernelTrace}};
  for (const auto& [lifting, form] : cases)
    for (bool penalized : {false, true}) {
      Objective base(lifting, 3, form, inst.meas);
      Objective obj = penalized ? base.with_penalty(2.0) : base;
      ProductPoint z = random_point(base, rng);
      Matrix d = oracle::randn(4, 10, rng);
      const ProductPoint moved{z.x + 1e-2 * d, z.u};
      const double plain = obj.cost(moved) - obj.cost(z);
      EXPECT_NEAR(obj.cost_change(z, 1e-2 * d), plain, 1e-10 * (1 + obj.cost(z)));
      // far below the roundoff of f: the change must still follow ⟨∇f, D⟩
      const double slope = (obj.egrad(z).dx.array() * d.array()).sum();
      const double t = 1e-12;
      EXPECT_NEAR(obj.cost_change(z, t * d) / t, slope, 1e-6 * std::abs(slope));
    }
}

TEST(Objective, SubspaceCostChangeAccuracy) {
  std::mt19937_64 rng(14);
  auto inst = uos_instance(14);
  const std::vector<std::pair<LiftingSpec, CostForm>> cases{
      {{MonomialKernel{2, 1.0}, 4}, CostForm::KernelTrace},
      {{MonomialFeatures{2}, 4}, CostForm::Feature},
      {{GaussianKernel{1.5}, 4}, CostForm::KernelTrace}};
  for (const auto& [lifting, form] : cases) {
    Objective obj(lifting, 3, form, inst.meas);
    ProductPoint z = random_point(obj, rng);
    const Matrix& p = z.u.basis();
    Matrix h = oracle::randn(p.rows(), p.cols(), rng);
    h -= p * (p.transpose() * h);
    // a rotated basis of the same span changes nothing
    const GrassmannPoint same(p * oracle::orth(oracle::randn(3, 3, rng)));
    EXPECT_NEAR(obj.cost_change_u(z, same), 0.0, 1e-12 * (1 + obj.cost(z)));
    const GrassmannPoint moved = GrassmannPoint::from_span(p + 1e-2 * h);
    const double plain = obj.cost({z.x, moved}) - obj.cost(z);
    EXPECT_NEAR(obj.cost_change_u(z, moved), plain, 1e-10 * (1 + obj.cost(z)));
    // small enough that a plain cost difference is mostly roundoff, large enough
    // that rounding the new basis does not move the subspace by more than t·1e-7
    const double t = 1e-9;
    const double slope = (obj.egrad(z).dw.array() * h.array()).sum();
    EXPECT_NEAR(obj.cost_change_u(z, GrassmannPoint::from_span(p + t * h)) / t, slope, 1e-5 * std::abs(slope));
  }
}
