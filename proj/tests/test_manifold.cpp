#include "nlrec/manifold.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace nlrec;

namespace {

std::shared_ptr<const MeasurementSubspace> random_dense(Eigen::Index n, Eigen::Index s, Eigen::Index m,
                                                        std::mt19937_64& rng) {
  Matrix a = oracle::randn(m, n * s, rng);
  Vector b = oracle::randn(m, 1, rng);
  return std::make_shared<const MeasurementSubspace>(MeasurementSubspace::dense(n, s, a, b));
}

}  // namespace

TEST(Grassmann, RejectsNonOrthonormalBasis) {
  Matrix b(3, 1);
  b << 1, 1, 0;
  EXPECT_THROW(GrassmannPoint{b}, ParameterError);
}

TEST(Grassmann, ProjectAnnihilatesSpan) {
  std::mt19937_64 rng(3);
  GrassmannPoint u = GrassmannPoint::from_span(oracle::randn(6, 2, rng));
  Matrix z = u.basis() * oracle::randn(2, 2, rng);
  EXPECT_LE(grass_project(u, z).value.norm(), 1e-12);
}

TEST(Grassmann, ProjectKeepsComplement) {
  GrassmannPoint u(Matrix(Eigen::Vector2d(1, 0)));
  Matrix z = Eigen::Vector2d(0, 1);
  EXPECT_LE((grass_project(u, z).value - z).norm(), 1e-15);
}

TEST(Grassmann, ProjectIsIdempotent) {
  std::mt19937_64 rng(4);
  GrassmannPoint u = GrassmannPoint::from_span(oracle::randn(6, 2, rng));
  Matrix z = oracle::randn(6, 2, rng);
  Matrix p1 = grass_project(u, z).value;
  Matrix p2 = grass_project(u, p1).value;
  EXPECT_LE((p1 - p2).norm(), 1e-12);
  EXPECT_LE((u.basis().transpose() * p1).norm(), 1e-10 * p1.norm());
}

TEST(Grassmann, RetractZeroIsIdentity) {
  std::mt19937_64 rng(5);
  GrassmannPoint u = GrassmannPoint::from_span(oracle::randn(7, 3, rng));
  GrassmannPoint v = grass_retract(u, GrassmannTangent{Matrix::Zero(7, 3)});
  EXPECT_LE(grass_distance(u, v), 1e-12);
}

TEST(Grassmann, RetractInPlane) {
  const double t = 0.7;
  GrassmannPoint u(Matrix(Eigen::Vector2d(1, 0)));
  GrassmannPoint v = grass_retract(u, GrassmannTangent{Matrix(Eigen::Vector2d(0, t))});
  Matrix expected = Eigen::Vector2d(1, t).normalized();
  EXPECT_LE(oracle::subspace_distance(v.basis(), expected), 1e-12);
}

TEST(Grassmann, RetractFirstOrderAgreement) {
  // f(U) = -trace(UᵀSU) along Retr(t·h) against the Riemannian gradient.
  std::mt19937_64 rng(6);
  Matrix s = oracle::randn(6, 6, rng);
  s = s * s.transpose();
  GrassmannPoint u = GrassmannPoint::from_span(oracle::randn(6, 2, rng));
  GrassmannTangent h = grass_project(u, oracle::randn(6, 2, rng));
  auto f = [&](const GrassmannPoint& p) { return -(p.basis().transpose() * s * p.basis()).trace(); };
  const Matrix g = grass_project(u, -2.0 * s * u.basis()).value;
  const double step = 1e-5;
  GrassmannTangent hp{step * h.value};
  GrassmannTangent hm{-step * h.value};
  const double fd = (f(grass_retract(u, hp)) - f(grass_retract(u, hm))) / (2 * step);
  const double an = (g.array() * h.value.array()).sum();
  EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an)));
}

TEST(Grassmann, DistanceValues) {
  GrassmannPoint e1(Matrix(Eigen::Vector2d(1, 0)));
  GrassmannPoint e2(Matrix(Eigen::Vector2d(0, 1)));
  EXPECT_NEAR(grass_distance(e1, e1), 0.0, 1e-15);
  EXPECT_NEAR(grass_distance(e1, e2), 1.0, 1e-15);

  std::mt19937_64 rng(7);
  GrassmannPoint a = GrassmannPoint::from_span(oracle::randn(8, 3, rng));
  GrassmannPoint b = GrassmannPoint::from_span(oracle::randn(8, 3, rng));
  const double identity = std::sqrt(3.0 - (a.basis().transpose() * b.basis()).squaredNorm());
  EXPECT_NEAR(grass_distance(a, b), identity, 1e-10);
  EXPECT_NEAR(grass_distance(a, b), oracle::subspace_distance(a.basis(), b.basis()), 1e-10);
}

TEST(Measurement, FullMaskProjectsToZero) {
  std::mt19937_64 rng(8);
  Matrix m = oracle::randn(3, 4, rng);
  auto l = MeasurementSubspace::entry_mask(BoolMatrix::Constant(3, 4, true), m);
  EXPECT_EQ(l.project(oracle::randn(3, 4, rng)).value.norm(), 0.0);
  EXPECT_LE((l.feasible_point() - m).norm(), 1e-15);
}

TEST(Measurement, MaskProjectionZeroesObserved) {
  std::mt19937_64 rng(9);
  Matrix m = oracle::randn(4, 5, rng);
  BoolMatrix mask = BoolMatrix::Constant(4, 5, false);
  mask(0, 0) = mask(2, 3) = mask(3, 4) = true;
  auto l = MeasurementSubspace::entry_mask(mask, m);
  Matrix d = oracle::randn(4, 5, rng);
  Matrix p = l.project(d).value;
  for (Eigen::Index j = 0; j < 5; ++j)
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(p(i, j), mask(i, j) ? 0.0 : d(i, j));
  EXPECT_EQ(l.count(), 3);
}

TEST(Measurement, SingleAllOnesRow) {
  Matrix a = Matrix::Ones(1, 6);
  auto l = MeasurementSubspace::dense(2, 3, a, Vector::Ones(1));
  std::mt19937_64 rng(10);
  Matrix d = oracle::randn(2, 3, rng);
  Matrix expected = d.array() - d.sum() / 6.0;
  EXPECT_LE((l.project(d).value - expected).norm(), 1e-14);
}

TEST(Measurement, DenseProjectorMatchesNormalEquations) {
  std::mt19937_64 rng(11);
  Matrix a = oracle::randn(5, 16, rng);
  auto l = MeasurementSubspace::dense(4, 4, a, oracle::randn(5, 1, rng));
  const Matrix p = oracle::null_projector(a);
  Matrix d = oracle::randn(4, 4, rng);
  Matrix e = oracle::randn(4, 4, rng);
  Matrix pd = l.project(d).value;
  EXPECT_LE((pd.reshaped() - p * d.reshaped()).norm(), 1e-12);
  EXPECT_LE((l.project(pd).value - pd).norm(), 1e-12);
  // self-adjoint
  const double lhs = (l.project(d).value.array() * e.array()).sum();
  const double rhs = (d.array() * l.project(e).value.array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-12);
  const auto& q = l.dense_form().q;
  EXPECT_LE((q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).norm(), 1e-12);
  EXPECT_LE((a.transpose() - q * q.transpose() * a.transpose()).norm(), 1e-10 * a.norm());
}

TEST(Measurement, FeasiblePoint) {
  std::mt19937_64 rng(12);
  Matrix a = oracle::randn(8, 12, rng);
  Vector b = oracle::randn(8, 1, rng);
  auto l = MeasurementSubspace::dense(3, 4, a, b);
  Matrix x0 = l.feasible_point();
  EXPECT_LE(l.residual(x0), 1e-10);
  // minimum norm: orthogonal to the null space
  EXPECT_LE((oracle::null_projector(a) * x0.reshaped()).norm(), 1e-10);

  auto zero = MeasurementSubspace::dense(3, 4, a, Vector::Zero(8));
  EXPECT_LE(zero.feasible_point().norm(), 1e-15);
}

TEST(Measurement, RejectsRankDeficientDense) {
  Matrix a(2, 4);
  a << 1, 2, 3, 4, 2, 4, 6, 8;
  EXPECT_THROW(MeasurementSubspace::dense(2, 2, a, Vector::Ones(2)), DegenerateError);
}

TEST(Product, BasicOperations) {
  std::mt19937_64 rng(13);
  auto meas = random_dense(3, 5, 6, rng);
  ProductManifold man(meas);
  ProductPoint z{meas->feasible_point(), GrassmannPoint::from_span(oracle::randn(5, 2, rng))};

  ProductPoint same = man.retract(z, man.zero(z));
  EXPECT_LE(ProductManifold::distance(z, same), 1e-12);

  Matrix dx = oracle::randn(3, 5, rng);
  ProductTangent t{dx, Matrix::Zero(5, 2)};
  EXPECT_NEAR(man.norm(t), dx.norm(), 1e-14);

  ProductTangent a = man.project(z, oracle::randn(3, 5, rng), oracle::randn(5, 2, rng));
  ProductTangent b = man.project(z, oracle::randn(3, 5, rng), oracle::randn(5, 2, rng));
  EXPECT_NEAR(man.inner(a, b), man.inner(b, a), 1e-12);
  EXPECT_LE(std::abs(man.inner(a, b)), man.norm(a) * man.norm(b) + 1e-12);
  EXPECT_LE(meas->apply(a.dx).norm(), 1e-10 * a.dx.norm());
  EXPECT_LE((z.u.basis().transpose() * a.du).norm(), 1e-10 * a.du.norm());

  ProductPoint moved = man.retract(z, a);
  EXPECT_LE(meas->residual(moved.x), 1e-9 * (1 + meas->rhs().norm()));
}

TEST(Product, DimensionCountsFreeze) {
  std::mt19937_64 rng(14);
  auto meas = random_dense(3, 5, 6, rng);
  ProductPoint z{meas->feasible_point(), GrassmannPoint::from_span(oracle::randn(5, 2, rng))};
  const Eigen::Index dx = 15 - 6;
  const Eigen::Index du = 2 * (5 - 2);
  EXPECT_EQ(ProductManifold(meas).dimension(z), dx + du);
  EXPECT_EQ(ProductManifold(meas, ProductManifold::Freeze::U).dimension(z), dx);
  EXPECT_EQ(ProductManifold(meas, ProductManifold::Freeze::X).dimension(z), du);
}
