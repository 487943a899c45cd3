#include "helpers.hpp"
#include "lrpcg/cascadic.hpp"
#include "lrpcg/control.hpp"
#include "lrpcg/experiment.hpp"
#include "lrpcg/kronecker.hpp"
#include "lrpcg/oracle.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace lrpcg;
using testutil::rel_err;

namespace {

// Natural spline through (0,0), (1/2,1), (1,0); spline prolongation
// reproduces it exactly on every nested grid.
double bump(double x) {
  const double y = x <= 0.5 ? x : 1.0 - x;
  return -4 * y * y * y + 3 * y;
}

Vector sample(Eigen::Index n, double (*g)(double)) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(static_cast<double>(i + 1) / static_cast<double>(n + 1));
  return v;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("index maps round trip") {
  const std::vector<Eigen::Index> sizes{3, 4, 5};
  for (Eigen::Index i = 0; i < 60; ++i) CHECK(long_index(multi_index(i, sizes), sizes) == i);
  CHECK(long_index({1, 2, 3}, sizes) == 3 + 5 * (2 + 4 * 1));
  const Matrix m = Matrix::Random(4, 6);
  CHECK(flatten(m) == testutil::vec_rows(m));
  CHECK(unflatten(flatten(m), 4, 6) == m);
}

TEST_CASE("direct assembly") {
  const GridSpec g = GridSpec::uniform(2, 15);
  const Matrix a = dense_assemble(preset_coefficient("test2"), g).dense();
  CHECK(rel_err(a, assemble_stiffness(preset_coefficient("test2"), g).to_dense()) <= 1e-13);
  CHECK((a - a.transpose()).norm() == 0.0);
  CHECK(rel_err(dense_assemble(preset_coefficient("test1"), g).dense(), 3.0 * testutil::five_point(15)) <=
        1e-14);
  CHECK_THROWS_AS(dense_assemble(preset_coefficient("test1"), GridSpec::uniform(2, 40), true, 1000),
                  CapacityError);
}

TEST_CASE("direct control solves") {
  const GridSpec g = GridSpec::uniform(2, 15);
  const DenseProblem p = dense_assemble(preset_coefficient("test2"), g);
  const Matrix a = p.dense();
  const Vector f = to_vector(gaussian_rhs(g));
  const Vector um = dense_solve_control(p, f, 1.0, Formulation::Modified);
  const Vector up = dense_solve_control(p, f, 1.0, Formulation::Primal);
  CHECK(rel_err(up, um) <= 1e-10);
  const Vector rhs = a * f;
  CHECK((a * (a * um) + um - rhs).norm() <= 1e-12 * rhs.norm());

  // gamma -> 0: the modified equation tends to u = A f
  const Vector small = dense_solve_control(p, f, 1e-14, Formulation::Modified);
  CHECK(rel_err(small, rhs) <= 1e-4);

  const Vector y = dense_solve_state(p, f);
  CHECK((a * y - f).norm() <= 1e-12 * f.norm());
}

TEST_CASE("Lanczos condition estimates") {
  const VectorMap id = [](const Vector& x) { return x; };
  const ConditionEstimate ci = estimate_condition(id, 30);
  CHECK(ci.condition == doctest::Approx(1.0).epsilon(1e-12));

  const Matrix lap = testutil::laplacian_1d(15);
  const VectorMap op = [&](const Vector& x) { return Vector(lap * x); };
  const ConditionEstimate cl = estimate_condition(op, 15, 15);
  const double c = std::cos(M_PI / 16);
  CHECK(cl.condition == doctest::Approx((2 + 2 * c) / (2 - 2 * c)).epsilon(1e-8));
  CHECK(cl.condition == doctest::Approx(103.1).epsilon(1e-3));

  // preconditioned: P = A^{-1} gives 1
  const Matrix inv = lap.inverse();
  const VectorMap pre = [&](const Vector& x) { return Vector(inv * x); };
  CHECK(estimate_condition(op, 15, 15, &pre).condition == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("preconditioned Lanczos matches the generalized spectrum") {
  const GridSpec g = GridSpec::uniform(2, 15);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test2"), g);
  const Matrix a = p.op.to_dense();
  const Matrix a2 = build_A2(g, p.coefficient, p.averaged).to_dense();
  const Eigen::Index N = a.rows();
  const Matrix s = a * a + Matrix::Identity(N, N), s2 = a2 * a2 + Matrix::Identity(N, N);
  const Matrix s2inv = s2.inverse();
  const VectorMap op = [&](const Vector& x) { return Vector(s * x); };
  const VectorMap pre = [&](const Vector& x) { return Vector(s2inv * x); };
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ge(s, s2, Eigen::EigenvaluesOnly);
  for (int iters : {60, static_cast<int>(N)}) {
    const ConditionEstimate c = estimate_condition(op, N, iters, &pre);
    CHECK(c.lambda_min == doctest::Approx(ge.eigenvalues().minCoeff()).epsilon(1e-6));
    CHECK(c.lambda_max == doctest::Approx(ge.eigenvalues().maxCoeff()).epsilon(1e-6));
  }
}

TEST_CASE("condition growth of the control operators") {
  std::vector<double> logh, log_sq, log_pr;
  for (Eigen::Index n : {7, 15, 31}) {
    const Matrix a = testutil::five_point(n);
    const Eigen::Index N = a.rows();
    const Matrix a2 = a * a + Matrix::Identity(N, N);
    const Matrix ap = a + a.inverse();
    const VectorMap m2 = [&](const Vector& x) { return Vector(a2 * x); };
    const VectorMap mp = [&](const Vector& x) { return Vector(ap * x); };
    const int iters = static_cast<int>(std::min<Eigen::Index>(N, 400));
    const double c2 = estimate_condition(m2, N, iters).condition;
    const double cp = estimate_condition(mp, N, iters).condition;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a2, Eigen::EigenvaluesOnly);
    CHECK(c2 == doctest::Approx(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff()).epsilon(0.05));
    logh.push_back(std::log(static_cast<double>(n + 1)));
    log_sq.push_back(std::log(c2));
    log_pr.push_back(std::log(cp));
  }
  CHECK(slope(logh, log_sq) == doctest::Approx(4.0).epsilon(0.15));
  CHECK(slope(logh, log_pr) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("intergrid ratio of an exact second-order sequence") {
  const double c = 0.37;
  std::vector<LowRankMatrix> u;
  for (Eigen::Index n : {7, 15, 31}) {
    const double h = 1.0 / static_cast<double>(n + 1);
    const Vector b = sample(n, bump);
    u.push_back(LowRankMatrix::outer((1 + c * h * h) * b, b));
  }
  const IntergridRatio r = intergrid_ratio(u[0], u[1], u[2]);
  CHECK(r.ratio == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(r.alpha == doctest::Approx(2.0).epsilon(1e-10));

  const Vector b = sample(15, bump);
  const LowRankMatrix same = LowRankMatrix::outer(b, b);
  const LowRankMatrix fine = prolongate_lowrank(same);
  CHECK_THROWS_AS(intergrid_ratio(u[0], same, fine), std::domain_error);
  CHECK_THROWS_AS(intergrid_ratio(u[0], u[2], u[1]), ShapeError);
}
