#include "helpers.hpp"
#include "lrpcg/control.hpp"
#include "lrpcg/experiment.hpp"
#include "lrpcg/spectral.hpp"

#include <doctest.h>

#include <cmath>

using namespace lrpcg;
using testutil::rel_err;

namespace {

Vector generalized_eigenvalues(const Matrix& a, const Matrix& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double simpson(const std::function<double(double)>& g, double a, double b, int m = 64) {
  const double h = (b - a) / m;
  double s = g(a) + g(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("averaged data for constant coefficients") {
  const AveragedData avg = compute_averaged_data(preset_coefficient("test1"), GridSpec::uniform(2, 15));
  CHECK(avg.q_a == 0.0);
  CHECK(avg.q_d == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(avg.anisotropy[0] == doctest::Approx(avg.anisotropy[1]).epsilon(1e-14));
  CHECK(avg.anisotropy[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("averaged data for a linear factor") {
  const SeparableCoefficient c(2, {{[](double x) { return x + 2; }, [](double) { return 1.0; }}});
  const AveragedData avg = compute_averaged_data(c, GridSpec::uniform(2, 31));
  CHECK(avg.coeff_min[0][0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(avg.coeff_max[0][0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(avg.coeff_mid(0, 0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(avg.q_a == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("test-2 spreads against brute-force sampling") {
  const SeparableCoefficient c = preset_coefficient("test2");
  const Eigen::Index n = 255;
  const GridSpec g = GridSpec::uniform(2, n);
  const AveragedData avg = compute_averaged_data(c, g);
  const double h = g.h(0);
  double qa = 0.0, qd = 0.0;
  for (int k = 0; k < c.rank(); ++k) {
    for (int l = 0; l < 2; ++l) {
      const auto& f = c.factor(k, l);
      double lo = 1e300, hi = -1e300;
      for (int s = 0; s <= 100000; ++s) {
        const double v = f(s / 100000.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      qa = std::max(qa, (hi - lo) / (hi + lo));
      double dlo = 1e300, dhi = -1e300;
      for (Eigen::Index i = 1; i <= n; ++i) {
        const double xi = i * h;
        const std::function<double(double)> w = [&](double x) {
          return f(x) * std::max(0.0, 1.0 - std::abs(x - xi) / h);
        };
        const double d = simpson(w, xi - h, xi, 16) + simpson(w, xi, xi + h, 16);
        dlo = std::min(dlo, d);
        dhi = std::max(dhi, d);
      }
      qd = std::max(qd, (dhi - dlo) / (dhi + dlo));
    }
  }
  CHECK(avg.q_a == doctest::Approx(qa).epsilon(1e-4));
  CHECK(avg.q_d == doctest::Approx(qd).epsilon(1e-6));
  CHECK(avg.q_a > 0.0);
  CHECK(avg.q_d < 1.0);
}

TEST_CASE("generators coincide with the operator for constant coefficients") {
  const GridSpec g = GridSpec::uniform(2, 15);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test1"), g);
  const Matrix a = p.op.to_dense();
  CHECK(rel_err(build_A1(g, p.averaged).to_dense(), a) <= 1e-13);
  CHECK(rel_err(build_A2(g, p.coefficient, p.averaged).to_dense(), a) <= 1e-13);

  const SeparableCoefficient one(2, {{[](double) { return 1.0; }, [](double) { return 1.0; }}});
  const GridSpec g3 = GridSpec::uniform(2, 3);
  const AveragedData avg = compute_averaged_data(one, g3);
  CHECK(rel_err(build_A1(g3, avg).to_dense(), testutil::five_point(3)) <= 1e-14);
  CHECK(rel_err(build_A2(g3, one, avg).to_dense(), assemble_stiffness(one, g3).to_dense()) <= 1e-14);
}

TEST_CASE("spectral equivalence of the generators on test 2") {
  for (Eigen::Index n : {15, 31}) {
    const GridSpec g = GridSpec::uniform(2, n);
    const ControlProblem p = ControlProblem::build(preset_coefficient("test2"), g);
    const Matrix a = p.op.to_dense();
    const double qa = p.averaged.q_a, qd = p.averaged.q_d;
    const Vector e2 = generalized_eigenvalues(a, build_A2(g, p.coefficient, p.averaged).to_dense());
    CHECK(e2.minCoeff() >= 1 - qd);
    CHECK(e2.maxCoeff() <= 1 + qd);
    const Vector e1 = generalized_eigenvalues(a, build_A1(g, p.averaged).to_dense());
    CHECK(e1.minCoeff() >= (1 - qa) * (1 - qd));
    CHECK(e1.maxCoeff() <= (1 + qa) * (1 + qd));
  }
}

TEST_CASE("diagonalization of the generators") {
  const DimensionBasis b = DimensionBasis::sine(3, 1.0);
  CHECK(b.kind() == DimensionBasis::Kind::Sine);
  CHECK(b.eigenvalues()(0) == doctest::Approx(16 * (2 - std::sqrt(2.0))).epsilon(1e-13));
  CHECK(b.eigenvalues()(1) == doctest::Approx(32).epsilon(1e-13));
  CHECK(b.eigenvalues()(2) == doctest::Approx(16 * (2 + std::sqrt(2.0))).epsilon(1e-13));
  Eigen::SelfAdjointEigenSolver<Matrix> es(testutil::laplacian_1d(3));
  CHECK(rel_err(Vector(b.eigenvalues()), Vector(es.eigenvalues())) <= 1e-14);

  for (Eigen::Index n : {7, 31, 63}) {
    const Matrix v = DimensionBasis::sine(n, 2.5).vectors();
    CHECK((v.transpose() * v - Matrix::Identity(n, n)).norm() <= 1e-12);
    const Matrix panel = Matrix::Random(n, 3);
    CHECK(rel_err(DimensionBasis::sine(n, 2.5).to_spectral(panel), Matrix(v.transpose() * panel)) <= 1e-13);
  }

  const GridSpec g = GridSpec::uniform(2, 31);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test2"), g);
  const KroneckerOperator a2 = build_A2(g, p.coefficient, p.averaged);
  const DiagonalizedBasis basis = diagonalize(a2);
  REQUIRE(basis.dims.size() == 2);
  for (int l = 0; l < 2; ++l) {
    const DimensionBasis& d = basis.dims[static_cast<std::size_t>(l)];
    CHECK(d.kind() == DimensionBasis::Kind::Dense);
    const Matrix& tl = factor_dense(a2.terms()[static_cast<std::size_t>(l)].factors[static_cast<std::size_t>(l)]);
    const Matrix v = d.vectors();
    const Matrix lam = v.transpose() * tl * v;
    CHECK((lam - Matrix(d.eigenvalues().asDiagonal())).norm() <= 1e-10 * tl.norm());
    CHECK(d.eigenvalues().minCoeff() > 0.0);
  }
  const DiagonalizedBasis b1 = diagonalize(build_A1(g, p.averaged));
  CHECK(b1.dims[0].kind() == DimensionBasis::Kind::Sine);

  CHECK_THROWS_AS(diagonalize(p.op), std::invalid_argument);
}

TEST_CASE("spectral functions") {
  CHECK(evaluate(SpectralFunction::Inverse, 4.0, 1.0) == 0.25);
  CHECK(evaluate(SpectralFunction::SType, 2.0, 0.5) == doctest::Approx(1.0 / 3.0));
  CHECK(evaluate(SpectralFunction::BType, 2.0, 0.5) == doctest::Approx(1.0 / (1.0 + 0.5)));
  CHECK(evaluate(SpectralFunction::Identity, 7.0, 1.0) == 1.0);
  CHECK(evaluate(SpectralFunction::BType, 1e12, 1.0) == doctest::Approx(1e-12).epsilon(1e-12));
}

TEST_CASE("S-type multiplier on test 1 is entrywise accurate") {
  const GridSpec g = GridSpec::uniform(2, 15);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test1"), g);
  const SpectralPreconditioner s = make_preconditioner(p, 1, SpectralFunction::SType, 1.0);
  CHECK(s.rank() <= 10);
  const Matrix exact = multiplier_table(s.basis, SpectralFunction::SType, 1.0);
  const Matrix approx = s.u * s.v.transpose();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Eigen::Index> pick(0, 14);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index i = pick(rng), j = pick(rng);
    worst = std::max(worst, std::abs(approx(i, j) - exact(i, j)) / exact(i, j));
  }
  CHECK(worst <= 1e-7);
}

TEST_CASE("one-point grids give an exact rank-1 multiplier") {
  DiagonalizedBasis b{{DimensionBasis::sine(1, 1.0), DimensionBasis::sine(1, 1.0)}};
  const SpectralPreconditioner p = build_preconditioner(b, SpectralFunction::Inverse, 1.0);
  CHECK(p.rank() == 1);
  CHECK(p.frobenius_error <= 1e-15);
  CHECK(p.u(0, 0) * p.v(0, 0) == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("SVD multiplier attains the optimal rank-10 error") {
  // 1/(lambda_i + lambda_j) on n = 256: the best rank-10 error is a property of
  // the matrix, so compare against the truncated SVD of the full table.
  DiagonalizedBasis b{{DimensionBasis::sine(256, 1.0), DimensionBasis::sine(256, 1.0)}};
  PreconditionerOptions o;
  o.allow_exponential_sum = false;
  const SpectralPreconditioner p = build_preconditioner(b, SpectralFunction::Inverse, 1.0, o);
  const Matrix g = multiplier_table(b, SpectralFunction::Inverse, 1.0);
  Eigen::BDCSVD<Matrix> svd(g);
  const Vector s = svd.singularValues();
  const double optimal = s.tail(s.size() - 10).norm() / s.norm();
  const double achieved = (g - p.u * p.v.transpose()).norm() / g.norm();
  MESSAGE("rank-10 Cauchy error " << achieved << ", optimal " << optimal);
  CHECK(p.rank() == 10);
  CHECK_FALSE(p.used_exponential_sum);
  CHECK(achieved <= optimal * (1 + 1e-6));
  CHECK(p.frobenius_error == doctest::Approx(achieved).epsilon(1e-6));
  CHECK(p.reached_tolerance == (achieved <= 1e-6));
}

TEST_CASE("multiplier ratios stay close to one on fine grids") {
  for (SpectralFunction f : {SpectralFunction::Inverse, SpectralFunction::BType, SpectralFunction::SType}) {
    for (Eigen::Index n : {255, 1023}) {
      DiagonalizedBasis b{{DimensionBasis::sine(n, 3.0), DimensionBasis::sine(n, 2.0)}};
      const SpectralPreconditioner p = build_preconditioner(b, f, 1.0);
      const Vector& l1 = b.dims[0].eigenvalues();
      const Vector& l2 = b.dims[1].eigenvalues();
      double lo = 1e300, hi = -1e300;
      for (Eigen::Index i = 0; i < n; i += 7) {
        for (Eigen::Index j = 0; j < n; j += 5) {
          const double r = p.u.row(i).dot(p.v.row(j)) / evaluate(f, l1(i) + l2(j), 1.0);
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
      }
      CHECK(p.rank() <= 10);
      CHECK(lo > 0.85);
      CHECK(hi < 1.15);
      CHECK(hi / lo <= p.distortion * (1 + 1e-12));
    }
  }
}

TEST_CASE("cross approximation above the SVD limit") {
  DiagonalizedBasis b{{DimensionBasis::sine(1023, 2.0), DimensionBasis::sine(1023, 1.0)}};
  PreconditionerOptions o;
  o.allow_exponential_sum = false;
  const SpectralPreconditioner p = build_preconditioner(b, SpectralFunction::SType, 1.0, o);
  CHECK(p.used_cross_approximation);
  CHECK(p.rank() == 10);
  CHECK(p.frobenius_error <= 1e-5);
  // independent check on a block of entries
  const Vector& l1 = b.dims[0].eigenvalues();
  const Vector& l2 = b.dims[1].eigenvalues();
  double worst = 0.0, scale = 0.0;
  for (Eigen::Index i = 0; i < 1023; i += 31) {
    for (Eigen::Index j = 0; j < 1023; j += 29) {
      const double exact = evaluate(SpectralFunction::SType, l1(i) + l2(j), 1.0);
      worst = std::max(worst, std::abs(p.u.row(i).dot(p.v.row(j)) - exact));
      scale = std::max(scale, exact);
    }
  }
  CHECK(worst <= 1e-5 * scale);
}

TEST_CASE("applying the preconditioner") {
  const GridSpec g = GridSpec::uniform(2, 15);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test2"), g);
  const KroneckerOperator a1 = build_A1(g, p.averaged);
  const Matrix a1d = a1.to_dense();
  std::mt19937_64 rng(21);
  const LowRankMatrix x = testutil::random_lowrank(rng, 15, 15, 3);
  const Vector xv = testutil::vec_rows(to_dense(x));

  const SpectralPreconditioner inv = make_preconditioner(p, 1, SpectralFunction::Inverse, 1.0);
  const Vector want = a1d.ldlt().solve(xv);
  CHECK(rel_err(testutil::vec_rows(to_dense(apply_preconditioner(inv, x, 1e-14))), want) <=
        std::max(1e-6, 10 * inv.frobenius_error));

  const SpectralPreconditioner id = make_preconditioner(p, 2, SpectralFunction::Identity, 1.0);
  CHECK(rel_err(to_dense(apply_preconditioner(id, x, 1e-14)), to_dense(x)) <= 1e-12);

  // linearity before truncation (up to the tiny truncation tolerance)
  const LowRankMatrix y = testutil::random_lowrank(rng, 15, 15, 2);
  const Matrix lhs = to_dense(apply_preconditioner(inv, axpy(-3.0, x, y), 1e-15));
  const Matrix rhs = -3.0 * to_dense(apply_preconditioner(inv, x, 1e-15)) +
                     to_dense(apply_preconditioner(inv, y, 1e-15));
  CHECK(rel_err(lhs, rhs) <= 1e-12);

  // dense materialization agrees with V diag(G) V^T
  const Matrix pd = to_dense(inv);
  CHECK((pd - pd.transpose()).norm() <= 1e-13 * pd.norm());
  CHECK(rel_err(Vector(pd * xv), testutil::vec_rows(to_dense(apply_preconditioner(inv, x, 1e-15)))) <= 1e-12);
}

TEST_CASE("joint and term-by-term summation of the multiplier agree") {
  const GridSpec g = GridSpec::uniform(2, 31);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test2"), g);
  const SpectralPreconditioner s = make_preconditioner(p, 2, SpectralFunction::SType, 1.0);
  const Matrix pd = to_dense(s);
  std::mt19937_64 rng(5);
  // rank 1 takes the term-by-term path, rank 8 the joint one
  for (Eigen::Index r : {1, 2, 8}) {
    const LowRankMatrix x = testutil::random_lowrank(rng, 31, 31, r);
    const Vector want = pd * testutil::vec_rows(to_dense(x));
    const LowRankMatrix got = apply_preconditioner(s, x, 1e-12);
    CHECK(rel_err(testutil::vec_rows(to_dense(got)), want) <= 1e-11);
    CHECK(got.rank() <= std::min<Eigen::Index>(31, s.rank() * r));
  }
}

TEST_CASE("S-type preconditioner inverts the test-1 system") {
  const GridSpec g = GridSpec::uniform(2, 31);
  const ControlProblem p = ControlProblem::build(preset_coefficient("test1"), g);
  const KroneckerOperator a1 = build_A1(g, p.averaged);
  std::mt19937_64 rng(22);
  const LowRankMatrix x = testutil::random_lowrank(rng, 31, 31, 2);
  const LowRankMatrix m = axpy(1.0, apply_squared(a1, x, 1e-15), x);

  PreconditionerOptions full;
  full.rank = 31;
  const SpectralPreconditioner exact = make_preconditioner(p, 1, SpectralFunction::SType, 1.0, full);
  CHECK(rel_err(to_dense(apply_preconditioner(exact, m, 1e-14)), to_dense(x)) <= 1e-6);

  // At the default rank the error is the multiplier's own entrywise error, no more.
  const SpectralPreconditioner s = make_preconditioner(p, 1, SpectralFunction::SType, 1.0);
  CHECK(rel_err(to_dense(apply_preconditioner(s, m, 1e-14)), to_dense(x)) <= s.distortion - 1.0);
}
