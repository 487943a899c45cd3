#include "helpers.hpp"
#include "lrpcg/lowrank.hpp"

#include <doctest.h>

using namespace lrpcg;
using testutil::rel_err;

TEST_CASE("rank-1 input survives truncation unchanged") {
  std::mt19937_64 rng(1);
  const LowRankMatrix x = testutil::random_lowrank(rng, 9, 13, 1);
  for (double eps : {1e-14, 1e-8, 0.5, 0.99}) {
    const LowRankMatrix t = truncate(x, eps);
    CHECK(t.rank() == 1);
    CHECK(rel_err(to_dense(t), to_dense(x)) < 1e-14);
  }
}

TEST_CASE("G - G truncates to rank zero") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const LowRankMatrix g = testutil::random_lowrank(rng, 31, 17, 1 + trial % 6);
    CHECK(truncate(axpy(-1.0, g, g), 1e-8).rank() == 0);
  }
}

TEST_CASE("truncation matches a dense SVD oracle") {
  std::mt19937_64 rng(3);
  const LowRankMatrix x = testutil::decaying_lowrank(rng, 31, 31, 5, 1e-3);
  const Matrix dense = to_dense(x);
  Eigen::JacobiSVD<Matrix> svd(dense, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector s = svd.singularValues();
  // smallest k whose tail is within eps * ||X||
  const double eps = 1e-8;
  Eigen::Index k = s.size();
  while (k > 0 && s.tail(s.size() - k + 1).norm() <= eps * s.norm()) --k;
  const Matrix best = svd.matrixU().leftCols(k) * s.head(k).asDiagonal() *
                      svd.matrixV().leftCols(k).transpose();
  const LowRankMatrix t = truncate(x, eps);
  CHECK(t.rank() == k);
  CHECK((to_dense(t) - best).norm() <= 1e-12 * dense.norm());
}

TEST_CASE("rank cap is honoured") {
  std::mt19937_64 rng(4);
  const LowRankMatrix x = testutil::random_lowrank(rng, 20, 20, 8);
  const TruncationResult r = truncate_detailed(x, 1e-12, 3);
  CHECK(r.value.rank() == 3);
  CHECK(r.singular_values.size() == 8);
  CHECK(r.discarded == doctest::Approx(r.singular_values.tail(5).norm()).epsilon(1e-12));
}

TEST_CASE("truncation rejects a non-positive tolerance") {
  const LowRankMatrix x = LowRankMatrix::outer(Vector::Ones(3), Vector::Ones(3));
  CHECK_THROWS_AS(truncate(x, 0.0), std::invalid_argument);
}

TEST_CASE("axpy against dense addition") {
  std::mt19937_64 rng(5);
  const LowRankMatrix x = testutil::random_lowrank(rng, 15, 15, 3);
  const LowRankMatrix y = testutil::random_lowrank(rng, 15, 15, 4);
  const LowRankMatrix z = axpy(-0.7, x, y);
  CHECK(z.rank() == 7);
  CHECK(rel_err(to_dense(z), -0.7 * to_dense(x) + to_dense(y)) < 1e-14);

  const LowRankMatrix zero = LowRankMatrix::zero(15, 15);
  CHECK(rel_err(to_dense(axpy(1.0, x, zero)), to_dense(x)) == 0.0);
  CHECK(truncate(axpy(-1.0, x, x), 1e-8).rank() == 0);
}

TEST_CASE("shape mismatch is an error") {
  const LowRankMatrix a = LowRankMatrix::zero(3, 4);
  const LowRankMatrix b = LowRankMatrix::zero(4, 3);
  CHECK_THROWS_AS(axpy(1.0, a, b), ShapeError);
  CHECK_THROWS_AS(inner(a, b), ShapeError);
}

TEST_CASE("inner product against the dense trace") {
  std::mt19937_64 rng(6);
  const LowRankMatrix x = testutil::random_lowrank(rng, 15, 15, 3);
  const LowRankMatrix y = testutil::random_lowrank(rng, 15, 15, 5);
  const double dense = (to_dense(x).transpose() * to_dense(y)).trace();
  CHECK(std::abs(inner(x, y) - dense) <= 1e-13 * std::abs(dense) + 1e-13);
  CHECK(inner(x, LowRankMatrix::zero(15, 15)) == 0.0);
  CHECK(inner(x, x) >= 0.0);
  CHECK(norm(x) == doctest::Approx(to_dense(x).norm()).epsilon(1e-13));
}

TEST_CASE("hadamard scaling") {
  std::mt19937_64 rng(7);
  const LowRankMatrix x = testutil::random_lowrank(rng, 6, 9, 2);
  CHECK(rel_err(to_dense(hadamard_scale(x, Vector::Ones(6), Vector::Ones(9))), to_dense(x)) == 0.0);
  CHECK(norm(hadamard_scale(x, Vector::Zero(6), Vector::Ones(9))) == 0.0);
  const Vector u = Vector::Random(6);
  const Vector v = Vector::Random(9);
  const Matrix expect = u.asDiagonal() * to_dense(x) * v.asDiagonal();
  CHECK(rel_err(to_dense(hadamard_scale(x, u, v)), expect) < 1e-14);
}

TEST_CASE("dense round trips") {
  std::mt19937_64 rng(8);
  const LowRankMatrix x = testutil::random_lowrank(rng, 7, 7, 2);
  const LowRankMatrix back = from_dense(to_dense(x), 1e-14);
  CHECK(back.rank() == 2);
  CHECK(rel_err(to_dense(back), to_dense(x)) < 1e-14);
  CHECK(from_dense(Matrix::Zero(5, 5), 1e-8).rank() == 0);
  const Vector u = Vector::LinSpaced(5, 1.0, 2.0);
  CHECK(from_dense(u * u.transpose(), 1e-8).rank() == 1);
  CHECK_THROWS_AS(to_dense(LowRankMatrix::zero(100, 100), 1000), CapacityError);
}

TEST_CASE("canonical 3-tensor materialization uses big-endian order") {
  Matrix a(2, 1), b(3, 1), c(4, 1);
  a << 1, 2;
  b << 1, 10, 100;
  c << 1, 2, 3, 4;
  const Vector v = to_dense(CanonicalTensor3(a, b, c));
  REQUIRE(v.size() == 24);
  for (int i1 = 0; i1 < 2; ++i1)
    for (int i2 = 0; i2 < 3; ++i2)
      for (int i3 = 0; i3 < 4; ++i3) CHECK(v(i3 + 4 * (i2 + 3 * i1)) == a(i1) * b(i2) * c(i3));
}

TEST_CASE("truncation properties on 1000 random cases") {
  std::mt19937_64 rng(20240607);
  std::uniform_int_distribution<int> size(1, 40), rank(1, 8);
  std::uniform_real_distribution<double> decay(1e-4, 1.0), logeps(-12, -2);
  int projection_failures = 0, bound_failures = 0, inner_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n1 = size(rng), n2 = size(rng);
    const LowRankMatrix x = testutil::decaying_lowrank(rng, n1, n2, rank(rng), decay(rng));
    const LowRankMatrix y = testutil::random_lowrank(rng, n1, n2, rank(rng));
    const double eps = std::pow(10.0, logeps(rng));

    const LowRankMatrix t = truncate(x, eps);
    const LowRankMatrix tt = truncate(t, eps);
    const Matrix dx = to_dense(x), dt = to_dense(t);
    if (tt.rank() != t.rank() || (to_dense(tt) - dt).norm() > 1e-14 * dx.norm()) {
      ++projection_failures;
    }
    if ((dt - dx).norm() > eps * dx.norm() * (1 + 1e-10) + 1e-15 * dx.norm()) ++bound_failures;

    const double dense_inner = (dx.transpose() * to_dense(y)).trace();
    const double scale = dx.norm() * to_dense(y).norm();
    if (std::abs(inner(x, y) - dense_inner) > 1e-12 * scale) ++inner_failures;
  }
  CHECK(projection_failures == 0);
  CHECK(bound_failures == 0);
  CHECK(inner_failures == 0);
}
