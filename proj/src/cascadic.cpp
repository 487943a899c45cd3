#include "lrpcg/cascadic.hpp"

#include <chrono>
#include <stdexcept>

namespace lrpcg {

namespace {

using Clock = std::chrono::steady_clock;

}  // namespace

GridLadder::GridLadder(int lmin, int lmax, int d) : level_min(lmin), level_max(lmax), dim(d) {
  if (lmin < 1 || lmax < lmin || lmax > 16) {
    throw std::invalid_argument("GridLadder: need 1 <= level_min <= level_max <= 16");
  }
  if (d < 1) throw std::invalid_argument("GridLadder: dimension must be positive");
}

Eigen::Index GridLadder::points(int level) {
  if (level < 1 || level > 30) throw std::invalid_argument("GridLadder::points: bad level");
  return (Eigen::Index{1} << level) - 1;
}

GridSpec GridLadder::grid(int level) const {
  if (level < level_min || level > level_max) {
    throw std::out_of_range("GridLadder::grid: level outside the ladder");
  }
  return GridSpec::uniform(dim, points(level));
}

Matrix prolongate_panel(const Matrix& coarse) {
  const Eigen::Index n = coarse.rows();
  const Eigen::Index nf = 2 * n + 1;
  Matrix fine(nf, coarse.cols());
  if (coarse.cols() == 0) return fine;
  if (n == 0) {
    fine.setZero();
    return fine;
  }
  const double h = 1.0 / static_cast<double>(n + 1);

  // Second derivatives M_1..M_n at interior knots; M_0 = M_{n+1} = 0.
  // Rows: M_{i-1} + 4 M_i + M_{i+1} = 6/h^2 (y_{i-1} - 2 y_i + y_{i+1}).
  Vector c(n);  // modified super-diagonal from the Thomas sweep
  Vector denom(n);
  denom(0) = 4.0;
  c(0) = 1.0 / denom(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    denom(i) = 4.0 - c(i - 1);
    c(i) = 1.0 / denom(i);
  }

  Vector y(n + 2), m(n + 2), rhs(n);
  for (Eigen::Index col = 0; col < coarse.cols(); ++col) {
    y(0) = 0.0;
    y(n + 1) = 0.0;
    y.segment(1, n) = coarse.col(col);
    for (Eigen::Index i = 0; i < n; ++i) {
      rhs(i) = 6.0 / (h * h) * (y(i) - 2.0 * y(i + 1) + y(i + 2));
    }
    // Forward elimination and back substitution.
    rhs(0) /= denom(0);
    for (Eigen::Index i = 1; i < n; ++i) rhs(i) = (rhs(i) - rhs(i - 1)) / denom(i);
    for (Eigen::Index i = n - 2; i >= 0; --i) rhs(i) -= c(i) * rhs(i + 1);
    m(0) = 0.0;
    m(n + 1) = 0.0;
    m.segment(1, n) = rhs;

    // Fine node 2i+1 (0-based) is coarse node i; fine node 2i is the
    // midpoint of knots i and i+1 (knot 0 is the boundary).
    for (Eigen::Index i = 0; i <= n; ++i) {
      fine(2 * i, col) = 0.5 * (y(i) + y(i + 1)) - h * h / 16.0 * (m(i) + m(i + 1));
      if (i < n) fine(2 * i + 1, col) = y(i + 1);
    }
  }
  return fine;
}

Vector prolongate_1d(const Vector& coarse) {
  return prolongate_panel(coarse);
}

LowRankMatrix prolongate_lowrank(const LowRankMatrix& x) {
  return LowRankMatrix(prolongate_panel(x.left()), prolongate_panel(x.right()));
}

LowRankMatrix restrict_injection(const LowRankMatrix& fine) {
  auto pick = [](const Matrix& p) {
    if (p.rows() % 2 == 0) throw ShapeError("restrict_injection: fine size must be odd");
    const Eigen::Index nc = (p.rows() - 1) / 2;
    Matrix out(nc, p.cols());
    for (Eigen::Index i = 0; i < nc; ++i) out.row(i) = p.row(2 * i + 1);
    return out;
  };
  return LowRankMatrix(pick(fine.left()), pick(fine.right()));
}

CascadicResult cascadic_solve(const GridLadder& ladder, const LevelSolver& solve,
                              const CascadicOptions& options) {
  if (ladder.dim != 2) throw std::invalid_argument("cascadic_solve: two-dimensional ladders only");
  CascadicResult out;
  std::optional<LowRankMatrix> guess;
  double prolongation_seconds = 0.0;
  for (int level = ladder.level_min; level <= ladder.level_max; ++level) {
    const GridSpec grid = ladder.grid(level);
    const auto tic = Clock::now();
    LevelResult lr;
    lr.level = level;
    lr.n = grid.n[0];
    lr.result = solve(level, grid, guess ? &*guess : nullptr);
    lr.seconds = std::chrono::duration<double>(Clock::now() - tic).count() + prolongation_seconds;
    out.accumulated_seconds += lr.seconds;
    lr.result.stats.accumulated_seconds = out.accumulated_seconds;
    out.levels.push_back(std::move(lr));

    if (level < ladder.level_max) {
      const auto ptic = Clock::now();
      LowRankMatrix next = prolongate_lowrank(out.levels.back().result.solution);
      if (options.initial_rank) next = truncate(next, 1e-15, *options.initial_rank);
      guess = std::move(next);
      prolongation_seconds = std::chrono::duration<double>(Clock::now() - ptic).count();
    }
  }
  return out;
}

}  // namespace lrpcg
