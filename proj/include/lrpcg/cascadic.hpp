#pragma once

#include "lrpcg/kronecker.hpp"
#include "lrpcg/pcg.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace lrpcg {

/// Levels level_min..level_max with n_L = 2^L - 1 interior points per dimension.
struct GridLadder {
  int level_min = 5;
  int level_max = 10;
  int dim = 2;

  GridLadder() = default;
  GridLadder(int lmin, int lmax, int d = 2);

  static Eigen::Index points(int level);
  GridSpec grid(int level) const;
  int num_levels() const { return level_max - level_min + 1; }
};

/// Natural cubic spline through (0,0), (x_i, v_i), (1,0) on the coarse grid,
/// evaluated on the grid with 2n+1 interior points.
Vector prolongate_1d(const Vector& coarse);

/// Column-wise prolongate_1d of a panel.
Matrix prolongate_panel(const Matrix& coarse);

/// Prolongates both factor panels; the rank is unchanged.
LowRankMatrix prolongate_lowrank(const LowRankMatrix& x);

/// Values at the coarse nodes of the next coarser grid (every odd fine node).
/// On nested grids this coincides with evaluating the fine-grid spline there.
LowRankMatrix restrict_injection(const LowRankMatrix& fine);

using LevelSolver = std::function<SolveResult(int level, const GridSpec& grid,
                                              const LowRankMatrix* x0)>;

struct CascadicOptions {
  /// Truncate the prolongated guess to this rank before the fine solve.
  std::optional<Eigen::Index> initial_rank;
};

struct LevelResult {
  int level = 0;
  Eigen::Index n = 0;
  SolveResult result;
  double seconds = 0.0;  // solve (with setup) plus prolongation into this level
};

struct CascadicResult {
  std::vector<LevelResult> levels;
  double accumulated_seconds = 0.0;
};

/// Coarse-to-fine sweep: level_min starts from zero, each finer level starts
/// from the prolongated previous solution.  No coarse-grid correction.
CascadicResult cascadic_solve(const GridLadder& ladder, const LevelSolver& solve,
                              const CascadicOptions& options = {});

}  // namespace lrpcg
