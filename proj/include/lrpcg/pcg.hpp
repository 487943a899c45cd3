#pragma once

#include "lrpcg/lowrank.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lrpcg {

using LinearMap = std::function<LowRankMatrix(const LowRankMatrix&)>;

struct SolveConfig {
  double eps_pcg = 1e-7;
  double eps_trunc = 1e-8;
  double coupling = 0.1;  // C0: eps_trunc <= C0 * eps_pcg
  int k_max = 200;
  double gamma = 1.0;
  double inner_eps = 1e-8;
  /// Recompute R = B - matvec(X) every this many iterations (0: never).
  int residual_refresh = 0;

  /// Throws std::invalid_argument when the tolerances are inconsistent.
  void validate() const;
  /// Same tolerances with inner_eps = 0.1 * eps_pcg.
  static SolveConfig with_tolerances(double eps_pcg, double eps_trunc);
};

struct RankRecord {
  int iteration = 0;
  char site = '?';  // S, X, R, Z, P
  Eigen::Index rank = 0;
};

struct SolveStats {
  int iterations = 0;
  bool converged = false;
  bool hit_k_max = false;
  bool restarted = false;
  bool breakdown = false;
  std::vector<double> residuals;  // relative, index 0 is the initial residual
  std::vector<RankRecord> ranks;
  std::vector<double> iteration_seconds;
  double total_seconds = 0.0;
  double accumulated_seconds = 0.0;  // across cascadic levels
  double setup_seconds = 0.0;        // preconditioner construction
  Eigen::Index initial_guess_rank = 0;
  Eigen::Index solution_rank = 0;
  int inner_solves = 0;
  int inner_iterations = 0;
  bool inner_failed = false;
  Eigen::Index precond_rank = 0;
  double precond_error = 0.0;  // relative Frobenius error of the multiplier table
  bool precond_reached_tolerance = true;
  double precond_distortion = 1.0;  // max/min ratio of approximate to exact multiplier
  std::string message;

  double final_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

struct SolveResult {
  LowRankMatrix solution;
  SolveStats stats;
};

/// Truncated preconditioned CG on factored iterates.  `b` must be nonzero;
/// `x0` may have rank 0.
SolveResult pcg_solve(const LinearMap& matvec, const LinearMap& precond, const LowRankMatrix& b,
                      const LowRankMatrix& x0, const SolveConfig& cfg);

}  // namespace lrpcg
