#pragma once

#include "lrpcg/cascadic.hpp"
#include "lrpcg/control.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lrpcg {

/// Coefficient sets used in the numerical tests: "test1" (all factors 1) and
/// "test2" (variable factors, rank 3).
SeparableCoefficient preset_coefficient(const std::string& name);

/// Rank-1 grid function exp(-((x1-c1)/w)^2) exp(-((x2-c2)/w)^2).
LowRankMatrix gaussian_rhs(const GridSpec& grid, double center1 = 0.5, double center2 = 0.5,
                           double width = 0.1);

struct ExperimentConfig {
  std::string preset = "test2";  // test1 | test2 | custom
  std::string coefficient_file;  // for custom
  std::string formulation = "modified";  // modified | primal | state
  std::vector<std::string> preconditioners{"S2"};
  double gamma = 1.0;
  int level_min = 5;
  int level_max = 8;
  bool cascadic = false;
  std::optional<Eigen::Index> cascadic_initial_rank;
  double eps_pcg = 1e-7;
  double eps_trunc = 1e-8;
  int k_max = 200;
  Eigen::Index rank_precond = 10;
  double precond_tolerance = 1e-6;
  double rhs_center1 = 0.5;
  double rhs_center2 = 0.5;
  double rhs_width = 0.1;
  std::string out_dir = "results";
  std::uint64_t seed = 20240607;
  bool dense_oracle = false;
  Eigen::Index dense_cap = 1'000'000;
  bool write_factors = true;

  void validate() const;
};

struct LevelReport {
  std::string preconditioner;
  int level = 0;
  Eigen::Index n = 0;
  SolveStats stats;
  LowRankMatrix solution = LowRankMatrix::zero(0, 0);
  double seconds = 0.0;  // setup + pcg (+ prolongation in cascadic runs)
  double accumulated_seconds = 0.0;
  std::string error;
  std::optional<double> dense_error;
  std::optional<double> dense_seconds;
  double q_a = 0.0;
  double q_d = 0.0;

  bool ok() const { return error.empty() && stats.converged && !stats.inner_failed; }
};

struct RateReport {
  std::string preconditioner;
  Eigen::Index n = 0;  // middle grid
  double ratio = 0.0;
  double alpha = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<LevelReport> levels;
  std::vector<RateReport> rates;

  bool all_ok() const;
  std::vector<const LevelReport*> levels_for(const std::string& precond) const;
};

/// Runs the ladder for every preconditioner.  Solver failures are recorded per
/// level and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes table.csv, levels.csv, convrate.csv, residuals.csv,
/// rank_propagation.csv, report.json and (optionally) factors/.
void write_reports(const ExperimentReport& report, const std::string& out_dir);

/// Full-precision scientific rendering used in every output file.
std::string format_number(double value);

/// Threads for Eigen kernels from LRPCG_NUM_THREADS (default 1).
int configure_threads_from_env();

}  // namespace lrpcg
