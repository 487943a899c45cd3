// Runs a grid ladder for the control equation and writes tables and traces.

#include "lrpcg/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  lrpcg::ExperimentConfig cfg;
  CLI::App app{"Low-rank truncated PCG for elliptic optimal control"};

  std::string precond_list = "S2";
  std::string coefficient_file;
  long long initial_rank = 0;
  std::vector<double> center{0.5, 0.5};

  app.add_option("--preset", cfg.preset, "Coefficient set: test1, test2 or custom")
      ->check(CLI::IsMember({"test1", "test2", "custom"}));
  app.add_option("--coefficients", cfg.coefficient_file, "Coefficient JSON file (custom preset)")
      ->check(CLI::ExistingFile);
  app.add_option("--precond", precond_list, "Comma-separated list of S1, S2, B1, B2");
  app.add_option("--formulation", cfg.formulation, "modified, primal or state")
      ->check(CLI::IsMember({"modified", "primal", "state"}));
  app.add_option("--gamma", cfg.gamma, "Regularization parameter")->check(CLI::PositiveNumber);
  app.add_option("--lmin", cfg.level_min, "Coarsest level (n = 2^L - 1)");
  app.add_option("--lmax", cfg.level_max, "Finest level");
  app.add_flag("--cascadic", cfg.cascadic, "Reuse prolongated coarse solutions as initial guesses");
  app.add_option("--cascadic-rank", initial_rank,
                 "Truncate prolongated initial guesses to this rank (0: keep)");
  app.add_option("--eps-pcg", cfg.eps_pcg, "Relative residual tolerance");
  app.add_option("--eps-trunc", cfg.eps_trunc, "Relative truncation tolerance");
  app.add_option("--k-max", cfg.k_max, "Iteration limit");
  app.add_option("--rank-precond", cfg.rank_precond, "Rank of the preconditioner multiplier");
  app.add_option("--precond-tol", cfg.precond_tolerance, "Multiplier approximation tolerance");
  app.add_option("--rhs-center", center, "Gaussian design center (two values)")->expected(2);
  app.add_option("--rhs-width", cfg.rhs_width, "Gaussian design width");
  app.add_option("--out-dir", cfg.out_dir, "Output directory");
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_flag("--dense-oracle", cfg.dense_oracle, "Cross-check against a direct sparse solve");
  app.add_option("--dense-cap", cfg.dense_cap, "Largest unknown count for the direct solve");
  bool no_factors = false;
  app.add_flag("--no-factors", no_factors, "Skip solution factor dumps");

  CLI11_PARSE(app, argc, argv);

  try {
    lrpcg::configure_threads_from_env();
    cfg.preconditioners.clear();
    std::stringstream ss(precond_list);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) cfg.preconditioners.push_back(item);
    }
    if (!cfg.coefficient_file.empty() && cfg.preset != "custom") {
      throw std::invalid_argument("--coefficients requires --preset custom");
    }
    if (initial_rank > 0) cfg.cascadic_initial_rank = initial_rank;
    cfg.rhs_center1 = center[0];
    cfg.rhs_center2 = center[1];
    cfg.write_factors = !no_factors;

    const lrpcg::ExperimentReport report = lrpcg::run_experiment(cfg);
    lrpcg::write_reports(report, cfg.out_dir);

    for (const auto& lr : report.levels) {
      std::printf("%-3s n=%-5lld iter=%-3d rank=%-3lld res=%.3e time=%.3fs%s%s\n",
                  lr.preconditioner.c_str(), static_cast<long long>(lr.n), lr.stats.iterations,
                  static_cast<long long>(lr.stats.solution_rank), lr.stats.final_residual(),
                  lr.seconds, lr.ok() ? "" : "  FAILED: ",
                  lr.ok() ? "" : (lr.error.empty() ? lr.stats.message : lr.error).c_str());
    }
    for (const auto& r : report.rates) {
      std::printf("c_h %-3s middle n=%-5lld ratio=%.4f alpha=%.4f\n", r.preconditioner.c_str(),
                  static_cast<long long>(r.n), r.ratio, r.alpha);
    }
    std::printf("results written to %s\n", cfg.out_dir.c_str());
    return report.all_ok() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
