#include "lrpcg/experiment.hpp"

#include "lrpcg/coefficient_io.hpp"
#include "lrpcg/oracle.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lrpcg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string grid_label(Eigen::Index n) { return std::to_string(n) + "^2"; }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// Serializes with every floating-point value in full-precision scientific form.
void write_json(std::ostream& os, const json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string end_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent, depth + 1);
      }
      os << "\n" << end_pad << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      const bool scalar = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (scalar) {
        os << "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          write_json(os, j[i], indent, depth + 1);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write_json(os, j[i], indent, depth + 1);
      }
      os << "\n" << end_pad << "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) {
        os << format_number(v);
      } else {
        os << "null";
      }
      return;
    }
    default:
      os << j.dump();
  }
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["coefficient_file"] = c.coefficient_file;
  j["formulation"] = c.formulation;
  j["preconditioners"] = c.preconditioners;
  j["gamma"] = c.gamma;
  j["level_min"] = c.level_min;
  j["level_max"] = c.level_max;
  j["cascadic"] = c.cascadic;
  j["cascadic_initial_rank"] =
      c.cascadic_initial_rank ? json(*c.cascadic_initial_rank) : json(nullptr);
  j["eps_pcg"] = c.eps_pcg;
  j["eps_trunc"] = c.eps_trunc;
  j["k_max"] = c.k_max;
  j["rank_precond"] = c.rank_precond;
  j["precond_tolerance"] = c.precond_tolerance;
  j["rhs"] = {{"center", {c.rhs_center1, c.rhs_center2}}, {"width", c.rhs_width}};
  j["seed"] = c.seed;
  j["dense_oracle"] = c.dense_oracle;
  j["dense_cap"] = c.dense_cap;
  return j;
}

json level_json(const LevelReport& lr) {
  const SolveStats& st = lr.stats;
  json j;
  j["preconditioner"] = lr.preconditioner;
  j["level"] = lr.level;
  j["n"] = lr.n;
  j["iterations"] = st.iterations;
  j["converged"] = st.converged;
  j["hit_k_max"] = st.hit_k_max;
  j["restarted"] = st.restarted;
  j["breakdown"] = st.breakdown;
  j["final_residual"] = st.final_residual();
  j["solution_rank"] = st.solution_rank;
  j["initial_guess_rank"] = st.initial_guess_rank;
  j["precond_rank"] = st.precond_rank;
  j["precond_error"] = st.precond_error;
  j["precond_reached_tolerance"] = st.precond_reached_tolerance;
  j["precond_distortion"] = st.precond_distortion;
  j["inner_solves"] = st.inner_solves;
  j["inner_iterations"] = st.inner_iterations;
  j["inner_failed"] = st.inner_failed;
  j["q_a"] = lr.q_a;
  j["q_d"] = lr.q_d;
  j["message"] = st.message;
  j["error"] = lr.error;
  j["dense_error"] = lr.dense_error ? json(*lr.dense_error) : json(nullptr);
  j["residuals"] = st.residuals;
  json ranks = json::array();
  for (const auto& r : st.ranks) {
    ranks.push_back({{"iteration", r.iteration}, {"site", std::string(1, r.site)}, {"rank", r.rank}});
  }
  j["ranks"] = std::move(ranks);
  json timing;
  timing["seconds"] = lr.seconds;
  timing["setup_seconds"] = st.setup_seconds;
  timing["pcg_seconds"] = st.total_seconds;
  timing["accumulated_seconds"] = lr.accumulated_seconds;
  timing["iteration_seconds"] = st.iteration_seconds;
  timing["dense_seconds"] = lr.dense_seconds ? json(*lr.dense_seconds) : json(nullptr);
  j["timing"] = std::move(timing);
  return j;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_number(m(i, j));
    }
    out << '\n';
  }
}

double time_per_iter(const LevelReport& lr) {
  return lr.stats.iterations > 0 ? lr.stats.total_seconds / lr.stats.iterations
                                 : lr.stats.total_seconds;
}

SolveResult solve_level(const ExperimentConfig& cfg, const SeparableCoefficient& coeff,
                        const std::string& precond, const GridSpec& grid, const LowRankMatrix* x0,
                        LevelReport& lr) {
  const ControlProblem problem = ControlProblem::build(coeff, grid);
  lr.q_a = problem.averaged.q_a;
  lr.q_d = problem.averaged.q_d;
  const LowRankMatrix f = gaussian_rhs(grid, cfg.rhs_center1, cfg.rhs_center2, cfg.rhs_width);
  SolveConfig sc = SolveConfig::with_tolerances(cfg.eps_pcg, cfg.eps_trunc);
  sc.gamma = cfg.gamma;
  sc.k_max = cfg.k_max;
  PreconditionerOptions opt;
  opt.rank = cfg.rank_precond;
  opt.tolerance = cfg.precond_tolerance;
  opt.seed = cfg.seed;
  const PrecondKind kind = parse_precond_kind(precond);
  if (cfg.formulation == "modified") return solve_control_modified(problem, f, sc, kind, x0, opt);
  if (cfg.formulation == "primal") return solve_control_primal(problem, f, sc, kind, x0, opt);
  return solve_state(problem, f, sc, generator_family(kind), x0, opt);
}

void run_dense_oracle(const ExperimentConfig& cfg, const SeparableCoefficient& coeff,
                      LevelReport& lr) {
  const GridSpec grid = GridSpec::uniform(2, lr.n);
  if (grid.total() > cfg.dense_cap || lr.solution.rank() == 0) return;
  const DenseProblem dp = dense_assemble(coeff, grid, true, cfg.dense_cap);
  const Vector f = to_vector(gaussian_rhs(grid, cfg.rhs_center1, cfg.rhs_center2, cfg.rhs_width),
                             std::numeric_limits<std::size_t>::max());
  const auto tic = Clock::now();
  Vector u;
  if (cfg.formulation == "state") {
    u = dense_solve_state(dp, f);
  } else if (cfg.formulation == "primal" && dp.size() <= kDenseUnknownCap) {
    u = dense_solve_control(dp, f, cfg.gamma, Formulation::Primal);
  } else {
    u = dense_solve_control(dp, f, cfg.gamma, Formulation::Modified);
  }
  lr.dense_seconds = seconds_since(tic);
  const Vector mine = to_vector(lr.solution, std::numeric_limits<std::size_t>::max());
  lr.dense_error = (mine - u).norm() / u.norm();
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

int configure_threads_from_env() {
  int threads = 1;
  if (const char* env = std::getenv("LRPCG_NUM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 1024) {
      throw std::invalid_argument("LRPCG_NUM_THREADS must be a positive integer");
    }
    threads = static_cast<int>(v);
  }
  Eigen::setNbThreads(threads);
  return threads;
}

SeparableCoefficient preset_coefficient(const std::string& name) {
  auto p = univariate_preset;
  if (name == "test1") {
    return SeparableCoefficient(2, {{p("1"), p("1")}, {p("1"), p("1")}, {p("1"), p("1")}});
  }
  if (name == "test2") {
    return SeparableCoefficient(2, {{p("x+2"), p("5x^2+2")},
                                    {p("sin(x)cos(x)+1"), p("1")},
                                    {p("1"), p("sin(4pi x)+2")}});
  }
  throw std::invalid_argument("unknown preset '" + name + "' (expected test1, test2, custom)");
}

LowRankMatrix gaussian_rhs(const GridSpec& grid, double center1, double center2, double width) {
  if (grid.dim() != 2) throw std::invalid_argument("gaussian_rhs: two-dimensional grids only");
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_rhs: width must be positive");
  auto factor = [&](int l, double c) {
    const Eigen::Index n = grid.n[static_cast<std::size_t>(l)];
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = static_cast<double>(i + 1) * grid.h(l);
      const double t = (x - c) / width;
      v(i) = std::exp(-t * t);
    }
    return v;
  };
  return LowRankMatrix::outer(factor(0, center1), factor(1, center2));
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (preset != "test1" && preset != "test2" && preset != "custom") {
    fail("preset must be test1, test2 or custom");
  }
  if (preset == "custom" && coefficient_file.empty()) fail("custom preset needs a coefficient file");
  if (formulation != "modified" && formulation != "primal" && formulation != "state") {
    fail("formulation must be modified, primal or state");
  }
  if (preconditioners.empty()) fail("at least one preconditioner is required");
  std::set<std::string> seen;
  for (const auto& p : preconditioners) {
    const PrecondKind kind = parse_precond_kind(p);
    const bool b_type = kind == PrecondKind::B1 || kind == PrecondKind::B2;
    if (formulation == "primal" && !b_type) fail("the primal formulation uses B1 or B2");
    if (formulation != "primal" && b_type) fail("B1/B2 apply to the primal formulation only");
    if (!seen.insert(p).second) fail("duplicate preconditioner " + p);
  }
  if (level_min < 1 || level_max < level_min || level_max > 14) {
    fail("levels must satisfy 1 <= lmin <= lmax <= 14");
  }
  if (cascadic_initial_rank && *cascadic_initial_rank < 1) fail("initial rank must be >= 1");
  if (rank_precond < 1) fail("rank_precond must be >= 1");
  if (!(precond_tolerance > 0.0)) fail("precond tolerance must be positive");
  if (!(rhs_width > 0.0)) fail("rhs width must be positive");
  if (dense_cap < 1) fail("dense cap must be positive");
  SolveConfig sc = SolveConfig::with_tolerances(eps_pcg, eps_trunc);
  sc.gamma = gamma;
  sc.k_max = k_max;
  sc.validate();
}

bool ExperimentReport::all_ok() const {
  return std::all_of(levels.begin(), levels.end(), [](const LevelReport& l) { return l.ok(); });
}

std::vector<const LevelReport*> ExperimentReport::levels_for(const std::string& precond) const {
  std::vector<const LevelReport*> out;
  for (const auto& l : levels) {
    if (l.preconditioner == precond) out.push_back(&l);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const SeparableCoefficient coeff = config.preset == "custom"
                                         ? load_coefficient(config.coefficient_file)
                                         : preset_coefficient(config.preset);
  ExperimentReport report;
  report.config = config;
  const GridLadder ladder(config.level_min, config.level_max);

  for (const std::string& precond : config.preconditioners) {
    std::vector<LevelReport> rows;
    LevelSolver solver = [&](int level, const GridSpec& grid, const LowRankMatrix* x0) {
      LevelReport lr;
      lr.preconditioner = precond;
      lr.level = level;
      lr.n = grid.n[0];
      SolveResult res{LowRankMatrix::zero(grid.n[0], grid.n[1]), {}};
      try {
        res = solve_level(config, coeff, precond, grid, x0, lr);
      } catch (const std::exception& e) {
        lr.error = e.what();
        res.stats.message = e.what();
      }
      rows.push_back(std::move(lr));
      return res;
    };

    if (config.cascadic) {
      CascadicOptions opt;
      opt.initial_rank = config.cascadic_initial_rank;
      CascadicResult cr = cascadic_solve(ladder, solver, opt);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].stats = cr.levels[i].result.stats;
        rows[i].solution = std::move(cr.levels[i].result.solution);
        rows[i].seconds = cr.levels[i].seconds;
        rows[i].accumulated_seconds = cr.levels[i].result.stats.accumulated_seconds;
      }
    } else {
      double acc = 0.0;
      for (int level = ladder.level_min; level <= ladder.level_max; ++level) {
        const auto tic = Clock::now();
        SolveResult res = solver(level, ladder.grid(level), nullptr);
        LevelReport& lr = rows.back();
        lr.seconds = seconds_since(tic);
        acc += lr.seconds;
        lr.accumulated_seconds = acc;
        lr.stats = std::move(res.stats);
        lr.solution = std::move(res.solution);
      }
    }

    if (config.dense_oracle) {
      for (auto& lr : rows) {
        try {
          run_dense_oracle(config, coeff, lr);
        } catch (const std::exception& e) {
          lr.error = std::string("dense oracle: ") + e.what();
        }
      }
    }

    for (std::size_t i = 0; i + 2 < rows.size(); ++i) {
      if (!rows[i].ok() || !rows[i + 1].ok() || !rows[i + 2].ok()) continue;
      try {
        const IntergridRatio r =
            intergrid_ratio(rows[i].solution, rows[i + 1].solution, rows[i + 2].solution);
        report.rates.push_back({precond, rows[i + 1].n, r.ratio, r.alpha});
      } catch (const std::exception&) {
        // identical consecutive solutions: no ratio for this triple
      }
    }
    for (auto& lr : rows) report.levels.push_back(std::move(lr));
  }
  return report;
}

void write_reports(const ExperimentReport& report, const std::string& out_dir) {
  const ExperimentConfig& cfg = report.config;
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const auto& pcs = cfg.preconditioners;
  const bool multi = pcs.size() > 1;
  auto header = [&](const std::string& name, const std::string& pc) {
    return multi ? name + " " + pc : name;
  };

  // Paper-style table.
  {
    auto out = open_out(dir / "table.csv");
    const bool state = cfg.formulation == "state";
    const std::vector<std::string> metrics =
        state ? std::vector<std::string>{"time pcg", "sol. rank", "time DM"}
              : std::vector<std::string>{"# iter", "time pcg (in sec.)", "time per iter",
                                         "sol. rank"};
    out << "grid size";
    for (const auto& m : metrics) {
      for (const auto& pc : pcs) out << ',' << header(m, pc);
    }
    out << '\n';
    std::map<std::string, std::vector<const LevelReport*>> by_pc;
    for (const auto& pc : pcs) by_pc[pc] = report.levels_for(pc);
    const std::size_t rows = by_pc[pcs.front()].size();
    for (std::size_t i = 0; i < rows; ++i) {
      out << grid_label(by_pc[pcs.front()][i]->n);
      for (const auto& m : metrics) {
        for (const auto& pc : pcs) {
          const LevelReport& lr = *by_pc[pc][i];
          out << ',';
          if (!lr.error.empty() && m != "time DM") continue;
          if (m == "# iter") out << lr.stats.iterations;
          if (m == "time pcg (in sec.)" || m == "time pcg") out << format_number(lr.seconds);
          if (m == "time per iter") out << format_number(time_per_iter(lr));
          if (m == "sol. rank") out << lr.stats.solution_rank;
          if (m == "time DM" && lr.dense_seconds) out << format_number(*lr.dense_seconds);
        }
      }
      out << '\n';
    }
    if (cfg.cascadic && rows > 0) {
      out << "accumulated time";
      for (const auto& m : metrics) {
        for (const auto& pc : pcs) {
          out << ',';
          if (m == "time pcg (in sec.)" || m == "time pcg") {
            out << format_number(by_pc[pc].back()->accumulated_seconds);
          }
        }
      }
      out << '\n';
    }
  }

  // Per-level detail.
  {
    auto out = open_out(dir / "levels.csv");
    out << "preconditioner,level,grid size,n,iterations,converged,final residual,time total,"
           "time setup,time pcg,time per iter,accumulated time,sol. rank,initial guess rank,"
           "precond rank,precond error,inner iterations,q_A,q_D,dense error,time DM,error\n";
    for (const auto& lr : report.levels) {
      const SolveStats& st = lr.stats;
      std::string err = lr.error.empty() ? st.message : lr.error;
      for (char& c : err) {
        if (c == ',' || c == '\n') c = ';';
      }
      out << lr.preconditioner << ',' << lr.level << ',' << grid_label(lr.n) << ',' << lr.n << ','
          << st.iterations << ',' << (st.converged ? 1 : 0) << ','
          << format_number(st.final_residual()) << ',' << format_number(lr.seconds) << ','
          << format_number(st.setup_seconds) << ',' << format_number(st.total_seconds) << ','
          << format_number(time_per_iter(lr)) << ',' << format_number(lr.accumulated_seconds)
          << ',' << st.solution_rank << ',' << st.initial_guess_rank << ',' << st.precond_rank
          << ',' << format_number(st.precond_error) << ',' << st.inner_iterations << ','
          << format_number(lr.q_a) << ',' << format_number(lr.q_d) << ','
          << (lr.dense_error ? format_number(*lr.dense_error) : "") << ','
          << (lr.dense_seconds ? format_number(*lr.dense_seconds) : "") << ',' << err << '\n';
    }
  }

  // Intergrid ratios, laid out with one column per middle grid.
  {
    auto out = open_out(dir / "convrate.csv");
    std::set<Eigen::Index> sizes;
    for (const auto& r : report.rates) sizes.insert(r.n);
    out << "grid size n^2";
    for (auto n : sizes) out << ',' << grid_label(n);
    out << '\n';
    for (const char* what : {"c_h", "alpha"}) {
      for (const auto& pc : pcs) {
        out << what << ' ' << cfg.preset << ' ' << pc;
        for (auto n : sizes) {
          out << ',';
          for (const auto& r : report.rates) {
            if (r.preconditioner == pc && r.n == n) {
              out << format_number(std::string(what) == "c_h" ? r.ratio : r.alpha);
            }
          }
        }
        out << '\n';
      }
    }
  }

  {
    auto out = open_out(dir / "residuals.csv");
    out << "preconditioner,grid size,iteration,relative residual\n";
    for (const auto& lr : report.levels) {
      for (std::size_t i = 0; i < lr.stats.residuals.size(); ++i) {
        out << lr.preconditioner << ',' << grid_label(lr.n) << ',' << i << ','
            << format_number(lr.stats.residuals[i]) << '\n';
      }
    }
  }

  {
    auto out = open_out(dir / "rank_propagation.csv");
    out << "preconditioner,grid size,step,iteration,site,rank\n";
    for (const auto& lr : report.levels) {
      for (std::size_t i = 0; i < lr.stats.ranks.size(); ++i) {
        const auto& r = lr.stats.ranks[i];
        out << lr.preconditioner << ',' << grid_label(lr.n) << ',' << i << ',' << r.iteration
            << ',' << r.site << ',' << r.rank << '\n';
      }
    }
  }

  {
    json doc;
    doc["config"] = config_json(cfg);
    doc["all_ok"] = report.all_ok();
    doc["levels"] = json::array();
    for (const auto& lr : report.levels) doc["levels"].push_back(level_json(lr));
    doc["intergrid"] = json::array();
    for (const auto& r : report.rates) {
      doc["intergrid"].push_back(
          {{"preconditioner", r.preconditioner}, {"n", r.n}, {"c_h", r.ratio}, {"alpha", r.alpha}});
    }
    auto out = open_out(dir / "report.json");
    write_json(out, doc, 2, 0);
    out << '\n';
  }

  if (cfg.write_factors) {
    const fs::path fdir = dir / "factors";
    fs::create_directories(fdir);
    for (const auto& lr : report.levels) {
      if (lr.solution.rows() == 0) continue;
      const std::string stem = lr.preconditioner + "_n" + std::to_string(lr.n);
      write_matrix_csv(fdir / (stem + "_left.csv"), lr.solution.left());
      write_matrix_csv(fdir / (stem + "_right.csv"), lr.solution.right());
    }
  }
}

}  // namespace lrpcg
