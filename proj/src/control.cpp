#include "lrpcg/control.hpp"

#include <chrono>
#include <stdexcept>

namespace lrpcg {

namespace {

void note_preconditioner(SolveStats& st, const SpectralPreconditioner& p) {
  st.precond_rank = p.rank();
  st.precond_error = p.frobenius_error;
  st.precond_reached_tolerance = p.reached_tolerance;
  st.precond_distortion = p.distortion;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

void require_2d(const ControlProblem& problem, const LowRankMatrix& x, const char* what) {
  if (problem.grid.dim() != 2) {
    throw std::invalid_argument(std::string(what) + ": only two-dimensional solves are supported");
  }
  if (x.rows() != problem.grid.n[0] || x.cols() != problem.grid.n[1]) {
    throw ShapeError(std::string(what) + ": grid function shape does not match the grid");
  }
}

LowRankMatrix initial_guess(const LowRankMatrix& f, const LowRankMatrix* x0) {
  if (x0) {
    if (x0->rows() != f.rows() || x0->cols() != f.cols()) {
      throw ShapeError("initial guess shape does not match the grid");
    }
    return *x0;
  }
  return LowRankMatrix::zero(f.rows(), f.cols());
}

}  // namespace

std::string to_string(PrecondKind kind) {
  switch (kind) {
    case PrecondKind::S1: return "S1";
    case PrecondKind::S2: return "S2";
    case PrecondKind::B1: return "B1";
    case PrecondKind::B2: return "B2";
  }
  return "?";
}

PrecondKind parse_precond_kind(const std::string& name) {
  if (name == "S1") return PrecondKind::S1;
  if (name == "S2") return PrecondKind::S2;
  if (name == "B1") return PrecondKind::B1;
  if (name == "B2") return PrecondKind::B2;
  throw std::invalid_argument("unknown preconditioner '" + name + "' (expected S1, S2, B1, B2)");
}

int generator_family(PrecondKind kind) {
  return (kind == PrecondKind::S1 || kind == PrecondKind::B1) ? 1 : 2;
}

ControlProblem ControlProblem::build(SeparableCoefficient coefficient, GridSpec grid,
                                     bool fd_normalize) {
  KroneckerOperator op = assemble_stiffness(coefficient, grid, fd_normalize);
  AveragedData avg = compute_averaged_data(coefficient, grid, fd_normalize);
  return ControlProblem{std::move(coefficient), std::move(grid), fd_normalize, std::move(op),
                        std::move(avg)};
}

KroneckerOperator build_generator(const ControlProblem& problem, int family) {
  if (family == 1) return build_A1(problem.grid, problem.averaged);
  if (family == 2) return build_A2(problem.grid, problem.coefficient, problem.averaged);
  throw std::invalid_argument("build_generator: family must be 1 or 2");
}

SpectralPreconditioner make_preconditioner(const ControlProblem& problem, int family,
                                           SpectralFunction f, double gamma,
                                           const PreconditionerOptions& options) {
  // q_D = 0 (and q_A = 0 for A1) means the generator reproduces the operator.
  PreconditionerOptions opts = options;
  const AveragedData& avg = problem.averaged;
  if (avg.q_d <= 1e-12 && (family == 2 || avg.q_a <= 1e-12)) opts.exact_generator = true;
  return build_preconditioner(diagonalize(build_generator(problem, family)), f, gamma, opts);
}

SolveResult solve_control_modified(const ControlProblem& problem, const LowRankMatrix& f,
                                   const SolveConfig& cfg, PrecondKind kind,
                                   const LowRankMatrix* x0, const PreconditionerOptions& options) {
  cfg.validate();
  require_2d(problem, f, "solve_control_modified");
  if (kind != PrecondKind::S1 && kind != PrecondKind::S2) {
    throw std::invalid_argument("solve_control_modified: expects an S-type preconditioner");
  }
  const auto tic = Clock::now();
  const SpectralPreconditioner p = make_preconditioner(problem, generator_family(kind),
                                                       SpectralFunction::SType, cfg.gamma, options);
  const double setup = seconds_since(tic);

  const double eps = cfg.eps_trunc;
  const double gamma = cfg.gamma;
  const KroneckerOperator& a = problem.op;
  const LowRankMatrix rhs = apply(a, f, eps);
  LinearMap matvec = [&](const LowRankMatrix& x) {
    const LowRankMatrix a2x = apply_squared(a, x, eps);
    return truncate(concat({{gamma, &a2x}, {1.0, &x}}), eps);
  };
  LinearMap precond = [&](const LowRankMatrix& x) { return apply_preconditioner(p, x, eps); };

  SolveResult out = pcg_solve(matvec, precond, rhs, initial_guess(f, x0), cfg);
  out.stats.setup_seconds = setup;
  note_preconditioner(out.stats, p);
  return out;
}

SolveResult solve_state(const ControlProblem& problem, const LowRankMatrix& u,
                        const SolveConfig& cfg, int family, const LowRankMatrix* x0,
                        const PreconditionerOptions& options) {
  cfg.validate();
  require_2d(problem, u, "solve_state");
  if (u.rank() == 0 || !(norm(u) > 0.0)) {
    SolveResult zero{LowRankMatrix::zero(u.rows(), u.cols()), {}};
    zero.stats.converged = true;
    zero.stats.residuals.push_back(0.0);
    return zero;
  }
  const auto tic = Clock::now();
  const SpectralPreconditioner p =
      make_preconditioner(problem, family, SpectralFunction::Inverse, cfg.gamma, options);
  const double setup = seconds_since(tic);

  const double eps = cfg.eps_trunc;
  LinearMap matvec = [&](const LowRankMatrix& x) { return apply(problem.op, x, eps); };
  LinearMap precond = [&](const LowRankMatrix& x) { return apply_preconditioner(p, x, eps); };
  SolveResult out = pcg_solve(matvec, precond, u, initial_guess(u, x0), cfg);
  out.stats.setup_seconds = setup;
  note_preconditioner(out.stats, p);
  return out;
}

SolveResult solve_control_primal(const ControlProblem& problem, const LowRankMatrix& f,
                                 const SolveConfig& cfg, PrecondKind kind,
                                 const LowRankMatrix* x0, const PreconditionerOptions& options) {
  cfg.validate();
  require_2d(problem, f, "solve_control_primal");
  if (kind != PrecondKind::B1 && kind != PrecondKind::B2) {
    throw std::invalid_argument("solve_control_primal: expects a B-type preconditioner");
  }
  const int family = generator_family(kind);
  const auto tic = Clock::now();
  const SpectralPreconditioner outer =
      make_preconditioner(problem, family, SpectralFunction::BType, cfg.gamma, options);
  const SpectralPreconditioner inner_p =
      make_preconditioner(problem, family, SpectralFunction::Inverse, cfg.gamma, options);
  const double setup = seconds_since(tic);

  SolveConfig inner_cfg = cfg;
  inner_cfg.eps_pcg = cfg.inner_eps;
  inner_cfg.eps_trunc = std::min(cfg.eps_trunc, inner_cfg.coupling * cfg.inner_eps);
  inner_cfg.inner_eps = 0.1 * cfg.inner_eps;

  const double eps = cfg.eps_trunc;
  const double gamma = cfg.gamma;
  const KroneckerOperator& a = problem.op;
  int inner_solves = 0;
  int inner_iterations = 0;
  bool inner_failed = false;
  std::string inner_message;

  LinearMap inner_matvec = [&](const LowRankMatrix& x) { return apply(a, x, inner_cfg.eps_trunc); };
  LinearMap inner_precond = [&](const LowRankMatrix& x) {
    return apply_preconditioner(inner_p, x, inner_cfg.eps_trunc);
  };
  LinearMap matvec = [&](const LowRankMatrix& x) {
    const LowRankMatrix ax = apply(a, x, eps);
    if (x.rank() == 0 || !(norm(x) > 0.0)) return truncate(ax.scaled(gamma), eps);
    SolveResult y = pcg_solve(inner_matvec, inner_precond, x,
                              LowRankMatrix::zero(x.rows(), x.cols()), inner_cfg);
    ++inner_solves;
    inner_iterations += y.stats.iterations;
    if (!y.stats.converged && !inner_failed) {
      inner_failed = true;
      inner_message = "inner solve did not converge at outer call " +
                      std::to_string(inner_solves) + ": " + y.stats.message;
    }
    return truncate(concat({{gamma, &ax}, {1.0, &y.solution}}), eps);
  };
  LinearMap precond = [&](const LowRankMatrix& x) { return apply_preconditioner(outer, x, eps); };

  SolveResult out = pcg_solve(matvec, precond, f, initial_guess(f, x0), cfg);
  out.stats.setup_seconds = setup;
  note_preconditioner(out.stats, outer);
  out.stats.inner_solves = inner_solves;
  out.stats.inner_iterations = inner_iterations;
  out.stats.inner_failed = inner_failed;
  if (inner_failed) {
    out.stats.message = out.stats.message.empty() ? inner_message
                                                  : out.stats.message + "; " + inner_message;
  }
  return out;
}

}  // namespace lrpcg
