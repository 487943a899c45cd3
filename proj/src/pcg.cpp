#include "lrpcg/pcg.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lrpcg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

enum class Outcome { Converged, Breakdown, MaxIterations };

struct Run {
  const LinearMap& matvec;
  const LinearMap& precond;
  const LowRankMatrix& b;
  const SolveConfig& cfg;
  double b_norm;
  SolveStats& stats;
  LowRankMatrix best;
  double best_residual = std::numeric_limits<double>::infinity();

  Outcome iterate(LowRankMatrix& x, double eps) {
    auto trunc = [&](const LowRankMatrix& y, char site) {
      LowRankMatrix t = truncate(y, eps);
      stats.ranks.push_back({stats.iterations, site, t.rank()});
      return t;
    };
    auto record = [&](double res, const LowRankMatrix& xi) {
      if (!std::isfinite(res)) throw std::runtime_error("pcg_solve: non-finite residual");
      stats.residuals.push_back(res);
      if (res < best_residual) {
        best_residual = res;
        best = xi;
      }
    };

    LowRankMatrix r = trunc(axpy(-1.0, matvec(x), b), 'R');
    const double res0 = norm(r) / b_norm;
    if (stats.residuals.empty()) {
      record(res0, x);
    } else if (res0 < best_residual) {
      best_residual = res0;
      best = x;
    }
    if (res0 <= cfg.eps_pcg) return Outcome::Converged;

    LowRankMatrix z = trunc(precond(r), 'Z');
    LowRankMatrix p = z;
    double rz = inner(r, z);
    if (!(rz > 0.0)) return Outcome::Breakdown;

    while (stats.iterations < cfg.k_max) {
      const auto tic = Clock::now();
      ++stats.iterations;
      const LowRankMatrix s = trunc(matvec(p), 'S');
      const double ps = inner(p, s);
      if (!(ps > 0.0)) {
        stats.iteration_seconds.push_back(seconds_since(tic));
        return Outcome::Breakdown;
      }
      const double alpha = rz / ps;
      x = trunc(axpy(alpha, p, x), 'X');
      if (cfg.residual_refresh > 0 && stats.iterations % cfg.residual_refresh == 0) {
        r = trunc(axpy(-1.0, matvec(x), b), 'R');
      } else {
        r = trunc(axpy(-alpha, s, r), 'R');
      }
      const double res = norm(r) / b_norm;
      record(res, x);
      if (res <= cfg.eps_pcg) {
        stats.iteration_seconds.push_back(seconds_since(tic));
        return Outcome::Converged;
      }
      z = trunc(precond(r), 'Z');
      const double rz_next = inner(r, z);
      if (!(rz_next > 0.0)) {
        stats.iteration_seconds.push_back(seconds_since(tic));
        return Outcome::Breakdown;
      }
      const double beta = rz_next / rz;
      rz = rz_next;
      p = trunc(axpy(beta, p, z), 'P');
      stats.iteration_seconds.push_back(seconds_since(tic));
    }
    return Outcome::MaxIterations;
  }
};

}  // namespace

void SolveConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("SolveConfig: " + what); };
  if (!(eps_pcg > 0.0) || !(eps_pcg < 1.0)) fail("eps_pcg must lie in (0, 1)");
  if (!(eps_trunc > 0.0)) fail("eps_trunc must be positive");
  if (!(coupling >= 0.01 && coupling <= 0.1)) fail("coupling constant must lie in [0.01, 0.1]");
  if (eps_trunc > coupling * eps_pcg * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "eps_trunc " << eps_trunc << " exceeds coupling * eps_pcg = " << coupling * eps_pcg;
    fail(msg.str());
  }
  if (k_max < 1) fail("k_max must be >= 1");
  if (!(gamma > 0.0)) fail("gamma must be positive");
  if (!(inner_eps > 0.0) || !(inner_eps < 1.0)) fail("inner_eps must lie in (0, 1)");
  if (residual_refresh < 0) fail("residual_refresh must be >= 0");
}

SolveConfig SolveConfig::with_tolerances(double eps_pcg, double eps_trunc) {
  SolveConfig cfg;
  cfg.eps_pcg = eps_pcg;
  cfg.eps_trunc = eps_trunc;
  cfg.inner_eps = 0.1 * eps_pcg;
  return cfg;
}

SolveResult pcg_solve(const LinearMap& matvec, const LinearMap& precond, const LowRankMatrix& b,
                      const LowRankMatrix& x0, const SolveConfig& cfg) {
  cfg.validate();
  if (x0.rows() != b.rows() || x0.cols() != b.cols()) {
    throw ShapeError("pcg_solve: initial guess shape differs from right-hand side");
  }
  const double b_norm = norm(b);
  if (!(b_norm > 0.0)) throw std::invalid_argument("pcg_solve: right-hand side is zero");

  const auto start = Clock::now();
  SolveResult out{x0, {}};
  SolveStats& st = out.stats;
  st.initial_guess_rank = x0.rank();
  Run run{matvec, precond, b, cfg, b_norm, st, x0};

  double eps = cfg.eps_trunc;
  LowRankMatrix x = x0;
  Outcome oc = run.iterate(x, eps);
  if (oc == Outcome::Breakdown) {
    st.restarted = true;
    eps /= 10.0;
    x = run.best;
    oc = run.iterate(x, eps);
  }

  switch (oc) {
    case Outcome::Converged:
      st.converged = true;
      out.solution = std::move(x);
      break;
    case Outcome::Breakdown:
      st.breakdown = true;
      st.message = "loss of positive definiteness after restart";
      out.solution = run.best;
      break;
    case Outcome::MaxIterations:
      st.hit_k_max = true;
      st.message = "iteration limit reached; returning best iterate";
      out.solution = run.best;
      break;
  }
  st.solution_rank = out.solution.rank();
  st.total_seconds = seconds_since(start);
  st.accumulated_seconds = st.total_seconds;
  return out;
}

}  // namespace lrpcg
