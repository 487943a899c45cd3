#pragma once

#include "lrpcg/kronecker.hpp"
#include "lrpcg/pcg.hpp"
#include "lrpcg/spectral.hpp"

#include <string>

namespace lrpcg {

/// Preconditioner labels: S* for the modified equation, B* for the primal one,
/// the digit selects the generator family (1: anisotropic Laplacian A1,
/// 2: averaged eigenbasis A2).
enum class PrecondKind { S1, S2, B1, B2 };

std::string to_string(PrecondKind kind);
PrecondKind parse_precond_kind(const std::string& name);
/// 1 for S1/B1, 2 for S2/B2.
int generator_family(PrecondKind kind);

/// Assembled operator together with what the preconditioners need.
struct ControlProblem {
  SeparableCoefficient coefficient;
  GridSpec grid;
  bool fd_normalize = true;
  KroneckerOperator op;
  AveragedData averaged;

  static ControlProblem build(SeparableCoefficient coefficient, GridSpec grid,
                              bool fd_normalize = true);
};

/// Generator A1 (family 1) or A2 (family 2).
KroneckerOperator build_generator(const ControlProblem& problem, int family);

SpectralPreconditioner make_preconditioner(const ControlProblem& problem, int family,
                                           SpectralFunction f, double gamma,
                                           const PreconditionerOptions& options = {});

/// (gamma A^2 + I) u = A F with an S-type preconditioner.
SolveResult solve_control_modified(const ControlProblem& problem, const LowRankMatrix& f,
                                   const SolveConfig& cfg, PrecondKind kind,
                                   const LowRankMatrix* x0 = nullptr,
                                   const PreconditionerOptions& options = {});

/// (gamma A + A^{-1}) u = F with a B-type preconditioner; A^{-1} applied by an
/// inner solve at cfg.inner_eps.
SolveResult solve_control_primal(const ControlProblem& problem, const LowRankMatrix& f,
                                 const SolveConfig& cfg, PrecondKind kind,
                                 const LowRankMatrix* x0 = nullptr,
                                 const PreconditionerOptions& options = {});

/// y = A^{-1} u with the inverse-type preconditioner of the given family.
SolveResult solve_state(const ControlProblem& problem, const LowRankMatrix& u,
                        const SolveConfig& cfg, int family = 2,
                        const LowRankMatrix* x0 = nullptr,
                        const PreconditionerOptions& options = {});

}  // namespace lrpcg
