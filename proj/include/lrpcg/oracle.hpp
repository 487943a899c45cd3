#pragma once

#include "lrpcg/kronecker.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <vector>

namespace lrpcg {

using SparseMatrix = Eigen::SparseMatrix<double>;

constexpr Eigen::Index kSparseUnknownCap = 1'000'000;
constexpr Eigen::Index kDenseUnknownCap = 10'000;

/// Long index of a multi-index: last dimension runs fastest.
Eigen::Index long_index(const std::vector<Eigen::Index>& multi,
                        const std::vector<Eigen::Index>& sizes);
std::vector<Eigen::Index> multi_index(Eigen::Index index, const std::vector<Eigen::Index>& sizes);

/// Row-major vectorization of an n1 x n2 grid function and its inverse.
Vector flatten(const Matrix& m);
Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols);
Vector to_vector(const LowRankMatrix& x, std::size_t cap = kDefaultDenseCap);

struct DenseProblem {
  SparseMatrix matrix;
  std::vector<Eigen::Index> sizes;

  Eigen::Index size() const { return matrix.rows(); }
  Matrix dense() const;
};

/// Entry-by-entry assembly straight from the stencil and an element-loop mass
/// quadrature; shares no code with the Kronecker path.
DenseProblem dense_assemble(const SeparableCoefficient& coeff, const GridSpec& grid,
                            bool fd_normalize = true, Eigen::Index cap = kSparseUnknownCap);

enum class Formulation { Modified, Primal };

/// Direct solve of (gamma A^2 + I) u = A f (Modified, sparse factorization) or
/// (gamma A + A^{-1}) u = f (Primal, dense with an explicit inverse).
Vector dense_solve_control(const DenseProblem& problem, const Vector& f, double gamma,
                           Formulation formulation);

/// Direct sparse solve of A y = u.
Vector dense_solve_state(const DenseProblem& problem, const Vector& u);

using VectorMap = std::function<Vector(const Vector&)>;

struct ConditionEstimate {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double condition = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Lanczos estimate of the extreme eigenvalues of `op` (SPD), or of
/// precond * op when a preconditioner is given (Lanczos in the precond^-1
/// inner product, using applications of precond only).  Full reorthogonalization.
ConditionEstimate estimate_condition(const VectorMap& op, Eigen::Index dim, int iters = 50,
                                     const VectorMap* precond = nullptr,
                                     std::uint64_t seed = 1);

struct IntergridRatio {
  double ratio = 0.0;
  double alpha = 0.0;  // log2(ratio)
};

/// c_h = ||u_2h - u_h|| / ||u_h - u_h/2|| on the middle grid.  The coarse
/// solution is spline-prolongated, the fine one evaluated at the middle nodes.
IntergridRatio intergrid_ratio(const LowRankMatrix& u_2h, const LowRankMatrix& u_h,
                               const LowRankMatrix& u_h2);

}  // namespace lrpcg
