#pragma once

#include "lrpcg/lowrank.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lrpcg {

/// Raised when a coefficient is non-positive where positivity is required.
class CoefficientError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using UnivariateFn = std::function<double(double)>;

/// a(x) = sum_k prod_l factors[k][l](x_l) on (0,1)^d.
class SeparableCoefficient {
 public:
  /// Validates shape and checks positivity of every factor on a sample of [0,1].
  SeparableCoefficient(int dim, std::vector<std::vector<UnivariateFn>> factors);

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(factors_.size()); }
  const UnivariateFn& factor(int k, int l) const {
    return factors_[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
  }
  double operator()(const std::vector<double>& x) const;

 private:
  int dim_ = 0;
  std::vector<std::vector<UnivariateFn>> factors_;
};

/// Uniform grid on (0,1)^d with n_l interior nodes per dimension, h_l = 1/(n_l+1).
struct GridSpec {
  std::vector<Eigen::Index> n;

  static GridSpec uniform(int dim, Eigen::Index points);
  int dim() const { return static_cast<int>(n.size()); }
  double h(int l) const { return 1.0 / static_cast<double>(n[static_cast<std::size_t>(l)] + 1); }
  Eigen::Index total() const;
};

/// Symmetric tridiagonal n x n matrix; off has n-1 entries (sub == super).
struct Tridiagonal {
  Vector diag;
  Vector off;
};

struct Diagonal {
  Vector entries;
};

using Factor = std::variant<Tridiagonal, Diagonal>;

Eigen::Index factor_size(const Factor& f);
Matrix factor_dense(const Factor& f);
/// f * panel, column by column.
Matrix factor_apply(const Factor& f, const Matrix& panel);
Factor identity_factor(Eigen::Index n);
bool is_identity(const Factor& f);

/// Sum over terms of Kronecker products of per-dimension factors.
class KroneckerOperator {
 public:
  struct Term {
    std::vector<Factor> factors;  // one per dimension
  };

  KroneckerOperator(int dim, std::vector<Term> terms);

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t num_terms() const { return terms_.size(); }
  Eigen::Index size(int l) const { return sizes_[static_cast<std::size_t>(l)]; }
  Eigen::Index total_size() const;

  /// Dense N x N matrix in big-endian ordering (small grids only).
  Matrix to_dense(std::size_t cap = kDefaultDenseCap) const;

 private:
  int dim_;
  std::vector<Term> terms_;
  std::vector<Eigen::Index> sizes_;
};

/// SPD Dirichlet stiffness from midpoint samples a_{i+-1/2}, scaled by 1/h^2.
Tridiagonal assemble_1d_stiffness(const UnivariateFn& coeff, Eigen::Index n, double h);

/// Lumped weighted mass: d_i = sum_j s_ij over all hats touching node i,
/// s_ij integrated with two-point Gauss per element.
Diagonal assemble_1d_lumped_mass(const UnivariateFn& coeff, Eigen::Index n, double h);

/// Kronecker rank d*R stiffness operator.  Term (k, l) carries the stiffness in
/// slot l and lumped masses elsewhere.  With fd_normalize every mass diagonal is
/// divided by h, which yields the finite-difference scaling h^{-d} A_FE.
KroneckerOperator assemble_stiffness(const SeparableCoefficient& coeff, const GridSpec& grid,
                                     bool fd_normalize = true);

/// Factorized product op * X.  Output rank is num_terms * rank(X) unless eps
/// is given, in which case the result is truncated.
LowRankMatrix apply(const KroneckerOperator& op, const LowRankMatrix& x,
                    std::optional<double> eps = std::nullopt);

/// 3D product.  Truncation is not supported for canonical tensors.
CanonicalTensor3 apply(const KroneckerOperator& op, const CanonicalTensor3& x,
                       std::optional<double> eps = std::nullopt);

/// op * (op * X) with truncation after each product.
LowRankMatrix apply_squared(const KroneckerOperator& op, const LowRankMatrix& x, double eps);

}  // namespace lrpcg
