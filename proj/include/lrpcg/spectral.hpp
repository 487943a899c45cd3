#pragma once

#include "lrpcg/kronecker.hpp"
#include "lrpcg/sine_transform.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace lrpcg {

/// Averaged quantities used to build the A1 / A2 preconditioner generators.
struct AveragedData {
  int dim = 0;
  int rank = 0;
  // Indexed [k][l]: term k, dimension l.
  std::vector<std::vector<double>> mass_mean;  // d0_{l,k} = mean of the lumped diagonal
  std::vector<std::vector<double>> mass_min;
  std::vector<std::vector<double>> mass_max;
  std::vector<std::vector<double>> coeff_min;  // a-_{l,k}
  std::vector<std::vector<double>> coeff_max;  // a+_{l,k}
  std::vector<double> anisotropy;              // a0_l
  double q_a = 0.0;
  double q_d = 0.0;

  double coeff_mid(int k, int l) const {
    return 0.5 * (coeff_min[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] +
                  coeff_max[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)]);
  }
};

/// Mass means from the lumped diagonals (FD-normalized when `fd_normalize`),
/// coefficient bounds from 4n equispaced samples of every factor.
AveragedData compute_averaged_data(const SeparableCoefficient& coeff, const GridSpec& grid,
                                   bool fd_normalize = true);

/// Finite-difference Dirichlet Laplacian (1/h^2) tridiag(-1, 2, -1).
Tridiagonal fd_laplacian(Eigen::Index n);

/// Anisotropic Laplacian sum_l a0_l (I x .. x Delta_l x .. x I).
KroneckerOperator build_A1(const GridSpec& grid, const AveragedData& avg);

/// sum_l (I x .. x A0_l x .. x I) with A0_l = sum_k (prod_{m != l} d0_{m,k}) A_{l,k}.
KroneckerOperator build_A2(const GridSpec& grid, const SeparableCoefficient& coeff,
                           const AveragedData& avg);

/// Eigenbasis of one 1D generator: analytic DST-I for scaled Laplacians,
/// dense symmetric tridiagonal eigendecomposition otherwise.
class DimensionBasis {
 public:
  enum class Kind { Sine, Dense };

  static DimensionBasis sine(Eigen::Index n, double scale);
  static DimensionBasis dense(const Tridiagonal& t);

  Kind kind() const { return kind_; }
  Eigen::Index size() const { return eigenvalues_.size(); }
  /// Ascending, strictly positive.
  const Vector& eigenvalues() const { return eigenvalues_; }
  /// Orthogonal eigenvector matrix (materialized from the sine formula if needed).
  Matrix vectors() const;

  /// V^T * panel
  Matrix to_spectral(const Matrix& panel) const;
  /// V * panel
  Matrix from_spectral(const Matrix& panel) const;

 private:
  Kind kind_ = Kind::Dense;
  Vector eigenvalues_;
  Matrix vectors_;                              // Dense only
  std::shared_ptr<const SineTransform> sine_;  // Sine only
};

struct DiagonalizedBasis {
  std::vector<DimensionBasis> dims;
};

/// Requires one non-identity tridiagonal factor per term (terms sharing a slot
/// are summed).  Throws std::invalid_argument for any other shape.
DiagonalizedBasis diagonalize(const KroneckerOperator& generator);

enum class SpectralFunction {
  Inverse,   // 1 / s
  BType,     // 1 / (gamma s + 1/s)
  SType,     // 1 / (gamma s^2 + 1)
  Identity,  // 1
};

double evaluate(SpectralFunction f, double s, double gamma);

struct PreconditionerOptions {
  /// Number of separable terms kept (fewer only if the rest is negligible).
  Eigen::Index rank = 10;
  /// Target relative Frobenius error; reaching it is reported, not enforced.
  double tolerance = 1e-6;
  /// Above this size the multiplier is compressed by cross approximation.
  Eigen::Index svd_limit = 512;
  int check_samples = 100;
  /// Allow the relative-accuracy exponential sum to replace the SVD terms.
  bool allow_exponential_sum = true;
  /// The generator equals the operator, so the preconditioned system is
  /// diagonal in the eigenbasis and only modes present in the data matter;
  /// the Frobenius-optimal SVD terms are kept.
  bool exact_generator = false;
  std::uint64_t seed = 0x5eed;
};

/// P = V diag(vec(G)) V^T with G[i,j] = f(lambda1_i + lambda2_j) ~= sum_k u_k v_k^T.
/// The terms come from a truncated SVD (cross approximation above svd_limit)
/// or, unless the generator is exact and when it distorts the spectrum less,
/// a sum of exponentials
/// c_k exp(-t_k lambda1_i) exp(-t_k lambda2_j) fitted in relative accuracy.
struct SpectralPreconditioner {
  DiagonalizedBasis basis;
  SpectralFunction function = SpectralFunction::Inverse;
  double gamma = 1.0;
  Matrix u;  // n1 x R
  Matrix v;  // n2 x R
  double frobenius_error = 0.0;    // ||G - UV^T||_F / ||G||_F (estimated above svd_limit)
  double sampled_max_error = 0.0;  // max relative error on random entries
  bool reached_tolerance = true;
  bool used_cross_approximation = false;
  bool used_exponential_sum = false;
  // max/min of approximate over exact multiplier (1 is exact, infinite if
  // some ratio is not positive); bounds the spectral distortion.
  double distortion = 1.0;

  Eigen::Index rank() const { return u.cols(); }
};

SpectralPreconditioner build_preconditioner(const DiagonalizedBasis& basis, SpectralFunction f,
                                            double gamma,
                                            const PreconditionerOptions& options = {});

/// Applies P to X and truncates the result to eps.
LowRankMatrix apply_preconditioner(const SpectralPreconditioner& p, const LowRankMatrix& x,
                                   double eps);

/// Exact multiplier table G (small grids, for checks).
Matrix multiplier_table(const DiagonalizedBasis& basis, SpectralFunction f, double gamma);

/// Dense N x N matrix of the (approximate) preconditioner, big-endian ordering.
Matrix to_dense(const SpectralPreconditioner& p, std::size_t cap = kDefaultDenseCap);

}  // namespace lrpcg
