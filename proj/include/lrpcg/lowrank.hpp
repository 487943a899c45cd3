#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace lrpcg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when operand shapes (grid sizes, vector lengths) do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a dense materialization would exceed the configured entry cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Default cap on n1*n2 for to_dense / from_dense.
inline constexpr std::size_t kDefaultDenseCap = 10'000'000;

/// A 2D grid function stored as left * right^T.
///
/// `left` is n1 x r, `right` is n2 x r.  Rank 0 (no columns) is the zero
/// function.  Row index of the dense value is the first grid dimension, so the
/// big-endian long index i2 + i1*n2 is the row-major vectorization.
class LowRankMatrix {
 public:
  LowRankMatrix() = default;
  LowRankMatrix(Eigen::Index rows, Eigen::Index cols);
  LowRankMatrix(Matrix left, Matrix right);

  static LowRankMatrix zero(Eigen::Index rows, Eigen::Index cols) { return {rows, cols}; }
  static LowRankMatrix outer(const Vector& u, const Vector& v);

  Eigen::Index rows() const { return left_.rows(); }
  Eigen::Index cols() const { return right_.rows(); }
  Eigen::Index rank() const { return left_.cols(); }
  bool is_zero_rank() const { return rank() == 0; }

  const Matrix& left() const { return left_; }
  const Matrix& right() const { return right_; }

  /// Multiply by a scalar (folded into the left panel).
  LowRankMatrix scaled(double alpha) const;

 private:
  Matrix left_;
  Matrix right_;
};

/// Result of a truncation: the compressed matrix and its singular values.
struct TruncationResult {
  LowRankMatrix value;
  Vector singular_values;  // all singular values of the input, descending
  double discarded = 0.0;  // Frobenius norm of the discarded tail
};

/// SVD-based recompression.
///
/// Drops trailing singular values while the tail Frobenius mass stays within
/// eps_rel * ||X||_F.  If `rank_max` is given the result is additionally capped.
TruncationResult truncate_detailed(const LowRankMatrix& x, double eps_rel,
                                   std::optional<Eigen::Index> rank_max = std::nullopt);

LowRankMatrix truncate(const LowRankMatrix& x, double eps_rel,
                       std::optional<Eigen::Index> rank_max = std::nullopt);

/// alpha * x + y by panel concatenation (rank adds, exact).
LowRankMatrix axpy(double alpha, const LowRankMatrix& x, const LowRankMatrix& y);

/// Linear combination sum_i coeffs[i] * terms[i] by concatenation.
LowRankMatrix concat(std::initializer_list<std::pair<double, const LowRankMatrix*>> terms);

/// Frobenius inner product, computed from the factor Gram matrices.
double inner(const LowRankMatrix& x, const LowRankMatrix& y);

double norm(const LowRankMatrix& x);

/// diag(u) * x * diag(v).
LowRankMatrix hadamard_scale(const LowRankMatrix& x, const Vector& u, const Vector& v);

Matrix to_dense(const LowRankMatrix& x, std::size_t cap = kDefaultDenseCap);
LowRankMatrix from_dense(const Matrix& m, double eps_rel, std::size_t cap = kDefaultDenseCap);

/// Canonical (CP) 3-tensor sum_j a_j (x) b_j (x) c_j.  No truncation support.
class CanonicalTensor3 {
 public:
  CanonicalTensor3() = default;
  CanonicalTensor3(Matrix f1, Matrix f2, Matrix f3);

  Eigen::Index size(int dim) const;
  Eigen::Index rank() const { return f_[0].cols(); }
  const Matrix& factor(int dim) const { return f_[static_cast<std::size_t>(dim)]; }

 private:
  Matrix f_[3];
};

/// Dense vector in big-endian order: i3 + n3*(i2 + n2*i1).
Vector to_dense(const CanonicalTensor3& x, std::size_t cap = kDefaultDenseCap);

}  // namespace lrpcg
