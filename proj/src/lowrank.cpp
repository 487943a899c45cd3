#include "lrpcg/lowrank.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

namespace lrpcg {

namespace {

void require_same_shape(const LowRankMatrix& x, const LowRankMatrix& y, const char* what) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch " << x.rows() << "x" << x.cols() << " vs " << y.rows()
        << "x" << y.cols();
    throw ShapeError(msg.str());
  }
}

void check_cap(Eigen::Index rows, Eigen::Index cols, std::size_t cap) {
  if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) > cap) {
    std::ostringstream msg;
    msg << "dense materialization of " << rows << "x" << cols << " exceeds cap " << cap;
    throw CapacityError(msg.str());
  }
}

// Householder QR kept in factored form; upper() is the k x r triangle with
// k = min(n, r), and expand(c) returns Q * [c; 0] without forming Q.
struct ThinQR {
  Eigen::HouseholderQR<Matrix> qr;
  Eigen::Index k;

  explicit ThinQR(const Matrix& a) : qr(a), k(std::min(a.rows(), a.cols())) {}

  Matrix upper() const { return qr.matrixQR().topRows(k).triangularView<Eigen::Upper>(); }

  Matrix expand(const Matrix& c) const {
    Matrix out = Matrix::Zero(qr.rows(), c.cols());
    out.topRows(k) = c;
    out.applyOnTheLeft(qr.householderQ());
    return out;
  }
};

// Smallest k such that the tail sum_{i>=k} s_i^2 <= tol^2.
Eigen::Index rank_for_tolerance(const Vector& s, double tol) {
  double tail = 0.0;
  Eigen::Index k = s.size();
  const double tol2 = tol * tol;
  while (k > 0) {
    const double next = tail + s(k - 1) * s(k - 1);
    if (next > tol2) break;
    tail = next;
    --k;
  }
  return k;
}

}  // namespace

LowRankMatrix::LowRankMatrix(Eigen::Index rows, Eigen::Index cols)
    : left_(rows, 0), right_(cols, 0) {}

LowRankMatrix::LowRankMatrix(Matrix left, Matrix right)
    : left_(std::move(left)), right_(std::move(right)) {
  if (left_.cols() != right_.cols()) {
    throw ShapeError("LowRankMatrix: left and right panels have different column counts");
  }
}

LowRankMatrix LowRankMatrix::outer(const Vector& u, const Vector& v) {
  return {Matrix(u), Matrix(v)};
}

LowRankMatrix LowRankMatrix::scaled(double alpha) const {
  return {alpha * left_, right_};
}

TruncationResult truncate_detailed(const LowRankMatrix& x, double eps_rel,
                                   std::optional<Eigen::Index> rank_max) {
  if (!(eps_rel > 0.0)) throw std::invalid_argument("truncate: eps_rel must be positive");
  TruncationResult out{LowRankMatrix::zero(x.rows(), x.cols()), Vector(), 0.0};
  if (x.rank() == 0) return out;

  const ThinQR ql(x.left());
  const ThinQR qr(x.right());
  const Matrix core = ql.upper() * qr.upper().transpose();

  Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  out.singular_values = s;
  const double total = s.norm();
  if (!std::isfinite(total)) throw std::runtime_error("truncate: non-finite input");
  // Cancellation below rounding level of the panels is an exact zero.
  const double panel_scale = x.left().norm() * x.right().norm();
  if (total <= 64.0 * std::numeric_limits<double>::epsilon() * panel_scale) return out;

  Eigen::Index k = rank_for_tolerance(s, eps_rel * total);
  if (rank_max) k = std::min(k, std::max<Eigen::Index>(*rank_max, 0));
  out.discarded = s.tail(s.size() - k).norm();
  if (k == 0) return out;

  Matrix left = ql.expand(svd.matrixU().leftCols(k) * s.head(k).asDiagonal());
  Matrix right = qr.expand(svd.matrixV().leftCols(k));
  out.value = LowRankMatrix(std::move(left), std::move(right));
  return out;
}

LowRankMatrix truncate(const LowRankMatrix& x, double eps_rel,
                       std::optional<Eigen::Index> rank_max) {
  return truncate_detailed(x, eps_rel, rank_max).value;
}

LowRankMatrix axpy(double alpha, const LowRankMatrix& x, const LowRankMatrix& y) {
  return concat({{alpha, &x}, {1.0, &y}});
}

LowRankMatrix concat(std::initializer_list<std::pair<double, const LowRankMatrix*>> terms) {
  if (terms.size() == 0) throw std::invalid_argument("concat: no terms");
  const LowRankMatrix& first = *terms.begin()->second;
  Eigen::Index total = 0;
  for (const auto& [c, m] : terms) {
    require_same_shape(first, *m, "concat");
    total += m->rank();
  }
  Matrix left(first.rows(), total);
  Matrix right(first.cols(), total);
  Eigen::Index col = 0;
  for (const auto& [c, m] : terms) {
    const Eigen::Index r = m->rank();
    left.middleCols(col, r) = c * m->left();
    right.middleCols(col, r) = m->right();
    col += r;
  }
  return {std::move(left), std::move(right)};
}

double inner(const LowRankMatrix& x, const LowRankMatrix& y) {
  require_same_shape(x, y, "inner");
  if (x.rank() == 0 || y.rank() == 0) return 0.0;
  const Matrix gl = x.left().transpose() * y.left();    // rx x ry
  const Matrix gr = x.right().transpose() * y.right();  // rx x ry
  return gl.cwiseProduct(gr).sum();
}

double norm(const LowRankMatrix& x) { return std::sqrt(std::max(inner(x, x), 0.0)); }

LowRankMatrix hadamard_scale(const LowRankMatrix& x, const Vector& u, const Vector& v) {
  if (u.size() != x.rows() || v.size() != x.cols()) {
    throw ShapeError("hadamard_scale: scaling vector length does not match grid");
  }
  return {u.asDiagonal() * x.left(), v.asDiagonal() * x.right()};
}

Matrix to_dense(const LowRankMatrix& x, std::size_t cap) {
  check_cap(x.rows(), x.cols(), cap);
  if (x.rank() == 0) return Matrix::Zero(x.rows(), x.cols());
  return x.left() * x.right().transpose();
}

LowRankMatrix from_dense(const Matrix& m, double eps_rel, std::size_t cap) {
  check_cap(m.rows(), m.cols(), cap);
  if (!(eps_rel > 0.0)) throw std::invalid_argument("from_dense: eps_rel must be positive");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double total = s.norm();
  if (total == 0.0) return LowRankMatrix::zero(m.rows(), m.cols());
  const Eigen::Index k = rank_for_tolerance(s, eps_rel * total);
  return {svd.matrixU().leftCols(k) * s.head(k).asDiagonal(), svd.matrixV().leftCols(k)};
}

CanonicalTensor3::CanonicalTensor3(Matrix f1, Matrix f2, Matrix f3)
    : f_{std::move(f1), std::move(f2), std::move(f3)} {
  if (f_[0].cols() != f_[1].cols() || f_[0].cols() != f_[2].cols()) {
    throw ShapeError("CanonicalTensor3: factor panels have different column counts");
  }
}

Eigen::Index CanonicalTensor3::size(int dim) const {
  return f_[static_cast<std::size_t>(dim)].rows();
}

Vector to_dense(const CanonicalTensor3& x, std::size_t cap) {
  const Eigen::Index n1 = x.size(0), n2 = x.size(1), n3 = x.size(2);
  check_cap(n1 * n2, n3, cap);
  Vector out = Vector::Zero(n1 * n2 * n3);
  for (Eigen::Index j = 0; j < x.rank(); ++j) {
    for (Eigen::Index i1 = 0; i1 < n1; ++i1) {
      for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
        const double a = x.factor(0)(i1, j) * x.factor(1)(i2, j);
        out.segment((i1 * n2 + i2) * n3, n3) += a * x.factor(2).col(j);
      }
    }
  }
  return out;
}

}  // namespace lrpcg
