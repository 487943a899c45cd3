#include "lrpcg/oracle.hpp"

#include "lrpcg/cascadic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <sstream>

namespace lrpcg {

namespace {

struct Stencil1d {
  Vector diag;
  Vector upper;  // coupling i -> i+1
  Vector mass;
};

Stencil1d reference_1d(const UnivariateFn& a, Eigen::Index n, bool fd_normalize) {
  const double h = 1.0 / static_cast<double>(n + 1);
  Stencil1d s{Vector::Zero(n), Vector::Zero(std::max<Eigen::Index>(n - 1, 0)), Vector::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i + 1) * h;
    const double west = a(x - 0.5 * h);
    const double east = a(x + 0.5 * h);
    s.diag(i) = (west + east) / (h * h);
    if (i + 1 < n) s.upper(i) = -east / (h * h);
  }
  // Consistent P1 mass on every element (two-point Gauss), lumped by row sums.
  const double g = 0.5 / std::sqrt(3.0);
  for (Eigen::Index e = 0; e <= n; ++e) {
    const double x0 = static_cast<double>(e) * h;
    double local[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (double t : {0.5 - g, 0.5 + g}) {
      const double w = 0.5 * h * a(x0 + t * h);
      const double phi[2] = {1.0 - t, t};
      for (int p = 0; p < 2; ++p) {
        for (int q = 0; q < 2; ++q) local[p][q] += w * phi[p] * phi[q];
      }
    }
    const Eigen::Index nodes[2] = {e - 1, e};  // interior indices of the element ends
    for (int p = 0; p < 2; ++p) {
      if (nodes[p] < 0 || nodes[p] >= n) continue;
      s.mass(nodes[p]) += local[p][0] + local[p][1];
    }
  }
  if (fd_normalize) s.mass /= h;
  return s;
}

}  // namespace

Eigen::Index long_index(const std::vector<Eigen::Index>& multi,
                        const std::vector<Eigen::Index>& sizes) {
  if (multi.size() != sizes.size()) throw ShapeError("long_index: dimension mismatch");
  Eigen::Index idx = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    if (multi[l] < 0 || multi[l] >= sizes[l]) throw std::out_of_range("long_index: out of range");
    idx = idx * sizes[l] + multi[l];
  }
  return idx;
}

std::vector<Eigen::Index> multi_index(Eigen::Index index, const std::vector<Eigen::Index>& sizes) {
  std::vector<Eigen::Index> out(sizes.size());
  Eigen::Index total = 1;
  for (auto s : sizes) total *= s;
  if (index < 0 || index >= total) throw std::out_of_range("multi_index: out of range");
  for (std::size_t l = sizes.size(); l-- > 0;) {
    out[l] = index % sizes[l];
    index /= sizes[l];
  }
  return out;
}

Vector flatten(const Matrix& m) {
  Vector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) v.segment(i * m.cols(), m.cols()) = m.row(i);
  return v;
}

Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw ShapeError("unflatten: size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i) = v.segment(i * cols, cols).transpose();
  return m;
}

Vector to_vector(const LowRankMatrix& x, std::size_t cap) { return flatten(to_dense(x, cap)); }

Matrix DenseProblem::dense() const {
  if (size() > kDenseUnknownCap) throw CapacityError("DenseProblem::dense: too many unknowns");
  return Matrix(matrix);
}

DenseProblem dense_assemble(const SeparableCoefficient& coeff, const GridSpec& grid,
                            bool fd_normalize, Eigen::Index cap) {
  const int d = grid.dim();
  if (coeff.dim() != d) throw ShapeError("dense_assemble: dimension mismatch");
  const Eigen::Index total = grid.total();
  if (total > cap) {
    std::ostringstream msg;
    msg << "dense_assemble: " << total << " unknowns exceed cap " << cap;
    throw CapacityError(msg.str());
  }

  std::vector<std::vector<Stencil1d>> st(static_cast<std::size_t>(coeff.rank()));
  for (int k = 0; k < coeff.rank(); ++k) {
    for (int l = 0; l < d; ++l) {
      st[static_cast<std::size_t>(k)].push_back(
          reference_1d(coeff.factor(k, l), grid.n[static_cast<std::size_t>(l)], fd_normalize));
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(total) * static_cast<std::size_t>(2 * d + 1) *
                   static_cast<std::size_t>(coeff.rank()));
  for (Eigen::Index row = 0; row < total; ++row) {
    const auto idx = multi_index(row, grid.n);
    for (int k = 0; k < coeff.rank(); ++k) {
      const auto& s = st[static_cast<std::size_t>(k)];
      for (int l = 0; l < d; ++l) {
        const auto ls = static_cast<std::size_t>(l);
        double w = 1.0;
        for (int m = 0; m < d; ++m) {
          if (m != l) w *= s[static_cast<std::size_t>(m)].mass(idx[static_cast<std::size_t>(m)]);
        }
        const Eigen::Index i = idx[ls];
        triplets.emplace_back(row, row, w * s[ls].diag(i));
        auto nb = idx;
        if (i + 1 < grid.n[ls]) {
          nb[ls] = i + 1;
          triplets.emplace_back(row, long_index(nb, grid.n), w * s[ls].upper(i));
        }
        if (i > 0) {
          nb[ls] = i - 1;
          triplets.emplace_back(row, long_index(nb, grid.n), w * s[ls].upper(i - 1));
        }
      }
    }
  }
  DenseProblem out;
  out.sizes = grid.n;
  out.matrix.resize(total, total);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Vector dense_solve_control(const DenseProblem& problem, const Vector& f, double gamma,
                           Formulation formulation) {
  if (f.size() != problem.size()) throw ShapeError("dense_solve_control: rhs size mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("dense_solve_control: gamma must be positive");
  const SparseMatrix& a = problem.matrix;
  const Eigen::Index n = problem.size();
  if (formulation == Formulation::Modified) {
    SparseMatrix id(n, n);
    id.setIdentity();
    const SparseMatrix m = gamma * SparseMatrix(a * a) + id;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(m);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("dense_solve_control: singular");
    return ldlt.solve(a * f);
  }
  const Matrix ad = problem.dense();
  Eigen::LLT<Matrix> llt(ad);
  if (llt.info() != Eigen::Success) throw std::runtime_error("dense_solve_control: A not SPD");
  const Matrix ainv = llt.solve(Matrix::Identity(n, n));
  const Matrix m = gamma * ad + 0.5 * (ainv + ainv.transpose());
  Eigen::LLT<Matrix> outer(m);
  if (outer.info() != Eigen::Success) throw std::runtime_error("dense_solve_control: singular");
  return outer.solve(f);
}

Vector dense_solve_state(const DenseProblem& problem, const Vector& u) {
  if (u.size() != problem.size()) throw ShapeError("dense_solve_state: rhs size mismatch");
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(problem.matrix);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("dense_solve_state: singular");
  return ldlt.solve(u);
}

ConditionEstimate estimate_condition(const VectorMap& op, Eigen::Index dim, int iters,
                                     const VectorMap* precond, std::uint64_t seed) {
  if (dim < 1 || iters < 1) throw std::invalid_argument("estimate_condition: bad sizes");
  const Eigen::Index m = std::min<Eigen::Index>(iters, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);

  // Lanczos for K = P*A, self-adjoint in <x, y> = x' P^-1 y. Each basis vector v is kept
  // together with u = P^-1 v, so only applications of P are needed.
  auto apply_p = [&](const Vector& x) { return precond ? (*precond)(x) : x; };
  Matrix vb(dim, m), ub(dim, m);
  std::vector<double> alpha, beta;
  Vector r = v, z = apply_p(r);
  double nv = z.dot(r);
  if (!(nv > 0.0)) throw std::domain_error("estimate_condition: preconditioner is not positive definite");
  nv = std::sqrt(nv);
  vb.col(0) = z / nv;
  ub.col(0) = r / nv;
  bool invariant = false;
  for (Eigen::Index j = 0; j < m; ++j) {
    r = op(vb.col(j));
    const double a = vb.col(j).dot(r);
    if (j == 0 && !(a > 0.0)) throw std::domain_error("estimate_condition: operator is not positive definite");
    alpha.push_back(a);
    if (j + 1 == m) break;
    z = apply_p(r);
    const double before = std::sqrt(std::max(z.dot(r), 0.0));
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double c = z.dot(ub.col(i));
        z -= c * vb.col(i);
        r -= c * ub.col(i);
      }
    }
    // z and r drift apart under separate updates; keep z = P r exactly.
    z = apply_p(r);
    const double b2 = z.dot(r);
    // Repeated eigenvalues make the Krylov space invariant early. What survives orthogonalization
    // is then rounding noise, and continuing with it would corrupt the tridiagonal matrix.
    if (!(b2 > 0.0) || std::sqrt(b2) <= 1e-9 * before) {
      invariant = true;
      break;
    }
    const double b = std::sqrt(b2);
    beta.push_back(b);
    vb.col(j + 1) = z / b;
    ub.col(j + 1) = r / b;
  }
  const Eigen::Index k = static_cast<Eigen::Index>(alpha.size());
  Vector diag(k), off(std::max<Eigen::Index>(k - 1, 0));
  for (Eigen::Index i = 0; i < k; ++i) diag(i) = alpha[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < k; ++i) off(i) = beta[static_cast<std::size_t>(i)];
  Matrix tri = Matrix::Zero(k, k);
  tri.diagonal() = diag;
  if (k > 1) {
    tri.diagonal(1) = off;
    tri.diagonal(-1) = off;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(tri);

  ConditionEstimate out;
  out.iterations = static_cast<int>(k);
  out.lambda_min = es.eigenvalues().minCoeff();
  out.lambda_max = es.eigenvalues().maxCoeff();
  out.condition = out.lambda_max / out.lambda_min;
  if (invariant || k == dim) {
    out.converged = true;
  } else {
    // Residual of a Ritz pair: |beta_k * last component of its eigenvector|.
    const Vector last = es.eigenvectors().row(k - 1).transpose();
    Vector rr = op(vb.col(k - 1)) - alpha.back() * ub.col(k - 1);
    if (k > 1) rr -= beta.back() * ub.col(k - 2);
    const double bk = std::sqrt(std::max(apply_p(rr).dot(rr), 0.0));
    out.converged = std::abs(bk * last(0)) <= 0.05 * std::abs(out.lambda_min) &&
                    std::abs(bk * last(k - 1)) <= 0.05 * std::abs(out.lambda_max);
  }
  return out;
}

IntergridRatio intergrid_ratio(const LowRankMatrix& u_2h, const LowRankMatrix& u_h,
                               const LowRankMatrix& u_h2) {
  auto nested = [](const LowRankMatrix& c, const LowRankMatrix& f) {
    return f.rows() == 2 * c.rows() + 1 && f.cols() == 2 * c.cols() + 1;
  };
  if (!nested(u_2h, u_h) || !nested(u_h, u_h2)) {
    throw ShapeError("intergrid_ratio: solutions are not on consecutive nested grids");
  }
  auto diff_norm = [](const LowRankMatrix& x, const LowRankMatrix& y) {
    const LowRankMatrix d = axpy(-1.0, y, x);
    if (d.rank() == 0) return 0.0;
    const TruncationResult t = truncate_detailed(d, 1e-15);
    return t.value.rank() == 0 ? 0.0 : t.singular_values.norm();
  };
  const double num = diff_norm(prolongate_lowrank(u_2h), u_h);
  const double den = diff_norm(u_h, restrict_injection(u_h2));
  if (!(den > 0.0)) throw std::domain_error("intergrid_ratio: fine and middle solutions coincide");
  IntergridRatio out;
  out.ratio = num / den;
  out.alpha = std::log2(out.ratio);
  return out;
}

}  // namespace lrpcg
