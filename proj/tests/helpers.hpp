#pragma once

#include "lrpcg/lowrank.hpp"

#include <Eigen/Dense>

#include <random>

namespace testutil {

inline lrpcg::Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd;
  lrpcg::Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline lrpcg::LowRankMatrix random_lowrank(std::mt19937_64& rng, Eigen::Index n1, Eigen::Index n2,
                                           Eigen::Index r) {
  return {gaussian_matrix(rng, n1, r), gaussian_matrix(rng, n2, r)};
}

// Low-rank matrix with geometrically decaying singular values, so truncation
// has something to drop.
inline lrpcg::LowRankMatrix decaying_lowrank(std::mt19937_64& rng, Eigen::Index n1, Eigen::Index n2,
                                             Eigen::Index r, double decay) {
  lrpcg::Matrix l = gaussian_matrix(rng, n1, r);
  lrpcg::Matrix rr = gaussian_matrix(rng, n2, r);
  for (Eigen::Index k = 0; k < r; ++k) l.col(k) *= std::pow(decay, static_cast<double>(k));
  return {l, rr};
}

inline double rel_err(const lrpcg::Matrix& a, const lrpcg::Matrix& b) {
  const double nb = b.norm();
  return nb > 0 ? (a - b).norm() / nb : a.norm();
}

inline double rel_err(const lrpcg::Vector& a, const lrpcg::Vector& b) {
  const double nb = b.norm();
  return nb > 0 ? (a - b).norm() / nb : a.norm();
}

// (1/h^2) tridiag(-1, 2, -1), built entry by entry.
inline lrpcg::Matrix laplacian_1d(Eigen::Index n) {
  const double h = 1.0 / static_cast<double>(n + 1);
  lrpcg::Matrix t = lrpcg::Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t(i, i) = 2.0 / (h * h);
    if (i + 1 < n) t(i, i + 1) = t(i + 1, i) = -1.0 / (h * h);
  }
  return t;
}

// Five-point Laplacian on an n x n grid, row-major unknown numbering.
inline lrpcg::Matrix five_point(Eigen::Index n) {
  const double h = 1.0 / static_cast<double>(n + 1);
  const Eigen::Index N = n * n;
  lrpcg::Matrix a = lrpcg::Matrix::Zero(N, N);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index p = i * n + j;
      a(p, p) = 4.0 / (h * h);
      if (i > 0) a(p, p - n) = -1.0 / (h * h);
      if (i + 1 < n) a(p, p + n) = -1.0 / (h * h);
      if (j > 0) a(p, p - 1) = -1.0 / (h * h);
      if (j + 1 < n) a(p, p + 1) = -1.0 / (h * h);
    }
  }
  return a;
}

inline lrpcg::Matrix kron(const lrpcg::Matrix& a, const lrpcg::Matrix& b) {
  lrpcg::Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

// Row-major vectorization, written independently of the library version.
inline lrpcg::Vector vec_rows(const lrpcg::Matrix& m) {
  lrpcg::Vector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

}  // namespace testutil
