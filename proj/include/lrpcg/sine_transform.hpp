#pragma once

#include "lrpcg/lowrank.hpp"

#include <memory>

namespace lrpcg {

/// Orthonormal type-I discrete sine transform of length n.
///
/// Column j of the transform matrix is sqrt(2/(n+1)) sin(pi (i+1)(j+1)/(n+1)),
/// the eigenvectors of the Dirichlet Laplacian.  The matrix is symmetric and
/// its own inverse, so forward and backward transforms coincide.
class SineTransform {
 public:
  explicit SineTransform(Eigen::Index n);
  ~SineTransform();
  SineTransform(const SineTransform&) = delete;
  SineTransform& operator=(const SineTransform&) = delete;
  SineTransform(SineTransform&&) noexcept;
  SineTransform& operator=(SineTransform&&) noexcept;

  Eigen::Index size() const { return n_; }

  /// Transforms every column of `panel`.
  Matrix apply(const Matrix& panel) const;

 private:
  struct Plan;
  Eigen::Index n_;
  std::unique_ptr<Plan> plan_;
};

}  // namespace lrpcg
