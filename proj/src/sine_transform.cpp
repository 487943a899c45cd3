#include "lrpcg/sine_transform.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <vector>

namespace lrpcg {

namespace {
// FFTW planning is not thread safe; execution with new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct SineTransform::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) {
      std::lock_guard<std::mutex> lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

SineTransform::SineTransform(Eigen::Index n) : n_(n), plan_(std::make_unique<Plan>()) {
  if (n < 1) throw std::invalid_argument("SineTransform: n must be >= 1");
  std::vector<double> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_->plan = fftw_plan_r2r_1d(static_cast<int>(n), in.data(), out.data(), FFTW_RODFT00,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_->plan) throw std::runtime_error("SineTransform: FFTW planning failed");
}

SineTransform::~SineTransform() = default;
SineTransform::SineTransform(SineTransform&&) noexcept = default;
SineTransform& SineTransform::operator=(SineTransform&&) noexcept = default;

Matrix SineTransform::apply(const Matrix& panel) const {
  if (panel.rows() != n_) throw ShapeError("SineTransform: panel length mismatch");
  Matrix out(n_, panel.cols());
  // RODFT00 computes 2 * sum x_j sin(...); rescale to the orthonormal transform.
  const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(n_ + 1));
  std::vector<double> buf(static_cast<std::size_t>(n_));
  for (Eigen::Index c = 0; c < panel.cols(); ++c) {
    Eigen::Map<Vector>(buf.data(), n_) = panel.col(c);
    fftw_execute_r2r(plan_->plan, buf.data(), out.col(c).data());
  }
  out *= scale;
  return out;
}

}  // namespace lrpcg
