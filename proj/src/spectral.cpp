#include "lrpcg/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace lrpcg {

namespace {

// Multiplier terms below this relative size are dropped even when the rank
// budget is not exhausted; the configured tolerance is only reported against.
constexpr double kNegligible = 1e-14;

double spread(double lo, double hi) { return hi > lo ? (hi - lo) / (hi + lo) : 0.0; }

// Sum of the tridiagonal factors sitting in each slot of a separable-sum generator.
std::vector<Tridiagonal> collect_slots(const KroneckerOperator& generator) {
  const int d = generator.dim();
  std::vector<Tridiagonal> slots(static_cast<std::size_t>(d));
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  for (const auto& term : generator.terms()) {
    int slot = -1;
    for (int l = 0; l < d; ++l) {
      if (is_identity(term.factors[static_cast<std::size_t>(l)])) continue;
      if (slot >= 0) throw std::invalid_argument("diagonalize: term has two non-identity factors");
      slot = l;
    }
    if (slot < 0) throw std::invalid_argument("diagonalize: term is a pure identity");
    const auto* t = std::get_if<Tridiagonal>(&term.factors[static_cast<std::size_t>(slot)]);
    if (!t) throw std::invalid_argument("diagonalize: non-identity factor must be tridiagonal");
    auto& acc = slots[static_cast<std::size_t>(slot)];
    if (!seen[static_cast<std::size_t>(slot)]) {
      acc = *t;
      seen[static_cast<std::size_t>(slot)] = true;
    } else {
      acc.diag += t->diag;
      acc.off += t->off;
    }
  }
  for (int l = 0; l < d; ++l) {
    if (!seen[static_cast<std::size_t>(l)]) {
      throw std::invalid_argument("diagonalize: dimension without a generator factor");
    }
  }
  return slots;
}

// Returns c > 0 if t == c * (1/h^2) tridiag(-1, 2, -1) with h = 1/(n+1).
std::optional<double> laplacian_scale(const Tridiagonal& t) {
  const Eigen::Index n = t.diag.size();
  const double h = 1.0 / static_cast<double>(n + 1);
  const double c = 0.5 * t.diag(0) * h * h;
  if (!(c > 0.0)) return std::nullopt;
  const double tol = 1e-12 * std::abs(t.diag(0));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(t.diag(i) - t.diag(0)) > tol) return std::nullopt;
  }
  for (Eigen::Index i = 0; i < t.off.size(); ++i) {
    if (std::abs(t.off(i) + 0.5 * t.diag(0)) > tol) return std::nullopt;
  }
  return c;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

void require_2d(const DiagonalizedBasis& basis, const char* what) {
  if (basis.dims.size() != 2) {
    throw std::invalid_argument(std::string(what) + ": only two-dimensional bases are supported");
  }
}

struct Compressed {
  Matrix u;
  Matrix v;
  double error = 0.0;  // relative Frobenius
};

// Smallest rank <= max_rank whose relative tail is below tol.
Compressed recompress(const Matrix& a, const Matrix& b, double fro, double extra,
                      Eigen::Index max_rank, double tol) {
  Eigen::HouseholderQR<Matrix> qa(a), qb(b);
  const Eigen::Index ka = std::min(a.rows(), a.cols());
  const Eigen::Index kb = std::min(b.rows(), b.cols());
  Matrix q1 = qa.householderQ() * Matrix::Identity(a.rows(), ka);
  Matrix q2 = qb.householderQ() * Matrix::Identity(b.rows(), kb);
  Matrix r1 = qa.matrixQR().topRows(ka).triangularView<Eigen::Upper>();
  Matrix r2 = qb.matrixQR().topRows(kb).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(r1 * r2.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Eigen::Index k = 0;
  auto tail2 = [&](Eigen::Index from) { return s.tail(s.size() - from).squaredNorm(); };
  while (k < std::min<Eigen::Index>(max_rank, s.size())) {
    if (std::sqrt(tail2(k) + extra * extra) <= tol * fro) break;
    ++k;
  }
  Compressed out;
  out.u = q1 * (svd.matrixU().leftCols(k) * s.head(k).asDiagonal());
  out.v = q2 * svd.matrixV().leftCols(k);
  out.error = std::sqrt(tail2(k) + extra * extra) / fro;
  return out;
}


// Separable fit f(s) ~= sum_k c_k exp(-t_k s) on [smin, smax] with uniform
// relative accuracy.  Exponents are geometric between t_lo and t_hi; the pair
// is chosen by a coarse-then-fine search and the coefficients by weighted
// least squares with a few Lawson reweightings toward the minimax fit.
struct ExponentialSum {
  Vector c;
  Vector t;
  double max_rel = std::numeric_limits<double>::infinity();
};

ExponentialSum fit_exponential_sum(SpectralFunction f, double gamma, double smin, double smax,
                                   Eigen::Index rank) {
  const int ns = 1500;
  const double ls0 = std::log(smin), ls1 = std::log(std::max(smax, smin * (1.0 + 1e-12)));
  Vector s(ns), fs(ns);
  for (int q = 0; q < ns; ++q) {
    s(q) = std::exp(ls0 + (ls1 - ls0) * q / (ns - 1));
    fs(q) = evaluate(f, s(q), gamma);
  }
  auto design = [&](const Vector& t) {
    Matrix a(ns, t.size());
    for (Eigen::Index k = 0; k < t.size(); ++k)
      for (int q = 0; q < ns; ++q) a(q, k) = std::exp(-t(k) * s(q)) / fs(q);
    return a;
  };
  auto exponents = [&](double a, double w) {
    const double lo = std::log(std::pow(10.0, a) / smax), hi = std::log(std::pow(10.0, w) / smin);
    Vector t(rank);
    for (Eigen::Index k = 0; k < rank; ++k)
      t(k) = std::exp(rank == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(rank - 1));
    return t;
  };
  auto solve = [&](const Vector& t, int lawson) {
    ExponentialSum out;
    out.t = t;
    const Matrix a = design(t);
    Vector w = Vector::Ones(ns);
    for (int it = 0; it <= lawson; ++it) {
      const Vector sw = w.cwiseSqrt();
      const Vector c = (sw.asDiagonal() * a).colPivHouseholderQr().solve(sw);
      const Vector rel = (a * c).array() - 1.0;
      const double m = rel.cwiseAbs().maxCoeff();
      if (!std::isfinite(m)) break;
      if (m < out.max_rel) {
        out.max_rel = m;
        out.c = c;
      }
      w = w.cwiseProduct(rel.cwiseAbs());
      const double total = w.sum();
      if (!(total > 0.0)) break;
      w /= total;
    }
    return out;
  };

  ExponentialSum best;
  double ba = 0.0, bw = 0.0;
  for (double a = -3.0; a <= 1.0 + 1e-9; a += 0.25) {
    for (double w = 0.0; w <= 4.0 + 1e-9; w += 0.25) {
      ExponentialSum e = solve(exponents(a, w), 0);
      if (e.max_rel < best.max_rel) {
        best = std::move(e);
        ba = a;
        bw = w;
      }
    }
  }
  for (double a = ba - 0.2; a <= ba + 0.2 + 1e-9; a += 0.05) {
    for (double w = bw - 0.2; w <= bw + 0.2 + 1e-9; w += 0.05) {
      ExponentialSum e = solve(exponents(a, w), 0);
      if (e.max_rel < best.max_rel) {
        best = std::move(e);
        ba = a;
        bw = w;
      }
    }
  }
  ExponentialSum refined = solve(best.t, 30);
  if (refined.max_rel < best.max_rel) best = std::move(refined);
  return best;
}

// Worst ratio (approximate / exact) spread of a multiplier, the factor by
// which it can distort the spectrum.  Infinite when a ratio is not positive.
// Large tables are checked on a strided subgrid that keeps the last index.
double multiplier_distortion(const Matrix& u, const Matrix& v, const Vector& l1, const Vector& l2,
                             SpectralFunction f, double gamma) {
  const Eigen::Index n1 = l1.size(), n2 = l2.size();
  const Eigen::Index step1 = std::max<Eigen::Index>(1, n1 / 1024), step2 = std::max<Eigen::Index>(1, n2 / 1024);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  auto visit = [&](Eigen::Index i, Eigen::Index j) {
    const double r = u.row(i).dot(v.row(j)) / evaluate(f, l1(i) + l2(j), gamma);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  };
  for (Eigen::Index i = 0; i < n1; i += step1) {
    for (Eigen::Index j = 0; j < n2; j += step2) visit(i, j);
    visit(i, n2 - 1);
  }
  for (Eigen::Index j = 0; j < n2; j += step2) visit(n1 - 1, j);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

double relative_frobenius(const Matrix& u, const Matrix& v, const Vector& l1, const Vector& l2,
                          SpectralFunction f, double gamma) {
  double err2 = 0.0, ref2 = 0.0;
  for (Eigen::Index j = 0; j < l2.size(); ++j) {
    const Vector col = u * v.row(j).transpose();
    for (Eigen::Index i = 0; i < l1.size(); ++i) {
      const double g = evaluate(f, l1(i) + l2(j), gamma);
      err2 += (col(i) - g) * (col(i) - g);
      ref2 += g * g;
    }
  }
  return std::sqrt(err2 / ref2);
}

}  // namespace

AveragedData compute_averaged_data(const SeparableCoefficient& coeff, const GridSpec& grid,
                                   bool fd_normalize) {
  const int d = coeff.dim();
  if (grid.dim() != d) throw ShapeError("compute_averaged_data: grid dimension mismatch");
  AveragedData avg;
  avg.dim = d;
  avg.rank = coeff.rank();
  const auto R = static_cast<std::size_t>(coeff.rank());
  const auto D = static_cast<std::size_t>(d);
  avg.mass_mean.assign(R, std::vector<double>(D));
  avg.mass_min = avg.mass_max = avg.coeff_min = avg.coeff_max = avg.mass_mean;

  for (std::size_t k = 0; k < R; ++k) {
    for (std::size_t l = 0; l < D; ++l) {
      const int ki = static_cast<int>(k), li = static_cast<int>(l);
      const Eigen::Index n = grid.n[l];
      const double h = grid.h(li);
      Vector diag = assemble_1d_lumped_mass(coeff.factor(ki, li), n, h).entries;
      if (fd_normalize) diag /= h;
      avg.mass_mean[k][l] = diag.mean();
      avg.mass_min[k][l] = diag.minCoeff();
      avg.mass_max[k][l] = diag.maxCoeff();

      const Eigen::Index samples = std::max<Eigen::Index>(4 * n, 2);
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (Eigen::Index j = 0; j < samples; ++j) {
        const double x = static_cast<double>(j) / static_cast<double>(samples - 1);
        const double a = coeff.factor(ki, li)(x);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
      avg.coeff_min[k][l] = lo;
      avg.coeff_max[k][l] = hi;
      avg.q_a = std::max(avg.q_a, spread(lo, hi));
      avg.q_d = std::max(avg.q_d, spread(avg.mass_min[k][l], avg.mass_max[k][l]));
    }
  }

  avg.anisotropy.assign(D, 0.0);
  for (std::size_t l = 0; l < D; ++l) {
    for (std::size_t k = 0; k < R; ++k) {
      double w = avg.coeff_mid(static_cast<int>(k), static_cast<int>(l));
      for (std::size_t m = 0; m < D; ++m) {
        if (m != l) w *= avg.mass_mean[k][m];
      }
      avg.anisotropy[l] += w;
    }
  }
  return avg;
}

Tridiagonal fd_laplacian(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("fd_laplacian: n must be >= 1");
  const double h = 1.0 / static_cast<double>(n + 1);
  const double s = 1.0 / (h * h);
  return {Vector::Constant(n, 2.0 * s), Vector::Constant(n - 1, -s)};
}

KroneckerOperator build_A1(const GridSpec& grid, const AveragedData& avg) {
  const int d = grid.dim();
  if (static_cast<int>(avg.anisotropy.size()) != d) {
    throw ShapeError("build_A1: averaged data dimension mismatch");
  }
  std::vector<KroneckerOperator::Term> terms;
  for (int l = 0; l < d; ++l) {
    KroneckerOperator::Term term;
    for (int m = 0; m < d; ++m) {
      const Eigen::Index n = grid.n[static_cast<std::size_t>(m)];
      if (m == l) {
        Tridiagonal t = fd_laplacian(n);
        t.diag *= avg.anisotropy[static_cast<std::size_t>(l)];
        t.off *= avg.anisotropy[static_cast<std::size_t>(l)];
        term.factors.emplace_back(std::move(t));
      } else {
        term.factors.push_back(identity_factor(n));
      }
    }
    terms.push_back(std::move(term));
  }
  return KroneckerOperator(d, std::move(terms));
}

KroneckerOperator build_A2(const GridSpec& grid, const SeparableCoefficient& coeff,
                           const AveragedData& avg) {
  const int d = grid.dim();
  if (coeff.dim() != d || avg.dim != d) throw ShapeError("build_A2: dimension mismatch");
  std::vector<KroneckerOperator::Term> terms;
  for (int l = 0; l < d; ++l) {
    const Eigen::Index n = grid.n[static_cast<std::size_t>(l)];
    Tridiagonal acc{Vector::Zero(n), Vector::Zero(n - 1)};
    for (int k = 0; k < coeff.rank(); ++k) {
      double w = 1.0;
      for (int m = 0; m < d; ++m) {
        if (m != l) w *= avg.mass_mean[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)];
      }
      const Tridiagonal a = assemble_1d_stiffness(coeff.factor(k, l), n, grid.h(l));
      acc.diag += w * a.diag;
      acc.off += w * a.off;
    }
    KroneckerOperator::Term term;
    for (int m = 0; m < d; ++m) {
      if (m == l) {
        term.factors.emplace_back(acc);
      } else {
        term.factors.push_back(identity_factor(grid.n[static_cast<std::size_t>(m)]));
      }
    }
    terms.push_back(std::move(term));
  }
  return KroneckerOperator(d, std::move(terms));
}

// ---------------------------------------------------------------------------

DimensionBasis DimensionBasis::sine(Eigen::Index n, double scale) {
  if (n < 1) throw std::invalid_argument("DimensionBasis::sine: n must be >= 1");
  if (!(scale > 0.0)) throw std::invalid_argument("DimensionBasis::sine: scale must be positive");
  DimensionBasis b;
  b.kind_ = Kind::Sine;
  const double h = 1.0 / static_cast<double>(n + 1);
  b.eigenvalues_.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * static_cast<double>(k + 1) * h;
    b.eigenvalues_(k) = scale * (2.0 - 2.0 * std::cos(theta)) / (h * h);
  }
  b.sine_ = std::make_shared<const SineTransform>(n);
  return b;
}

DimensionBasis DimensionBasis::dense(const Tridiagonal& t) {
  const Eigen::Index n = t.diag.size();
  if (n < 1 || t.off.size() != n - 1) throw ShapeError("DimensionBasis::dense: bad tridiagonal");
  DimensionBasis b;
  b.kind_ = Kind::Dense;
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(t.diag, t.off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("DimensionBasis::dense: eigensolver failed");
  b.eigenvalues_ = es.eigenvalues();
  b.vectors_ = es.eigenvectors();
  if (!(b.eigenvalues_(0) > 0.0)) {
    throw std::invalid_argument("DimensionBasis::dense: generator is not positive definite");
  }
  return b;
}

Matrix DimensionBasis::vectors() const {
  if (kind_ == Kind::Dense) return vectors_;
  const Eigen::Index n = size();
  const double c = std::sqrt(2.0 / static_cast<double>(n + 1));
  Matrix v(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      v(i, j) = c * std::sin(std::numbers::pi * static_cast<double>((i + 1) * (j + 1)) /
                             static_cast<double>(n + 1));
    }
  }
  return v;
}

Matrix DimensionBasis::to_spectral(const Matrix& panel) const {
  if (panel.rows() != size()) throw ShapeError("DimensionBasis: panel length mismatch");
  if (kind_ == Kind::Sine) return sine_->apply(panel);
  return vectors_.transpose() * panel;
}

Matrix DimensionBasis::from_spectral(const Matrix& panel) const {
  if (panel.rows() != size()) throw ShapeError("DimensionBasis: panel length mismatch");
  if (kind_ == Kind::Sine) return sine_->apply(panel);
  return vectors_ * panel;
}

DiagonalizedBasis diagonalize(const KroneckerOperator& generator) {
  DiagonalizedBasis out;
  for (const Tridiagonal& t : collect_slots(generator)) {
    if (auto c = laplacian_scale(t)) {
      out.dims.push_back(DimensionBasis::sine(t.diag.size(), *c));
    } else {
      out.dims.push_back(DimensionBasis::dense(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double evaluate(SpectralFunction f, double s, double gamma) {
  switch (f) {
    case SpectralFunction::Inverse:
      return 1.0 / s;
    case SpectralFunction::BType:
      return s / (gamma * s * s + 1.0);
    case SpectralFunction::SType:
      return 1.0 / (gamma * s * s + 1.0);
    case SpectralFunction::Identity:
      return 1.0;
  }
  return 0.0;
}

Matrix multiplier_table(const DiagonalizedBasis& basis, SpectralFunction f, double gamma) {
  require_2d(basis, "multiplier_table");
  const Vector& l1 = basis.dims[0].eigenvalues();
  const Vector& l2 = basis.dims[1].eigenvalues();
  Matrix g(l1.size(), l2.size());
  for (Eigen::Index j = 0; j < l2.size(); ++j) {
    for (Eigen::Index i = 0; i < l1.size(); ++i) g(i, j) = evaluate(f, l1(i) + l2(j), gamma);
  }
  return g;
}

SpectralPreconditioner build_preconditioner(const DiagonalizedBasis& basis, SpectralFunction f,
                                            double gamma, const PreconditionerOptions& options) {
  require_2d(basis, "build_preconditioner");
  if (options.rank < 1) throw std::invalid_argument("build_preconditioner: rank must be >= 1");
  if (!(options.tolerance > 0.0)) {
    throw std::invalid_argument("build_preconditioner: tolerance must be positive");
  }
  if (f != SpectralFunction::Inverse && f != SpectralFunction::Identity && !(gamma > 0.0)) {
    throw std::invalid_argument("build_preconditioner: gamma must be positive");
  }
  const Vector& l1 = basis.dims[0].eigenvalues();
  const Vector& l2 = basis.dims[1].eigenvalues();
  const Eigen::Index n1 = l1.size(), n2 = l2.size();
  auto entry = [&](Eigen::Index i, Eigen::Index j) { return evaluate(f, l1(i) + l2(j), gamma); };

  SpectralPreconditioner p;
  p.basis = basis;
  p.function = f;
  p.gamma = gamma;

  if (f == SpectralFunction::Identity) {
    p.u = Matrix::Ones(n1, 1);
    p.v = Matrix::Ones(n2, 1);
    return p;
  }

  if (std::max(n1, n2) <= options.svd_limit) {
    const Matrix g = multiplier_table(basis, f, gamma);
    Eigen::BDCSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double fro = s.norm();
    Eigen::Index k = 0;
    while (k < std::min<Eigen::Index>(options.rank, s.size()) &&
           s.tail(s.size() - k).norm() > kNegligible * fro) {
      ++k;
    }
    p.u = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
    p.v = svd.matrixV().leftCols(k);
    p.frobenius_error = s.tail(s.size() - k).norm() / fro;
  } else {
    // Partial-pivot cross approximation, run past the target rank, then
    // recompressed to the requested rank by a QR/SVD of the skeleton.
    const double aca_eps = 1e-3 * options.tolerance;
    const Eigen::Index max_pivots = std::min<Eigen::Index>({n1, n2, 8 * options.rank});
    Matrix us(n1, 0), vs(n2, 0);
    std::vector<bool> used(static_cast<std::size_t>(n1), false);
    double fro2 = 0.0;
    double last = 0.0;
    Eigen::Index row = 0;
    for (Eigen::Index step = 0; step < max_pivots; ++step) {
      Vector r(n2);
      for (Eigen::Index j = 0; j < n2; ++j) r(j) = entry(row, j);
      if (us.cols() > 0) r -= vs * us.row(row).transpose();
      used[static_cast<std::size_t>(row)] = true;
      Eigen::Index col = 0;
      const double pivot_abs = r.cwiseAbs().maxCoeff(&col);
      if (pivot_abs > 0.0) {
        Vector v = r / r(col);
        Vector u(n1);
        for (Eigen::Index i = 0; i < n1; ++i) u(i) = entry(i, col);
        if (us.cols() > 0) u -= us * vs.row(col).transpose();
        const double inc = u.norm() * v.norm();
        double cross = 0.0;
        if (us.cols() > 0) cross = (us.transpose() * u).dot(vs.transpose() * v);
        fro2 += inc * inc + 2.0 * cross;
        us.conservativeResize(Eigen::NoChange, us.cols() + 1);
        vs.conservativeResize(Eigen::NoChange, vs.cols() + 1);
        us.col(us.cols() - 1) = u;
        vs.col(vs.cols() - 1) = v;
        last = inc;
        if (inc <= aca_eps * std::sqrt(std::max(fro2, 0.0))) break;
        // Next row: largest remaining entry of the new column.
        Eigen::Index next = -1;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n1; ++i) {
          if (!used[static_cast<std::size_t>(i)] && std::abs(u(i)) > best) {
            best = std::abs(u(i));
            next = i;
          }
        }
        if (next < 0) break;
        row = next;
      } else {
        auto it = std::find(used.begin(), used.end(), false);
        if (it == used.end()) break;
        row = static_cast<Eigen::Index>(it - used.begin());
      }
    }
    const double fro = std::sqrt(std::max(fro2, 0.0));
    if (!(fro > 0.0)) throw std::runtime_error("build_preconditioner: cross approximation failed");
    Compressed c = recompress(us, vs, fro, last, options.rank, kNegligible);
    p.u = std::move(c.u);
    p.v = std::move(c.v);
    p.frobenius_error = c.error;
    p.used_cross_approximation = true;
  }

  // The Frobenius-optimal terms can be poor relative to the tiny multipliers
  // of high frequencies, which is what spectral equivalence depends on.  An
  // exponential sum with uniform relative accuracy replaces them when it
  // distorts the spectrum less.
  p.distortion = multiplier_distortion(p.u, p.v, l1, l2, f, gamma);
  const double smin = l1(0) + l2(0), smax = l1(n1 - 1) + l2(n2 - 1);
  if (options.allow_exponential_sum && !options.exact_generator && p.distortion > 1.0 + 1e-12 &&
      smin > 0.0) {
    const ExponentialSum es = fit_exponential_sum(f, gamma, smin, smax, options.rank);
    if (es.max_rel < 1.0) {
      Matrix u(n1, es.t.size()), v(n2, es.t.size());
      for (Eigen::Index k = 0; k < es.t.size(); ++k) {
        u.col(k) = es.c(k) * (-es.t(k) * l1.array()).exp().matrix();
        v.col(k) = (-es.t(k) * l2.array()).exp().matrix();
      }
      const double dist = multiplier_distortion(u, v, l1, l2, f, gamma);
      if (dist < p.distortion) {
        p.u = std::move(u);
        p.v = std::move(v);
        p.distortion = dist;
        p.frobenius_error = relative_frobenius(p.u, p.v, l1, l2, f, gamma);
        p.used_exponential_sum = true;
        p.used_cross_approximation = false;
      }
    }
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<Eigen::Index> d1(0, n1 - 1), d2(0, n2 - 1);
  for (int s = 0; s < options.check_samples; ++s) {
    const Eigen::Index i = d1(rng), j = d2(rng);
    const double exact = entry(i, j);
    const double approx = p.u.row(i).dot(p.v.row(j));
    p.sampled_max_error = std::max(p.sampled_max_error, std::abs(approx - exact) / std::abs(exact));
  }
  p.reached_tolerance = p.frobenius_error <= options.tolerance;
  return p;
}

LowRankMatrix apply_preconditioner(const SpectralPreconditioner& p, const LowRankMatrix& x,
                                   double eps) {
  const auto& b = p.basis.dims;
  if (x.rows() != b[0].size() || x.cols() != b[1].size()) {
    throw ShapeError("apply_preconditioner: shape mismatch");
  }
  if (x.rank() == 0 || p.rank() == 0) return LowRankMatrix::zero(x.rows(), x.cols());
  const Matrix lh = b[0].to_spectral(x.left());
  const Matrix rh = b[1].to_spectral(x.right());
  const Eigen::Index r = x.rank();
  const Eigen::Index terms = p.rank();
  const auto term = [&](Eigen::Index k) {
    return LowRankMatrix(p.u.col(k).asDiagonal() * lh, p.v.col(k).asDiagonal() * rh);
  };
  // One truncation of all terms costs about min(n, terms*r)^3; summing them one
  // at a time keeps each truncation near 2r columns, which wins on fine grids.
  // The bases are orthogonal, so truncating in spectral space is equivalent.
  const double joint = static_cast<double>(std::min(std::min(x.rows(), x.cols()), terms * r));
  LowRankMatrix acc = term(0);
  if (joint * joint <= static_cast<double>((terms - 1) * 4 * r * r)) {
    Matrix left(x.rows(), terms * r), right(x.cols(), terms * r);
    for (Eigen::Index k = 0; k < terms; ++k) {
      left.middleCols(k * r, r) = p.u.col(k).asDiagonal() * lh;
      right.middleCols(k * r, r) = p.v.col(k).asDiagonal() * rh;
    }
    acc = LowRankMatrix(std::move(left), std::move(right));
  } else {
    const double step_eps = eps / std::sqrt(static_cast<double>(terms));
    for (Eigen::Index k = 1; k < terms; ++k) {
      const LowRankMatrix next = term(k);
      acc = truncate(concat({{1.0, &acc}, {1.0, &next}}), step_eps);
    }
  }
  LowRankMatrix t = truncate(acc, eps);
  if (t.rank() == 0) return t;
  return LowRankMatrix(b[0].from_spectral(t.left()), b[1].from_spectral(t.right()));
}

Matrix to_dense(const SpectralPreconditioner& p, std::size_t cap) {
  const auto& b = p.basis.dims;
  const Eigen::Index n1 = b[0].size(), n2 = b[1].size();
  const Eigen::Index n = n1 * n2;
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) > cap) {
    throw CapacityError("to_dense(SpectralPreconditioner): too large");
  }
  const Matrix v = kron(b[0].vectors(), b[1].vectors());
  const Matrix g = p.u * p.v.transpose();
  Vector w(n);
  for (Eigen::Index i = 0; i < n1; ++i) {
    for (Eigen::Index j = 0; j < n2; ++j) w(i * n2 + j) = g(i, j);
  }
  return v * w.asDiagonal() * v.transpose();
}

}  // namespace lrpcg
