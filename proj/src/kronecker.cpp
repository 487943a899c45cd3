#include "lrpcg/kronecker.hpp"

#include <cmath>
#include <sstream>

namespace lrpcg {

namespace {

constexpr int kPositivitySamples = 1001;

void require_positive(double value, double x, const char* what) {
  if (!(value > 0.0)) {
    std::ostringstream msg;
    msg << what << ": coefficient " << value << " at x=" << x << " is not positive";
    throw CoefficientError(msg.str());
  }
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

// ---------------------------------------------------------------------------
// SeparableCoefficient

SeparableCoefficient::SeparableCoefficient(int dim,
                                           std::vector<std::vector<UnivariateFn>> factors)
    : dim_(dim), factors_(std::move(factors)) {
  if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("SeparableCoefficient: dim must be 1..3");
  if (factors_.empty()) throw std::invalid_argument("SeparableCoefficient: empty factor list");
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (factors_[k].size() != static_cast<std::size_t>(dim_)) {
      throw std::invalid_argument("SeparableCoefficient: term " + std::to_string(k) +
                                  " does not have one factor per dimension");
    }
    for (std::size_t l = 0; l < factors_[k].size(); ++l) {
      if (!factors_[k][l]) {
        throw std::invalid_argument("SeparableCoefficient: missing factor evaluator");
      }
      for (int s = 0; s < kPositivitySamples; ++s) {
        const double x = static_cast<double>(s) / (kPositivitySamples - 1);
        const double v = factors_[k][l](x);
        if (!(v > 0.0)) {
          std::ostringstream msg;
          msg << "SeparableCoefficient: factor[" << k << "][" << l << "](" << x << ") = " << v
              << " is not positive";
          throw CoefficientError(msg.str());
        }
      }
    }
  }
}

double SeparableCoefficient::operator()(const std::vector<double>& x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) throw ShapeError("coefficient: wrong point dim");
  double sum = 0.0;
  for (const auto& term : factors_) {
    double prod = 1.0;
    for (std::size_t l = 0; l < term.size(); ++l) prod *= term[l](x[l]);
    sum += prod;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// GridSpec

GridSpec GridSpec::uniform(int dim, Eigen::Index points) {
  if (points < 1) throw std::invalid_argument("GridSpec: need at least one interior point");
  return GridSpec{std::vector<Eigen::Index>(static_cast<std::size_t>(dim), points)};
}

Eigen::Index GridSpec::total() const {
  Eigen::Index t = 1;
  for (auto v : n) t *= v;
  return t;
}

// ---------------------------------------------------------------------------
// Factors

Eigen::Index factor_size(const Factor& f) {
  return std::visit(overloaded{[](const Tridiagonal& t) { return t.diag.size(); },
                               [](const Diagonal& d) { return d.entries.size(); }},
                    f);
}

Matrix factor_dense(const Factor& f) {
  return std::visit(overloaded{[](const Tridiagonal& t) {
                                 const Eigen::Index n = t.diag.size();
                                 Matrix m = Matrix::Zero(n, n);
                                 m.diagonal() = t.diag;
                                 if (n > 1) {
                                   m.diagonal(1) = t.off;
                                   m.diagonal(-1) = t.off;
                                 }
                                 return m;
                               },
                               [](const Diagonal& d) {
                                 return Matrix(d.entries.asDiagonal());
                               }},
                    f);
}

Matrix factor_apply(const Factor& f, const Matrix& panel) {
  if (factor_size(f) != panel.rows()) throw ShapeError("factor_apply: size mismatch");
  return std::visit(
      overloaded{[&](const Tridiagonal& t) {
                   const Eigen::Index n = t.diag.size();
                   Matrix out = t.diag.asDiagonal() * panel;
                   if (n > 1) {
                     out.topRows(n - 1) += t.off.asDiagonal() * panel.bottomRows(n - 1);
                     out.bottomRows(n - 1) += t.off.asDiagonal() * panel.topRows(n - 1);
                   }
                   return out;
                 },
                 [&](const Diagonal& d) { return Matrix(d.entries.asDiagonal() * panel); }},
      f);
}

Factor identity_factor(Eigen::Index n) { return Diagonal{Vector::Ones(n)}; }

bool is_identity(const Factor& f) {
  const auto* d = std::get_if<Diagonal>(&f);
  return d != nullptr && (d->entries.array() == 1.0).all();
}

// ---------------------------------------------------------------------------
// KroneckerOperator

KroneckerOperator::KroneckerOperator(int dim, std::vector<Term> terms)
    : dim_(dim), terms_(std::move(terms)) {
  if (terms_.empty()) throw std::invalid_argument("KroneckerOperator: no terms");
  for (const auto& term : terms_) {
    if (term.factors.size() != static_cast<std::size_t>(dim_)) {
      throw ShapeError("KroneckerOperator: term has wrong number of factors");
    }
  }
  for (int l = 0; l < dim_; ++l) sizes_.push_back(factor_size(terms_.front().factors[l]));
  for (const auto& term : terms_) {
    for (int l = 0; l < dim_; ++l) {
      if (factor_size(term.factors[l]) != sizes_[l]) {
        throw ShapeError("KroneckerOperator: terms disagree on per-dimension sizes");
      }
      if (const auto* t = std::get_if<Tridiagonal>(&term.factors[l]);
          t && t->off.size() != std::max<Eigen::Index>(t->diag.size() - 1, 0)) {
        throw ShapeError("KroneckerOperator: malformed tridiagonal factor");
      }
    }
  }
}

Eigen::Index KroneckerOperator::total_size() const {
  Eigen::Index t = 1;
  for (auto s : sizes_) t *= s;
  return t;
}

Matrix KroneckerOperator::to_dense(std::size_t cap) const {
  const Eigen::Index n = total_size();
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) > cap) {
    throw CapacityError("KroneckerOperator::to_dense: operator too large");
  }
  Matrix out = Matrix::Zero(n, n);
  for (const auto& term : terms_) {
    Matrix k = factor_dense(term.factors[0]);
    for (int l = 1; l < dim_; ++l) {
      const Matrix f = factor_dense(term.factors[l]);
      Matrix next(k.rows() * f.rows(), k.cols() * f.cols());
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
          next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = k(i, j) * f;
        }
      }
      k = std::move(next);
    }
    out += k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

Tridiagonal assemble_1d_stiffness(const UnivariateFn& coeff, Eigen::Index n, double h) {
  if (n < 1) throw std::invalid_argument("assemble_1d_stiffness: n must be >= 1");
  // a_mid(i) = a((i + 1/2) h), i = 0..n
  Vector a_mid(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * h;
    a_mid(i) = coeff(x);
    require_positive(a_mid(i), x, "assemble_1d_stiffness");
  }
  const double inv_h2 = 1.0 / (h * h);
  Tridiagonal t;
  t.diag = (a_mid.head(n) + a_mid.tail(n)) * inv_h2;
  t.off = -a_mid.segment(1, n - 1) * inv_h2;
  return t;
}

Diagonal assemble_1d_lumped_mass(const UnivariateFn& coeff, Eigen::Index n, double h) {
  if (n < 1) throw std::invalid_argument("assemble_1d_lumped_mass: n must be >= 1");
  // The hats of all nodes (boundary ones included) sum to one on each element,
  // so the lumped row sum is the Gauss rule applied to a * psi_i.
  const double g = 1.0 / std::sqrt(3.0);
  Diagonal d{Vector::Zero(n)};
  for (Eigen::Index e = 0; e <= n; ++e) {  // element [e h, (e+1) h]
    const double x0 = static_cast<double>(e) * h;
    for (double xi : {-g, g}) {
      const double x = x0 + 0.5 * h * (1.0 + xi);
      const double a = coeff(x);
      require_positive(a, x, "assemble_1d_lumped_mass");
      const double w = 0.5 * h * a;
      const double right_hat = 0.5 * (1.0 + xi);  // hat of node e+1
      if (e >= 1) d.entries(e - 1) += w * (1.0 - right_hat);
      if (e < n) d.entries(e) += w * right_hat;
    }
  }
  return d;
}

KroneckerOperator assemble_stiffness(const SeparableCoefficient& coeff, const GridSpec& grid,
                                     bool fd_normalize) {
  if (coeff.dim() != grid.dim()) throw ShapeError("assemble_stiffness: dimension mismatch");
  const int d = grid.dim();
  std::vector<KroneckerOperator::Term> terms;
  for (int k = 0; k < coeff.rank(); ++k) {
    std::vector<Tridiagonal> stiff;
    std::vector<Diagonal> mass;
    for (int l = 0; l < d; ++l) {
      const Eigen::Index n = grid.n[static_cast<std::size_t>(l)];
      const double h = grid.h(l);
      stiff.push_back(assemble_1d_stiffness(coeff.factor(k, l), n, h));
      Diagonal m = assemble_1d_lumped_mass(coeff.factor(k, l), n, h);
      if (fd_normalize) m.entries /= h;
      mass.push_back(std::move(m));
    }
    for (int l = 0; l < d; ++l) {
      KroneckerOperator::Term term;
      for (int m = 0; m < d; ++m) {
        if (m == l) {
          term.factors.emplace_back(stiff[static_cast<std::size_t>(m)]);
        } else {
          term.factors.emplace_back(mass[static_cast<std::size_t>(m)]);
        }
      }
      terms.push_back(std::move(term));
    }
  }
  return KroneckerOperator(d, std::move(terms));
}

// ---------------------------------------------------------------------------
// Application

LowRankMatrix apply(const KroneckerOperator& op, const LowRankMatrix& x,
                    std::optional<double> eps) {
  if (op.dim() != 2) throw ShapeError("apply: operator is not two-dimensional");
  if (op.size(0) != x.rows() || op.size(1) != x.cols()) {
    throw ShapeError("apply: operator and grid function shapes differ");
  }
  const Eigen::Index r = x.rank();
  const auto nterms = static_cast<Eigen::Index>(op.num_terms());
  Matrix left(x.rows(), nterms * r);
  Matrix right(x.cols(), nterms * r);
  for (Eigen::Index t = 0; t < nterms; ++t) {
    const auto& term = op.terms()[static_cast<std::size_t>(t)];
    left.middleCols(t * r, r) = factor_apply(term.factors[0], x.left());
    right.middleCols(t * r, r) = factor_apply(term.factors[1], x.right());
  }
  LowRankMatrix out(std::move(left), std::move(right));
  if (eps) return truncate(out, *eps);
  return out;
}

CanonicalTensor3 apply(const KroneckerOperator& op, const CanonicalTensor3& x,
                       std::optional<double> eps) {
  if (eps) throw std::invalid_argument("apply: truncation is not available for 3D tensors");
  if (op.dim() != 3) throw ShapeError("apply: operator is not three-dimensional");
  for (int l = 0; l < 3; ++l) {
    if (op.size(l) != x.size(l)) throw ShapeError("apply: operator and tensor shapes differ");
  }
  const Eigen::Index r = x.rank();
  const auto nterms = static_cast<Eigen::Index>(op.num_terms());
  Matrix f[3];
  for (int l = 0; l < 3; ++l) f[l].resize(x.size(l), nterms * r);
  for (Eigen::Index t = 0; t < nterms; ++t) {
    const auto& term = op.terms()[static_cast<std::size_t>(t)];
    for (int l = 0; l < 3; ++l) {
      f[l].middleCols(t * r, r) = factor_apply(term.factors[l], x.factor(l));
    }
  }
  return {std::move(f[0]), std::move(f[1]), std::move(f[2])};
}

LowRankMatrix apply_squared(const KroneckerOperator& op, const LowRankMatrix& x, double eps) {
  return apply(op, apply(op, x, eps), eps);
}

}  // namespace lrpcg
