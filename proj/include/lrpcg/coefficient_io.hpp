#pragma once

#include "lrpcg/kronecker.hpp"

#include <stdexcept>
#include <string>

namespace lrpcg {

/// Malformed coefficient document.  `line`/`column` are 1-based, 0 when unknown.
class CoefficientFormatError : public std::runtime_error {
 public:
  CoefficientFormatError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Named univariate factors usable as {"preset": id}: "1", "x+2", "5x^2+2",
/// "sin(x)cos(x)+1", "sin(4pi x)+2".
UnivariateFn univariate_preset(const std::string& id);

/// Piecewise linear interpolant of equispaced samples on [0,1] (at least two).
UnivariateFn interpolate_samples(std::vector<double> samples);

/// Document layout:
///   {"d": 2, "R": 3, "factors": [[{"samples": [...]}, {"preset": "x+2"}], ...]}
/// with factors[k][l] the factor of term k in dimension l.
SeparableCoefficient parse_coefficient(const std::string& text,
                                       const std::string& source = "<string>");
SeparableCoefficient load_coefficient(const std::string& path);

/// Samples every factor at `samples` equispaced points of [0,1].
std::string dump_coefficient(const SeparableCoefficient& coeff, int samples = 1024);
void save_coefficient(const std::string& path, const SeparableCoefficient& coeff,
                      int samples = 1024);

}  // namespace lrpcg
