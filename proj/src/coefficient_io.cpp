#include "lrpcg/coefficient_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace lrpcg {

using nlohmann::json;

namespace {

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::string location(const std::string& source, std::size_t k, std::size_t l) {
  std::ostringstream os;
  os << source << ": factors[" << k << "][" << l << "]";
  return os.str();
}

}  // namespace

UnivariateFn univariate_preset(const std::string& id) {
  using std::numbers::pi;
  if (id == "1") return [](double) { return 1.0; };
  if (id == "x+2") return [](double x) { return x + 2.0; };
  if (id == "5x^2+2") return [](double x) { return 5.0 * x * x + 2.0; };
  if (id == "sin(x)cos(x)+1") return [](double x) { return std::sin(x) * std::cos(x) + 1.0; };
  if (id == "sin(4pi x)+2") return [](double x) { return std::sin(4.0 * pi * x) + 2.0; };
  throw std::invalid_argument("unknown univariate preset '" + id + "'");
}

UnivariateFn interpolate_samples(std::vector<double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("interpolate_samples: need >= 2 samples");
  auto table = std::make_shared<const std::vector<double>>(std::move(samples));
  return [table](double x) {
    const auto& s = *table;
    const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(s.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(pos), s.size() - 2);
    const double t = pos - static_cast<double>(i);
    return (1.0 - t) * s[i] + t * s[i + 1];
  };
}

SeparableCoefficient parse_coefficient(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream msg;
    msg << source << ":" << line << ":" << column << ": " << e.what();
    throw CoefficientFormatError(msg.str(), line, column);
  }
  auto fail = [&](const std::string& what) { throw CoefficientFormatError(source + ": " + what); };
  if (!doc.is_object()) fail("top level must be an object");
  if (!doc.contains("d") || !doc["d"].is_number_integer()) fail("missing integer field 'd'");
  if (!doc.contains("factors") || !doc["factors"].is_array()) fail("missing array 'factors'");
  const int d = doc["d"].get<int>();
  if (d < 1 || d > 3) fail("'d' must be 1, 2 or 3");
  const json& terms = doc["factors"];
  if (terms.empty()) fail("empty factor list");
  if (doc.contains("R")) {
    if (!doc["R"].is_number_integer() || doc["R"].get<std::size_t>() != terms.size()) {
      fail("'R' does not match the number of factor rows");
    }
  }

  std::vector<std::vector<UnivariateFn>> factors;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const json& row = terms[k];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(d)) {
      std::ostringstream msg;
      msg << "factors[" << k << "] must list exactly " << d << " factors";
      fail(msg.str());
    }
    std::vector<UnivariateFn> fs;
    for (std::size_t l = 0; l < row.size(); ++l) {
      const json& f = row[l];
      const std::string where = location(source, k, l);
      if (!f.is_object()) throw CoefficientFormatError(where + ": factor must be an object");
      if (f.contains("samples")) {
        const json& s = f["samples"];
        if (!s.is_array() || s.size() < 2) {
          throw CoefficientFormatError(where + ": 'samples' needs at least two numbers");
        }
        std::vector<double> values;
        for (std::size_t j = 0; j < s.size(); ++j) {
          if (!s[j].is_number()) {
            std::ostringstream msg;
            msg << where << ".samples[" << j << "]: not a number";
            throw CoefficientFormatError(msg.str());
          }
          const double v = s[j].get<double>();
          if (!(v > 0.0) || !std::isfinite(v)) {
            std::ostringstream msg;
            msg << where << ".samples[" << j << "]: non-positive value " << v;
            throw CoefficientError(msg.str());
          }
          values.push_back(v);
        }
        fs.push_back(interpolate_samples(std::move(values)));
      } else if (f.contains("preset")) {
        if (!f["preset"].is_string()) throw CoefficientFormatError(where + ": 'preset' must be a string");
        try {
          fs.push_back(univariate_preset(f["preset"].get<std::string>()));
        } catch (const std::invalid_argument& e) {
          throw CoefficientFormatError(where + ": " + e.what());
        }
      } else {
        throw CoefficientFormatError(where + ": expected 'samples' or 'preset'");
      }
    }
    factors.push_back(std::move(fs));
  }
  return SeparableCoefficient(d, std::move(factors));
}

SeparableCoefficient load_coefficient(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open coefficient file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_coefficient(buf.str(), path);
}

std::string dump_coefficient(const SeparableCoefficient& coeff, int samples) {
  if (samples < 2) throw std::invalid_argument("dump_coefficient: need >= 2 samples");
  json doc;
  doc["d"] = coeff.dim();
  doc["R"] = coeff.rank();
  doc["factors"] = json::array();
  for (int k = 0; k < coeff.rank(); ++k) {
    json row = json::array();
    for (int l = 0; l < coeff.dim(); ++l) {
      std::vector<double> values(static_cast<std::size_t>(samples));
      for (int j = 0; j < samples; ++j) {
        values[static_cast<std::size_t>(j)] =
            coeff.factor(k, l)(static_cast<double>(j) / static_cast<double>(samples - 1));
      }
      json factor;
      factor["samples"] = values;
      row.push_back(std::move(factor));
    }
    doc["factors"].push_back(std::move(row));
  }
  return doc.dump(1);
}

void save_coefficient(const std::string& path, const SeparableCoefficient& coeff, int samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write coefficient file '" + path + "'");
  out << dump_coefficient(coeff, samples) << '\n';
}

}  // namespace lrpcg
