#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "numerics.hpp"

namespace sbacc {

/// Entrywise map f: R -> R lifted to matrices.
///
/// Textual forms accepted by parse(): exp, sin, relu, sigmoid, identity,
/// recip:<c> for 1/(x+c), poly:<c0>,<c1>,...,<cd> for sum c_k x^k.
class TargetFunction {
 public:
  static TargetFunction parse(std::string_view spec) {
    const std::string s(spec);
    if (s == "exp") return {s, [](double x) { return std::exp(x); }};
    if (s == "sin") return {s, [](double x) { return std::sin(x); }};
    if (s == "relu") return {s, [](double x) { return x > 0.0 ? x : 0.0; }};
    if (s == "sigmoid") return {s, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }};
    if (s == "identity") return polynomial({0.0, 1.0}, "identity");
    if (s.rfind("recip:", 0) == 0) {
      const double c = parse_number(s.substr(6), s);
      return {s, [c](double x) { return 1.0 / (x + c); }};
    }
    if (s.rfind("poly:", 0) == 0) {
      std::vector<double> coef;
      std::stringstream ss(s.substr(5));
      std::string item;
      while (std::getline(ss, item, ',')) coef.push_back(parse_number(item, s));
      if (coef.empty()) throw std::invalid_argument("polynomial needs coefficients: " + s);
      return polynomial(std::move(coef), s);
    }
    throw std::invalid_argument("unknown function '" + s +
                                "' (expected exp|sin|relu|sigmoid|identity|recip:c|poly:c0,..)");
  }

  /// sum_k coef[k] x^k
  static TargetFunction polynomial(std::vector<double> coef, std::string name = {}) {
    if (name.empty()) {
      name = "poly:";
      for (std::size_t k = 0; k < coef.size(); ++k) {
        std::ostringstream os;
        os.precision(17);
        os << coef[k];
        name += (k ? "," : "") + os.str();
      }
    }
    std::size_t degree = 0;
    for (std::size_t k = 0; k < coef.size(); ++k)
      if (coef[k] != 0.0) degree = k;
    TargetFunction f{std::move(name), [coef](double x) {
                       double acc = 0.0;
                       for (std::size_t k = coef.size(); k-- > 0;) acc = acc * x + coef[k];
                       return acc;
                     }};
    f.degree_ = degree;
    return f;
  }

  const std::string& name() const noexcept { return name_; }
  std::optional<std::size_t> degree() const noexcept { return degree_; }

  double operator()(double x) const { return fn_(x); }
  Matrix operator()(const Matrix& x) const { return x.unaryExpr(std::cref(fn_)); }

 private:
  TargetFunction(std::string name, std::function<double(double)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}

  static double parse_number(const std::string& text, const std::string& spec) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad number '" + text + "' in function '" + spec + "'");
    }
  }

  std::string name_;
  std::function<double(double)> fn_;
  std::optional<std::size_t> degree_;
};

}  // namespace sbacc
