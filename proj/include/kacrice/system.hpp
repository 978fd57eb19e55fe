#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kacrice/polynomial.hpp"

namespace kacrice {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  double center() const { return lo + (hi - lo) / 2; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Cartesian product of intervals.
using Box = std::vector<Interval>;

/// Optional finite bound on the positive roots along one variable axis:
/// either a number or "the upper end of parameter p's interval".
struct BoundHint {
  enum class Kind { None, Value, ParamUpper };
  Kind kind = Kind::None;
  double value = 0.0;
  std::size_t param = 0;  // parameter index (0-based among parameters)

  /// Resolves against a parameter box; nullopt when there is no hint.
  std::optional<double> resolve(const Box& param_box) const {
    switch (kind) {
      case Kind::Value:
        return value;
      case Kind::ParamUpper:
        return param_box.at(param).hi;
      case Kind::None:
        break;
    }
    return std::nullopt;
  }
};

/// n polynomial equations in n variables and m parameters, with the domain
/// box A (variables) and parameter box B.
struct ParametrizedSystem {
  VarSpace space;
  std::vector<Poly> equations;
  Box domain;
  Box param_box;
  std::vector<BoundHint> bounds;  // empty, or one per variable
  std::vector<std::string> linear_params;  // optional default choice

  void validate() const;
  std::vector<std::optional<double>> resolved_bounds(const Box& param_box) const;
  /// Product over equations of the total degree in the variables.
  long bezout_bound() const;
};

/// Reads the line-oriented system format:
///   vars: t1 t2
///   params: k1 k2 k3
///   domain: (0,inf) (0,1)
///   parambox: [0,1] [0,1] [0,1]
///   bounds: k3 -            (optional)
///   linear: k1 k2           (optional)
///   eq: <polynomial>        (one per variable)
/// Lines starting with '#' are comments.
ParametrizedSystem parse_system(std::string_view text);
ParametrizedSystem read_system_file(const std::string& path);
std::string write_system(const ParametrizedSystem& sys);

/// Realization of every equation i as h_i * k_{L(i)} + q_i where h_i and q_i
/// are free of all the chosen linear parameters; g_i = -q_i / h_i.
struct LinearDecomposition {
  VarSpace space;
  std::vector<std::size_t> linear;  // indices into the monomial vector, one per equation
  std::vector<std::size_t> rest;    // indices of the remaining parameters
  std::vector<Poly> h;
  std::vector<Poly> q;
  std::vector<Rational> g;
  Rational jac_det;
};

class DecompositionError : public Error {
 public:
  enum class Kind { NotLinearInChosenParam, CrossLinearParam, BadParameterList };

  DecompositionError(Kind kind, std::size_t equation, std::string param, const std::string& what)
      : Error(what), kind_(kind), equation_(equation), param_(std::move(param)) {}

  Kind kind() const { return kind_; }
  std::size_t equation() const { return equation_; }
  const std::string& param() const { return param_; }

 private:
  Kind kind_;
  std::size_t equation_;
  std::string param_;
};

LinearDecomposition decompose_linear(const ParametrizedSystem& sys, const std::vector<std::string>& linear_params);

/// Symbolic determinant of the matrix (d g_i / d t_j), rows over a shared
/// denominator, by Laplace expansion with memoized minors.
Rational jacobian_det(const LinearDecomposition& dec);

/// Determinant of a square matrix of polynomials.
Poly polynomial_det(const std::vector<std::vector<Poly>>& matrix);

}  // namespace kacrice
