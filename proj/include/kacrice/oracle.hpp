#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kacrice/mc.hpp"
#include "kacrice/system.hpp"

namespace kacrice {

/// A parameter sample the root counter cannot handle reliably. Such
/// samples lie on a measure-zero set and are redrawn.
class DegenerateSample : public Error {
 public:
  using Error::Error;
};
/// The polynomial vanishes at an endpoint of the counting interval.
class DegenerateAtZero : public DegenerateSample {
 public:
  using DegenerateSample::DegenerateSample;
};
class NotSquarefree : public DegenerateSample {
 public:
  using DegenerateSample::DegenerateSample;
};
class VanishingLeadingCoefficient : public DegenerateSample {
 public:
  using DegenerateSample::DegenerateSample;
};

class NotReducible : public Error {
 public:
  using Error::Error;
};

/// Coefficients below this fraction of the 1-norm count as zero.
inline constexpr long double kSturmZeroTol = 1e-12L;

/// p, p', then negated remainders, each rescaled to unit 1-norm.
/// Coefficients are stored by descending degree.
struct SturmChain {
  std::vector<std::vector<long double>> seq;

  /// Throws VanishingLeadingCoefficient, or NotSquarefree if the chain
  /// ends before reaching a nonzero constant.
  static SturmChain build(const std::vector<double>& coeffs);

  int variations_at(long double x) const;
  /// Limit from the right at 0; uses the lowest nonzero coefficients.
  int variations_at_zero_plus() const;
  int variations_at_infinity() const;
  /// Distinct roots in (a, b); a == 0 means 0+, b may be +inf. Throws
  /// DegenerateAtZero if the polynomial vanishes at a finite endpoint.
  int count(long double a, long double b) const;
  long double evaluate(long double x) const;
};

/// Distinct real roots in (0, inf) of the polynomial with descending
/// coefficients `coeffs`.
int sturm_count_positive(const std::vector<double>& coeffs);

/// Roots in (a, b) to near machine precision, ascending.
std::vector<double> isolate_roots(const SturmChain& chain, long double a, long double b);

struct Substitution {
  std::size_t var;
  Rational value;  // in the variables not yet eliminated and the parameters
};

struct UnivariateReduction {
  std::size_t target = 0;
  std::vector<Substitution> substitutions;  // in elimination order
  Poly final;                               // depends on the target and parameters only
  /// Denominators cleared along the way; each has constant sign on the
  /// positive orthant and is dropped from root counting.
  std::vector<Poly> cleared_factors;
  /// Coefficient of target^j in `final`, for j = 0..degree.
  std::vector<Poly> coefficients;

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
};

/// Eliminates n-1 variables through equations of degree 1 in the eliminated
/// variable. Prefers a numeric pivot coefficient, then one free of
/// variables, then any with coefficients of one sign; ties go to the
/// higher variable index. Throws NotReducible when no such chain exists.
UnivariateReduction reduce_to_univariate(const ParametrizedSystem& sys);

struct OracleOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::uint64_t run_id = 0;
  std::optional<double> sigma;  // truncated normal parameters when set
  std::uint64_t chunk = 100'000;
};

struct OracleResult {
  Estimate estimate;
  std::uint64_t rejected = 0;  // degenerate samples that were redrawn
  double seconds = 0.0;
};

/// Number of solutions of sys in its domain at one parameter point.
/// Throws DegenerateSample.
int count_solutions(const ParametrizedSystem& sys, const UnivariateReduction& red, const Eigen::VectorXd& params);

/// Average solution count over n parameter samples drawn from `box`.
OracleResult direct_expectation(const ParametrizedSystem& sys, const UnivariateReduction& red, const Box& box,
                                std::uint64_t n, const OracleOptions& opts = {});

}  // namespace kacrice
