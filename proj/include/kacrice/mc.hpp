#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kacrice/sampling.hpp"
#include "kacrice/system.hpp"

namespace kacrice {

enum class Status { Converged, RampFailed, CapReached };
std::string to_string(Status s);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  Status status = Status::Converged;
};

class NonFiniteSample : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

/// Streaming mean J and centred sum of squares S. Pushing q as sample N:
///   d = q - J;  J += d / N;  S += (N - 1) / N * d^2.
class Accumulator {
 public:
  void accumulate(double q) {
    if (!std::isfinite(q)) throw NonFiniteSample("non-finite integrand value");
    ++n_;
    const double delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    sum_sq_ += static_cast<double>(n_ - 1) / static_cast<double>(n_) * delta * delta;
  }
  /// Chan et al. pairwise combination; the empty accumulator is the identity.
  void merge(const Accumulator& o);
  friend Accumulator merge(Accumulator a, const Accumulator& b) {
    a.merge(b);
    return a;
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double sum_sq() const { return sum_sq_; }
  /// Mean and sqrt((S/N)/(N-1)); needs N >= 2.
  Estimate estimate() const;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double sum_sq_ = 0.0;
};

/// Sparse polynomial flattened for repeated evaluation against a table of
/// precomputed powers of the point coordinates.
class CompiledPoly {
 public:
  CompiledPoly() = default;
  CompiledPoly(const Poly& p, const std::vector<std::size_t>& power_offset);

  double operator()(const double* powers) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
      double v = t.coef;
      for (std::uint32_t f = t.begin; f < t.end; ++f) v *= powers[factors_[f]];
      sum += v;
    }
    return sum;
  }

 private:
  struct Term {
    double coef;
    std::uint32_t begin, end;
  };
  std::vector<Term> terms_;
  std::vector<std::uint32_t> factors_;
};

/// g and det(J_g) compiled over one power table. Built once per
/// decomposition and shared by every box that uses it.
struct CompiledDecomposition {
  explicit CompiledDecomposition(const LinearDecomposition& dec);

  std::size_t dim;
  std::vector<int> max_power;            // per coordinate
  std::vector<std::size_t> power_offset; // start of x_i^1 in the table
  std::size_t table_size = 0;
  std::vector<CompiledPoly> g_num, g_den;
  CompiledPoly jac_num, jac_den;

  /// Fills table with x_i^e for 1 <= e <= max_power[i].
  void fill_powers(const double* x, double* table) const;
};

/// Everything the estimator needs for one parameter box.
struct IntegrandSpec {
  std::shared_ptr<const LinearDecomposition> dec;
  std::shared_ptr<const CompiledDecomposition> compiled;
  std::vector<Distribution> rho_linear;  // densities of the n linear parameters
  std::vector<Distribution> rho_rest;    // sampling laws of the other parameters
  DomainPlan plan;
  long bezout = 1;
  /// max/min absolute coefficient over all equations.
  double coefficient_spread = 1.0;

  std::size_t n() const { return dec->space.n(); }
  std::size_t rest_size() const { return rho_rest.size(); }
};

/// Builds a spec for `box`. Parameters are uniform unless `sigma` is given,
/// in which case each follows a normal with mean at its interval centre and
/// standard deviation sigma, truncated to the interval.
IntegrandSpec make_integrand_spec(const ParametrizedSystem& sys, std::shared_ptr<const LinearDecomposition> dec,
                                  std::shared_ptr<const CompiledDecomposition> compiled, const Box& box,
                                  std::optional<double> sigma = std::nullopt);
IntegrandSpec make_integrand_spec(const ParametrizedSystem& sys, const std::vector<std::string>& linear_params,
                                  const Box& box, std::optional<double> sigma = std::nullopt);

/// Why an integrand evaluation returned zero.
enum class ZeroReason { None, Indicator, Singular };

/// Q at unit coordinates `u` (one per variable, in (0,1)) and remaining
/// parameters `kbar`, on one branch of the domain plan. Not multiplied by
/// the number of branches.
double integrand(const IntegrandSpec& spec, const Eigen::VectorXd& u, const Eigen::VectorXd& kbar, std::size_t branch,
                 ZeroReason* reason = nullptr);

struct StoppingRule {
  double rel_err = 1e-2;
  /// Interval the estimate must enter before the relative-error test applies;
  /// unset means [0, Bezout bound].
  std::optional<double> plausible_lo, plausible_hi;
  std::uint64_t max_n = 1'000'000'000'000ULL;
  double growth = 10.0;
  /// Samples per independent random stream and largest gap between checks.
  std::uint64_t chunk = 100'000;
  std::uint64_t max_batch = 10'000'000;
  /// An estimate of exactly 0 with zero error is accepted after this many samples.
  std::uint64_t zero_accept_n = 1'000'000;

  void validate() const;
};

struct RunOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  bool antithetic = false;
  /// Distinguishes independent runs under one seed, e.g. boxes of a partition.
  std::uint64_t run_id = 0;
};

struct IntegrationResult {
  Estimate estimate;
  std::uint64_t singular = 0;   // samples zeroed by a vanishing denominator
  std::uint64_t indicator = 0;  // samples zeroed because some density was 0
  double seconds = 0.0;
  std::vector<Estimate> checkpoints;
  std::vector<std::string> warnings;
};

/// Adaptive estimate of the expected number of solutions. N grows through
/// 10, 100, ... (steps of at most max_batch) until the estimate is plausible
/// and its relative error is below rule.rel_err, or max_n is reached.
IntegrationResult run_integration(const IntegrandSpec& spec, const StoppingRule& rule, const RunOptions& opts);

/// Threshold on coefficient spread above which a warning is emitted.
inline constexpr double kScaleDisparityThreshold = 1e10;

}  // namespace kacrice
