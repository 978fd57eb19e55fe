#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "kacrice/system.hpp"

namespace kacrice {

/// Philox4x32-10 counter-based generator. The 128-bit counter is split into a
/// 64-bit stream id (high words) and a 64-bit draw index (low words); the key
/// is the seed. Streams with different ids never overlap.
class RngStream {
 public:
  using Block = std::array<std::uint32_t, 4>;

  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  static Block philox(Block counter, std::array<std::uint32_t, 2> key);

  std::uint64_t next_u64();
  /// Uniform on the odd multiples of 2^-53 in (0,1): one draw per value,
  /// never 0 or 1, and 1 - u is exact and again on the lattice.
  double next_open01() { return static_cast<double>((next_u64() >> 11) | 1u) * 0x1.0p-53; }
  /// Positions the stream at its `index`-th 64-bit output.
  void seek(std::uint64_t index) {
    counter_ = index / 2;
    available_ = 0;
    if (index % 2 != 0) {
      next_u64();
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int available_ = 0;
};

/// Per-parameter sampling law on a finite interval.
class Distribution {
 public:
  enum class Kind { Uniform, TruncNormal };

  static Distribution uniform(double a, double b);
  static Distribution trunc_normal(double a, double b, double mean, double sd);

  Kind kind() const { return kind_; }
  double lo() const { return a_; }
  double hi() const { return b_; }
  double mean() const { return mean_; }
  double sd() const { return sd_; }

  /// Maps u in (0,1) through the inverse CDF.
  double quantile(double u) const;
  double density(double x) const;
  double sample(RngStream& rng) const { return quantile(rng.next_open01()); }
  /// True when the density is symmetric about the interval centre.
  bool symmetric() const;

 private:
  Distribution(Kind kind, double a, double b, double mean, double sd);

  Kind kind_;
  double a_, b_, mean_, sd_;
  // Truncated normal: standardized bounds and the Gaussian mass of [a,b],
  // kept in whichever tail is numerically safer.
  double alpha_ = 0, beta_ = 0, mass_ = 1;
  bool upper_tail_ = false;
  double pa_ = 0, pb_ = 0;
  double inv_width_ = 0;
};

class AsymmetricDistribution : public Error {
 public:
  using Error::Error;
};

/// Reflection through the centre of the box: 2c - x, with c per axis.
/// Throws AsymmetricDistribution if some axis law is not centre-symmetric.
Eigen::VectorXd reflect(const Eigen::VectorXd& point, const std::vector<Distribution>& axes);
Eigen::VectorXd reflect(const Eigen::VectorXd& point, const Box& box);

/// How one variable axis is sampled: uniformly on a bounded interval, or on
/// the unit segment x in (0,1) mapped to t = offset + sign * (x or 1/x).
struct AxisBranch {
  enum class Map { Bounded, Identity, Inverse };
  Map map = Map::Bounded;
  double lo = 0, hi = 1;     // Bounded
  double offset = 0;         // Identity / Inverse
  double sign = 1;           // +1 or -1

  /// Variable value and weight (volume factor / Jacobian of the map) for
  /// a unit coordinate u in (0,1).
  double value(double u) const {
    switch (map) {
      case Map::Bounded:
        return lo + u * (hi - lo);
      case Map::Identity:
        return offset + sign * u;
      case Map::Inverse:
        return offset + sign / u;
    }
    return 0;
  }
  double weight(double u) const {
    switch (map) {
      case Map::Bounded:
        return hi - lo;
      case Map::Identity:
        return 1.0;
      case Map::Inverse:
        return 1.0 / (u * u);
    }
    return 0;
  }
};

/// Splits the variable domain into integrable pieces over the unit cube.
/// `branches` enumerates the Cartesian product of the per-axis choices.
struct DomainPlan {
  std::vector<std::vector<AxisBranch>> axes;   // per variable: 1, 2 or 4 choices
  std::vector<std::vector<std::size_t>> branches;  // each: one choice index per axis

  std::size_t size() const { return branches.size(); }
  AxisBranch axis(std::size_t branch, std::size_t var) const { return axes[var][branches[branch][var]]; }
};

/// Builds the plan for a domain box. An axis that is bounded, or carries a
/// finite bound hint b (meaning roots satisfy |t| < b), is sampled uniformly;
/// half-lines use {x, 1/x} and the whole line {-1/x, -x, x, 1/x}.
DomainPlan build_domain_plan(const Box& domain, const std::vector<std::optional<double>>& bound_hints = {});

}  // namespace kacrice
