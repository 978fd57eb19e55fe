#include "kacrice/sampling.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace kacrice {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// Standard normal lower and upper tail probabilities.
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double norm_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
// z with norm_cdf(z) = p, and z with norm_sf(z) = q.
double norm_quantile_lower(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2 * p); }
double norm_quantile_upper(double q) { return std::numbers::sqrt2 * boost::math::erfc_inv(2 * q); }

}  // namespace

RngStream::Block RngStream::philox(Block ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t RngStream::next_u64() {
  if (available_ == 0) {
    const Block ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                    static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    buffer_ = philox(ctr, {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++counter_;
    available_ = 2;
  }
  const int slot = 2 - available_;
  --available_;
  return static_cast<std::uint64_t>(buffer_[2 * slot]) | (static_cast<std::uint64_t>(buffer_[2 * slot + 1]) << 32);
}

Distribution::Distribution(Kind kind, double a, double b, double mean, double sd)
    : kind_(kind), a_(a), b_(b), mean_(mean), sd_(sd) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw Error("distribution needs a finite interval a < b");
  inv_width_ = 1.0 / (b - a);
  if (kind == Kind::TruncNormal) {
    if (!(sd > 0) || !std::isfinite(mean)) throw Error("truncated normal needs sd > 0 and a finite mean");
    alpha_ = (a - mean) / sd;
    beta_ = (b - mean) / sd;
    if (alpha_ > 0) {
      upper_tail_ = true;
      pa_ = norm_sf(alpha_);
      pb_ = norm_sf(beta_);
      mass_ = pa_ - pb_;
    } else if (beta_ < 0) {
      pa_ = norm_cdf(alpha_);
      pb_ = norm_cdf(beta_);
      mass_ = pb_ - pa_;
    } else {
      // pa_ = lower tail below alpha, pb_ = upper tail above beta.
      pa_ = norm_cdf(alpha_);
      pb_ = norm_sf(beta_);
      mass_ = (0.5 - pa_) + (0.5 - pb_);
    }
    if (!(mass_ > 0)) throw Error("truncated normal has no mass on its interval");
  }
}

Distribution Distribution::uniform(double a, double b) { return Distribution(Kind::Uniform, a, b, 0, 0); }

Distribution Distribution::trunc_normal(double a, double b, double mean, double sd) {
  return Distribution(Kind::TruncNormal, a, b, mean, sd);
}

double Distribution::quantile(double u) const {
  if (kind_ == Kind::Uniform) return a_ + u * (b_ - a_);
  double z;
  if (upper_tail_) {
    z = norm_quantile_upper(pa_ - u * mass_);
  } else if (beta_ < 0) {
    z = norm_quantile_lower(pa_ + u * mass_);
  } else {
    const double p = pa_ + u * mass_;
    z = p <= 0.5 ? norm_quantile_lower(p) : norm_quantile_upper(pb_ + (1 - u) * mass_);
  }
  return std::clamp(mean_ + sd_ * z, a_, b_);
}

double Distribution::density(double x) const {
  if (!(x >= a_ && x <= b_)) return 0.0;
  if (kind_ == Kind::Uniform) return inv_width_;
  const double z = (x - mean_) / sd_;
  return std::exp(-0.5 * z * z) / (sd_ * std::sqrt(2 * std::numbers::pi) * mass_);
}

bool Distribution::symmetric() const {
  if (kind_ == Kind::Uniform) return true;
  return std::abs(mean_ - (a_ + (b_ - a_) / 2)) <= 1e-12 * (b_ - a_);
}

Eigen::VectorXd reflect(const Eigen::VectorXd& point, const std::vector<Distribution>& axes) {
  if (static_cast<std::size_t>(point.size()) != axes.size()) throw DimensionError("point and box dimensions differ");
  Eigen::VectorXd out(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const auto& d = axes[static_cast<std::size_t>(i)];
    if (!d.symmetric()) throw AsymmetricDistribution("axis " + std::to_string(i) + " is not symmetric about its centre");
    out(i) = (d.lo() + d.hi()) - point(i);
  }
  return out;
}

Eigen::VectorXd reflect(const Eigen::VectorXd& point, const Box& box) {
  if (static_cast<std::size_t>(point.size()) != box.size()) throw DimensionError("point and box dimensions differ");
  Eigen::VectorXd out(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const auto& iv = box[static_cast<std::size_t>(i)];
    out(i) = (iv.lo + iv.hi) - point(i);
  }
  return out;
}

DomainPlan build_domain_plan(const Box& domain, const std::vector<std::optional<double>>& bound_hints) {
  using Map = AxisBranch::Map;
  DomainPlan plan;
  for (std::size_t i = 0; i < domain.size(); ++i) {
    Interval iv = domain[i];
    if (i < bound_hints.size() && bound_hints[i]) {
      const double b = *bound_hints[i];
      iv.lo = std::max(iv.lo, -b);
      iv.hi = std::min(iv.hi, b);
      if (!(iv.lo < iv.hi)) throw Error("bound hint leaves an empty interval on axis " + std::to_string(i));
    }
    std::vector<AxisBranch> choices;
    if (iv.bounded()) {
      choices.push_back({Map::Bounded, iv.lo, iv.hi, 0, 1});
    } else if (std::isfinite(iv.lo)) {
      choices.push_back({Map::Identity, 0, 1, iv.lo, 1});
      choices.push_back({Map::Inverse, 0, 1, iv.lo, 1});
    } else if (std::isfinite(iv.hi)) {
      choices.push_back({Map::Identity, 0, 1, iv.hi, -1});
      choices.push_back({Map::Inverse, 0, 1, iv.hi, -1});
    } else {
      choices.push_back({Map::Inverse, 0, 1, 0, -1});
      choices.push_back({Map::Identity, 0, 1, 0, -1});
      choices.push_back({Map::Identity, 0, 1, 0, 1});
      choices.push_back({Map::Inverse, 0, 1, 0, 1});
    }
    plan.axes.push_back(std::move(choices));
  }
  plan.branches.push_back({});
  for (const auto& choices : plan.axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : plan.branches) {
      for (std::size_t c = 0; c < choices.size(); ++c) {
        auto b = prefix;
        b.push_back(c);
        next.push_back(std::move(b));
      }
    }
    plan.branches = std::move(next);
  }
  return plan;
}

}  // namespace kacrice
