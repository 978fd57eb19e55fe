#include "kacrice/mc.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace kacrice {

std::string to_string(Status s) {
  switch (s) {
    case Status::Converged:
      return "Converged";
    case Status::RampFailed:
      return "RampFailed";
    case Status::CapReached:
      return "CapReached";
  }
  return "?";
}

void Accumulator::merge(const Accumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const double delta = o.mean_ - mean_;
  mean_ += delta * (nb / n);
  sum_sq_ += o.sum_sq_ + delta * delta * (na * nb / n);
  n_ += o.n_;
}

Estimate Accumulator::estimate() const {
  if (n_ < 2) throw InsufficientSamples("an estimate needs at least two samples");
  const double n = static_cast<double>(n_);
  Estimate e;
  e.value = mean_;
  e.std_error = std::sqrt((sum_sq_ / n) / (n - 1));
  e.n = n_;
  return e;
}

CompiledPoly::CompiledPoly(const Poly& p, const std::vector<std::size_t>& power_offset) {
  for (const auto& [e, c] : p.terms()) {
    Term t{c, static_cast<std::uint32_t>(factors_.size()), 0};
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i] > 0) factors_.push_back(static_cast<std::uint32_t>(power_offset[i] + static_cast<std::size_t>(e[i]) - 1));
    t.end = static_cast<std::uint32_t>(factors_.size());
    terms_.push_back(t);
  }
}

CompiledDecomposition::CompiledDecomposition(const LinearDecomposition& dec) : dim(dec.space.dim()), max_power(dim, 0) {
  std::vector<const Poly*> all;
  for (const auto& g : dec.g) {
    all.push_back(&g.num());
    all.push_back(&g.den());
  }
  all.push_back(&dec.jac_det.num());
  all.push_back(&dec.jac_det.den());
  for (const Poly* p : all)
    for (std::size_t i = 0; i < dim; ++i) max_power[i] = std::max(max_power[i], p->degree_in(i));
  power_offset.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    power_offset[i] = table_size;
    table_size += static_cast<std::size_t>(max_power[i]);
  }
  for (const auto& g : dec.g) {
    g_num.emplace_back(g.num(), power_offset);
    g_den.emplace_back(g.den(), power_offset);
  }
  jac_num = CompiledPoly(dec.jac_det.num(), power_offset);
  jac_den = CompiledPoly(dec.jac_det.den(), power_offset);
}

void CompiledDecomposition::fill_powers(const double* x, double* table) const {
  for (std::size_t i = 0; i < dim; ++i) {
    double* row = table + power_offset[i];
    double v = 1.0;
    for (int e = 0; e < max_power[i]; ++e) {
      v *= x[i];
      row[e] = v;
    }
  }
}

IntegrandSpec make_integrand_spec(const ParametrizedSystem& sys, std::shared_ptr<const LinearDecomposition> dec,
                                  std::shared_ptr<const CompiledDecomposition> compiled, const Box& box,
                                  std::optional<double> sigma) {
  const std::size_t n = sys.space.n();
  if (box.size() != sys.space.m()) throw DimensionError("parameter box has the wrong number of intervals");
  auto law = [&](const Interval& iv) {
    if (!iv.bounded() || !(iv.lo < iv.hi)) throw Error("parameter intervals must be finite with lo < hi");
    return sigma ? Distribution::trunc_normal(iv.lo, iv.hi, iv.center(), *sigma) : Distribution::uniform(iv.lo, iv.hi);
  };
  IntegrandSpec spec;
  for (std::size_t idx : dec->linear) spec.rho_linear.push_back(law(box[idx - n]));
  for (std::size_t idx : dec->rest) spec.rho_rest.push_back(law(box[idx - n]));
  spec.plan = build_domain_plan(sys.domain, sys.resolved_bounds(box));
  spec.bezout = sys.bezout_bound();
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (const auto& eq : sys.equations) {
    for (const auto& [e, c] : eq.terms()) {
      lo = std::min(lo, std::abs(c));
      hi = std::max(hi, std::abs(c));
    }
  }
  spec.coefficient_spread = hi > 0 ? hi / lo : 1.0;
  spec.dec = std::move(dec);
  spec.compiled = std::move(compiled);
  return spec;
}

IntegrandSpec make_integrand_spec(const ParametrizedSystem& sys, const std::vector<std::string>& linear_params,
                                  const Box& box, std::optional<double> sigma) {
  auto dec = std::make_shared<const LinearDecomposition>(decompose_linear(sys, linear_params));
  auto compiled = std::make_shared<const CompiledDecomposition>(*dec);
  return make_integrand_spec(sys, std::move(dec), std::move(compiled), box, sigma);
}

namespace {

constexpr double kTinyDenominator = 1e-300;

/// Per-thread scratch space for integrand evaluation.
class Evaluator {
 public:
  explicit Evaluator(const IntegrandSpec& spec)
      : spec_(spec), c_(*spec.compiled), x_(c_.dim, 0.0), table_(std::max<std::size_t>(c_.table_size, 1)) {}

  /// `u` holds n unit coordinates for t; `kbar` the remaining parameter values.
  double operator()(const double* u, const double* kbar, std::size_t branch, ZeroReason& reason) {
    const std::size_t n = spec_.n();
    const LinearDecomposition& dec = *spec_.dec;
    double weight = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const AxisBranch ax = spec_.plan.axis(branch, i);
      x_[i] = ax.value(u[i]);
      weight *= ax.weight(u[i]);
    }
    for (std::size_t j = 0; j < dec.rest.size(); ++j) x_[dec.rest[j]] = kbar[j];
    c_.fill_powers(x_.data(), table_.data());
    const double* p = table_.data();
    double density = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double den = c_.g_den[i](p);
      if (!(std::abs(den) >= kTinyDenominator)) {
        reason = ZeroReason::Singular;
        return 0.0;
      }
      const double rho = spec_.rho_linear[i].density(c_.g_num[i](p) / den);
      if (rho == 0.0) {
        reason = ZeroReason::Indicator;
        return 0.0;
      }
      density *= rho;
    }
    const double jden = c_.jac_den(p);
    if (!(std::abs(jden) >= kTinyDenominator)) {
      reason = ZeroReason::Singular;
      return 0.0;
    }
    const double q = std::abs(c_.jac_num(p) / jden) * density * weight;
    if (!std::isfinite(q)) {
      reason = ZeroReason::Singular;
      return 0.0;
    }
    reason = ZeroReason::None;
    return q;
  }

 private:
  const IntegrandSpec& spec_;
  const CompiledDecomposition& c_;
  std::vector<double> x_;
  std::vector<double> table_;
};

struct PieceResult {
  Accumulator acc;
  std::uint64_t singular = 0;
  std::uint64_t indicator = 0;
};

struct Piece {
  std::uint64_t begin, end;  // global unit indices
};

}  // namespace

double integrand(const IntegrandSpec& spec, const Eigen::VectorXd& u, const Eigen::VectorXd& kbar, std::size_t branch,
                 ZeroReason* reason) {
  if (static_cast<std::size_t>(u.size()) != spec.n() || static_cast<std::size_t>(kbar.size()) != spec.rest_size())
    throw DimensionError("integrand point has the wrong dimension");
  if (branch >= spec.plan.size()) throw Error("branch index out of range");
  Evaluator eval(spec);
  ZeroReason r;
  const double q = eval(u.data(), kbar.data(), branch, r);
  if (reason) *reason = r;
  return q;
}

void StoppingRule::validate() const {
  if (!(rel_err > 0)) throw Error("relative error target must be positive");
  if (plausible_lo && plausible_hi && *plausible_lo > *plausible_hi)
    throw Error("plausible interval must satisfy lo <= hi");
  if (max_n < 2) throw Error("max N must be at least 2");
  if (!(growth > 1)) throw Error("growth factor must exceed 1");
  if (chunk < 2 || max_batch < 1) throw Error("chunk and batch sizes must be positive");
}

IntegrationResult run_integration(const IntegrandSpec& spec, const StoppingRule& rule, const RunOptions& opts) {
  rule.validate();
  const auto start_time = std::chrono::steady_clock::now();
  if (opts.antithetic) {
    for (std::size_t j = 0; j < spec.rho_rest.size(); ++j)
      if (!spec.rho_rest[j].symmetric())
        throw AsymmetricDistribution("antithetic sampling needs laws symmetric about their interval centres");
  }
  const double lo = rule.plausible_lo.value_or(0.0);
  const double hi = rule.plausible_hi.value_or(static_cast<double>(spec.bezout));
  const std::uint64_t per_unit = opts.antithetic ? 2 : 1;
  const std::uint64_t chunk_units = std::max<std::uint64_t>(1, rule.chunk / per_unit);
  const std::size_t n = spec.n(), r = spec.rest_size();
  const std::uint64_t draws = n + r;
  const std::size_t branches = spec.plan.size();
  const double branch_factor = static_cast<double>(branches);

  auto run_piece = [&](const Piece& piece) {
    PieceResult out;
    const std::uint64_t chunk_index = piece.begin / chunk_units;
    RngStream rng(opts.seed, (opts.run_id << 32) | (chunk_index & 0xffffffffULL));
    rng.seek((piece.begin % chunk_units) * draws);
    Evaluator eval(spec);
    std::vector<double> u(n), ku(r), kv(r), ur(n), kr(r);
    ZeroReason reason;
    auto sample = [&](const double* ut, const double* kunit, std::size_t branch) {
      for (std::size_t j = 0; j < r; ++j) kv[j] = spec.rho_rest[j].quantile(kunit[j]);
      const double q = eval(ut, kv.data(), branch, reason);
      if (reason == ZeroReason::Singular) ++out.singular;
      if (reason == ZeroReason::Indicator) ++out.indicator;
      return q * branch_factor;
    };
    for (std::uint64_t i = piece.begin; i < piece.end; ++i) {
      for (std::size_t k = 0; k < n; ++k) u[k] = rng.next_open01();
      for (std::size_t j = 0; j < r; ++j) ku[j] = rng.next_open01();
      const std::size_t branch = static_cast<std::size_t>(i % branches);
      double q = sample(u.data(), ku.data(), branch);
      if (opts.antithetic) {
        for (std::size_t k = 0; k < n; ++k) ur[k] = 1.0 - u[k];
        for (std::size_t j = 0; j < r; ++j) kr[j] = 1.0 - ku[j];
        q = 0.5 * (q + sample(ur.data(), kr.data(), branch));
      }
      out.acc.accumulate(q);
    }
    return out;
  };

  IntegrationResult result;
  Accumulator total;
  auto run_range = [&](std::uint64_t from, std::uint64_t to) {
    std::vector<Piece> pieces;
    for (std::uint64_t b = from; b < to;) {
      const std::uint64_t e = std::min(to, (b / chunk_units + 1) * chunk_units);
      pieces.push_back({b, e});
      b = e;
    }
    std::vector<PieceResult> results(pieces.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(pieces.size())));
    if (workers == 1) {
      for (std::size_t p = 0; p < pieces.size(); ++p) results[p] = run_piece(pieces[p]);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t p; (p = next.fetch_add(1)) < pieces.size();) results[p] = run_piece(pieces[p]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (const auto& pr : results) {
      total.merge(pr.acc);
      result.singular += pr.singular;
      result.indicator += pr.indicator;
    }
  };

  bool plausible_seen = false;
  std::uint64_t done_units = 0;
  double target = 10;
  Estimate est;
  while (true) {
    const std::uint64_t target_n = std::min<std::uint64_t>(static_cast<std::uint64_t>(target), rule.max_n);
    const std::uint64_t units = std::max<std::uint64_t>(std::max<std::uint64_t>(target_n / per_unit, 2), done_units + 1);
    run_range(done_units, units);
    done_units = units;
    est = total.estimate();
    est.n = done_units * per_unit;
    const bool in_range = est.value >= lo && est.value <= hi;
    plausible_seen = plausible_seen || in_range;
    bool converged = false;
    if (plausible_seen && in_range) {
      if (est.value != 0.0)
        converged = est.std_error < rule.rel_err * std::abs(est.value);
      else
        converged = est.std_error == 0.0 && est.n >= rule.zero_accept_n;
    }
    if (converged) {
      est.status = Status::Converged;
    } else if (est.n + per_unit > rule.max_n) {
      est.status = plausible_seen ? Status::CapReached : Status::RampFailed;
    }
    result.checkpoints.push_back(est);
    if (converged || est.n + per_unit > rule.max_n) break;
    const double batch = std::min(target * (rule.growth - 1), static_cast<double>(rule.max_batch));
    target += std::max(batch, 1.0);
  }
  result.estimate = est;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();

  std::ostringstream w;
  if (spec.coefficient_spread > kScaleDisparityThreshold) {
    w << "scale disparity: equation coefficients span a factor of " << spec.coefficient_spread
      << "; the estimator may need far more samples than the ramp allows";
    result.warnings.push_back(w.str());
    w.str("");
  }
  const std::uint64_t evaluations = est.n;
  if (result.singular > 0 && static_cast<double>(result.singular) > 1e-6 * static_cast<double>(evaluations)) {
    w << "singular samples: " << result.singular << " of " << evaluations
      << " evaluations hit a vanishing denominator; the system may violate the nondegeneracy hypothesis";
    result.warnings.push_back(w.str());
    w.str("");
  }
  if (est.status == Status::RampFailed) {
    w << "ramp failed: the estimate " << est.value << " never entered the plausible interval [" << lo << ", " << hi
      << "] within N = " << est.n;
    result.warnings.push_back(w.str());
  }
  return result;
}

}  // namespace kacrice
