#include <doctest.h>

#include <random>

#include "kacrice/mc.hpp"

using namespace kacrice;

namespace {

std::string data(const std::string& name) { return std::string(KACRICE_DATA_DIR) + "/" + name; }

IntegrandSpec spec_for(const std::string& file, std::optional<double> sigma = std::nullopt) {
  ParametrizedSystem sys = read_system_file(data(file));
  return make_integrand_spec(sys, sys.linear_params, sys.param_box, sigma);
}

StoppingRule fixed_n(std::uint64_t n) {
  StoppingRule rule;
  rule.rel_err = 1e-12;
  rule.max_n = n;
  return rule;
}

}  // namespace

TEST_CASE("accumulate and estimate") {
  Accumulator a;
  a.accumulate(2);
  a.accumulate(4);
  CHECK(a.count() == 2);
  CHECK(a.mean() == 3.0);
  CHECK(a.sum_sq() == 2.0);
  Estimate e = a.estimate();
  CHECK(e.value == 3.0);
  CHECK(e.std_error == 1.0);

  Accumulator one;
  one.accumulate(7.5);
  CHECK(one.mean() == 7.5);
  CHECK(one.sum_sq() == 0.0);
  CHECK_THROWS_AS(one.estimate(), InsufficientSamples);
  CHECK_THROWS_AS(Accumulator().estimate(), InsufficientSamples);

  Accumulator ones;
  for (int i = 0; i < 3; ++i) ones.accumulate(1);
  CHECK(ones.estimate().value == 1.0);
  CHECK(ones.estimate().std_error == 0.0);

  CHECK_THROWS_AS(a.accumulate(std::numeric_limits<double>::quiet_NaN()), NonFiniteSample);
  CHECK_THROWS_AS(a.accumulate(std::numeric_limits<double>::infinity()), NonFiniteSample);
}

TEST_CASE("merge") {
  Accumulator x;
  x.accumulate(1.5);
  x.accumulate(-0.25);
  Accumulator m = merge(Accumulator(), x);
  CHECK(m.count() == x.count());
  CHECK(m.mean() == x.mean());
  CHECK(m.sum_sq() == x.sum_sq());
  m = merge(x, Accumulator());
  CHECK(m.mean() == x.mean());

  Accumulator a, b, seq;
  a.accumulate(2);
  b.accumulate(4);
  seq.accumulate(2);
  seq.accumulate(4);
  Accumulator ab = merge(a, b);
  CHECK(ab.count() == 2);
  CHECK(ab.mean() == seq.mean());
  CHECK(ab.sum_sq() == seq.sum_sq());
}

TEST_CASE("property: Welford and merge equal two-pass statistics") {
  std::mt19937_64 gen(99);
  std::lognormal_distribution<double> heavy(0.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> q(20000);
    for (auto& v : q) v = heavy(gen) - 3.0;
    Accumulator seq, lo, hi;
    for (std::size_t i = 0; i < q.size(); ++i) {
      seq.accumulate(q[i]);
      (i < q.size() / 2 ? lo : hi).accumulate(q[i]);
    }
    long double mean = 0;
    for (double v : q) mean += v;
    mean /= q.size();
    long double ss = 0;
    for (double v : q) ss += (v - mean) * (v - mean);
    CHECK(seq.mean() == doctest::Approx(static_cast<double>(mean)).epsilon(1e-10));
    CHECK(seq.sum_sq() == doctest::Approx(static_cast<double>(ss)).epsilon(1e-10));
    Accumulator m = merge(lo, hi);
    CHECK(m.count() == seq.count());
    CHECK(m.mean() == doctest::Approx(seq.mean()).epsilon(1e-10));
    CHECK(m.sum_sq() == doctest::Approx(seq.sum_sq()).epsilon(1e-10));
  }
}

TEST_CASE("integrand values") {
  IntegrandSpec ex13 = spec_for("ex13.sys");
  REQUIRE(ex13.plan.size() == 2);
  Eigen::VectorXd u(1), k(1);
  u << 0.5;
  k << 0.5;
  CHECK(integrand(ex13, u, k, 0) == doctest::Approx(0.5));
  // Branch 1 maps u = 0.25 to t = 4, where k2 * t = 2 is outside [0,1].
  u << 0.25;
  ZeroReason why;
  CHECK(integrand(ex13, u, k, 1, &why) == 0.0);
  CHECK(why == ZeroReason::Indicator);
  // On branch 1, u = 0.75 gives t = 4/3, weight 16/9 and k2 * t = 2/3.
  u << 0.75;
  CHECK(integrand(ex13, u, k, 1) == doctest::Approx(0.5 * 16.0 / 9.0));

  IntegrandSpec ex14 = spec_for("ex14.sys");
  Eigen::VectorXd t(2), k3(1);
  t << 0.5, 0.5;
  k3 << 0.5;
  CHECK(integrand(ex14, t, k3, 0) == doctest::Approx(0.125));

  // Singular point: g has t1^2 t2 in the denominator.
  IntegrandSpec joshi = spec_for("joshi.sys");
  Eigen::VectorXd z(2), kb(3);
  z << 0.0, 0.5;
  kb << 1, 100, 50;
  CHECK(integrand(joshi, z, kb, 0, &why) == 0.0);
  CHECK(why == ZeroReason::Singular);
  CHECK_THROWS_AS(integrand(joshi, z, Eigen::VectorXd(2), 0), DimensionError);
}

TEST_CASE("run_integration: unit-square example converges to 1/6") {
  IntegrandSpec spec = spec_for("ex14.sys");
  IntegrationResult r = run_integration(spec, StoppingRule{}, RunOptions{});
  CHECK(r.estimate.status == Status::Converged);
  CHECK(std::abs(r.estimate.value - 1.0 / 6.0) <= 3 * r.estimate.std_error);
  CHECK(r.estimate.std_error < 1e-2 * r.estimate.value);
  CHECK(r.singular == 0);
}

TEST_CASE("run_integration: determinism and worker invariance") {
  IntegrandSpec spec = spec_for("joshi.sys");
  StoppingRule rule = fixed_n(450'000);
  RunOptions one{17, 1, false, 0}, three{17, 3, false, 0};
  IntegrationResult a = run_integration(spec, rule, one);
  IntegrationResult b = run_integration(spec, rule, one);
  IntegrationResult c = run_integration(spec, rule, three);
  CHECK(a.estimate.n == 450'000);
  CHECK(a.estimate.status == Status::CapReached);
  CHECK(a.estimate.value == b.estimate.value);
  CHECK(a.estimate.value == c.estimate.value);
  CHECK(a.estimate.std_error == c.estimate.std_error);
  CHECK(a.estimate.n == c.estimate.n);
  RunOptions other{18, 1, false, 0};
  CHECK(run_integration(spec, rule, other).estimate.value != a.estimate.value);
  RunOptions shifted{17, 1, false, 5};
  CHECK(run_integration(spec, rule, shifted).estimate.value != a.estimate.value);
}

TEST_CASE("run_integration: antithetic agrees with simple sampling") {
  IntegrandSpec spec = spec_for("ex13.sys");
  StoppingRule rule = fixed_n(2'000'000);
  IntegrationResult simple = run_integration(spec, rule, RunOptions{5, 1, false, 0});
  IntegrationResult anti = run_integration(spec, rule, RunOptions{6, 1, true, 0});
  CHECK(anti.estimate.n == 2'000'000);
  const double combined = std::hypot(simple.estimate.std_error, anti.estimate.std_error);
  CHECK(std::abs(simple.estimate.value - anti.estimate.value) <= 3 * combined);
  CHECK(std::abs(anti.estimate.value - 1.0) <= 3 * anti.estimate.std_error);

  IntegrandSpec skew = spec;
  skew.rho_rest = {Distribution::trunc_normal(0, 1, 0.3, 0.2)};
  CHECK_THROWS_AS(run_integration(skew, rule, RunOptions{5, 1, true, 0}), AsymmetricDistribution);
}

TEST_CASE("run_integration: statuses") {
  IntegrandSpec spec = spec_for("ex14.sys");
  StoppingRule ramp;
  ramp.plausible_lo = 2.0;
  ramp.plausible_hi = 3.0;
  ramp.max_n = 100'000;
  IntegrationResult r = run_integration(spec, ramp, RunOptions{});
  CHECK(r.estimate.status == Status::RampFailed);
  CHECK(r.estimate.n == 100'000);
  CHECK_FALSE(r.warnings.empty());
  // Checkpoints follow 10, 100, ... and stop at the cap.
  REQUIRE(r.checkpoints.size() == 5);
  CHECK(r.checkpoints[0].n == 10);
  CHECK(r.checkpoints[4].n == 100'000);

  StoppingRule cap = fixed_n(1000);
  CHECK(run_integration(spec, cap, RunOptions{}).estimate.status == Status::CapReached);

  // A box where no parameter gives a root: the estimate is exactly 0.
  ParametrizedSystem sys = read_system_file(data("ex14.sys"));
  IntegrandSpec empty = make_integrand_spec(sys, sys.linear_params, {{2, 3}, {0, 1}, {0, 1}});
  IntegrationResult z = run_integration(empty, StoppingRule{}, RunOptions{});
  CHECK(z.estimate.status == Status::Converged);
  CHECK(z.estimate.value == 0.0);
  CHECK(z.estimate.n == 1'000'000);
}

TEST_CASE("property: singular samples are rare on the corpus") {
  for (const char* file : {"ex13.sys", "ex14.sys", "joshi.sys", "hk2.sys", "hk8.sys", "degree5.sys", "dhk_ones.sys"}) {
    IntegrandSpec spec = spec_for(file);
    IntegrationResult r = run_integration(spec, fixed_n(200'000), RunOptions{});
    CAPTURE(file);
    CHECK(static_cast<double>(r.singular) < 1e-6 * static_cast<double>(r.estimate.n) + 1);
  }
}

TEST_CASE("scale disparity is reported") {
  IntegrandSpec spec = spec_for("dhk_slice.sys");
  CHECK(spec.coefficient_spread > kScaleDisparityThreshold);
  IntegrationResult r = run_integration(spec, fixed_n(10'000), RunOptions{});
  bool found = false;
  for (const auto& w : r.warnings) found = found || w.find("scale disparity") != std::string::npos;
  CHECK(found);
  CHECK(spec_for("hk2.sys").coefficient_spread < kScaleDisparityThreshold);
}
