#include "kacrice/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "kacrice/sampling.hpp"

namespace kacrice {

namespace {

using Coeffs = std::vector<long double>;

// Remainder coefficients below this (relative to a unit-norm dividend) are
// rounding noise.
constexpr long double kRemainderTol = 1e-15L;
constexpr long double kInf = std::numeric_limits<long double>::infinity();

long double norm1(const Coeffs& c) {
  long double s = 0;
  for (auto x : c) s += std::fabs(x);
  return s;
}

void normalize(Coeffs& c) {
  const long double s = norm1(c);
  for (auto& x : c) x /= s;
}

void trim_leading(Coeffs& c, long double tol) {
  std::size_t k = 0;
  while (k < c.size() && std::fabs(c[k]) <= tol) ++k;
  c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k));
}

/// Remainder of a / b, both descending and b with nonzero leading term.
Coeffs remainder(Coeffs a, const Coeffs& b) {
  while (a.size() >= b.size()) {
    const long double q = a[0] / b[0];
    for (std::size_t i = 0; i < b.size(); ++i) a[i] -= q * b[i];
    a.erase(a.begin());
  }
  return a;
}

int sign(long double v) { return (v > 0) - (v < 0); }

int count_variations(const std::vector<int>& signs) {
  int v = 0, last = 0;
  for (int s : signs) {
    if (s == 0) continue;
    if (last != 0 && s != last) ++v;
    last = s;
  }
  return v;
}

long double horner(const Coeffs& c, long double x) {
  long double v = 0;
  for (auto a : c) v = v * x + a;
  return v;
}

int sign_at_zero_plus(const Coeffs& c) {
  for (auto it = c.rbegin(); it != c.rend(); ++it)
    if (std::fabs(*it) > kSturmZeroTol) return sign(*it);
  return 0;
}

}  // namespace

SturmChain SturmChain::build(const std::vector<double>& coeffs) {
  Coeffs p(coeffs.begin(), coeffs.end());
  const long double s = norm1(p);
  if (p.empty() || s == 0) throw VanishingLeadingCoefficient("zero polynomial");
  if (std::fabs(p[0]) <= kSturmZeroTol * s) throw VanishingLeadingCoefficient("leading coefficient vanishes");
  normalize(p);
  SturmChain chain;
  chain.seq.push_back(p);
  if (p.size() == 1) return chain;
  Coeffs d(p.size() - 1);
  const auto deg = static_cast<long double>(p.size() - 1);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) d[i] = p[i] * (deg - static_cast<long double>(i));
  normalize(d);
  chain.seq.push_back(d);
  while (chain.seq.back().size() > 1) {
    const Coeffs& a = chain.seq[chain.seq.size() - 2];
    const Coeffs& b = chain.seq.back();
    Coeffs r = remainder(a, b);
    trim_leading(r, kRemainderTol);
    if (r.empty()) throw NotSquarefree("polynomial has a repeated root");
    for (auto& x : r) x = -x;
    normalize(r);
    chain.seq.push_back(std::move(r));
  }
  return chain;
}

long double SturmChain::evaluate(long double x) const { return horner(seq.front(), x); }

int SturmChain::variations_at(long double x) const {
  if (x == 0) return variations_at_zero_plus();
  if (std::isinf(x)) {
    std::vector<int> s;
    for (const auto& c : seq) {
      const bool odd = (c.size() - 1) % 2 == 1;
      s.push_back(sign(c[0]) * (x < 0 && odd ? -1 : 1));
    }
    return count_variations(s);
  }
  std::vector<int> s;
  for (const auto& c : seq) s.push_back(sign(horner(c, x)));
  return count_variations(s);
}

int SturmChain::variations_at_zero_plus() const {
  std::vector<int> s;
  for (const auto& c : seq) s.push_back(sign_at_zero_plus(c));
  return count_variations(s);
}

int SturmChain::variations_at_infinity() const { return variations_at(kInf); }

int SturmChain::count(long double a, long double b) const {
  auto check = [&](long double x) {
    if (std::isinf(x)) return;
    const Coeffs& p = seq.front();
    if (x == 0) {
      if (std::fabs(p.back()) <= kSturmZeroTol) throw DegenerateAtZero("root at 0");
      return;
    }
    long double scale = 0, power = 1;
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
      scale += std::fabs(*it) * power;
      power *= std::fabs(x);
    }
    if (std::fabs(horner(p, x)) <= kSturmZeroTol * scale) throw DegenerateAtZero("root at an interval endpoint");
  };
  check(a);
  check(b);
  return variations_at(a) - variations_at(b);
}

int sturm_count_positive(const std::vector<double>& coeffs) { return SturmChain::build(coeffs).count(0, kInf); }

std::vector<double> isolate_roots(const SturmChain& chain, long double a, long double b) {
  const Coeffs& p = chain.seq.front();
  long double bound = 1;
  for (std::size_t i = 1; i < p.size(); ++i) bound = std::max(bound, 1 + std::fabs(p[i] / p[0]));
  a = std::max(a, -bound);
  b = std::min(b, bound);
  std::vector<double> roots;
  if (!(a < b)) return roots;

  auto sign_at = [&](long double x) { return x == 0 ? sign_at_zero_plus(p) : sign(horner(p, x)); };
  struct Piece {
    long double lo, hi;
    int n, depth;
  };
  std::vector<Piece> stack{{a, b, chain.variations_at(a) - chain.variations_at(b), 0}};
  while (!stack.empty()) {
    Piece piece = stack.back();
    stack.pop_back();
    if (piece.n <= 0) continue;
    if (piece.n == 1) {
      long double lo = piece.lo, hi = piece.hi;
      const int s_lo = sign_at(lo);
      for (int it = 0; it < 400; ++it) {
        const long double mid = lo + (hi - lo) / 2;
        if (mid <= lo || mid >= hi) break;
        const int s = sign(horner(p, mid));
        if (s == 0) {
          lo = hi = mid;
          break;
        }
        (s == s_lo ? lo : hi) = mid;
      }
      roots.push_back(static_cast<double>(lo + (hi - lo) / 2));
      continue;
    }
    if (piece.depth > 200) throw NotSquarefree("roots could not be separated");
    const long double mid = piece.lo + (piece.hi - piece.lo) / 2;
    const int v_mid = chain.variations_at(mid);
    // Pushed in reverse so roots come out ascending.
    stack.push_back({mid, piece.hi, v_mid - chain.variations_at(piece.hi), piece.depth + 1});
    stack.push_back({piece.lo, mid, chain.variations_at(piece.lo) - v_mid, piece.depth + 1});
  }
  return roots;
}

namespace {

bool same_sign_coefficients(const Poly& p) {
  bool pos = false, neg = false;
  for (const auto& [e, c] : p.terms()) (c > 0 ? pos : neg) = true;
  return !(pos && neg) && (pos || neg);
}

/// True when every indeterminate of p is nonnegative over the domain and box.
bool nonnegative_support(const Poly& p, const ParametrizedSystem& sys) {
  const std::size_t n = sys.space.n();
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (!p.depends_on(i)) continue;
    const double lo = i < n ? sys.domain[i].lo : sys.param_box[i - n].lo;
    if (lo < 0) return false;
  }
  return true;
}

}  // namespace

UnivariateReduction reduce_to_univariate(const ParametrizedSystem& sys) {
  const std::size_t n = sys.space.n();
  std::vector<Poly> eqs = sys.equations;
  std::vector<bool> eq_active(n, true), var_active(n, true);
  UnivariateReduction red;

  auto strip_content = [&](Poly& p) {
    const Monomial m = p.monomial_content();
    if (std::any_of(m.begin(), m.end(), [](int e) { return e > 0; })) {
      red.cleared_factors.push_back(Poly::monomial(m, 1.0));
      p = p.divide_monomial(m);
    }
  };

  for (std::size_t step = 0; step + 1 < n; ++step) {
    struct Pick {
      int rank;
      std::size_t eq, var;
    };
    std::optional<Pick> best;
    for (std::size_t e = 0; e < n; ++e) {
      if (!eq_active[e]) continue;
      for (std::size_t v = 0; v < n; ++v) {
        if (!var_active[v] || eqs[e].degree_in(v) != 1) continue;
        const Poly a = eqs[e].coefficient_of(v, 1);
        int rank;
        if (a.is_constant()) {
          rank = 0;
        } else if (!same_sign_coefficients(a) || !nonnegative_support(a, sys)) {
          continue;
        } else {
          rank = a.degree_in_first(n) == 0 ? 1 : 2;
        }
        if (!best || rank < best->rank || (rank == best->rank && v > best->var)) best = Pick{rank, e, v};
      }
    }
    if (!best) throw NotReducible("no equation is linear in a remaining variable with a sign-definite coefficient");
    const Poly a = eqs[best->eq].coefficient_of(best->var, 1);
    const Poly b = eqs[best->eq].coefficient_of(best->var, 0);
    const Rational value = a.is_constant() ? Rational(b * (-1.0 / a.constant_term())) : Rational(-b, a);
    red.substitutions.push_back({best->var, value});
    eq_active[best->eq] = false;
    var_active[best->var] = false;
    for (std::size_t e = 0; e < n; ++e) {
      if (!eq_active[e]) continue;
      const Rational r = substitute(eqs[e], best->var, value);
      if (!r.den().is_constant()) red.cleared_factors.push_back(r.den());
      eqs[e] = r.num();
      if (eqs[e].is_zero()) throw NotReducible("equations are dependent after elimination");
      strip_content(eqs[e]);
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    if (var_active[v]) red.target = v;
  for (std::size_t e = 0; e < n; ++e)
    if (eq_active[e]) red.final = eqs[e];
  if (n == 1) strip_content(red.final);
  if (!red.final.depends_on(red.target)) throw NotReducible("final equation does not involve the remaining variable");
  for (std::size_t v = 0; v < n; ++v)
    if (v != red.target && red.final.depends_on(v)) throw NotReducible("final equation is not univariate");
  for (int j = 0; j <= red.final.degree_in(red.target); ++j) red.coefficients.push_back(red.final.coefficient_of(red.target, j));
  return red;
}

int count_solutions(const ParametrizedSystem& sys, const UnivariateReduction& red, const Eigen::VectorXd& params) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.space.dim()));
  x.tail(static_cast<Eigen::Index>(sys.space.m())) = params;
  std::vector<double> coeffs;
  for (auto it = red.coefficients.rbegin(); it != red.coefficients.rend(); ++it) coeffs.push_back(it->evaluate(x));
  const SturmChain chain = SturmChain::build(coeffs);
  const Interval& dom = sys.domain[red.target];
  if (red.substitutions.empty()) return chain.count(dom.lo, dom.hi);

  chain.count(dom.lo, dom.hi);  // endpoint degeneracy check
  int count = 0;
  for (double r : isolate_roots(chain, dom.lo, dom.hi)) {
    x(static_cast<Eigen::Index>(red.target)) = r;
    bool inside = true;
    for (auto it = red.substitutions.rbegin(); it != red.substitutions.rend() && inside; ++it) {
      const double v = it->value.evaluate(x);
      inside = std::isfinite(v) && v > sys.domain[it->var].lo && v < sys.domain[it->var].hi;
      x(static_cast<Eigen::Index>(it->var)) = v;
    }
    if (inside) ++count;
  }
  return count;
}

OracleResult direct_expectation(const ParametrizedSystem& sys, const UnivariateReduction& red, const Box& box,
                                std::uint64_t n, const OracleOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t m = sys.space.m();
  if (box.size() != m) throw DimensionError("parameter box has the wrong number of intervals");
  if (n < 2) throw InsufficientSamples("need at least two samples");
  std::vector<Distribution> laws;
  for (const auto& iv : box)
    laws.push_back(opts.sigma ? Distribution::trunc_normal(iv.lo, iv.hi, iv.lo + (iv.hi - iv.lo) / 2, *opts.sigma)
                              : Distribution::uniform(iv.lo, iv.hi));

  const std::uint64_t chunks = (n + opts.chunk - 1) / opts.chunk;
  std::vector<Accumulator> acc(chunks);
  std::vector<std::uint64_t> rejected(chunks, 0);
  auto run_chunk = [&](std::uint64_t c) {
    // Top bit keeps these streams disjoint from the integrator's.
    RngStream rng(opts.seed, (1ULL << 63) | (opts.run_id << 32) | (c & 0xffffffffULL));
    const std::uint64_t count = std::min(opts.chunk, n - c * opts.chunk);
    Eigen::VectorXd k(static_cast<Eigen::Index>(m));
    for (std::uint64_t s = 0; s < count; ++s) {
      for (int attempt = 0;; ++attempt) {
        if (attempt > 1000) throw Error("parameter samples are persistently degenerate");
        for (std::size_t i = 0; i < m; ++i) k(static_cast<Eigen::Index>(i)) = laws[i].quantile(rng.next_open01());
        try {
          acc[c].accumulate(count_solutions(sys, red, k));
          break;
        } catch (const DegenerateSample&) {
          ++rejected[c];
        }
      }
    }
  };
  const unsigned workers = std::max(1u, opts.workers);
  if (workers == 1 || chunks == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          for (std::uint64_t c; (c = next++) < chunks;) run_chunk(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  Accumulator total;
  OracleResult out;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    total.merge(acc[c]);
    out.rejected += rejected[c];
  }
  out.estimate = total.estimate();
  out.estimate.status = Status::Converged;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace kacrice
