#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kacrice/error.hpp"

namespace kacrice {

/// Names of the n variables t and the m parameters k of a system. A monomial
/// over the space stores exponents for the variables first, then for the
/// parameters, so exponent index i < n refers to t_i and n + j to k_j.
class VarSpace {
 public:
  VarSpace() = default;
  VarSpace(std::vector<std::string> t_names, std::vector<std::string> k_names);

  std::size_t n() const { return n_; }
  std::size_t m() const { return names_.size() - n_; }
  std::size_t dim() const { return names_.size(); }

  std::vector<std::string> t_names() const { return {names_.begin(), names_.begin() + n_}; }
  std::vector<std::string> k_names() const { return {names_.begin() + n_, names_.end()}; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Index of a name in the exponent vector; throws if unknown.
  std::size_t index(std::string_view name) const;
  /// Index of a parameter name among the parameters (0-based, not offset by n).
  std::size_t param_index(std::string_view name) const;
  bool is_variable(std::size_t index) const { return index < n_; }

  bool operator==(const VarSpace&) const = default;

 private:
  std::vector<std::string> names_;
  std::size_t n_ = 0;
};

using Monomial = std::vector<int>;

inline int total_degree(const Monomial& e) {
  int d = 0;
  for (int x : e) d += x;
  return d;
}

/// Graded lexicographic order: total degree first, then lexicographic.
struct GradedLex {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    return a < b;
  }
};

/// Integer power by repeated squaring; 0^0 = 1.
template <typename Scalar>
Scalar ipow(Scalar base, int exp) {
  Scalar result(1);
  while (exp > 0) {
    if (exp & 1) result *= base;
    base *= base;
    exp >>= 1;
  }
  return result;
}

/// Sparse multivariate polynomial over a fixed number of indeterminates.
/// Zero coefficients are never stored.
template <typename Scalar>
class Polynomial {
 public:
  using Terms = std::map<Monomial, Scalar, GradedLex>;

  Polynomial() = default;
  explicit Polynomial(std::size_t dim) : dim_(dim) {}

  static Polynomial constant(std::size_t dim, Scalar c) {
    Polynomial p(dim);
    p.add_term(Monomial(dim, 0), c);
    return p;
  }
  static Polynomial variable(std::size_t dim, std::size_t index, int power = 1) {
    Monomial e(dim, 0);
    e.at(index) = power;
    Polynomial p(dim);
    p.add_term(std::move(e), Scalar(1));
    return p;
  }
  static Polynomial monomial(Monomial e, Scalar c) {
    Polynomial p(e.size());
    p.add_term(std::move(e), c);
    return p;
  }

  std::size_t dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const {
    return terms_.empty() || (terms_.size() == 1 && kacrice::total_degree(terms_.begin()->first) == 0);
  }
  Scalar constant_term() const {
    auto it = terms_.find(Monomial(dim_, 0));
    return it == terms_.end() ? Scalar(0) : it->second;
  }

  void add_term(Monomial e, Scalar c) {
    if (e.size() != dim_) throw DimensionError("monomial length does not match polynomial dimension");
    if (c == Scalar(0)) return;
    auto [it, inserted] = terms_.try_emplace(std::move(e), c);
    if (!inserted) {
      it->second += c;
      if (it->second == Scalar(0)) terms_.erase(it);
    }
  }

  int total_degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, kacrice::total_degree(e));
    return d;
  }
  int degree_in(std::size_t index) const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e.at(index));
    return d;
  }
  /// Total degree counting only the indeterminates with index < count.
  int degree_in_first(std::size_t count) const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
      int s = 0;
      for (std::size_t i = 0; i < count; ++i) s += e[i];
      d = std::max(d, s);
    }
    return d;
  }
  bool depends_on(std::size_t index) const { return degree_in(index) > 0; }

  /// Coefficient of x_index^power, as a polynomial free of x_index.
  Polynomial coefficient_of(std::size_t index, int power) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_) {
      if (e[index] != power) continue;
      Monomial f = e;
      f[index] = 0;
      out.add_term(std::move(f), c);
    }
    return out;
  }

  /// Largest monomial dividing every term (all zeros for the zero polynomial).
  Monomial monomial_content() const {
    if (terms_.empty()) return Monomial(dim_, 0);
    Monomial g = terms_.begin()->first;
    for (const auto& [e, c] : terms_)
      for (std::size_t i = 0; i < dim_; ++i) g[i] = std::min(g[i], e[i]);
    return g;
  }
  /// Exact division by a monomial dividing every term.
  Polynomial divide_monomial(const Monomial& m) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_) {
      Monomial f = e;
      for (std::size_t i = 0; i < dim_; ++i) {
        f[i] -= m[i];
        if (f[i] < 0) throw Error("monomial does not divide polynomial");
      }
      out.terms_.emplace(std::move(f), c);
    }
    return out;
  }

  Scalar max_abs_coefficient() const {
    Scalar r(0);
    for (const auto& [e, c] : terms_) r = std::max<Scalar>(r, std::abs(c));
    return r;
  }

  Polynomial derivative(std::size_t index) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_) {
      if (e[index] == 0) continue;
      Monomial f = e;
      f[index] -= 1;
      out.add_term(std::move(f), c * Scalar(e[index]));
    }
    return out;
  }

  template <typename Derived>
  Scalar evaluate(const Eigen::DenseBase<Derived>& x) const {
    if (static_cast<std::size_t>(x.size()) != dim_) throw DimensionError("evaluation point has wrong dimension");
    Scalar sum(0);
    for (const auto& [e, c] : terms_) {
      Scalar v = c;
      for (std::size_t i = 0; i < dim_; ++i)
        if (e[i] != 0) v *= ipow<Scalar>(x(static_cast<Eigen::Index>(i)), e[i]);
      sum += v;
    }
    return sum;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  Polynomial& operator*=(Scalar s) {
    if (s == Scalar(0)) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second *= s;
      it = it->second == Scalar(0) ? terms_.erase(it) : std::next(it);
    }
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, Scalar s) { return a *= s; }
  friend Polynomial operator*(Scalar s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= Scalar(-1); }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_dim(b);
    Polynomial out(a.dim_);
    Monomial e(a.dim_);
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        for (std::size_t i = 0; i < a.dim_; ++i) e[i] = ea[i] + eb[i];
        out.add_term(e, ca * cb);
      }
    }
    return out;
  }

  Polynomial pow(int k) const {
    Polynomial result = constant(dim_, Scalar(1));
    Polynomial base = *this;
    while (k > 0) {
      if (k & 1) result = result * base;
      k >>= 1;
      if (k > 0) base = base * base;
    }
    return result;
  }

  bool operator==(const Polynomial& o) const { return dim_ == o.dim_ && terms_ == o.terms_; }

 private:
  void check_dim(const Polynomial& o) const {
    if (o.dim_ != dim_) throw DimensionError("polynomial dimensions differ");
  }

  std::size_t dim_ = 0;
  Terms terms_;
};

/// Quotient of two polynomials. Never reduced to lowest terms beyond removal
/// of a common monomial factor; equality is meant to be checked by evaluation.
template <typename Scalar>
class RationalFunction {
 public:
  using Poly = Polynomial<Scalar>;

  RationalFunction() = default;
  explicit RationalFunction(Poly num) : num_(std::move(num)), den_(Poly::constant(num_.dim(), Scalar(1))) {}
  RationalFunction(Poly num, Poly den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw Error("rational function with zero denominator");
    if (num_.dim() != den_.dim()) throw DimensionError("numerator and denominator dimensions differ");
  }

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }
  std::size_t dim() const { return num_.dim(); }

  /// Removes the largest common monomial factor of numerator and denominator.
  RationalFunction cancel_monomials() const {
    if (num_.is_zero()) return RationalFunction(num_, Poly::constant(dim(), Scalar(1)));
    Monomial a = num_.monomial_content(), b = den_.monomial_content();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::min(a[i], b[i]);
    return RationalFunction(num_.divide_monomial(a), den_.divide_monomial(a));
  }

  RationalFunction derivative(std::size_t index) const {
    Poly dn = num_.derivative(index);
    Poly dd = den_.derivative(index);
    if (dd.is_zero()) return RationalFunction(dn, den_);
    return RationalFunction(dn * den_ - num_ * dd, den_ * den_).cancel_monomials();
  }

  template <typename Derived>
  Scalar evaluate(const Eigen::DenseBase<Derived>& x) const {
    return num_.evaluate(x) / den_.evaluate(x);
  }

  friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b) {
    if (a.den_ == b.den_) return RationalFunction(a.num_ + b.num_, a.den_);
    return RationalFunction(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend RationalFunction operator-(const RationalFunction& a) { return RationalFunction(-a.num_, a.den_); }
  friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b) { return a + (-b); }
  friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    return RationalFunction(a.num_ * b.num_, a.den_ * b.den_);
  }
  friend RationalFunction operator/(const RationalFunction& a, const RationalFunction& b) {
    return RationalFunction(a.num_ * b.den_, a.den_ * b.num_);
  }

 private:
  Poly num_;
  Poly den_;
};

/// Replaces x_index in p by r and clears the common denominator r.den^deg,
/// where deg is the degree of p in x_index.
template <typename Scalar>
RationalFunction<Scalar> substitute(const Polynomial<Scalar>& p, std::size_t index,
                                    const RationalFunction<Scalar>& r) {
  using Poly = Polynomial<Scalar>;
  const int deg = p.degree_in(index);
  if (deg == 0) return RationalFunction<Scalar>(p);
  std::vector<Poly> num_pow{Poly::constant(p.dim(), Scalar(1))};
  std::vector<Poly> den_pow{Poly::constant(p.dim(), Scalar(1))};
  for (int d = 1; d <= deg; ++d) {
    num_pow.push_back(num_pow.back() * r.num());
    den_pow.push_back(den_pow.back() * r.den());
  }
  Poly out(p.dim());
  for (int d = 0; d <= deg; ++d) {
    Poly c = p.coefficient_of(index, d);
    if (c.is_zero()) continue;
    out += c * num_pow[d] * den_pow[deg - d];
  }
  return RationalFunction<Scalar>(std::move(out), den_pow[deg]);
}

using Poly = Polynomial<double>;
using Rational = RationalFunction<double>;

/// Canonical text form: terms in descending graded-lex order, coefficients in
/// shortest round-trip decimal form.
std::string to_string(const Poly& p, const VarSpace& space);
std::string to_string(const Rational& r, const VarSpace& space);

/// Parses a polynomial expression over `space`. Accepts sums and products of
/// numbers and names, `^` with non-negative integer exponents, parentheses,
/// and division by constant subexpressions.
Poly parse_polynomial(std::string_view text, const VarSpace& space);

}  // namespace kacrice
