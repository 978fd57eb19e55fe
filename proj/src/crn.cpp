#include "kacrice/crn.hpp"

#include <cctype>
#include <fstream>
#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace kacrice {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

using Complex = std::vector<std::pair<std::string, int>>;

/// Parses "2 X1 + X2" (or "0"); `col0` is the 0-based column of s in its line.
Complex parse_complex(std::string_view s, std::size_t line, std::size_t col0) {
  Complex out;
  if (trim(s) == "0") return out;
  std::size_t i = 0;
  while (true) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) throw ParseError("expected a species term", line, col0 + i + 1);
    int coef = 1;
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      const std::size_t start = i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      coef = std::stoi(std::string(s.substr(start, i - start)));
      if (coef <= 0) throw ParseError("stoichiometric coefficient must be positive", line, col0 + start + 1);
      while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == '*')) ++i;
    }
    if (i == s.size() || !is_ident_start(s[i]))
      throw ParseError("malformed stoichiometry: expected a species name", line, col0 + i + 1);
    const std::size_t start = i;
    while (i < s.size() && is_ident_char(s[i])) ++i;
    out.emplace_back(std::string(s.substr(start, i - start)), coef);
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) break;
    if (s[i] != '+') throw ParseError("malformed stoichiometry: expected '+'", line, col0 + i + 1);
    ++i;
  }
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

Rat gcd_of(Rat a, Rat b) {
  using boost::multiprecision::cpp_int;
  cpp_int x = abs(numerator(a)), y = abs(numerator(b));
  while (y != 0) {
    cpp_int t = x % y;
    x = y;
    y = t;
  }
  return Rat(x);
}

Rat lcm_of(const Rat& a, const Rat& b) {
  using boost::multiprecision::cpp_int;
  cpp_int x = abs(numerator(a)), y = abs(numerator(b));
  cpp_int g = x, h = y;
  while (h != 0) {
    cpp_int t = g % h;
    g = h;
    h = t;
  }
  return Rat(x / g * y);
}

}  // namespace

ReactionNetwork parse_network(std::string_view text) {
  std::optional<std::vector<std::string>> fixed_species;
  struct Raw {
    Complex lhs, rhs;
    std::string rate;
    std::size_t line;
  };
  std::vector<Raw> raws;
  std::istringstream in{std::string(text)};
  std::string raw_line;
  std::size_t lineno = 0;
  while (std::getline(in, raw_line)) {
    ++lineno;
    std::string_view line(raw_line);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const std::string head = trim(line);
    if (head.rfind("species:", 0) == 0) {
      std::istringstream words(head.substr(8));
      std::vector<std::string> names;
      for (std::string w; words >> w;) names.push_back(w);
      fixed_species = names;
      continue;
    }
    const std::size_t arrow = line.find("->");
    if (arrow == std::string_view::npos) throw ParseError("expected '->'", lineno, 1);
    const std::size_t semi = line.find(';', arrow);
    if (semi == std::string_view::npos) throw ParseError("expected '; <rate label>'", lineno, line.size() + 1);
    Raw r;
    r.lhs = parse_complex(line.substr(0, arrow), lineno, 0);
    r.rhs = parse_complex(line.substr(arrow + 2, semi - arrow - 2), lineno, arrow + 2);
    r.rate = trim(line.substr(semi + 1));
    if (r.rate.empty() || !is_ident_start(r.rate[0]) ||
        !std::all_of(r.rate.begin(), r.rate.end(), [](char c) { return is_ident_char(c); }))
      throw ParseError("malformed rate label '" + r.rate + "'", lineno, semi + 2);
    r.line = lineno;
    raws.push_back(std::move(r));
  }
  if (raws.empty()) throw ParseError("network has no reactions");

  ReactionNetwork net;
  std::map<std::string, std::size_t> index;
  if (fixed_species) {
    for (const auto& s : *fixed_species) {
      if (!index.emplace(s, net.species.size()).second) throw ParseError("duplicate species '" + s + "'");
      net.species.push_back(s);
    }
  } else {
    for (const auto& r : raws)
      for (const Complex* c : {&r.lhs, &r.rhs})
        for (const auto& [name, coef] : *c)
          if (index.emplace(name, net.species.size()).second) net.species.push_back(name);
  }
  std::set<std::string> labels;
  for (const auto& r : raws) {
    if (!labels.insert(r.rate).second) throw ParseError("duplicate rate label '" + r.rate + "'", r.line, 0);
    Reaction rx;
    rx.reactant.assign(net.species.size(), 0);
    rx.product.assign(net.species.size(), 0);
    for (auto [c, side] : {std::pair{&r.lhs, &rx.reactant}, std::pair{&r.rhs, &rx.product}}) {
      for (const auto& [name, coef] : *c) {
        auto it = index.find(name);
        if (it == index.end()) throw ParseError("species '" + name + "' is not listed in 'species:'", r.line, 0);
        (*side)[it->second] += coef;
      }
    }
    if (rx.reactant == rx.product) throw ParseError("reaction has no net change", r.line, 0);
    rx.rate = r.rate;
    net.reactions.push_back(std::move(rx));
  }
  return net;
}

ReactionNetwork read_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

IntMatrix stoichiometric_matrix(const ReactionNetwork& net) {
  IntMatrix N(static_cast<Eigen::Index>(net.n_species()), static_cast<Eigen::Index>(net.n_reactions()));
  for (std::size_t j = 0; j < net.n_reactions(); ++j)
    for (std::size_t i = 0; i < net.n_species(); ++i)
      N(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          net.reactions[j].product[i] - net.reactions[j].reactant[i];
  return N;
}

RatMatrix to_rational(const IntMatrix& m) {
  RatMatrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = Rat(m(i, j));
  return out;
}

std::vector<Eigen::Index> rref(RatMatrix& m) {
  std::vector<Eigen::Index> pivots;
  Eigen::Index row = 0;
  for (Eigen::Index col = 0; col < m.cols() && row < m.rows(); ++col) {
    Eigen::Index p = row;
    while (p < m.rows() && m(p, col) == 0) ++p;
    if (p == m.rows()) continue;
    if (p != row) m.row(p).swap(m.row(row));
    const Rat inv = Rat(1) / m(row, col);
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(row, j) *= inv;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i == row || m(i, col) == 0) continue;
      const Rat f = m(i, col);
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) -= f * m(row, j);
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

Eigen::Index rank(RatMatrix m) { return static_cast<Eigen::Index>(rref(m).size()); }

RatMatrix inverse(const RatMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("inverse needs a square matrix");
  const Eigen::Index n = m.rows();
  RatMatrix aug(n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      aug(i, j) = m(i, j);
      aug(i, n + j) = Rat(i == j ? 1 : 0);
    }
  auto piv = rref(aug);
  if (static_cast<Eigen::Index>(piv.size()) < n || (n > 0 && piv[static_cast<std::size_t>(n - 1)] >= n))
    throw Error("matrix is singular");
  return aug.rightCols(n);
}

RatMatrix multiply(const RatMatrix& a, const RatMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matrix product dimensions differ");
  RatMatrix out(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      Rat acc = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

namespace {

/// Left-kernel basis read off the row echelon form of N^T.
RatMatrix echelon_kernel(const IntMatrix& N) {
  RatMatrix a = to_rational(N).transpose();
  const std::vector<Eigen::Index> piv = rref(a);
  std::vector<bool> is_pivot(static_cast<std::size_t>(a.cols()), false);
  for (auto p : piv) is_pivot[static_cast<std::size_t>(p)] = true;
  std::vector<std::vector<Rat>> rows;
  for (Eigen::Index f = 0; f < a.cols(); ++f) {
    if (is_pivot[static_cast<std::size_t>(f)]) continue;
    std::vector<Rat> v(static_cast<std::size_t>(a.cols()), Rat(0));
    v[static_cast<std::size_t>(f)] = 1;
    for (std::size_t r = 0; r < piv.size(); ++r) v[static_cast<std::size_t>(piv[r])] = -a(static_cast<Eigen::Index>(r), f);
    // Scale to coprime integers with a positive leading entry.
    Rat den(1), g(0);
    for (const auto& x : v)
      if (x != 0) den = lcm_of(den, Rat(denominator(x)));
    for (auto& x : v) {
      x *= den;
      if (x != 0) g = g == 0 ? abs(x) : gcd_of(g, x);
    }
    Rat lead = 0;
    for (const auto& x : v)
      if (x != 0) {
        lead = x;
        break;
      }
    if (lead < 0) g = -g;
    for (auto& x : v) x /= g;
    rows.push_back(std::move(v));
  }
  RatMatrix W(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return W;
}

/// Minimal nonnegative left-kernel vectors of N by Farkas elimination.
/// Returns nullopt if the candidate set grows past `limit`.
std::optional<std::vector<std::vector<long long>>> semiflows(const IntMatrix& N, std::size_t limit = 5000) {
  const std::size_t n = static_cast<std::size_t>(N.rows()), r = static_cast<std::size_t>(N.cols());
  // Each row is [N-part (r) | identity-part (n)].
  std::vector<std::vector<long long>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<long long> v(r + n, 0);
    for (std::size_t j = 0; j < r; ++j) v[j] = N(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    v[r + i] = 1;
    rows.push_back(std::move(v));
  }
  auto normalize = [](std::vector<long long>& v) {
    long long g = 0;
    for (auto x : v) g = std::gcd(g, std::llabs(x));
    if (g > 1)
      for (auto& x : v) x /= g;
  };
  for (std::size_t j = 0; j < r; ++j) {
    std::vector<std::vector<long long>> next;
    for (const auto& v : rows)
      if (v[j] == 0) next.push_back(v);
    for (const auto& a : rows) {
      if (a[j] <= 0) continue;
      for (const auto& b : rows) {
        if (b[j] >= 0) continue;
        std::vector<long long> c(r + n);
        for (std::size_t k = 0; k < r + n; ++k) c[k] = -b[j] * a[k] + a[j] * b[k];
        normalize(c);
        next.push_back(std::move(c));
      }
    }
    // Drop candidates whose support strictly contains another's.
    auto support_le = [&](const std::vector<long long>& a, const std::vector<long long>& b) {
      for (std::size_t k = r; k < r + n; ++k)
        if (a[k] != 0 && b[k] == 0) return false;
      return true;
    };
    std::vector<std::vector<long long>> kept;
    for (std::size_t a = 0; a < next.size(); ++a) {
      bool minimal = true;
      for (std::size_t b = 0; b < next.size() && minimal; ++b) {
        if (a == b || !support_le(next[b], next[a])) continue;
        const bool equal = support_le(next[a], next[b]);
        if (!equal || b < a) minimal = false;  // equal supports keep the first copy
      }
      if (minimal) kept.push_back(next[a]);
    }
    rows = std::move(kept);
    if (rows.size() > limit) return std::nullopt;
  }
  std::vector<std::vector<long long>> out;
  for (const auto& v : rows) out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(r), v.end());
  return out;
}

}  // namespace

RatMatrix conservation_basis(const IntMatrix& N) {
  RatMatrix fallback = echelon_kernel(N);
  const Eigen::Index d = fallback.rows();
  auto flows = semiflows(N);
  if (!flows || d == 0) return fallback;
  // Order by first species involved, then by support size.
  auto first = [](const std::vector<long long>& v) {
    return static_cast<std::size_t>(std::find_if(v.begin(), v.end(), [](long long x) { return x != 0; }) - v.begin());
  };
  auto support = [](const std::vector<long long>& v) { return std::count_if(v.begin(), v.end(), [](long long x) { return x != 0; }); };
  std::stable_sort(flows->begin(), flows->end(), [&](const auto& a, const auto& b) {
    if (first(a) != first(b)) return first(a) < first(b);
    return support(a) < support(b);
  });
  RatMatrix W(0, N.rows());
  for (const auto& v : *flows) {
    RatMatrix trial(W.rows() + 1, N.rows());
    trial.topRows(W.rows()) = W;
    for (std::size_t k = 0; k < v.size(); ++k) trial(W.rows(), static_cast<Eigen::Index>(k)) = Rat(v[k]);
    if (rank(trial) == trial.rows()) W = trial;
    if (W.rows() == d) return W;
  }
  return fallback;
}

VarSpace network_space(const ReactionNetwork& net, std::size_t n_conservation) {
  std::vector<std::string> vars, params;
  for (const auto& s : net.species) vars.push_back(lower(s));
  for (const auto& r : net.reactions) params.push_back(r.rate);
  for (std::size_t j = 0; j < n_conservation; ++j) params.push_back("T" + std::to_string(j + 1));
  return VarSpace(vars, params);
}

namespace {

/// k_j x^{reactant_j} over `space`.
Poly rate_monomial(const ReactionNetwork& net, const VarSpace& space, std::size_t j) {
  Monomial e(space.dim(), 0);
  for (std::size_t i = 0; i < net.n_species(); ++i) e[i] = net.reactions[j].reactant[i];
  e[space.n() + j] = 1;
  return Poly::monomial(std::move(e), 1.0);
}

}  // namespace

std::vector<Poly> mass_action_rhs(const ReactionNetwork& net) {
  const IntMatrix N = stoichiometric_matrix(net);
  const VarSpace space = network_space(net, static_cast<std::size_t>(conservation_basis(N).rows()));
  std::vector<Poly> F(net.n_species(), Poly(space.dim()));
  for (std::size_t j = 0; j < net.n_reactions(); ++j) {
    const Poly m = rate_monomial(net, space, j);
    for (std::size_t i = 0; i < net.n_species(); ++i) {
      const long long c = N(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (c != 0) F[i] += m * static_cast<double>(c);
    }
  }
  return F;
}

ReducedSystem reduced_system(const ReactionNetwork& net, std::optional<std::vector<std::size_t>> columns,
                             std::optional<Box> param_box) {
  const IntMatrix Nint = stoichiometric_matrix(net);
  const RatMatrix N = to_rational(Nint);
  const RatMatrix W = conservation_basis(Nint);
  const std::size_t n = net.n_species();
  const std::size_t d = static_cast<std::size_t>(W.rows());
  const std::size_t s = n - d;  // rank of N
  const VarSpace space = network_space(net, d);

  ReducedSystem out;
  out.W = W;
  // Rows: first-found linearly independent set.
  RatMatrix chosen(0, N.cols());
  for (std::size_t i = 0; i < n && out.rows.size() < s; ++i) {
    RatMatrix trial(chosen.rows() + 1, N.cols());
    trial.topRows(chosen.rows()) = chosen;
    trial.row(chosen.rows()) = N.row(static_cast<Eigen::Index>(i));
    if (rank(trial) == trial.rows()) {
      chosen = trial;
      out.rows.push_back(i);
    }
  }
  auto restrict_cols = [&](const std::vector<std::size_t>& cols) {
    RatMatrix sub(chosen.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = chosen.col(static_cast<Eigen::Index>(cols[c]));
    return sub;
  };
  if (columns) {
    if (columns->size() != s) throw NoFullRankColumnSet("need exactly " + std::to_string(s) + " reaction columns");
    for (auto c : *columns)
      if (c >= net.n_reactions()) throw NoFullRankColumnSet("reaction column out of range");
    if (rank(restrict_cols(*columns)) != static_cast<Eigen::Index>(s))
      throw NoFullRankColumnSet("chosen reaction columns do not give an invertible submatrix");
    out.columns = *columns;
  } else {
    for (std::size_t j = 0; j < net.n_reactions() && out.columns.size() < s; ++j) {
      std::vector<std::size_t> trial = out.columns;
      trial.push_back(j);
      if (rank(restrict_cols(trial)) == static_cast<Eigen::Index>(trial.size())) out.columns = trial;
    }
    if (out.columns.size() != s) throw NoFullRankColumnSet("no invertible set of reaction columns");
  }

  const RatMatrix M = multiply(inverse(restrict_cols(out.columns)), chosen);
  ParametrizedSystem& sys = out.sys;
  sys.space = space;
  for (std::size_t j = 0; j < s; ++j) {
    Poly g(space.dim());
    for (std::size_t l = 0; l < net.n_reactions(); ++l) {
      const Rat& c = M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
      if (c != 0) g += rate_monomial(net, space, l) * static_cast<double>(c);
    }
    sys.equations.push_back(std::move(g));
    out.linear_params.push_back(net.reactions[out.columns[j]].rate);
  }
  for (std::size_t j = 0; j < d; ++j) {
    Poly g = Poly::variable(space.dim(), space.n() + net.n_reactions() + j) * -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Rat& c = W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (c != 0) g += Poly::variable(space.dim(), i) * static_cast<double>(c);
    }
    sys.equations.push_back(std::move(g));
    out.linear_params.push_back("T" + std::to_string(j + 1));
  }
  sys.domain.assign(n, Interval{0.0, std::numeric_limits<double>::infinity()});
  if (param_box) {
    if (param_box->size() != space.m()) throw DimensionError("parameter box has the wrong number of intervals");
    sys.param_box = *param_box;
  } else {
    sys.param_box.assign(space.m(), Interval{0.0, 1.0});
  }
  // x_i < T_j whenever law j has nonnegative entries and coefficient 1 on x_i.
  std::vector<BoundHint> bounds(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      bool nonneg = true;
      for (Eigen::Index c = 0; c < W.cols(); ++c) nonneg = nonneg && W(static_cast<Eigen::Index>(j), c) >= 0;
      if (nonneg && W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) == 1) {
        bounds[i].kind = BoundHint::Kind::ParamUpper;
        bounds[i].param = net.n_reactions() + j;
        any = true;
        break;
      }
    }
  }
  if (any) sys.bounds = bounds;
  sys.linear_params = out.linear_params;
  sys.validate();
  return out;
}

}  // namespace kacrice
