#include "kacrice/system.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace kacrice {

void ParametrizedSystem::validate() const {
  if (equations.size() != space.n()) throw Error("number of equations must equal the number of variables");
  if (domain.size() != space.n()) throw Error("domain must have one interval per variable");
  if (param_box.size() != space.m()) throw Error("parameter box must have one interval per parameter");
  for (const auto& eq : equations)
    if (eq.dim() != space.dim()) throw DimensionError("equation does not belong to the variable space");
  for (const auto& iv : domain)
    if (!(iv.lo < iv.hi)) throw Error("domain intervals must satisfy lo < hi");
  for (const auto& iv : param_box)
    if (!(iv.lo < iv.hi) || !iv.bounded()) throw Error("parameter intervals must be finite with lo < hi");
  if (!bounds.empty() && bounds.size() != space.n()) throw Error("bounds must have one entry per variable");
}

std::vector<std::optional<double>> ParametrizedSystem::resolved_bounds(const Box& box) const {
  std::vector<std::optional<double>> out(space.n());
  for (std::size_t i = 0; i < bounds.size(); ++i) out[i] = bounds[i].resolve(box);
  return out;
}

long ParametrizedSystem::bezout_bound() const {
  long b = 1;
  for (const auto& eq : equations) b *= std::max(1, eq.degree_in_first(space.n()));
  return b;
}

namespace {

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double parse_endpoint(std::string_view s, bool allow_inf, std::size_t line, std::size_t col) {
  std::string t(s);
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  if (t == "inf" || t == "+inf" || t == "-inf") {
    if (!allow_inf) throw ParseError("infinite endpoints are only allowed in the domain", line, col);
    return t == "-inf" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  }
  double v = 0;
  const char* first = t.data();
  if (!t.empty() && t.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ParseError("malformed interval endpoint '" + t + "'", line, col);
  return v;
}

/// Parses "(a,b) [c,d] ..." starting at column offset `col0` of the line.
Box parse_intervals(std::string_view s, bool allow_inf, std::size_t line, std::size_t col0) {
  Box out;
  std::size_t i = 0;
  while (true) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) break;
    if (s[i] != '(' && s[i] != '[') throw ParseError("expected '(' or '['", line, col0 + i + 1);
    const std::size_t open = i;
    const std::size_t comma = s.find(',', i);
    const std::size_t close = s.find_first_of(")]", i);
    if (comma == std::string_view::npos || close == std::string_view::npos || comma > close)
      throw ParseError("malformed interval", line, col0 + open + 1);
    Interval iv{parse_endpoint(s.substr(open + 1, comma - open - 1), allow_inf, line, col0 + open + 2),
                parse_endpoint(s.substr(comma + 1, close - comma - 1), allow_inf, line, col0 + comma + 2)};
    if (!(iv.lo < iv.hi)) throw ParseError("interval needs lo < hi", line, col0 + open + 1);
    out.push_back(iv);
    i = close + 1;
  }
  return out;
}

std::string format_endpoint(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ParametrizedSystem parse_system(std::string_view text) {
  std::vector<std::string> vars, params, bound_words, linear;
  std::optional<std::vector<std::string>> seen_vars, seen_params;
  Box domain, box;
  bool have_domain = false, have_box = false, have_bounds = false;
  std::vector<std::pair<std::string, std::size_t>> eq_lines;  // text, line number
  std::vector<std::size_t> eq_cols;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line(raw);
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    if (start == line.size() || line[start] == '#') continue;
    const std::size_t colon = line.find(':', start);
    if (colon == std::string_view::npos) throw ParseError("expected 'key: value'", lineno, start + 1);
    std::string key(line.substr(start, colon - start));
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
    std::string_view value = line.substr(colon + 1);
    const std::size_t vcol = colon + 1;
    if (key == "vars") {
      vars = split_words(value);
    } else if (key == "params") {
      params = split_words(value);
    } else if (key == "domain") {
      domain = parse_intervals(value, true, lineno, vcol);
      have_domain = true;
    } else if (key == "parambox") {
      box = parse_intervals(value, false, lineno, vcol);
      have_box = true;
    } else if (key == "bounds") {
      bound_words = split_words(value);
      have_bounds = true;
    } else if (key == "linear") {
      linear = split_words(value);
    } else if (key == "eq") {
      eq_lines.emplace_back(std::string(value), lineno);
      eq_cols.push_back(vcol);
    } else {
      throw ParseError("unknown header '" + key + "'", lineno, start + 1);
    }
  }
  if (vars.empty()) throw ParseError("missing 'vars:' line");
  if (params.empty()) throw ParseError("missing 'params:' line");
  if (!have_domain) throw ParseError("missing 'domain:' line");
  if (!have_box) throw ParseError("missing 'parambox:' line");

  ParametrizedSystem sys;
  try {
    sys.space = VarSpace(vars, params);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  sys.domain = std::move(domain);
  sys.param_box = std::move(box);
  for (std::size_t i = 0; i < eq_lines.size(); ++i) {
    try {
      sys.equations.push_back(parse_polynomial(eq_lines[i].first, sys.space));
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()).substr(std::string(e.what()).find(": ") + 2), eq_lines[i].second,
                       eq_cols[i] + e.column());
    }
  }
  if (have_bounds) {
    if (bound_words.size() != sys.space.n()) throw ParseError("'bounds:' needs one entry per variable");
    for (const auto& w : bound_words) {
      BoundHint b;
      if (w == "-") {
        b.kind = BoundHint::Kind::None;
      } else if (auto idx = sys.space.find(w); idx && !sys.space.is_variable(*idx)) {
        b.kind = BoundHint::Kind::ParamUpper;
        b.param = *idx - sys.space.n();
      } else {
        double v = 0;
        auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
        if (ec != std::errc() || ptr != w.data() + w.size() || !(v > 0) || !std::isfinite(v))
          throw ParseError("bound must be '-', a parameter name, or a positive number: '" + w + "'");
        b.kind = BoundHint::Kind::Value;
        b.value = v;
      }
      sys.bounds.push_back(b);
    }
  }
  for (const auto& name : linear) {
    auto idx = sys.space.find(name);
    if (!idx || sys.space.is_variable(*idx)) throw ParseError("'linear:' entry '" + name + "' is not a parameter");
  }
  sys.linear_params = std::move(linear);
  try {
    sys.validate();
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return sys;
}

ParametrizedSystem read_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system(ss.str());
}

std::string write_system(const ParametrizedSystem& sys) {
  std::ostringstream out;
  auto join = [&](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  auto intervals = [](const Box& b, char open, char close) {
    std::string s;
    for (const auto& iv : b)
      s += (s.empty() ? "" : " ") + std::string(1, open) + format_endpoint(iv.lo) + "," + format_endpoint(iv.hi) +
           std::string(1, close);
    return s;
  };
  out << "vars: " << join(sys.space.t_names()) << '\n';
  out << "params: " << join(sys.space.k_names()) << '\n';
  out << "domain: " << intervals(sys.domain, '(', ')') << '\n';
  out << "parambox: " << intervals(sys.param_box, '[', ']') << '\n';
  if (!sys.bounds.empty()) {
    std::vector<std::string> words;
    for (const auto& b : sys.bounds) {
      switch (b.kind) {
        case BoundHint::Kind::None:
          words.emplace_back("-");
          break;
        case BoundHint::Kind::Value:
          words.push_back(format_endpoint(b.value));
          break;
        case BoundHint::Kind::ParamUpper:
          words.push_back(sys.space.k_names().at(b.param));
          break;
      }
    }
    out << "bounds: " << join(words) << '\n';
  }
  if (!sys.linear_params.empty()) out << "linear: " << join(sys.linear_params) << '\n';
  for (const auto& eq : sys.equations) out << "eq: " << to_string(eq, sys.space) << '\n';
  return out.str();
}

LinearDecomposition decompose_linear(const ParametrizedSystem& sys, const std::vector<std::string>& linear_params) {
  const VarSpace& space = sys.space;
  const std::size_t n = space.n();
  using Kind = DecompositionError::Kind;
  if (linear_params.size() != n)
    throw DecompositionError(Kind::BadParameterList, 0, "",
                             "need exactly one linear parameter per equation (" + std::to_string(n) + ")");
  LinearDecomposition dec;
  dec.space = space;
  std::set<std::size_t> chosen;
  for (const auto& name : linear_params) {
    auto idx = space.find(name);
    if (!idx || space.is_variable(*idx))
      throw DecompositionError(Kind::BadParameterList, 0, name, "'" + name + "' is not a parameter");
    if (!chosen.insert(*idx).second)
      throw DecompositionError(Kind::BadParameterList, 0, name, "parameter '" + name + "' chosen twice");
    dec.linear.push_back(*idx);
  }
  for (std::size_t j = n; j < space.dim(); ++j)
    if (!chosen.count(j)) dec.rest.push_back(j);

  for (std::size_t i = 0; i < n; ++i) {
    const Poly& f = sys.equations.at(i);
    const std::size_t li = dec.linear[i];
    if (f.degree_in(li) != 1)
      throw DecompositionError(Kind::NotLinearInChosenParam, i, space.name(li),
                               "equation " + std::to_string(i + 1) + " has degree " + std::to_string(f.degree_in(li)) +
                                   " in '" + space.name(li) + "', expected 1");
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (f.depends_on(dec.linear[j]))
        throw DecompositionError(Kind::CrossLinearParam, i, space.name(dec.linear[j]),
                                 "equation " + std::to_string(i + 1) + " involves '" + space.name(dec.linear[j]) +
                                     "', which is linear for equation " + std::to_string(j + 1));
    }
    dec.h.push_back(f.coefficient_of(li, 1));
    dec.q.push_back(f.coefficient_of(li, 0));
    dec.g.emplace_back(-dec.q.back(), dec.h.back());
  }
  dec.jac_det = jacobian_det(dec);
  return dec;
}

Poly polynomial_det(const std::vector<std::vector<Poly>>& matrix) {
  const std::size_t n = matrix.size();
  if (n == 0) throw Error("empty matrix");
  if (n > 20) throw Error("matrix too large for Laplace expansion");
  const std::size_t dim = matrix[0][0].dim();
  // minors[mask]: determinant of rows popcount(mask).. and columns not in mask.
  std::map<unsigned, Poly> minors;
  const unsigned full = (1u << n) - 1;
  minors[full] = Poly::constant(dim, 1.0);
  for (unsigned mask = full; mask-- > 0;) {
    const unsigned row = static_cast<unsigned>(__builtin_popcount(mask));
    if (row >= n) continue;
    Poly acc(dim);
    int sign = 1;
    for (unsigned j = 0; j < n; ++j) {
      if (mask & (1u << j)) continue;
      const Poly& entry = matrix[row][j];
      if (!entry.is_zero()) {
        auto it = minors.find(mask | (1u << j));
        if (it != minors.end() && !it->second.is_zero()) {
          Poly term = entry * it->second;
          if (sign > 0)
            acc += term;
          else
            acc -= term;
        }
      }
      sign = -sign;
    }
    minors[mask] = std::move(acc);
  }
  return minors[0];
}

Rational jacobian_det(const LinearDecomposition& dec) {
  const std::size_t n = dec.space.n();
  const std::size_t dim = dec.space.dim();
  std::vector<std::vector<Poly>> rows(n);
  Poly den = Poly::constant(dim, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Poly& num = dec.g[i].num();
    const Poly& d = dec.g[i].den();
    bool den_free_of_t = true;
    for (std::size_t j = 0; j < n; ++j) den_free_of_t = den_free_of_t && !d.depends_on(j);
    for (std::size_t j = 0; j < n; ++j) {
      if (den_free_of_t)
        rows[i].push_back(num.derivative(j));
      else
        rows[i].push_back(num.derivative(j) * d - num * d.derivative(j));
    }
    den = den * (den_free_of_t ? d : d * d);
  }
  return Rational(polynomial_det(rows), den).cancel_monomials();
}

}  // namespace kacrice
