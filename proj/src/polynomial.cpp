#include "kacrice/polynomial.hpp"

#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace kacrice {

VarSpace::VarSpace(std::vector<std::string> t_names, std::vector<std::string> k_names) : n_(t_names.size()) {
  if (t_names.empty()) throw Error("a system needs at least one variable");
  if (k_names.size() < t_names.size()) throw Error("need at least as many parameters as variables");
  names_ = std::move(t_names);
  names_.insert(names_.end(), std::make_move_iterator(k_names.begin()), std::make_move_iterator(k_names.end()));
  std::set<std::string> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw Error("empty identifier");
    if (!seen.insert(name).second) throw Error("duplicate identifier '" + name + "'");
  }
}

std::optional<std::size_t> VarSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t VarSpace::index(std::string_view name) const {
  auto i = find(name);
  if (!i) throw Error("unknown identifier '" + std::string(name) + "'");
  return *i;
}

std::size_t VarSpace::param_index(std::string_view name) const {
  std::size_t i = index(name);
  if (is_variable(i)) throw Error("'" + std::string(name) + "' is a variable, not a parameter");
  return i - n_;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string monomial_text(const Monomial& e, const VarSpace& space) {
  std::string out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] == 0) continue;
    if (!out.empty()) out += '*';
    out += space.name(i);
    if (e[i] > 1) out += '^' + std::to_string(e[i]);
  }
  return out;
}

}  // namespace

std::string to_string(const Poly& p, const VarSpace& space) {
  if (p.dim() != space.dim()) throw DimensionError("polynomial does not belong to this space");
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [e, c] = *it;
    const bool negative = std::signbit(c);
    const double mag = std::abs(c);
    if (first) {
      if (negative) out += '-';
    } else {
      out += negative ? " - " : " + ";
    }
    first = false;
    const std::string mono = monomial_text(e, space);
    if (mono.empty()) {
      out += format_double(mag);
    } else if (mag == 1.0) {
      out += mono;
    } else {
      out += format_double(mag) + '*' + mono;
    }
  }
  return out;
}

std::string to_string(const Rational& r, const VarSpace& space) {
  return "(" + to_string(r.num(), space) + ")/(" + to_string(r.den(), space) + ")";
}

namespace {

/// Recursive-descent parser:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('+' | '-') unary | power
///   power  := atom ('^' integer)?
///   atom   := number | identifier | '(' expr ')'
class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const VarSpace& space) : text_(text), space_(space) {}

  Poly parse() {
    skip_space();
    if (pos_ == text_.size()) fail("empty polynomial expression");
    Poly p = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, 0, pos_ + 1); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Poly expr() {
    Poly acc = term();
    while (true) {
      if (accept('+'))
        acc += term();
      else if (accept('-'))
        acc -= term();
      else
        return acc;
    }
  }

  Poly term() {
    Poly acc = unary();
    while (true) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        const std::size_t at = pos_;
        Poly d = unary();
        if (!d.is_constant() || d.is_zero()) {
          pos_ = at;
          fail("division is only allowed by a nonzero constant");
        }
        acc *= 1.0 / d.constant_term();
      } else {
        return acc;
      }
    }
  }

  Poly unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Poly power() {
    Poly base = atom();
    if (!accept('^')) return base;
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_ || (pos_ < text_.size() && (text_[pos_] == '.' || std::isalpha(static_cast<unsigned char>(text_[pos_]))))) {
      pos_ = start;
      fail("malformed exponent: expected a non-negative integer");
    }
    int exp = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, exp);
    if (ec != std::errc() || exp > 1000) {
      pos_ = start;
      fail("malformed exponent");
    }
    return base.pow(exp);
  }

  Poly atom() {
    skip_space();
    if (pos_ == text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Poly inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Poly number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Poly::constant(space_.dim(), v);
  }

  Poly identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);
    auto idx = space_.find(name);
    if (!idx) {
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
    return Poly::variable(space_.dim(), *idx);
  }

  std::string_view text_;
  const VarSpace& space_;
  std::size_t pos_ = 0;
};

}  // namespace

Poly parse_polynomial(std::string_view text, const VarSpace& space) { return ExpressionParser(text, space).parse(); }

}  // namespace kacrice
