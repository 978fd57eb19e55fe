#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kacrice {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line` and `column` are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

  /// Same error with a line number attached (parsers of single expressions
  /// only know the column).
  ParseError at_line(std::size_t line) const { return ParseError(message(), line, column_); }

  /// The message without the position prefix.
  std::string message() const {
    std::string w = what();
    auto pos = w.find(": ");
    return (line_ != 0 || column_ != 0) && pos != std::string::npos ? w.substr(pos + 2) : w;
  }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0 && column == 0) return what;
    std::string prefix;
    if (line != 0) prefix += "line " + std::to_string(line);
    if (column != 0) prefix += (prefix.empty() ? "" : ", ") + std::string("column ") + std::to_string(column);
    return prefix + ": " + what;
  }

  std::size_t line_;
  std::size_t column_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace kacrice
