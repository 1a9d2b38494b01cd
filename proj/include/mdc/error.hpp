#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace mdc {

/// Base of every exception thrown by the toolchain.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. Line/column are 1-based; 0 means unknown.
class parse_error : public error {
public:
  parse_error(std::string const& what, std::size_t line, std::size_t column = 0)
      : error(decorate(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string decorate(std::string const& what, std::size_t line, std::size_t column) {
    if (line == 0) {
      return what;
    }
    std::string pos = "line " + std::to_string(line);
    if (column != 0) {
      pos += ", column " + std::to_string(column);
    }
    return pos + ": " + what;
  }

  std::size_t line_;
  std::size_t column_;
};

/// Well-formed input that violates a structural rule; names the offending element.
class semantic_error : public error {
public:
  semantic_error(std::string const& what, std::string element)
      : error(what), element_(std::move(element)) {}

  std::string const& element() const noexcept { return element_; }

private:
  std::string element_;
};

class merge_error : public error {
public:
  using error::error;
};

class profile_error : public error {
public:
  using error::error;
};

class hdl_error : public error {
public:
  using error::error;
};

class copr_error : public error {
public:
  using error::error;
};

} // namespace mdc
