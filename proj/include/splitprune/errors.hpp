#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splitprune {

// Argument outside its documented domain (rate out of range, bad option, shape mismatch).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Work request declined because it exceeds a configured budget.
class Refused : public std::runtime_error {
 public:
  Refused(const std::string& what, std::size_t count)
      : std::runtime_error(what), count_(count) {}

  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t count_;
};

}  // namespace splitprune
