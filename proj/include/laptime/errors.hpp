#pragma once

#include <stdexcept>
#include <string>

namespace laptime {

// Bad input data or an inconsistent spec (dimension mismatch, out-of-range
// parameter, non-monotone track, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace laptime
