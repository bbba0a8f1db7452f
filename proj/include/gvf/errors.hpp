#pragma once

#include <stdexcept>
#include <string>

namespace gvf {

/// Raised when a caller violates a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a learner produces a non-finite TD error. The run must halt.
class LearnerPoisoned : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input (experience logs, config files). Carries the 1-based
/// line number when one is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace gvf
