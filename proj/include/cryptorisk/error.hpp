#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cryptorisk {

/// Precondition violated by a caller-supplied value (bad id, unknown name,
/// out-of-range index). Maps to exit code 1 in the CLI.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input document. Carries every violation found, each prefixed
/// with its location.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(std::vector<std::string> violations);
  ParseError(const std::string& source, std::vector<std::string> violations);

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Internal invariant broken. Maps to exit code 2 in the CLI.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cryptorisk
