#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gpert {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a documented invariant. Carries every violation found,
// not only the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class ParseError : public Error {
 public:
  ParseError(std::string what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Remote provider could not deliver a result (transport, status, retries).
class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpert
