#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ssgd {

// Precondition violated by the caller (dimension mismatch, t1 < t0, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// No worker can ever finish the requested work: every remaining profile is
// dead, or every busy worker sits at +infinity.
class StalledError : public std::runtime_error {
 public:
  StalledError(const std::string& what, long last_step)
      : std::runtime_error(what), last_step_(last_step) {}

  // Last recursion index (or iteration) that was reached before stalling.
  long last_step() const { return last_step_; }

 private:
  long last_step_;
};

// Regime gate, e.g. partial participation with p >= 0.4.
class OutOfRegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Experiment spec validation; carries every violation found, not just the first.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// Malformed spec file; line is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, std::string field = {});

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

}  // namespace ssgd
