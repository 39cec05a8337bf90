#include "ssgd/errors.hpp"

#include <utility>

namespace ssgd {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid experiment spec:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}

std::string with_location(const std::string& what, int line, const std::string& field) {
  std::string out = what;
  if (line > 0) out += " (line " + std::to_string(line) + ")";
  if (!field.empty()) out += " [field '" + field + "']";
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

ParseError::ParseError(const std::string& what, int line, std::string field)
    : std::runtime_error(with_location(what, line, field)), line_(line), field_(std::move(field)) {}

}  // namespace ssgd
