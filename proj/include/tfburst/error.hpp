#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tfburst {

// Coarse classification of a rejection. The CLI maps each category to its
// own exit code and prints the category name so scripts can branch on it.
enum class ErrorCategory {
  invalid_argument,  // precondition on a value or shape violated
  parse,             // a document or CSV could not be read
  io,                // file system failure
  data,              // inputs are well-formed but unusable (e.g. one class only)
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCategory::invalid_argument, what);
}

}  // namespace tfburst
