#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swssb {

enum class ErrorKind {
  invalid_argument,
  contract_violation,
  resource_limit,
  insufficient_data,
  undefined_ratio,
  no_crossing,
  no_root,
  io_failure,
  parse_failure,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::contract_violation: return "contract_violation";
    case ErrorKind::resource_limit: return "resource_limit";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::undefined_ratio: return "undefined_ratio";
    case ErrorKind::no_crossing: return "no_crossing";
    case ErrorKind::no_root: return "no_root";
    case ErrorKind::io_failure: return "io_failure";
    case ErrorKind::parse_failure: return "parse_failure";
  }
  return "unknown";
}

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace swssb
