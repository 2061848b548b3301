#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace threathive {

enum class ErrorKind {
  Parse,
  Validation,
  Lookup,
  Precondition,
  Network,
  RateLimited,
  Config,
  ReplayMismatch,
  Storage,
  Conflict,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library is an Error tagged with its kind.
// `subject` names the offending entity (taxonomy id, URL, node id, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string subject = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorKind kind_;
  std::string subject_;
};

[[noreturn]] void fail(ErrorKind kind, std::string message, std::string subject = {});

}  // namespace threathive
