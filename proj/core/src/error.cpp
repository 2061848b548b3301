#include "threathive/error.hpp"

namespace threathive {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Network: return "network";
    case ErrorKind::RateLimited: return "rate-limited";
    case ErrorKind::Config: return "config";
    case ErrorKind::ReplayMismatch: return "replay-mismatch";
    case ErrorKind::Storage: return "storage";
    case ErrorKind::Conflict: return "conflict";
  }
  return "unknown";
}

namespace {
std::string compose(ErrorKind kind, const std::string& message, const std::string& subject) {
  std::string out{to_string(kind)};
  out += " error";
  if (!subject.empty()) {
    out += " [" + subject + "]";
  }
  out += ": " + message;
  return out;
}
}  // namespace

Error::Error(ErrorKind kind, std::string message, std::string subject)
    : std::runtime_error(compose(kind, message, subject)), kind_(kind), subject_(std::move(subject)) {}

void fail(ErrorKind kind, std::string message, std::string subject) {
  throw Error(kind, std::move(message), std::move(subject));
}

}  // namespace threathive
