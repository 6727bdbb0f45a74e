#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssdrl {

enum class ErrorKind {
  InvalidInput,
  InstanceTooLarge,
  MissingLabel,
  ShapeError,
  DivergedAttack,
  DivergedTraining,
  IoError,
  FormatError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorKind::MissingLabel: return "MissingLabel";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::DivergedAttack: return "DivergedAttack";
    case ErrorKind::DivergedTraining: return "DivergedTraining";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace detail
}  // namespace ssdrl
