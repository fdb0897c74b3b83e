#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thermofuse {

enum class ErrorKind {
  shape,
  domain,
  parse,
  geometry,
  format,
  length,
  data,
  consistency,
  bounds,
  state,
  linkage,
  integrity,
  version,
  empty_structure,
  empty_window,
  degenerate_model,
  undefined,
  startup,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::geometry: return "geometry error";
    case ErrorKind::format: return "format error";
    case ErrorKind::length: return "length error";
    case ErrorKind::data: return "data error";
    case ErrorKind::consistency: return "consistency error";
    case ErrorKind::bounds: return "bounds error";
    case ErrorKind::state: return "state error";
    case ErrorKind::linkage: return "data-linkage error";
    case ErrorKind::integrity: return "integrity error";
    case ErrorKind::version: return "version error";
    case ErrorKind::empty_structure: return "empty-structure error";
    case ErrorKind::empty_window: return "empty-window error";
    case ErrorKind::degenerate_model: return "degenerate-model error";
    case ErrorKind::undefined: return "undefined-correlation error";
    case ErrorKind::startup: return "startup error";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so callers (CLI exit
/// codes, HTTP status mapping) can classify it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// Errors caused by bad inputs rather than by the program itself.
inline bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::state:
    case ErrorKind::undefined:
      return false;
    default:
      return true;
  }
}

}  // namespace thermofuse
