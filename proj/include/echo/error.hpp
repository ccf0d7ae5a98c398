#pragma once

#include <stdexcept>
#include <string>

namespace echo {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File content does not match the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during computation (non-finite values, infeasible setup).
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline int base_exit_code(const Error& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const ConfigError*>(&e)) {
    return 2;
  }
  return 1;
}
}  // namespace detail

/// An error raised inside a named pipeline phase.
class PhaseError : public Error {
 public:
  PhaseError(const std::string& phase, const Error& cause)
      : Error(phase + ": " + cause.what()), phase_(phase), code_(detail::base_exit_code(cause)) {}

  const std::string& phase() const noexcept { return phase_; }
  int code() const noexcept { return code_; }

 private:
  std::string phase_;
  int code_;
};

/// Process exit status for an error: 2 for usage and file problems, 1 for
/// failures during computation.
inline int exit_code(const Error& e) {
  if (const auto* p = dynamic_cast<const PhaseError*>(&e)) return p->code();
  return detail::base_exit_code(e);
}

}  // namespace echo
