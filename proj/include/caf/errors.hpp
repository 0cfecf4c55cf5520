#pragma once

#include <stdexcept>
#include <string>

namespace caf {

// Error categories. CLI maps validation-type codes to exit 1, the rest to 2.
enum class Errc {
  invalid_argument,
  infeasible_geometry,
  bad_magic,
  bad_version,
  truncated,
  checksum_mismatch,
  io_failure,
  not_finite,
  shape_mismatch,
  train_diverged,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::infeasible_geometry: return "infeasible_geometry";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_version: return "bad_version";
    case Errc::truncated: return "truncated";
    case Errc::checksum_mismatch: return "checksum_mismatch";
    case Errc::io_failure: return "io_failure";
    case Errc::not_finite: return "not_finite";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::train_diverged: return "train_diverged";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

// True for errors caused by bad user input rather than a failing run.
inline bool is_validation_error(Errc c) {
  return c == Errc::invalid_argument || c == Errc::infeasible_geometry ||
         c == Errc::shape_mismatch;
}

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, Errc code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

}  // namespace caf
