#pragma once

#include <stdexcept>
#include <string>

namespace scmech {

enum class Errc {
  invalid_argument,
  param_out_of_interval,
  inadmissible_bundle,
  non_diagonal,
  no_sign_change,
  infeasible_range,
  unbounded,
  degenerate,
  tractability,
  schema,
  verification_failed,
  io,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::param_out_of_interval: return "param_out_of_interval";
    case Errc::inadmissible_bundle: return "inadmissible_bundle";
    case Errc::non_diagonal: return "non_diagonal";
    case Errc::no_sign_change: return "no_sign_change";
    case Errc::infeasible_range: return "infeasible_range";
    case Errc::unbounded: return "unbounded";
    case Errc::degenerate: return "degenerate";
    case Errc::tractability: return "tractability";
    case Errc::schema: return "schema";
    case Errc::verification_failed: return "verification_failed";
    case Errc::io: return "io";
  }
  return "unknown";
}

/// Library-wide exception. `code()` is what the CLI reports in its
/// machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace scmech
