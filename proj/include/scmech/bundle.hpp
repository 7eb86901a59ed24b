#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include "scmech/error.hpp"

namespace scmech {

// Indifference tolerance in canonical-payment units.
inline constexpr double kIndifferenceTol = 1e-9;
// Bisection tolerance on the order parameter.
inline constexpr double kParamTol = 1e-12;
// Profitable-deviation threshold used by the verifier.
inline constexpr double kIcTol = 1e-7;

/// An outcome: payment `t` and quantity (or win probability) `q`.
struct Bundle {
  double t = 0.0;
  double q = 0.0;

  friend bool operator==(const Bundle&, const Bundle&) = default;
};

inline bool is_valid(const Bundle& z) noexcept {
  return std::isfinite(z.t) && std::isfinite(z.q) && z.t >= 0.0 && z.q >= 0.0 && z.q <= 1.0;
}

inline void require_valid(const Bundle& z) {
  if (!is_valid(z)) {
    throw Error(Errc::inadmissible_bundle,
                "bundle (" + std::to_string(z.t) + ", " + std::to_string(z.q) +
                    ") is outside [0,inf)x[0,1]");
  }
}

/// a < b in both coordinates.
inline bool strictly_below(const Bundle& a, const Bundle& b) noexcept {
  return a.t < b.t && a.q < b.q;
}

/// a <= b componentwise, up to `tol`.
inline bool weakly_below(const Bundle& a, const Bundle& b, double tol = 0.0) noexcept {
  return a.t <= b.t + tol && a.q <= b.q + tol;
}

inline bool near(const Bundle& a, const Bundle& b, double tol) noexcept {
  return std::abs(a.t - b.t) <= tol && std::abs(a.q - b.q) <= tol;
}

inline std::ostream& operator<<(std::ostream& os, const Bundle& z) {
  return os << '(' << z.t << ", " << z.q << ')';
}

/// Outcome of a pairwise comparison under one preference.
enum class Choice { first, second, indifferent };

inline const char* to_string(Choice c) noexcept {
  switch (c) {
    case Choice::first: return "first";
    case Choice::second: return "second";
    case Choice::indifferent: return "indifferent";
  }
  return "?";
}

}  // namespace scmech
