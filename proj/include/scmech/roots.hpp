#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "scmech/error.hpp"

namespace scmech {

/// Bisection for an increasing-through-zero or decreasing-through-zero
/// function on [lo, hi]. Requires f(lo) and f(hi) to have opposite signs
/// (or one of them to be zero).
template <class F>
double bisect(F&& f, double lo, double hi, double tol = 1e-12, int max_iter = 400) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (std::isnan(flo) || std::isnan(fhi) || (flo > 0.0) == (fhi > 0.0)) {
    throw Error(Errc::no_sign_change, "bisection bracket [" + std::to_string(lo) + ", " +
                                          std::to_string(hi) + "] has no sign change");
  }
  for (int i = 0; i < max_iter && hi - lo > tol * (1.0 + std::abs(lo)); ++i) {
    double mid = lo + 0.5 * (hi - lo);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return lo + 0.5 * (hi - lo);
}

/// Grows `hi` geometrically from `start` until `f` changes sign relative to
/// `f(lo)`. Returns nullopt when `limit` is passed first.
template <class F>
std::optional<double> expand_bracket(F&& f, double lo, double start, double limit = 1e12) {
  double flo = f(lo);
  double hi = std::max(start, lo + 1.0);
  while (hi <= limit) {
    double fh = f(hi);
    if (!std::isnan(fh) && (fh == 0.0 || (fh > 0.0) != (flo > 0.0))) return hi;
    hi = lo + 2.0 * (hi - lo);
  }
  return std::nullopt;
}

struct Extremum {
  double x;
  double value;
};

/// Golden-section maximization on [lo, hi]; endpoints are compared against
/// the interior result so monotone objectives land on the boundary.
template <class F>
Extremum golden_maximize(F&& f, double lo, double hi, double tol = 1e-10, int max_iter = 200) {
  if (!(hi > lo)) return {lo, f(lo)};
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && b - a > tol; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  Extremum best{c, fc};
  if (fd > best.value) best = {d, fd};
  double flo = f(lo), fhi = f(hi);
  if (flo > best.value) best = {lo, flo};
  if (fhi > best.value) best = {hi, fhi};
  return best;
}

}  // namespace scmech
