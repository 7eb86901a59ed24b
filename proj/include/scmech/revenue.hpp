#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string_view>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"

namespace scmech {

enum class RevenueMode { payment, expected_payment };

inline const char* to_string(RevenueMode m) noexcept {
  return m == RevenueMode::payment ? "payment" : "expected-payment";
}

inline RevenueMode revenue_mode_from_string(std::string_view s) {
  if (s == "payment") return RevenueMode::payment;
  if (s == "expected-payment" || s == "expected_payment") return RevenueMode::expected_payment;
  throw Error(Errc::schema, "unknown revenue mode '" + std::string(s) + "'");
}

inline double bundle_revenue(const Bundle& z, RevenueMode mode) noexcept {
  return mode == RevenueMode::payment ? z.t : z.q * z.t;
}

template <PreferenceDomain D>
void require_chart(const D& domain, const TypeDistribution& dist) {
  const auto& iv = domain.interval();
  if (!iv.contains(dist.lower()) || !iv.contains(dist.upper())) {
    throw Error(Errc::invalid_argument,
                "distribution support [" + std::to_string(dist.lower()) + ", " +
                    std::to_string(dist.upper()) + "] is not inside the parameter interval");
  }
}

/// Exact expected revenue of a step mechanism.
template <PreferenceDomain D>
double expected_revenue(const FiniteMechanism<D>& mech, const TypeDistribution& dist,
                        RevenueMode mode = RevenueMode::payment) {
  require_chart(mech.domain(), dist);
  const auto& z = mech.bundles();
  const auto& bp = mech.breakpoints();
  double total = 0.0;
  double prev = 0.0;  // Gamma at the left end of the current cell
  for (std::size_t k = 0; k < z.size(); ++k) {
    double right = k < bp.size() ? dist.cdf(std::clamp(bp[k], dist.lower(), dist.upper())) : 1.0;
    total += bundle_revenue(z[k], mode) * (right - prev);
    prev = right;
  }
  return total;
}

namespace detail {

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  double half = std::max(0.5 * tol, 1e-16);
  return adaptive_simpson(f, a, m, fa, flm, fm, left, half, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, half, depth - 1);
}

}  // namespace detail

/// Expected revenue of an arbitrary allocation rule, integrated in quantile
/// space so atoms of the density never matter.
inline double expected_revenue(const std::function<Bundle(double)>& mech_fn,
                               const TypeDistribution& dist,
                               RevenueMode mode = RevenueMode::payment, double tol = 1e-10) {
  auto f = [&](double u) { return bundle_revenue(mech_fn(dist.quantile(u)), mode); };
  // Split into pieces so the recursion does not stop on a coincidentally
  // flat first estimate.
  constexpr int kPieces = 64;
  double total = 0.0;
  for (int i = 0; i < kPieces; ++i) {
    double a = static_cast<double>(i) / kPieces;
    double b = static_cast<double>(i + 1) / kPieces;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    total += detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol / kPieces, 52);
  }
  return total;
}

/// Upper bound on revenue: payment that makes the top type indifferent
/// between (0,0) and buying q = 1.
template <PreferenceDomain D>
double revenue_upper_bound(const D& domain, const TypeDistribution& dist) {
  require_chart(domain, dist);
  return domain.canonical_payment(dist.upper(), Bundle{0.0, 0.0});
}

}  // namespace scmech
