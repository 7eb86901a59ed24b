#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scmech/bundle.hpp"
#include "scmech/error.hpp"
#include "scmech/roots.hpp"

namespace scmech {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Built-in preference families. Each is stored on a chart where a larger
/// order parameter `r` means a higher canonical payment for every bundle
/// with q < 1.
enum class Family {
  quasilinear,       // r q - t
  sqrt_quasilinear,  // r sqrt(q) - t
  income_effect,     // r sqrt(q) - t^2
  payment_param,     // q - theta t^2, stored as r = 1/theta
  two_param,         // r sqrt(q) - t^2 on (0,2], 2 sqrt(q) - (3-r) t^2 on [2,3)
  power,             // q^r - t
  power_spliced,     // q^r - t above q*, linear pieces below q*
  myerson,           // r q - q t, payment bound r
  risk_averse,       // q sqrt(r - t), payment bound r
};

enum class Kind { classical, restricted };

inline const char* to_string(Family f) noexcept {
  switch (f) {
    case Family::quasilinear: return "quasilinear";
    case Family::sqrt_quasilinear: return "sqrt_quasilinear";
    case Family::income_effect: return "income_effect";
    case Family::payment_param: return "payment_param";
    case Family::two_param: return "two_param";
    case Family::power: return "power";
    case Family::power_spliced: return "power_spliced";
    case Family::myerson: return "myerson";
    case Family::risk_averse: return "risk_averse";
  }
  return "?";
}

inline const char* to_string(Kind k) noexcept {
  return k == Kind::classical ? "classical" : "restricted";
}

inline Family family_from_string(std::string_view s) {
  for (Family f : {Family::quasilinear, Family::sqrt_quasilinear, Family::income_effect,
                   Family::payment_param, Family::two_param, Family::power,
                   Family::power_spliced, Family::myerson, Family::risk_averse}) {
    if (s == to_string(f)) return f;
  }
  throw Error(Errc::schema, "unknown family '" + std::string(s) + "'");
}

struct ParamInterval {
  double lo = 0.0;
  double hi = kInf;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double r) const noexcept {
    if (std::isnan(r)) return false;
    bool above = lo_open ? r > lo : r >= lo;
    bool below = std::isinf(hi) ? r < hi : (hi_open ? r < hi : r <= hi);
    return above && below;
  }
  bool bounded() const noexcept { return std::isfinite(lo) && std::isfinite(hi); }
};

/// A named single-crossing family with its parameter chart.
class Domain {
 public:
  static constexpr double kDefaultQStar = 0.059787068367863944;  // e^-3 + 0.01

  explicit Domain(Family family) : Domain(family, default_interval(family)) {}

  Domain(Family family, ParamInterval interval, double q_star = kDefaultQStar)
      : family_(family), interval_(interval), q_star_(q_star) {
    if (!(interval_.lo <= interval_.hi) || std::isnan(interval_.lo)) {
      throw Error(Errc::invalid_argument, "empty parameter interval");
    }
    if (family_ == Family::power_spliced && !(q_star_ > 0.0 && q_star_ < 1.0)) {
      throw Error(Errc::invalid_argument, "q_star must lie in (0,1)");
    }
  }

  static ParamInterval default_interval(Family f) noexcept {
    switch (f) {
      case Family::two_param: return {0.0, 3.0, false, true};
      case Family::power: return {0.0, 1.0, false, false};
      case Family::power_spliced: return {0.25, 1.0 / 3.0, false, false};
      default: return {0.0, kInf, false, false};
    }
  }

  Family family() const noexcept { return family_; }
  Kind kind() const noexcept {
    return (family_ == Family::myerson || family_ == Family::risk_averse) ? Kind::restricted
                                                                           : Kind::classical;
  }
  const ParamInterval& interval() const noexcept { return interval_; }
  double q_star() const noexcept { return q_star_; }
  std::string name() const { return to_string(family_); }

  /// Payment t' with (t',1) indifferent to z under r.
  double canonical_payment(double r, Bundle z) const {
    require_param(r);
    require_valid(z);
    if (kind() == Kind::restricted && z.t > r + kBoundSlack * (1.0 + r)) {
      throw Error(Errc::inadmissible_bundle,
                  "payment " + std::to_string(z.t) + " exceeds bound " + std::to_string(r));
    }
    return raw_payment(r, std::min(z.t, bound_or_inf(r)), z.q);
  }

  /// Payment t with f_r(t,q) = level, or NaN when no admissible t exists.
  double level_payment(double r, double q, double level) const noexcept {
    double t = std::numeric_limits<double>::quiet_NaN();
    switch (family_) {
      case Family::quasilinear: t = level - r * (1.0 - q); break;
      case Family::sqrt_quasilinear: t = level - r * (1.0 - std::sqrt(q)); break;
      case Family::income_effect:
      case Family::two_param: {
        double th = family_ == Family::two_param ? two_param_theta(r) : r;
        double s = level * level - th * (1.0 - std::sqrt(q));
        t = s >= 0.0 && level >= 0.0 ? std::sqrt(s) : std::numeric_limits<double>::quiet_NaN();
        break;
      }
      case Family::payment_param: {
        double s = level * level - r * (1.0 - q);
        t = s >= 0.0 && level >= 0.0 ? std::sqrt(s) : std::numeric_limits<double>::quiet_NaN();
        break;
      }
      case Family::power: t = level - 1.0 + std::pow(q, r); break;
      case Family::power_spliced:
        if (q >= q_star_) {
          t = level - 1.0 + std::pow(q, r);
        } else {
          t = level - splice_slope(r) * (q_star_ - q) - 1.0 + std::pow(q_star_, r);
        }
        break;
      case Family::myerson:
        if (q > 0.0) t = (level - r * (1.0 - q)) / q;
        break;
      case Family::risk_averse:
        if (q > 0.0) t = r - (r - level) / (q * q);
        break;
    }
    if (!(t >= -kBoundSlack)) return std::numeric_limits<double>::quiet_NaN();
    if (kind() == Kind::restricted && t > r + kBoundSlack * (1.0 + r)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return std::max(t, 0.0);
  }

  std::optional<double> payment_bound(double r) const {
    require_param(r);
    if (kind() == Kind::restricted) return r;
    return std::nullopt;
  }

  /// Closed-form indifference parameter for a diagonal pair, when the family
  /// admits one. Result may lie outside the interval.
  std::optional<double> special_preference_closed_form(Bundle a, Bundle b) const noexcept {
    switch (family_) {
      case Family::quasilinear: return (b.t - a.t) / (b.q - a.q);
      case Family::sqrt_quasilinear: return (b.t - a.t) * (std::sqrt(b.q) + std::sqrt(a.q)) / (b.q - a.q);
      case Family::income_effect:
        return (b.t - a.t) * (b.t + a.t) * (std::sqrt(b.q) + std::sqrt(a.q)) / (b.q - a.q);
      case Family::payment_param: return (b.t - a.t) * (b.t + a.t) / (b.q - a.q);
      case Family::two_param: {
        double th = (b.t - a.t) * (b.t + a.t) * (std::sqrt(b.q) + std::sqrt(a.q)) / (b.q - a.q);
        return th <= 2.0 ? th : 3.0 - 2.0 / th;
      }
      case Family::myerson: return (b.q * b.t - a.q * a.t) / (b.q - a.q);
      case Family::risk_averse: {
        double qa2 = a.q * a.q, qb2 = b.q * b.q;
        return (qb2 * b.t - qa2 * a.t) / (qb2 - qa2);
      }
      case Family::power:
      case Family::power_spliced: return std::nullopt;
    }
    return std::nullopt;
  }

  /// Utility-maximizing bundle on the segment q = slope t, t in [t_lo, t_hi].
  std::optional<Bundle> line_argmax_closed_form(double r, double slope, double t_lo,
                                                double t_hi) const noexcept {
    if (family_ != Family::sqrt_quasilinear) return std::nullopt;
    double t = std::clamp(r * r * slope / 4.0, t_lo, t_hi);
    return Bundle{t, slope * t};
  }

  double splice_slope(double r) const noexcept { return 0.125 + 4.5 * (r - 0.25); }
  static double two_param_theta(double r) noexcept { return r <= 2.0 ? r : 2.0 / (3.0 - r); }

  friend bool operator==(const Domain& a, const Domain& b) noexcept {
    return a.family_ == b.family_ && a.interval_.lo == b.interval_.lo &&
           a.interval_.hi == b.interval_.hi && a.interval_.lo_open == b.interval_.lo_open &&
           a.interval_.hi_open == b.interval_.hi_open && a.q_star_ == b.q_star_;
  }

 private:
  static constexpr double kBoundSlack = 1e-12;

  void require_param(double r) const {
    if (!interval_.contains(r)) {
      throw Error(Errc::param_out_of_interval,
                  "parameter " + std::to_string(r) + " outside the " + name() + " interval");
    }
  }

  double bound_or_inf(double r) const noexcept { return kind() == Kind::restricted ? r : kInf; }

  double raw_payment(double r, double t, double q) const noexcept {
    switch (family_) {
      case Family::quasilinear: return t + r * (1.0 - q);
      case Family::sqrt_quasilinear: return t + r * (1.0 - std::sqrt(q));
      case Family::income_effect: return std::sqrt(t * t + r * (1.0 - std::sqrt(q)));
      case Family::payment_param: return std::sqrt(t * t + r * (1.0 - q));
      case Family::two_param:
        return std::sqrt(t * t + two_param_theta(r) * (1.0 - std::sqrt(q)));
      case Family::power: return t + 1.0 - std::pow(q, r);
      case Family::power_spliced:
        if (q >= q_star_) return t + 1.0 - std::pow(q, r);
        return t + splice_slope(r) * (q_star_ - q) + 1.0 - std::pow(q_star_, r);
      case Family::myerson: return r * (1.0 - q) + q * t;
      case Family::risk_averse: return r - q * q * (r - t);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  Family family_;
  ParamInterval interval_;
  double q_star_;
};

/// Requirements for a preference domain usable by the mechanism templates.
/// Custom families plug in by modelling this concept.
template <class D>
concept PreferenceDomain = requires(const D& d, double r, double q, Bundle z) {
  { d.canonical_payment(r, z) } -> std::convertible_to<double>;
  { d.level_payment(r, q, r) } -> std::convertible_to<double>;
  { d.interval() } -> std::convertible_to<ParamInterval>;
  { d.kind() } -> std::convertible_to<Kind>;
  { d.payment_bound(r) } -> std::convertible_to<std::optional<double>>;
  { d.special_preference_closed_form(z, z) } -> std::convertible_to<std::optional<double>>;
};

template <PreferenceDomain D>
bool admissible(const D& d, double r, Bundle z) {
  if (!is_valid(z)) return false;
  if (d.kind() == Kind::restricted) {
    auto bound = d.payment_bound(r);
    return !bound || z.t <= *bound + 1e-12 * (1.0 + *bound);
  }
  return true;
}

/// Compare two bundles under preference r.
template <PreferenceDomain D>
Choice prefers(const D& d, double r, Bundle a, Bundle b, double tol = kIndifferenceTol) {
  double fa = d.canonical_payment(r, a);
  double fb = d.canonical_payment(r, b);
  if (fa < fb - tol) return Choice::first;
  if (fb < fa - tol) return Choice::second;
  return Choice::indifferent;
}

/// Payment at quantity q_new that keeps the buyer r indifferent to z.
template <PreferenceDomain D>
double indifferent_payment(const D& d, double r, Bundle z, double q_new) {
  return d.level_payment(r, q_new, d.canonical_payment(r, z));
}

/// The unique order parameter under which the diagonal pair is indifferent.
template <PreferenceDomain D>
double special_preference(const D& d, Bundle a, Bundle b) {
  require_valid(a);
  require_valid(b);
  if (strictly_below(b, a)) std::swap(a, b);
  if (!strictly_below(a, b)) {
    throw Error(Errc::non_diagonal, "bundles are not diagonal: a=(" + std::to_string(a.t) + "," +
                                        std::to_string(a.q) + ") b=(" + std::to_string(b.t) +
                                        "," + std::to_string(b.q) + ")");
  }
  const ParamInterval iv = d.interval();
  if (auto r = d.special_preference_closed_form(a, b)) {
    if (!iv.contains(*r)) {
      throw Error(Errc::no_sign_change,
                  "indifference parameter " + std::to_string(*r) + " lies outside the interval");
    }
    return *r;
  }
  double lo = iv.lo;
  if (iv.lo_open) lo += 1e-12 * std::max(1.0, std::abs(lo));
  if (d.kind() == Kind::restricted) lo = std::max(lo, b.t);
  auto g = [&](double r) { return d.canonical_payment(r, a) - d.canonical_payment(r, b); };
  double hi;
  if (std::isinf(iv.hi)) {
    auto h = expand_bracket(g, lo, lo + 1.0);
    if (!h) throw Error(Errc::no_sign_change, "no indifference parameter for the pair");
    hi = *h;
  } else {
    hi = iv.hi_open ? iv.hi - 1e-12 * std::max(1.0, std::abs(iv.hi)) : iv.hi;
  }
  if (!(lo <= hi)) throw Error(Errc::no_sign_change, "pair exceeds every payment bound");
  double glo = g(lo), ghi = g(hi);
  if (std::abs(glo) <= 0.0) return lo;
  if (glo > 0.0 || ghi < 0.0) {
    throw Error(Errc::no_sign_change, "no indifference parameter for the pair in the interval");
  }
  return bisect(g, lo, hi, kParamTol);
}

/// Best bundle for r on the segment {(t, slope t) : t in [t_lo, t_hi]}.
template <PreferenceDomain D>
Bundle line_argmax(const D& d, double r, double slope, double t_lo, double t_hi) {
  if constexpr (requires { d.line_argmax_closed_form(r, slope, t_lo, t_hi); }) {
    if (auto z = d.line_argmax_closed_form(r, slope, t_lo, t_hi)) return *z;
  }
  if (d.kind() == Kind::restricted) {
    if (auto b = d.payment_bound(r)) t_hi = std::min(t_hi, *b);
  }
  auto neg = [&](double t) { return -d.canonical_payment(r, Bundle{t, std::min(1.0, slope * t)}); };
  auto best = golden_maximize(neg, t_lo, t_hi, 1e-13);
  return Bundle{best.x, std::min(1.0, slope * best.x)};
}

struct CrossingWitness {
  enum class Type { tangency, multiple_crossing };
  Type type;
  double r_low;
  double r_high;
  Bundle anchor;
  double q;  // grid quantity where the second contact or sign flip shows
};

struct CrossingReport {
  std::vector<CrossingWitness> witnesses;
  bool pass() const noexcept { return witnesses.empty(); }
};

/// Grid check of the single-crossing property: for each parameter pair and
/// anchor, the two indifference curves through the anchor must cross there
/// and nowhere else on the quantity grid.
template <PreferenceDomain D>
CrossingReport validate_single_crossing(const D& d, const std::vector<Bundle>& bundle_grid,
                                        std::vector<double> param_grid,
                                        double tol = kIndifferenceTol) {
  CrossingReport report;
  std::sort(param_grid.begin(), param_grid.end());
  param_grid.erase(std::unique(param_grid.begin(), param_grid.end()), param_grid.end());
  std::vector<double> qs;
  for (const auto& z : bundle_grid) qs.push_back(z.q);
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  const double probe = 1e-3;

  for (std::size_t i = 0; i < param_grid.size(); ++i) {
    for (std::size_t j = i + 1; j < param_grid.size(); ++j) {
      double r1 = param_grid[i], r2 = param_grid[j];
      for (const auto& z0 : bundle_grid) {
        if (!is_valid(z0)) continue;
        if (d.kind() == Kind::restricted && (z0.q <= 0.0 || z0.t >= r1)) continue;
        double c1 = d.canonical_payment(r1, z0);
        double c2 = d.canonical_payment(r2, z0);
        auto diff = [&](double q) { return d.level_payment(r1, q, c1) - d.level_payment(r2, q, c2); };
        int side_sign[2] = {0, 0};  // below, above
        bool bad = false;
        double bad_q = z0.q;
        auto record = [&](double q, double v, bool is_probe) {
          if (std::isnan(v)) return;
          if (std::abs(v) <= tol) {
            if (!is_probe && !bad) {
              bad = true;
              bad_q = q;
            }
            return;
          }
          int s = v > 0 ? 1 : -1;
          int& slot = side_sign[q > z0.q ? 1 : 0];
          if (slot == 0) {
            slot = s;
          } else if (slot != s && !bad) {
            bad = true;
            bad_q = q;
          }
        };
        for (double q : qs) {
          if (q == z0.q) continue;
          record(q, diff(q), false);
        }
        if (z0.q - probe >= 0.0) record(z0.q - probe, diff(z0.q - probe), true);
        if (z0.q + probe <= 1.0) record(z0.q + probe, diff(z0.q + probe), true);
        if (bad) {
          report.witnesses.push_back(
              {CrossingWitness::Type::multiple_crossing, r1, r2, z0, bad_q});
        } else if (side_sign[0] != 0 && side_sign[0] == side_sign[1]) {
          report.witnesses.push_back({CrossingWitness::Type::tangency, r1, r2, z0, z0.q});
        }
      }
    }
  }
  return report;
}

}  // namespace scmech
