#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "scmech/error.hpp"
#include "scmech/roots.hpp"

namespace scmech {

struct Uniform {
  double a = 0.0;
  double b = 1.0;
};

struct TruncatedExponential {
  double rate = 1.0;
  double a = 0.0;
  double b = 1.0;
};

struct BetaDist {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Piecewise-linear CDF through (theta, cdf) knots.
struct Tabulated {
  std::vector<std::pair<double, double>> knots;
};

/// Atomless distribution of the order parameter on [lower(), upper()].
class TypeDistribution {
 public:
  using Spec = std::variant<Uniform, TruncatedExponential, BetaDist, Tabulated>;

  TypeDistribution() : TypeDistribution(Uniform{}) {}

  explicit TypeDistribution(Spec spec) : spec_(std::move(spec)) { validate(); }

  static TypeDistribution uniform(double a, double b) { return TypeDistribution(Uniform{a, b}); }
  static TypeDistribution truncated_exponential(double rate, double a, double b) {
    return TypeDistribution(TruncatedExponential{rate, a, b});
  }
  static TypeDistribution beta(double alpha, double beta) {
    return TypeDistribution(BetaDist{alpha, beta});
  }
  static TypeDistribution tabulated(std::vector<std::pair<double, double>> knots) {
    return TypeDistribution(Tabulated{std::move(knots)});
  }

  const Spec& spec() const noexcept { return spec_; }

  std::string name() const {
    return std::visit(
        [](const auto& s) -> std::string {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Uniform>) return "uniform";
          else if constexpr (std::is_same_v<S, TruncatedExponential>) return "truncated_exponential";
          else if constexpr (std::is_same_v<S, BetaDist>) return "beta";
          else return "tabulated";
        },
        spec_);
  }

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

  double cdf(double x) const {
    if (x <= lower_) return 0.0;
    if (x >= upper_) return 1.0;
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Uniform>) {
            return (x - s.a) / (s.b - s.a);
          } else if constexpr (std::is_same_v<S, TruncatedExponential>) {
            return -std::expm1(-s.rate * (x - s.a)) / -std::expm1(-s.rate * (s.b - s.a));
          } else if constexpr (std::is_same_v<S, BetaDist>) {
            return boost::math::cdf(boost::math::beta_distribution<double>(s.alpha, s.beta), x);
          } else {
            auto it = std::upper_bound(s.knots.begin(), s.knots.end(), x,
                                       [](double v, const auto& k) { return v < k.first; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            return lo.second + (hi.second - lo.second) * (x - lo.first) / (hi.first - lo.first);
          }
        },
        spec_);
  }

  double pdf(double x) const {
    if (x < lower_ || x > upper_) return 0.0;
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Uniform>) {
            return 1.0 / (s.b - s.a);
          } else if constexpr (std::is_same_v<S, TruncatedExponential>) {
            return s.rate * std::exp(-s.rate * (x - s.a)) / -std::expm1(-s.rate * (s.b - s.a));
          } else if constexpr (std::is_same_v<S, BetaDist>) {
            boost::math::beta_distribution<double> d(s.alpha, s.beta);
            if ((x == 0.0 && s.alpha < 1.0) || (x == 1.0 && s.beta < 1.0)) return kInfPdf;
            return boost::math::pdf(d, x);
          } else {
            auto it = std::upper_bound(s.knots.begin(), s.knots.end(), x,
                                       [](double v, const auto& k) { return v < k.first; });
            if (it == s.knots.end()) --it;
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            return (hi.second - lo.second) / (hi.first - lo.first);
          }
        },
        spec_);
  }

  double quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw Error(Errc::invalid_argument, "quantile level outside [0,1]");
    if (u == 0.0) return lower_;
    if (u == 1.0) return upper_;
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Uniform>) {
            return s.a + u * (s.b - s.a);
          } else if constexpr (std::is_same_v<S, TruncatedExponential>) {
            double z = -std::expm1(-s.rate * (s.b - s.a));
            return std::min(s.b, s.a - std::log1p(-u * z) / s.rate);
          } else if constexpr (std::is_same_v<S, BetaDist>) {
            return boost::math::quantile(boost::math::beta_distribution<double>(s.alpha, s.beta), u);
          } else {
            auto it = std::lower_bound(s.knots.begin(), s.knots.end(), u,
                                       [](const auto& k, double v) { return k.second < v; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            return lo.first + (hi.first - lo.first) * (u - lo.second) / (hi.second - lo.second);
          }
        },
        spec_);
  }

  /// mu([a, b]) on the parameter chart.
  double mass(double a, double b) const { return b <= a ? 0.0 : cdf(b) - cdf(a); }

 private:
  static constexpr double kInfPdf = 1e300;

  void validate() {
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Uniform>) {
            if (!(std::isfinite(s.a) && std::isfinite(s.b) && s.a < s.b)) {
              throw Error(Errc::invalid_argument, "uniform requires finite a < b");
            }
            lower_ = s.a;
            upper_ = s.b;
          } else if constexpr (std::is_same_v<S, TruncatedExponential>) {
            if (!(s.rate > 0.0 && std::isfinite(s.a) && std::isfinite(s.b) && s.a < s.b)) {
              throw Error(Errc::invalid_argument,
                          "truncated exponential requires rate > 0 and finite a < b");
            }
            lower_ = s.a;
            upper_ = s.b;
          } else if constexpr (std::is_same_v<S, BetaDist>) {
            if (!(s.alpha > 0.0 && s.beta > 0.0 && std::isfinite(s.alpha) && std::isfinite(s.beta))) {
              throw Error(Errc::invalid_argument, "beta requires positive shape parameters");
            }
            lower_ = 0.0;
            upper_ = 1.0;
          } else {
            const auto& k = s.knots;
            if (k.size() < 2) throw Error(Errc::invalid_argument, "table needs at least two knots");
            for (std::size_t i = 0; i < k.size(); ++i) {
              if (!std::isfinite(k[i].first) || !std::isfinite(k[i].second)) {
                throw Error(Errc::invalid_argument, "table entries must be finite");
              }
              if (i > 0 && !(k[i].first > k[i - 1].first && k[i].second >= k[i - 1].second)) {
                throw Error(Errc::invalid_argument,
                            "table must have increasing theta and nondecreasing cdf");
              }
            }
            if (k.front().second != 0.0 || k.back().second != 1.0) {
              throw Error(Errc::invalid_argument, "table cdf must run from 0 to 1");
            }
            lower_ = k.front().first;
            upper_ = k.back().first;
          }
        },
        spec_);
  }

  Spec spec_;
  double lower_ = 0.0;
  double upper_ = 1.0;
};

/// gamma / (1 - Gamma). Throws `unbounded` where 1 - Gamma vanishes.
inline double hazard(const TypeDistribution& dist, double theta) {
  if (theta < dist.lower() || theta > dist.upper()) {
    throw Error(Errc::invalid_argument, "type outside the support");
  }
  double surv = 1.0 - dist.cdf(theta);
  if (surv <= 0.0) throw Error(Errc::unbounded, "hazard rate is unbounded at the top of the support");
  return dist.pdf(theta) / surv;
}

/// theta - (1 - Gamma) / gamma; equals theta at the top of the support.
inline double virtual_valuation(const TypeDistribution& dist, double theta) {
  if (theta < dist.lower() || theta > dist.upper()) {
    throw Error(Errc::invalid_argument, "type outside the support");
  }
  double surv = 1.0 - dist.cdf(theta);
  if (surv <= 0.0) return theta;
  double dens = dist.pdf(theta);
  if (dens <= 0.0) return -std::numeric_limits<double>::infinity();
  return theta - surv / dens;
}

/// True when the hazard rate is nondecreasing on an n-point interior grid.
inline bool hazard_nondecreasing(const TypeDistribution& dist, int n = 400, double slack = 1e-9) {
  double prev = -1.0;
  for (int i = 0; i < n; ++i) {
    double th = dist.lower() + (dist.upper() - dist.lower()) * (i + 0.5) / n;
    double h = hazard(dist, th);
    if (h < prev - slack * (1.0 + std::abs(prev))) return false;
    prev = h;
  }
  return true;
}

struct Reserve {
  double theta;
  bool hazard_monotone;
};

/// Root of the virtual valuation, clamped to the bottom of the support.
inline Reserve inverse_virtual(const TypeDistribution& dist) {
  bool mono = hazard_nondecreasing(dist);
  double lo = dist.lower(), hi = dist.upper();
  if (virtual_valuation(dist, lo) >= 0.0) return {lo, mono};
  double top = hi;
  if (dist.pdf(hi) <= 0.0) top = hi - 1e-9 * std::max(1.0, hi - lo);
  double psi_top = virtual_valuation(dist, top);
  if (psi_top < 0.0) {
    throw Error(Errc::degenerate, "virtual valuation is negative on the whole support");
  }
  double root = bisect([&](double th) { return virtual_valuation(dist, th); }, lo, top, 1e-14);
  return {root, mono};
}

}  // namespace scmech
