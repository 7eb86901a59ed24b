#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/error.hpp"

namespace scmech {

/// Piecewise-constant allocation: bundles[k] for breakpoints[k-1] <= r <
/// breakpoints[k]. No shape requirement; used for hand-built rules.
struct StepRule {
  std::vector<Bundle> bundles;
  std::vector<double> breakpoints;

  Bundle operator()(double r) const {
    auto k = std::upper_bound(breakpoints.begin(), breakpoints.end(), r) - breakpoints.begin();
    return bundles[static_cast<std::size_t>(k)];
  }
};

/// Strategy-proof mechanism with a finite ordered range.
template <PreferenceDomain D = Domain>
class FiniteMechanism {
 public:
  /// Breakpoints are the indifference parameters of adjacent range bundles.
  static FiniteMechanism from_range(D domain, std::vector<Bundle> bundles) {
    if (bundles.empty()) throw Error(Errc::invalid_argument, "range is empty");
    for (const auto& z : bundles) require_valid(z);
    std::sort(bundles.begin(), bundles.end(),
              [](const Bundle& a, const Bundle& b) { return a.q < b.q || (a.q == b.q && a.t < b.t); });
    for (std::size_t k = 1; k < bundles.size(); ++k) {
      if (!strictly_below(bundles[k - 1], bundles[k])) {
        throw Error(Errc::non_diagonal, "range bundles " + describe(bundles[k - 1]) + " and " +
                                            describe(bundles[k]) + " are not diagonal");
      }
    }
    require_restricted_floor(domain, bundles);
    std::vector<double> bps;
    bps.reserve(bundles.size() - 1);
    for (std::size_t k = 1; k < bundles.size(); ++k) {
      bps.push_back(special_preference(domain, bundles[k - 1], bundles[k]));
    }
    for (std::size_t k = 1; k < bps.size(); ++k) {
      if (bps[k] < bps[k - 1]) {
        if (bps[k - 1] - bps[k] <= kParamTol * (1.0 + std::abs(bps[k]))) {
          bps[k] = bps[k - 1];
          continue;
        }
        throw Error(Errc::infeasible_range,
                    "breakpoints decrease across " + describe(bundles[k - 1]) + ", " +
                        describe(bundles[k]) + ", " + describe(bundles[k + 1]) + " (" +
                        std::to_string(bps[k - 1]) + " > " + std::to_string(bps[k]) + ")");
      }
    }
    return FiniteMechanism(std::move(domain), std::move(bundles), std::move(bps));
  }

  /// Rebuilds a stored mechanism, checking every invariant.
  static FiniteMechanism from_parts(D domain, std::vector<Bundle> bundles,
                                    std::vector<double> breakpoints) {
    if (bundles.empty()) throw Error(Errc::invalid_argument, "range is empty");
    if (breakpoints.size() + 1 != bundles.size()) {
      throw Error(Errc::invalid_argument, "need exactly one breakpoint per adjacent bundle pair");
    }
    for (const auto& z : bundles) require_valid(z);
    for (std::size_t k = 1; k < bundles.size(); ++k) {
      if (!strictly_below(bundles[k - 1], bundles[k])) {
        throw Error(Errc::non_diagonal, "stored range is not strictly increasing");
      }
    }
    for (std::size_t k = 0; k < breakpoints.size(); ++k) {
      if (!domain.interval().contains(breakpoints[k])) {
        throw Error(Errc::param_out_of_interval, "stored breakpoint outside the interval");
      }
      if (k > 0 && breakpoints[k] < breakpoints[k - 1]) {
        throw Error(Errc::infeasible_range, "stored breakpoints decrease");
      }
      double gap = std::abs(domain.canonical_payment(breakpoints[k], bundles[k]) -
                            domain.canonical_payment(breakpoints[k], bundles[k + 1]));
      if (gap > kIndifferenceTol) {
        throw Error(Errc::infeasible_range,
                    "adjacent bundles are not indifferent at stored breakpoint " +
                        std::to_string(breakpoints[k]));
      }
    }
    require_restricted_floor(domain, bundles);
    return FiniteMechanism(std::move(domain), std::move(bundles), std::move(breakpoints));
  }

  Bundle evaluate(double r) const {
    if (!domain_.interval().contains(r)) {
      throw Error(Errc::param_out_of_interval,
                  "parameter " + std::to_string(r) + " outside the domain interval");
    }
    return rule_(r);
  }
  Bundle operator()(double r) const { return evaluate(r); }

  const D& domain() const noexcept { return domain_; }
  const std::vector<Bundle>& bundles() const noexcept { return rule_.bundles; }
  const std::vector<double>& breakpoints() const noexcept { return rule_.breakpoints; }
  const StepRule& rule() const noexcept { return rule_; }
  std::size_t size() const noexcept { return rule_.bundles.size(); }

 private:
  FiniteMechanism(D domain, std::vector<Bundle> bundles, std::vector<double> bps)
      : domain_(std::move(domain)), rule_{std::move(bundles), std::move(bps)} {}

  static std::string describe(const Bundle& z) {
    return "(" + std::to_string(z.t) + ", " + std::to_string(z.q) + ")";
  }

  // Restricted domains: buyers whose bound is below every positive payment
  // must be able to get (0,0).
  static void require_restricted_floor(const D& domain, const std::vector<Bundle>& bundles) {
    if (domain.kind() != Kind::restricted) return;
    const Bundle& first = bundles.front();
    if (first.t > 0.0 && domain.interval().lo < first.t) {
      throw Error(Errc::infeasible_range,
                  "restricted range must contain (0,0): types below " + std::to_string(first.t) +
                      " cannot afford any bundle");
    }
  }

  D domain_;
  StepRule rule_;
};

}  // namespace scmech
