#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <tuple>
#include <vector>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"
#include "scmech/parallel.hpp"
#include "scmech/revenue.hpp"

namespace scmech {

struct Violation {
  enum class Kind { IC, IR, MONO, CONT };
  Kind kind;
  double truthful_r;
  std::optional<double> deviant_r;
  double gain;  // canonical-payment units (bundle units for MONO)
};

inline const char* to_string(Violation::Kind k) noexcept {
  switch (k) {
    case Violation::Kind::IC: return "IC";
    case Violation::Kind::IR: return "IR";
    case Violation::Kind::MONO: return "MONO";
    case Violation::Kind::CONT: return "CONT";
  }
  return "?";
}

struct VerificationReport {
  std::vector<Violation> violations;
  std::size_t grid_size = 0;
  double tolerance = 0.0;

  bool pass() const noexcept { return violations.empty(); }

  std::size_t count(Violation::Kind k) const noexcept {
    return static_cast<std::size_t>(std::count_if(
        violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
  }

  const Violation* worst(Violation::Kind k) const noexcept {
    const Violation* best = nullptr;
    for (const auto& v : violations) {
      if (v.kind == k && (!best || v.gain > best->gain)) best = &v;
    }
    return best;
  }

  /// Sort by truthful type, then deviant type (none first), then kind.
  void normalize() {
    std::sort(violations.begin(), violations.end(), [](const Violation& a, const Violation& b) {
      double da = a.deviant_r.value_or(-kInf), db = b.deviant_r.value_or(-kInf);
      bool ha = a.deviant_r.has_value(), hb = b.deviant_r.has_value();
      return std::tie(a.truthful_r, ha, da, a.kind) < std::tie(b.truthful_r, hb, db, b.kind);
    });
  }

  void merge(const VerificationReport& other) {
    violations.insert(violations.end(), other.violations.begin(), other.violations.end());
    grid_size = std::max(grid_size, other.grid_size);
    tolerance = std::max(tolerance, other.tolerance);
    normalize();
  }
};

/// n evenly spaced points on [lo, hi], endpoints included.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

inline std::vector<double> support_grid(const TypeDistribution& dist, std::size_t n) {
  return linear_grid(dist.lower(), dist.upper(), n);
}

/// Adds each breakpoint and its neighbours at +-delta that fall inside
/// [grid.front(), grid.back()].
inline std::vector<double> refine_with_breakpoints(std::vector<double> grid,
                                                   const std::vector<double>& breakpoints,
                                                   double delta = 1e-10) {
  if (grid.empty()) return grid;
  double lo = *std::min_element(grid.begin(), grid.end());
  double hi = *std::max_element(grid.begin(), grid.end());
  for (double b : breakpoints) {
    for (double x : {b - delta, b, b + delta}) {
      if (x >= lo && x <= hi) grid.push_back(x);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// Pairwise misreport check on the grid: flags f_r(F(r)) > f_r(F(r')) + tol.
template <PreferenceDomain D, class Mech>
VerificationReport check_strategy_proof(const D& domain, const Mech& mech_fn,
                                        const std::vector<double>& grid, double tol = kIcTol,
                                        unsigned threads = 0) {
  const std::size_t n = grid.size();
  std::vector<Bundle> alloc(n);
  for (std::size_t i = 0; i < n; ++i) alloc[i] = mech_fn(grid[i]);

  std::vector<std::vector<Violation>> rows(n);
  parallel_for(n, worker_count(threads), [&](std::size_t i) {
    double r = grid[i];
    if (!admissible(domain, r, alloc[i])) return;  // reported by the IR check
    double own = domain.canonical_payment(r, alloc[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !admissible(domain, r, alloc[j])) continue;
      double gain = own - domain.canonical_payment(r, alloc[j]);
      if (gain > tol) rows[i].push_back({Violation::Kind::IC, r, grid[j], gain});
    }
  });
  VerificationReport rep;
  rep.grid_size = n;
  rep.tolerance = tol;
  for (auto& row : rows) rep.violations.insert(rep.violations.end(), row.begin(), row.end());
  rep.normalize();
  return rep;
}

/// Flags grid types that strictly prefer (0,0) to their allocation.
template <PreferenceDomain D, class Mech>
VerificationReport check_individual_rationality(const D& domain, const Mech& mech_fn,
                                                const std::vector<double>& grid,
                                                double tol = kIndifferenceTol) {
  VerificationReport rep;
  rep.grid_size = grid.size();
  rep.tolerance = tol;
  for (double r : grid) {
    Bundle z = mech_fn(r);
    if (!admissible(domain, r, z)) {
      auto bound = domain.payment_bound(r);
      rep.violations.push_back({Violation::Kind::IR, r, std::nullopt, z.t - bound.value_or(0.0)});
      continue;
    }
    double gain = domain.canonical_payment(r, z) - domain.canonical_payment(r, Bundle{0.0, 0.0});
    if (gain > tol) rep.violations.push_back({Violation::Kind::IR, r, std::nullopt, gain});
  }
  rep.normalize();
  return rep;
}

/// Monotonicity on consecutive grid points and indifference at every
/// breakpoint inside the grid span.
template <PreferenceDomain D>
VerificationReport check_shape(const D& domain, const StepRule& rule,
                               const std::vector<double>& grid, double tol = kIndifferenceTol) {
  VerificationReport rep;
  rep.grid_size = grid.size();
  rep.tolerance = tol;
  std::vector<double> g = grid;
  std::sort(g.begin(), g.end());
  for (std::size_t i = 1; i < g.size(); ++i) {
    Bundle a = rule(g[i - 1]), b = rule(g[i]);
    double drop = std::max(a.t - b.t, a.q - b.q);
    if (drop > 0.0) rep.violations.push_back({Violation::Kind::MONO, g[i - 1], g[i], drop});
  }
  if (!g.empty()) {
    for (std::size_t k = 0; k < rule.breakpoints.size(); ++k) {
      double r = rule.breakpoints[k];
      if (r < g.front() || r > g.back()) continue;
      const Bundle& lo = rule.bundles[k];
      const Bundle& hi = rule.bundles[k + 1];
      double gap;
      if (!admissible(domain, r, lo) || !admissible(domain, r, hi)) {
        auto bound = domain.payment_bound(r).value_or(kInf);
        gap = std::max(lo.t, hi.t) - bound;
      } else {
        gap = std::abs(domain.canonical_payment(r, lo) - domain.canonical_payment(r, hi));
      }
      if (gap > tol) rep.violations.push_back({Violation::Kind::CONT, r, std::nullopt, gap});
    }
  }
  rep.normalize();
  return rep;
}

template <PreferenceDomain D>
VerificationReport check_shape(const FiniteMechanism<D>& mech, const std::vector<double>& grid,
                               double tol = kIndifferenceTol) {
  return check_shape(mech.domain(), mech.rule(), grid, tol);
}

/// IC, IR and shape checks on one grid; a finite mechanism's own
/// breakpoints are added to the grid.
template <PreferenceDomain D>
VerificationReport verify_all(const FiniteMechanism<D>& mech, const std::vector<double>& grid,
                              unsigned threads = 0) {
  auto g = refine_with_breakpoints(grid, mech.breakpoints());
  auto rep = check_strategy_proof(mech.domain(), mech, g, kIcTol, threads);
  rep.merge(check_individual_rationality(mech.domain(), mech, g));
  rep.merge(check_shape(mech, g));
  rep.grid_size = g.size();
  rep.tolerance = kIcTol;
  return rep;
}

template <PreferenceDomain D>
struct BruteForceResult {
  FiniteMechanism<D> mechanism;
  double revenue;
  std::size_t candidates;  // chains evaluated
};

inline constexpr double kBruteForceLimit = 1e7;

/// Exhaustive search over ordered ranges from the grid product that start
/// at (0,0) and hold at most max_bundles bundles.
template <PreferenceDomain D>
BruteForceResult<D> brute_force_optimal(const D& domain, const TypeDistribution& dist,
                                        std::vector<double> t_grid, std::vector<double> q_grid,
                                        std::size_t max_bundles,
                                        RevenueMode mode = RevenueMode::payment) {
  if (max_bundles < 1) throw Error(Errc::invalid_argument, "max_bundles must be at least 1");
  require_chart(domain, dist);
  for (auto* g : {&t_grid, &q_grid}) {
    std::sort(g->begin(), g->end());
    g->erase(std::unique(g->begin(), g->end()), g->end());
  }
  if (t_grid.empty() || q_grid.empty() || t_grid.front() != 0.0 || q_grid.front() != 0.0) {
    throw Error(Errc::invalid_argument, "grids must contain 0 so that (0,0) is available");
  }
  std::vector<Bundle> pts;
  for (double q : q_grid) {
    for (double t : t_grid) {
      if (t == 0.0 && q == 0.0) continue;
      Bundle z{t, q};
      if (!is_valid(z)) throw Error(Errc::inadmissible_bundle, "grid bundle outside [0,inf)x[0,1]");
      pts.push_back(z);
    }
  }
  // Upper bound on the number of chains, ignoring the diagonal filter.
  double total = 0.0, binom = 1.0;
  const double m = static_cast<double>(pts.size());
  for (std::size_t k = 0; k < max_bundles; ++k) {
    total += binom;
    binom *= (m - static_cast<double>(k)) / static_cast<double>(k + 1);
    if (total > kBruteForceLimit) break;
  }
  if (total > kBruteForceLimit) {
    throw Error(Errc::tractability, "brute-force enumeration exceeds 1e7 candidate ranges");
  }

  std::optional<FiniteMechanism<D>> best;
  double best_rev = -kInf;
  std::size_t evaluated = 0;
  std::vector<Bundle> chain{Bundle{0.0, 0.0}};
  auto consider = [&] {
    ++evaluated;
    try {
      auto fm = FiniteMechanism<D>::from_range(domain, chain);
      double rev = expected_revenue(fm, dist, mode);
      if (rev > best_rev) {
        best_rev = rev;
        best.emplace(std::move(fm));
      }
    } catch (const Error& e) {
      if (e.code() != Errc::infeasible_range && e.code() != Errc::no_sign_change) throw;
    }
  };
  auto dfs = [&](auto&& self, std::size_t start) -> void {
    consider();
    if (chain.size() >= max_bundles) return;
    for (std::size_t j = start; j < pts.size(); ++j) {
      if (!strictly_below(chain.back(), pts[j])) continue;
      chain.push_back(pts[j]);
      self(self, j + 1);
      chain.pop_back();
    }
  };
  dfs(dfs, 0);
  return BruteForceResult<D>{std::move(*best), best_rev, evaluated};
}

}  // namespace scmech
