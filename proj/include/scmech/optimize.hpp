#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"
#include "scmech/parallel.hpp"
#include "scmech/revenue.hpp"
#include "scmech/roots.hpp"
#include "scmech/verify.hpp"

namespace scmech {

inline constexpr double kDuplicateTol = 1e-6;

struct OptimizeOptions {
  std::size_t max_bundles = 4;
  std::size_t restarts = 16;
  std::size_t max_sweeps = 60;
  double tolerance = 1e-10;
  std::uint64_t seed = 1;
  RevenueMode mode = RevenueMode::payment;
  unsigned threads = 0;
  std::size_t verify_grid = 200;
};

struct SolveDiagnostics {
  std::vector<double> restart_scores;
  std::size_t restarts_used = 0;
  bool hazard_monotone = true;
};

template <PreferenceDomain D>
struct Solution {
  FiniteMechanism<D> mechanism;
  double revenue;
  std::size_t active_bundles;
  SolveDiagnostics diagnostics;
};

namespace detail {

// Payments along the binding chain from (0,0); NaN marks a broken chain.
template <PreferenceDomain D>
std::vector<double> chain_payments(const D& domain, const double* thetas, const double* qs,
                                   std::size_t m) {
  std::vector<double> t(m);
  Bundle prev{0.0, 0.0};
  for (std::size_t k = 0; k < m; ++k) {
    if (qs[k] <= prev.q) {
      t[k] = prev.t;
    } else {
      double level = domain.canonical_payment(thetas[k], prev);
      t[k] = domain.level_payment(thetas[k], qs[k], level);
      if (std::isnan(t[k])) return std::vector<double>(m, std::numeric_limits<double>::quiet_NaN());
      t[k] = std::max(t[k], prev.t);
    }
    prev = Bundle{t[k], qs[k]};
  }
  return t;
}

}  // namespace detail

/// Payments that make each consecutive pair indifferent at its breakpoint,
/// starting from (0,0).
template <PreferenceDomain D>
std::vector<double> payments_from_breakpoints(const D& domain, const std::vector<double>& thetas,
                                              const std::vector<double>& qs) {
  if (thetas.size() != qs.size()) {
    throw Error(Errc::invalid_argument, "thetas and qs must have the same length");
  }
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (!domain.interval().contains(thetas[k])) {
      throw Error(Errc::param_out_of_interval, "breakpoint outside the parameter interval");
    }
    if (!(qs[k] >= 0.0 && qs[k] <= 1.0)) throw Error(Errc::invalid_argument, "q outside [0,1]");
    if (k > 0 && (thetas[k] < thetas[k - 1] || qs[k] < qs[k - 1])) {
      throw Error(Errc::invalid_argument, "thetas and qs must be nondecreasing");
    }
  }
  auto t = detail::chain_payments(domain, thetas.data(), qs.data(), thetas.size());
  for (double v : t) {
    if (std::isnan(v)) throw Error(Errc::infeasible_range, "no payment solves the binding indifference");
  }
  return t;
}

namespace detail {

// Reduced program: x = (theta_1..theta_m, q_1..q_m).
template <PreferenceDomain D>
struct Program {
  const D& domain;
  const TypeDistribution& dist;
  RevenueMode mode;
  std::size_t m;

  void project(std::vector<double>& x) const {
    for (std::size_t k = 0; k < m; ++k) {
      x[k] = std::clamp(x[k], dist.lower(), dist.upper());
      x[m + k] = std::clamp(x[m + k], 0.0, 1.0);
    }
    std::sort(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(x.begin() + static_cast<std::ptrdiff_t>(m), x.end());
  }

  double value(const std::vector<double>& x) const {
    auto t = chain_payments(domain, x.data(), x.data() + m, m);
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (std::isnan(t[k])) return -kInf;
      double hi = k + 1 < m ? dist.cdf(x[k + 1]) : 1.0;
      total += bundle_revenue(Bundle{t[k], x[m + k]}, mode) * (hi - dist.cdf(x[k]));
    }
    return total;
  }

  double operator()(std::vector<double> x) const {
    project(x);
    return value(x);
  }

  std::pair<double, double> bounds(const std::vector<double>& x, std::size_t i) const {
    bool is_theta = i < m;
    std::size_t k = is_theta ? i : i - m;
    std::size_t base = is_theta ? 0 : m;
    double lo = k == 0 ? (is_theta ? dist.lower() : 0.0) : x[base + k - 1];
    double hi = k + 1 == m ? (is_theta ? dist.upper() : 1.0) : x[base + k + 1];
    return {lo, hi};
  }
};

inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class F>
std::vector<double> nelder_mead(const F& f, std::vector<double> x0, double step, double tol,
                                std::size_t max_iter) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> s(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += step;
  for (std::size_t i = 0; i <= n; ++i) fv[i] = -f(s[i]);
  std::vector<std::size_t> idx(n + 1);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::size_t best = idx.front(), worst = idx.back(), second = idx[n - 1];
    if (std::abs(fv[worst] - fv[best]) <= tol) break;
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) c[d] += s[i][d] / static_cast<double>(n);
    }
    auto along = [&](double a) {
      std::vector<double> p(n);
      for (std::size_t d = 0; d < n; ++d) p[d] = c[d] + a * (s[worst][d] - c[d]);
      return p;
    };
    auto xr = along(-1.0);
    double fr = -f(xr);
    if (fr < fv[best]) {
      auto xe = along(-2.0);
      double fe = -f(xe);
      if (fe < fr) {
        s[worst] = std::move(xe);
        fv[worst] = fe;
      } else {
        s[worst] = std::move(xr);
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      s[worst] = std::move(xr);
      fv[worst] = fr;
    } else {
      auto xc = fr < fv[worst] ? along(-0.5) : along(0.5);
      double fc = -f(xc);
      if (fc < std::min(fr, fv[worst])) {
        s[worst] = std::move(xc);
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t d = 0; d < n; ++d) s[i][d] = s[best][d] + 0.5 * (s[i][d] - s[best][d]);
          fv[i] = -f(s[i]);
        }
      }
    }
  }
  std::size_t b = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return s[b];
}

// Coordinate sweeps (scan + golden section) followed by a Nelder-Mead
// polish; returns the objective at the projected result.
template <PreferenceDomain D>
double local_search(const Program<D>& prog, std::vector<double>& x, const OptimizeOptions& opts) {
  prog.project(x);
  double f = prog.value(x);
  auto sweeps = [&] {
    for (std::size_t s = 0; s < opts.max_sweeps; ++s) {
      double before = f;
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto [lo, hi] = prog.bounds(x, i);
        if (!(hi > lo)) continue;
        auto at = [&](double v) {
          double keep = x[i];
          x[i] = v;
          double r = prog.value(x);
          x[i] = keep;
          return r;
        };
        constexpr int kScan = 9;
        int best_j = -1;
        double best_v = f;
        for (int j = 0; j < kScan; ++j) {
          double v = at(lo + (hi - lo) * j / (kScan - 1));
          if (v > best_v) {
            best_v = v;
            best_j = j;
          }
        }
        double center = best_j >= 0 ? lo + (hi - lo) * best_j / (kScan - 1) : x[i];
        double width = (hi - lo) / (kScan - 1);
        double a = std::max(lo, center - width), b = std::min(hi, center + width);
        auto g = golden_maximize(at, a, b, 1e-12 * std::max(1.0, hi - lo));
        if (g.value > best_v) {
          best_v = g.value;
          center = g.x;
        }
        if (best_v > f) {
          x[i] = center;
          f = best_v;
        }
      }
      if (f - before <= opts.tolerance) break;
    }
  };
  sweeps();
  double span = std::max(1e-3, prog.dist.upper() - prog.dist.lower());
  auto polished = nelder_mead(prog, x, 0.02 * span, 1e-15, 400 * x.size());
  prog.project(polished);
  double fp = prog.value(polished);
  if (fp > f) {
    x = std::move(polished);
    f = fp;
    sweeps();
  }
  return f;
}

template <PreferenceDomain D>
std::vector<Bundle> range_from_point(const D& domain, const std::vector<double>& x, std::size_t m,
                                     double merge_tol) {
  auto t = chain_payments(domain, x.data(), x.data() + m, m);
  std::vector<Bundle> range{Bundle{0.0, 0.0}};
  for (std::size_t k = 0; k < m; ++k) {
    Bundle z{t[k], x[m + k]};
    if (near(z, range.back(), merge_tol) || !strictly_below(range.back(), z)) continue;
    range.push_back(z);
  }
  return range;
}

// Drops non-anchor bundles whose cell carries no probability mass.
template <PreferenceDomain D>
FiniteMechanism<D> drop_empty_cells(FiniteMechanism<D> fm, const TypeDistribution& dist) {
  for (;;) {
    const auto& bp = fm.breakpoints();
    std::optional<std::size_t> empty;
    for (std::size_t k = 1; k < fm.size(); ++k) {
      double lo = std::clamp(bp[k - 1], dist.lower(), dist.upper());
      double hi = k < bp.size() ? std::clamp(bp[k], dist.lower(), dist.upper()) : dist.upper();
      if (dist.mass(lo, hi) <= 1e-12) {
        empty = k;
        break;
      }
    }
    if (!empty) return fm;
    std::vector<Bundle> range = fm.bundles();
    range.erase(range.begin() + static_cast<std::ptrdiff_t>(*empty));
    fm = FiniteMechanism<D>::from_range(fm.domain(), std::move(range));
  }
}

inline bool lex_less(const std::vector<double>& a, const std::vector<double>& b, std::size_t m) {
  return std::lexicographical_compare(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(m),
                                      b.begin(), b.begin() + static_cast<std::ptrdiff_t>(m));
}

}  // namespace detail

/// Revenue-maximizing mechanism with at most opts.max_bundles bundles,
/// payments eliminated through the binding indifference chain.
template <PreferenceDomain D>
Solution<D> solve_finite(const D& domain, const TypeDistribution& dist,
                         const OptimizeOptions& opts = {}) {
  if (opts.max_bundles < 2) throw Error(Errc::invalid_argument, "max_bundles must be at least 2");
  if (!(opts.tolerance > 0.0)) throw Error(Errc::invalid_argument, "tolerance must be positive");
  if (opts.restarts < 1) throw Error(Errc::invalid_argument, "at least one restart is required");
  require_chart(domain, dist);

  std::size_t m = opts.max_bundles - 1;
  detail::Program<D> prog{domain, dist, opts.mode, m};

  std::vector<std::vector<double>> points(opts.restarts);
  std::vector<double> scores(opts.restarts);
  parallel_for(opts.restarts, worker_count(opts.threads), [&](std::size_t r) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    std::vector<double> x(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
      double jitter = r == 0 ? 0.0 : detail::unit_draw(rng) - 0.5;
      double u = (static_cast<double>(k) + 0.5 + 0.9 * jitter) / static_cast<double>(m);
      if (r > 0) u = std::clamp(0.5 * u + 0.5 * detail::unit_draw(rng), 0.0, 1.0);
      x[k] = dist.quantile(std::clamp(u, 0.0, 1.0));
      double qj = r == 0 ? 0.0 : detail::unit_draw(rng) - 0.5;
      x[m + k] = std::clamp((static_cast<double>(k) + 1.0 + 0.9 * qj) / static_cast<double>(m), 0.0, 1.0);
    }
    scores[r] = detail::local_search(prog, x, opts);
    points[r] = std::move(x);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < opts.restarts; ++r) {
    if (scores[r] > scores[best] ||
        (scores[r] == scores[best] && detail::lex_less(points[r], points[best], m))) {
      best = r;
    }
  }
  std::vector<double> x = points[best];
  double value = scores[best];

  // Greedy pruning: drop a (theta, q) pair whenever re-optimizing without it
  // loses no more than the tolerance.
  while (m > 1) {
    std::optional<std::vector<double>> chosen;
    double chosen_value = -kInf;
    detail::Program<D> smaller{domain, dist, opts.mode, m - 1};
    for (std::size_t k = 0; k < m; ++k) {
      std::vector<double> y;
      for (std::size_t i = 0; i < m; ++i) {
        if (i != k) y.push_back(x[i]);
      }
      for (std::size_t i = 0; i < m; ++i) {
        if (i != k) y.push_back(x[m + i]);
      }
      double v = detail::local_search(smaller, y, opts);
      if (v >= value - opts.tolerance && v > chosen_value) {
        chosen_value = v;
        chosen = std::move(y);
      }
    }
    if (!chosen) break;
    x = std::move(*chosen);
    value = std::max(value, chosen_value);
    --m;
  }

  auto build = [&](double merge_tol) {
    auto range = detail::range_from_point(domain, x, m, merge_tol);
    return detail::drop_empty_cells(FiniteMechanism<D>::from_range(domain, std::move(range)), dist);
  };
  std::optional<FiniteMechanism<D>> built;
  try {
    built.emplace(build(kDuplicateTol));
  } catch (const Error& e) {
    if (e.code() != Errc::infeasible_range) throw;
    built.emplace(build(0.0));  // merged near-duplicates broke breakpoint order
  }
  FiniteMechanism<D> fm = std::move(*built);
  auto grid = support_grid(dist, opts.verify_grid);
  auto g = refine_with_breakpoints(grid, fm.breakpoints());
  auto ic = check_strategy_proof(domain, fm, g, kIcTol, opts.threads);
  auto ir = check_individual_rationality(domain, fm, g);
  if (!ic.pass() || !ir.pass()) {
    throw Error(Errc::verification_failed, "optimized mechanism failed the incentive or participation check");
  }
  double revenue = expected_revenue(fm, dist, opts.mode);
  std::size_t active = fm.size();
  SolveDiagnostics diag{std::move(scores), opts.restarts, hazard_nondecreasing(dist)};
  return Solution<D>{std::move(fm), revenue, active, std::move(diag)};
}

/// Posted-price optimum {(0,0), (theta*, 1)} with theta* the root of the
/// virtual valuation. Quasilinear and Myerson domains only.
inline Solution<Domain> closed_form_deterministic(const Domain& domain, const TypeDistribution& dist) {
  if (domain.family() != Family::quasilinear && domain.family() != Family::myerson) {
    throw Error(Errc::invalid_argument, "closed form is available for quasilinear and myerson only");
  }
  require_chart(domain, dist);
  Reserve res = inverse_virtual(dist);
  double th = res.theta;
  std::vector<Bundle> range;
  if (th > 0.0) range = {Bundle{0.0, 0.0}, Bundle{th, 1.0}};
  else range = {Bundle{0.0, 1.0}};
  auto fm = FiniteMechanism<Domain>::from_range(domain, std::move(range));
  double revenue = th * (1.0 - dist.cdf(th));
  std::size_t active = fm.size();
  return Solution<Domain>{std::move(fm), revenue, active, SolveDiagnostics{{}, 0, res.hazard_monotone}};
}

/// Stationarity residuals of the Lagrangian for the quasilinear program,
/// with multipliers lambda_k = -(1 - Gamma(theta_k)). Entries 0..m-1 are the
/// breakpoint equations, m..2m-1 the payment equations.
inline std::vector<double> lagrange_residuals(const FiniteMechanism<Domain>& mech,
                                              const TypeDistribution& dist) {
  if (mech.domain().family() != Family::quasilinear) {
    throw Error(Errc::invalid_argument, "Lagrange residuals are defined for the quasilinear program");
  }
  const auto& z = mech.bundles();
  const auto& th = mech.breakpoints();
  const std::size_t m = th.size();
  std::vector<double> res(2 * m, 0.0);
  auto lambda = [&](std::size_t k) { return -(1.0 - dist.cdf(th[k])); };
  for (std::size_t k = 0; k < m; ++k) {
    const Bundle& lo = z[k];
    const Bundle& hi = z[k + 1];
    res[k] = (lo.t - hi.t) * dist.pdf(th[k]) - lambda(k) * (hi.q - lo.q);
    double next = k + 1 < m ? dist.cdf(th[k + 1]) : 1.0;
    double lam_next = k + 1 < m ? lambda(k + 1) : 0.0;
    res[m + k] = (next - dist.cdf(th[k])) + lambda(k) - lam_next;
  }
  return res;
}

}  // namespace scmech
