#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"
#include "scmech/revenue.hpp"

namespace scmech {

inline constexpr std::size_t kDefaultIndexCap = 1'000'000;

/// Segment {(t, slope t) : t in [t_lo, t_hi]} of candidate bundles.
struct AnchorLine {
  double slope;
  double t_lo;
  double t_hi;
};

/// theta(0), theta(1), ... converging monotonically to `limit`.
struct ParamSequence {
  std::function<double(std::size_t)> theta;
  double limit;
};

/// Mechanism whose range is a closed countable set with a single limit
/// bundle. Each tail is a generator; index 0 is the bundle farthest from
/// the limit.
template <PreferenceDomain D = Domain>
class CountableMechanism {
 public:
  using Generator = std::function<Bundle(std::size_t)>;

  struct Tail {
    Generator bundle;
    double limit_param;  // where the tail's breakpoints accumulate
  };

  CountableMechanism(D domain, Bundle limit, std::optional<Tail> lower, std::optional<Tail> upper,
                     std::size_t index_cap = kDefaultIndexCap)
      : domain_(std::move(domain)),
        limit_(limit),
        lower_(std::move(lower)),
        upper_(std::move(upper)),
        cap_(index_cap) {
    require_valid(limit_);
    if (cap_ < 2) throw Error(Errc::invalid_argument, "index cap must be at least 2");
  }

  const D& domain() const noexcept { return domain_; }
  const Bundle& limit() const noexcept { return limit_; }
  bool has_lower() const noexcept { return lower_.has_value(); }
  bool has_upper() const noexcept { return upper_.has_value(); }
  std::size_t index_cap() const noexcept { return cap_; }

  Bundle lower_bundle(std::size_t n) const { return lower_->bundle(n); }
  Bundle upper_bundle(std::size_t n) const { return upper_->bundle(n); }

  /// Switch point between lower_bundle(n) and lower_bundle(n+1). Once the two
  /// bundles coincide in floating point the tail has converged and the limit
  /// parameter is returned.
  double lower_breakpoint(std::size_t n) const {
    Bundle a = lower_->bundle(n), b = lower_->bundle(n + 1);
    if (!strictly_below(a, b)) return lower_->limit_param;
    return special_preference(domain_, a, b);
  }
  /// Switch point between upper_bundle(n+1) and upper_bundle(n).
  double upper_breakpoint(std::size_t n) const {
    Bundle a = upper_->bundle(n + 1), b = upper_->bundle(n);
    if (!strictly_below(a, b)) return upper_->limit_param;
    return special_preference(domain_, a, b);
  }

  /// Lowest type receiving the limit bundle.
  double lower_limit_param() const noexcept {
    return lower_ ? lower_->limit_param : domain_.interval().lo;
  }
  /// Highest type receiving the limit bundle.
  double upper_limit_param() const noexcept {
    return upper_ ? upper_->limit_param : domain_.interval().hi;
  }

  Bundle evaluate(double r) const {
    if (!domain_.interval().contains(r)) {
      throw Error(Errc::param_out_of_interval,
                  "parameter " + std::to_string(r) + " outside the domain interval");
    }
    if (lower_ && r < lower_->limit_param) {
      // first n with breakpoint(n) > r
      std::size_t lo = 0, hi = cap_ - 1;
      while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (lower_breakpoint(mid) > r) hi = mid;
        else lo = mid + 1;
      }
      return lower_->bundle(lo);
    }
    if (upper_ && r > upper_->limit_param) {
      // first n with breakpoint(n) <= r
      std::size_t lo = 0, hi = cap_ - 1;
      while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (upper_breakpoint(mid) <= r) hi = mid;
        else lo = mid + 1;
      }
      return upper_->bundle(lo);
    }
    return limit_;
  }
  Bundle operator()(double r) const { return evaluate(r); }

 private:
  D domain_;
  Bundle limit_;
  std::optional<Tail> lower_;
  std::optional<Tail> upper_;
  std::size_t cap_;
};

namespace detail {

inline void require_convergent(const ParamSequence& seq, std::size_t cap, bool increasing,
                               const char* which) {
  if (!seq.theta) throw Error(Errc::invalid_argument, std::string(which) + " sequence is empty");
  double d0 = std::abs(seq.theta(0) - seq.limit);
  double dc = std::abs(seq.theta(cap - 1) - seq.limit);
  if (!std::isfinite(d0) || !std::isfinite(dc)) {
    throw Error(Errc::invalid_argument, std::string(which) + " sequence is not finite");
  }
  if (d0 == 0.0 && dc == 0.0) return;
  bool ok = dc < d0 && dc <= 1e-3 * std::max(1.0, std::abs(seq.limit));
  double prev = seq.theta(0);
  for (std::size_t n = 1; ok && n < cap; n = n < 64 ? n + 1 : n * 2) {
    double cur = seq.theta(n);
    if (increasing ? (cur < prev || cur > seq.limit) : (cur > prev || cur < seq.limit)) ok = false;
    prev = cur;
  }
  if (!ok) {
    throw Error(Errc::invalid_argument,
                std::string(which) + " parameter sequence does not converge monotonically to " +
                    std::to_string(seq.limit));
  }
}

}  // namespace detail

/// Countable mechanism whose range is the sequence of best responses on an
/// anchor line. Either tail may be omitted; a constant sequence yields no
/// tail.
template <PreferenceDomain D>
CountableMechanism<D> countable_geometric(D domain, AnchorLine line,
                                          std::optional<ParamSequence> increasing,
                                          std::optional<ParamSequence> decreasing = std::nullopt,
                                          std::size_t index_cap = kDefaultIndexCap) {
  if (!(line.slope > 0.0 && line.t_lo >= 0.0 && line.t_lo <= line.t_hi &&
        line.slope * line.t_hi <= 1.0 + 1e-12)) {
    throw Error(Errc::invalid_argument, "anchor line must lie inside [0,inf)x[0,1]");
  }
  if (!increasing && !decreasing) {
    throw Error(Errc::invalid_argument, "at least one parameter sequence is required");
  }
  if (increasing && decreasing && increasing->limit != decreasing->limit) {
    throw Error(Errc::invalid_argument, "both sequences must share the limit");
  }
  double lim = increasing ? increasing->limit : decreasing->limit;
  Bundle limit = line_argmax(domain, lim, line.slope, line.t_lo, line.t_hi);

  using Mech = CountableMechanism<D>;
  auto make_tail = [&](const ParamSequence& seq, bool inc) -> std::optional<typename Mech::Tail> {
    detail::require_convergent(seq, index_cap, inc, inc ? "increasing" : "decreasing");
    if (seq.theta(0) == seq.limit) return std::nullopt;
    auto gen = [domain, line, theta = seq.theta](std::size_t n) {
      return line_argmax(domain, theta(n), line.slope, line.t_lo, line.t_hi);
    };
    for (std::size_t n = 0; n < 4; ++n) {
      Bundle a = gen(n), b = gen(n + 1);
      if (!(inc ? strictly_below(a, b) : strictly_below(b, a))) {
        throw Error(Errc::non_diagonal, "best responses on the anchor line are not strictly ordered");
      }
    }
    return typename Mech::Tail{gen, seq.limit};
  };
  std::optional<typename Mech::Tail> lo, hi;
  if (increasing) lo = make_tail(*increasing, true);
  if (decreasing) hi = make_tail(*decreasing, false);
  return Mech(std::move(domain), limit, std::move(lo), std::move(hi), index_cap);
}

struct CountableRevenue {
  double value;
  double error_bound;  // bound on the tail approximation beyond the last summed cell
  std::size_t terms;
};

namespace detail {

// Sums one tail's cells; `cells(n)` returns {bundle, cell_lo, cell_hi}.
template <class CellFn>
void sum_tail(const CellFn& cells, std::size_t cap, const TypeDistribution& dist, RevenueMode mode,
              double rev_limit, double limit_param, bool lower_side, CountableRevenue& acc) {
  double edge_prev = lower_side ? dist.lower() : dist.upper();
  for (std::size_t n = 0; n < cap; ++n) {
    auto [z, a, b] = cells(n);
    // Keep cells contiguous and ordered when deep breakpoints lose precision.
    if (lower_side) {
      a = edge_prev;
      b = std::clamp(b, a, dist.upper());
      edge_prev = b;
    } else {
      b = edge_prev;
      a = std::clamp(a, dist.lower(), b);
      edge_prev = a;
    }
    acc.value += bundle_revenue(z, mode) * dist.mass(a, b);
    ++acc.terms;
    double edge = lower_side ? b : a;
    double rest = lower_side ? dist.mass(edge, limit_param) : dist.mass(limit_param, edge);
    double bound = std::abs(bundle_revenue(z, mode) - rev_limit) * rest;
    if (bound <= 1e-13 || n + 1 == cap) {
      acc.value += rev_limit * rest;
      acc.error_bound += bound;
      return;
    }
  }
}

}  // namespace detail

/// Expected revenue of a countable mechanism, summed cell by cell until the
/// remaining mass times the residual payment spread is negligible.
template <PreferenceDomain D>
CountableRevenue expected_revenue(const CountableMechanism<D>& m, const TypeDistribution& dist,
                                  RevenueMode mode = RevenueMode::payment) {
  require_chart(m.domain(), dist);
  CountableRevenue acc{0.0, 0.0, 0};
  double rev_l = bundle_revenue(m.limit(), mode);
  double rlo = std::clamp(m.lower_limit_param(), dist.lower(), dist.upper());
  double rhi = std::clamp(m.upper_limit_param(), dist.lower(), dist.upper());
  if (m.has_lower()) {
    double start = -kInf;
    auto cells = [&](std::size_t n) {
      double s = m.lower_breakpoint(n);
      std::tuple<Bundle, double, double> cell{m.lower_bundle(n), start, s};
      start = s;
      return cell;
    };
    detail::sum_tail(cells, m.index_cap() - 1, dist, mode, rev_l, rlo, true, acc);
  }
  acc.value += rev_l * dist.mass(rlo, rhi);
  if (m.has_upper()) {
    double end = kInf;
    auto cells = [&](std::size_t n) {
      double s = m.upper_breakpoint(n);
      std::tuple<Bundle, double, double> cell{m.upper_bundle(n), s, end};
      end = s;
      return cell;
    };
    detail::sum_tail(cells, m.index_cap() - 1, dist, mode, rev_l, rhi, false, acc);
  }
  return acc;
}

template <PreferenceDomain D>
struct TruncationResult {
  FiniteMechanism<D> mechanism;
  double countable_revenue;
  double truncated_revenue;
  double gap;         // countable_revenue - truncated_revenue
  double tail_bound;  // revenue mass attributed to the cut tails, < eps
  std::size_t lower_cut;  // number of lower-tail bundles kept minus one
  std::size_t upper_cut;
  bool dominates;  // truncation earns strictly more than the countable mechanism
};

/// Finite approximation of a countable mechanism: keep the first w+1 lower
/// bundles and q+1 upper bundles, hand the limit bundle to everyone in
/// between. Cuts are the smallest with tail mass below eps/2 on each side.
template <PreferenceDomain D>
TruncationResult<D> epsilon_truncate(const CountableMechanism<D>& m, double eps,
                                     const TypeDistribution& dist,
                                     RevenueMode mode = RevenueMode::payment) {
  if (!(eps > 0.0)) throw Error(Errc::invalid_argument, "eps must be positive");
  require_chart(m.domain(), dist);
  double rev_l = bundle_revenue(m.limit(), mode);
  double t_bar = revenue_upper_bound(m.domain(), dist);
  double rlo = std::clamp(m.lower_limit_param(), dist.lower(), dist.upper());
  double rhi = std::clamp(m.upper_limit_param(), dist.lower(), dist.upper());

  std::vector<Bundle> range;
  std::size_t w = 0, q = 0;
  double bound = 0.0;
  if (m.has_lower()) {
    double start = dist.lower();
    for (w = 0;; ++w) {
      if (w + 1 >= m.index_cap()) {
        throw Error(Errc::tractability, "index cap reached before the lower tail mass fell below eps/2");
      }
      if (w > 0) start = std::clamp(m.lower_breakpoint(w - 1), dist.lower(), dist.upper());
      double tail = rev_l * dist.mass(start, rlo);
      if (tail < eps / 2.0) {
        bound += tail;
        break;
      }
    }
    for (std::size_t n = 0; n <= w; ++n) range.push_back(m.lower_bundle(n));
  }
  range.push_back(m.limit());
  if (m.has_upper()) {
    double end = dist.upper();
    for (q = 0;; ++q) {
      if (q + 1 >= m.index_cap()) {
        throw Error(Errc::tractability, "index cap reached before the upper tail mass fell below eps/2");
      }
      if (q > 0) end = std::clamp(m.upper_breakpoint(q - 1), dist.lower(), dist.upper());
      double tail = t_bar * dist.mass(rhi, end);
      if (tail < eps / 2.0) {
        bound += tail;
        break;
      }
    }
    for (std::size_t n = q + 1; n-- > 0;) range.push_back(m.upper_bundle(n));
  }
  auto fm = FiniteMechanism<D>::from_range(m.domain(), std::move(range));
  double truncated = expected_revenue(fm, dist, mode);
  double countable = expected_revenue(m, dist, mode).value;
  return TruncationResult<D>{std::move(fm), countable, truncated, countable - truncated, bound,
                             w, q, truncated > countable};
}

}  // namespace scmech
