#include <gtest/gtest.h>

#include "oracle.hpp"
#include "scmech/optimize.hpp"
#include "scmech/verify.hpp"

using namespace scmech;

namespace {

const Domain kQl(Family::quasilinear);

OptimizeOptions with_bundles(std::size_t l) {
  OptimizeOptions o;
  o.max_bundles = l;
  return o;
}

}  // namespace

TEST(PaymentsFromBreakpoints, Examples) {
  auto t = payments_from_breakpoints(kQl, {2, 4}, {0.5, 1});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_NEAR(t[0], 0 + 2 * (0.5 - 0), 1e-15);
  EXPECT_NEAR(t[1], t[0] + 4 * (1 - 0.5), 1e-15);

  auto my = payments_from_breakpoints(Domain(Family::myerson), {0.5}, {1});
  EXPECT_NEAR(my[0], 0.5, 1e-12);

  double expect = oracle::bisect([](double x) { return oracle::u_risk_averse(4.0, x, 1.0); }, 3.0, 4.0);
  auto ra = payments_from_breakpoints(Domain(Family::risk_averse), {4}, {1});
  EXPECT_NEAR(ra[0], expect, 1e-9);
  EXPECT_NEAR(ra[0], 4.0, 1e-12);
}

TEST(PaymentsFromBreakpoints, IncomeEffectMatchesOracle) {
  Domain d(Family::income_effect);
  auto t = payments_from_breakpoints(d, {1.0, 2.0}, {0.25, 0.81});
  double t1 = oracle::bisect([](double x) { return oracle::u_income(1.0, x, 0.25) - 0.0; }, 0.0, 5.0);
  double t2 = oracle::bisect(
      [&](double x) { return oracle::u_income(2.0, x, 0.81) - oracle::u_income(2.0, t1, 0.25); }, 0.0, 5.0);
  EXPECT_NEAR(t[0], t1, 1e-10);
  EXPECT_NEAR(t[1], t2, 1e-10);
}

TEST(PaymentsFromBreakpoints, Errors) {
  EXPECT_THROW(payments_from_breakpoints(kQl, {3, 2}, {0.5, 1}), Error);
  EXPECT_THROW(payments_from_breakpoints(kQl, {2, 3}, {0.7, 0.5}), Error);
  EXPECT_THROW(payments_from_breakpoints(kQl, {2}, {0.7, 0.5}), Error);
}

TEST(ClosedForm, Examples) {
  auto a = closed_form_deterministic(kQl, TypeDistribution::uniform(0, 1));
  EXPECT_NEAR(a.mechanism.breakpoints().at(0), 0.5, 1e-12);
  EXPECT_NEAR(a.revenue, 0.25, 1e-12);
  auto b = closed_form_deterministic(Domain(Family::myerson), TypeDistribution::uniform(0, 1));
  EXPECT_NEAR(b.mechanism.breakpoints().at(0), a.mechanism.breakpoints().at(0), 1e-12);
  EXPECT_NEAR(b.revenue, a.revenue, 1e-12);
  EXPECT_NEAR(expected_revenue(b.mechanism, TypeDistribution::uniform(0, 1), RevenueMode::expected_payment),
              b.revenue, 1e-12);
  auto c = closed_form_deterministic(kQl, TypeDistribution::uniform(1, 2));
  EXPECT_NEAR(c.revenue, 1.0, 1e-12);
  EXPECT_THROW(closed_form_deterministic(Domain(Family::income_effect), TypeDistribution::uniform(0, 1)), Error);
}

TEST(SolveFinite, QuasilinearCollapsesToPostedPrice) {
  auto u = TypeDistribution::uniform(0, 1);
  double prev = -kInf;
  for (std::size_t l = 2; l <= 6; ++l) {
    auto sol = solve_finite(kQl, u, with_bundles(l));
    EXPECT_NEAR(sol.revenue, 0.25, 1e-3) << l;
    EXPECT_EQ(sol.active_bundles, 2u) << l;
    EXPECT_NEAR(sol.mechanism.bundles().back().q, 1.0, 1e-6);
    EXPECT_NEAR(sol.mechanism.bundles().back().t, 0.5, 1e-3);
    EXPECT_NEAR(sol.revenue, expected_revenue(sol.mechanism, u), 1e-12);
    EXPECT_GE(sol.revenue, prev - 1e-9);
    prev = sol.revenue;
  }
}

TEST(SolveFinite, NarrowSupportSellsToEveryone) {
  auto u = TypeDistribution::uniform(1.0, 1.001);
  auto sol = solve_finite(kQl, u, with_bundles(3));
  EXPECT_NEAR(sol.revenue, 1.0, 1e-3);
  EXPECT_NEAR(sol.revenue, closed_form_deterministic(kQl, u).revenue, 1e-6);
}

TEST(SolveFinite, MyersonExpectedPayment) {
  OptimizeOptions o = with_bundles(3);
  o.mode = RevenueMode::expected_payment;
  auto sol = solve_finite(Domain(Family::myerson), TypeDistribution::uniform(0, 1), o);
  EXPECT_NEAR(sol.revenue, 0.25, 1e-3);
  EXPECT_EQ(sol.active_bundles, 2u);
}

TEST(SolveFinite, DeterministicAcrossWorkerCounts) {
  auto u = TypeDistribution::beta(2, 2);
  OptimizeOptions a = with_bundles(4);
  a.threads = 1;
  OptimizeOptions b = a;
  b.threads = 4;
  auto x = solve_finite(Domain(Family::income_effect), u, a);
  auto y = solve_finite(Domain(Family::income_effect), u, b);
  EXPECT_EQ(x.revenue, y.revenue);
  EXPECT_EQ(x.mechanism.bundles(), y.mechanism.bundles());
  EXPECT_EQ(x.mechanism.breakpoints(), y.mechanism.breakpoints());
  EXPECT_EQ(x.diagnostics.restart_scores, y.diagnostics.restart_scores);
}

TEST(SolveFinite, SolutionsPassVerification) {
  for (Family f : {Family::quasilinear, Family::income_effect, Family::payment_param, Family::risk_averse}) {
    Domain d(f);
    auto dist = TypeDistribution::uniform(0.5, 2.0);
    auto sol = solve_finite(d, dist, with_bundles(3));
    auto rep = verify_all(sol.mechanism, support_grid(dist, 200));
    EXPECT_TRUE(rep.pass()) << to_string(f);
    EXPECT_GE(sol.revenue, 0.0);
    EXPECT_LE(sol.revenue, revenue_upper_bound(d, dist) + 1e-12);
  }
}

TEST(SolveFinite, NotWorseThanBruteForce) {
  Domain d(Family::income_effect);
  auto dist = TypeDistribution::uniform(0.0, 2.0);
  std::vector<double> ts;
  for (int i = 0; i <= 15; ++i) ts.push_back(0.1 * i);
  auto bf = brute_force_optimal(d, dist, ts, {0.0, 0.5, 1.0}, 3);
  auto sol = solve_finite(d, dist, with_bundles(3));
  EXPECT_GE(sol.revenue, bf.revenue - 0.1);
}

TEST(SolveFinite, RejectsBadOptions) {
  auto u = TypeDistribution::uniform(0, 1);
  EXPECT_THROW(solve_finite(kQl, u, with_bundles(1)), Error);
  OptimizeOptions o;
  o.restarts = 0;
  EXPECT_THROW(solve_finite(kQl, u, o), Error);
  EXPECT_THROW(solve_finite(Domain(Family::power), TypeDistribution::uniform(0, 2), OptimizeOptions{}), Error);
}

TEST(LagrangeResiduals, VanishAtTheOptimum) {
  auto u = TypeDistribution::uniform(0, 1);
  for (std::size_t l : {2u, 4u}) {
    auto sol = solve_finite(kQl, u, with_bundles(l));
    for (double r : lagrange_residuals(sol.mechanism, u)) EXPECT_LE(std::abs(r), 1e-4);
  }
  // Away from the optimum the breakpoint equation is violated.
  auto off = FiniteMechanism<>::from_range(kQl, {{0, 0}, {0.3, 1}});
  EXPECT_GT(std::abs(lagrange_residuals(off, u)[0]), 0.1);
}

TEST(LagrangeResiduals, IrregularDistribution) {
  // Hazard is not monotone; the optimal posted price lies inside a linear piece
  // of the table, where the density is continuous.
  auto dist = TypeDistribution::tabulated({{0.0, 0.0}, {0.2, 0.3}, {0.4, 0.35}, {0.8, 0.9}, {1.0, 1.0}});
  EXPECT_FALSE(hazard_nondecreasing(dist));
  auto sol = solve_finite(kQl, dist, with_bundles(4));
  EXPECT_FALSE(sol.diagnostics.hazard_monotone);
  // Oracle: maximize p (1 - Gamma(p)) on a fine grid.
  double best = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    double p = i / 100000.0;
    best = std::max(best, p * (1 - dist.cdf(p)));
  }
  EXPECT_NEAR(sol.revenue, best, 1e-6);
  for (double r : lagrange_residuals(sol.mechanism, dist)) EXPECT_LE(std::abs(r), 1e-4);
}
