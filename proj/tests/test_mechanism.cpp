#include <gtest/gtest.h>

#include <random>

#include "scmech/mechanism.hpp"
#include "scmech/verify.hpp"

using namespace scmech;

namespace {

FiniteMechanism<> three_step() {
  return FiniteMechanism<>::from_range(Domain(Family::quasilinear), {{0, 0}, {1, 0.5}, {3, 1}});
}

// Random ordered range that from_range accepts for the family.
std::optional<FiniteMechanism<>> random_range(const Domain& d, std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> qs(n), dt(n);
  for (auto& q : qs) q = unit(rng);
  std::sort(qs.begin(), qs.end());
  std::vector<Bundle> z{{0.0, 0.0}};
  double t = 0.0, q = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (qs[k] <= q + 1e-3) continue;
    t += 0.05 + unit(rng);
    q = qs[k];
    z.push_back({t, q});
  }
  try {
    return FiniteMechanism<>::from_range(d, z);
  } catch (const Error& e) {
    if (e.code() == Errc::infeasible_range || e.code() == Errc::no_sign_change) return std::nullopt;
    throw;
  }
}

}  // namespace

TEST(FromRange, QuasilinearBreakpoints) {
  auto m = three_step();
  ASSERT_EQ(m.breakpoints().size(), 2u);
  // Independent: slope of each segment.
  EXPECT_NEAR(m.breakpoints()[0], (1.0 - 0.0) / (0.5 - 0.0), 1e-12);
  EXPECT_NEAR(m.breakpoints()[1], (3.0 - 1.0) / (1.0 - 0.5), 1e-12);
}

TEST(FromRange, Singleton) {
  auto m = FiniteMechanism<>::from_range(Domain(Family::quasilinear), {{0.4, 0.3}});
  EXPECT_TRUE(m.breakpoints().empty());
  EXPECT_EQ(m.evaluate(0.0), (Bundle{0.4, 0.3}));
  EXPECT_EQ(m.evaluate(17.0), (Bundle{0.4, 0.3}));
}

TEST(FromRange, CaseRule) {
  auto m = three_step();
  EXPECT_EQ(m.evaluate(1.0), (Bundle{0, 0}));
  EXPECT_EQ(m.evaluate(3.0), (Bundle{1, 0.5}));
  EXPECT_EQ(m.evaluate(2.0), (Bundle{1, 0.5}));  // tie goes up
  EXPECT_EQ(m.evaluate(4.0), (Bundle{3, 1}));
  EXPECT_EQ(m.evaluate(5.0), (Bundle{3, 1}));
}

TEST(FromRange, UnsortedInputIsSorted) {
  auto m = FiniteMechanism<>::from_range(Domain(Family::quasilinear), {{3, 1}, {0, 0}, {1, 0.5}});
  EXPECT_EQ(m.bundles().front(), (Bundle{0, 0}));
  EXPECT_EQ(m.bundles().back(), (Bundle{3, 1}));
}

TEST(FromRange, Errors) {
  Domain d(Family::quasilinear);
  try {
    FiniteMechanism<>::from_range(d, {{0, 0}, {1, 0.5}, {0.5, 0.8}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_diagonal);
  }
  try {
    // Slopes 4 then 1: breakpoints decrease.
    FiniteMechanism<>::from_range(d, {{0, 0}, {2, 0.5}, {2.5, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::infeasible_range);
    EXPECT_NE(std::string(e.what()).find("(2.5"), std::string::npos);
  }
  EXPECT_THROW(FiniteMechanism<>::from_range(d, {}), Error);
  EXPECT_THROW(three_step().evaluate(-1.0), Error);
}

TEST(FromRange, RestrictedFloor) {
  Domain my(Family::myerson);
  try {
    FiniteMechanism<>::from_range(my, {{0.3, 0.5}, {0.6, 1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::infeasible_range);
  }
  auto m = FiniteMechanism<>::from_range(my, {{0, 0}, {0.3, 0.5}, {0.6, 1.0}});
  EXPECT_NEAR(m.breakpoints()[0], 0.3, 1e-12);
  EXPECT_NEAR(m.breakpoints()[1], (1.0 * 0.6 - 0.5 * 0.3) / 0.5, 1e-12);
}

TEST(FromParts, ValidatesInvariants) {
  Domain d(Family::quasilinear);
  EXPECT_NO_THROW(FiniteMechanism<>::from_parts(d, {{0, 0}, {1, 0.5}, {3, 1}}, {2, 4}));
  EXPECT_THROW(FiniteMechanism<>::from_parts(d, {{0, 0}, {1, 0.5}, {3, 1}}, {2.1, 4}), Error);
  EXPECT_THROW(FiniteMechanism<>::from_parts(d, {{0, 0}, {1, 0.5}, {3, 1}}, {4}), Error);
  EXPECT_THROW(FiniteMechanism<>::from_parts(d, {{0, 0}, {1, 0.5}}, {-2}), Error);
}

class Soundness : public ::testing::TestWithParam<Family> {};

TEST_P(Soundness, RandomRangesAreMonotoneContinuousAndStrategyProof) {
  Domain d(GetParam());
  std::mt19937_64 rng(static_cast<unsigned>(GetParam()) + 100);
  int built = 0, attempts = 0;
  while (built < 25 && attempts < 2000) {
    ++attempts;
    auto m = random_range(d, rng, 4);
    if (!m) continue;
    ++built;
    const auto& bps = m->breakpoints();
    double lo = d.interval().lo;
    double hi = bps.empty() ? lo + 1.0 : bps.back() * 1.2 + 0.1;
    if (std::isfinite(d.interval().hi)) hi = std::min(hi, d.interval().hi - 1e-9);
    auto grid = linear_grid(lo, hi, 200);
    // Monotone.
    for (std::size_t i = 1; i < grid.size(); ++i) {
      Bundle a = m->evaluate(grid[i - 1]), b = m->evaluate(grid[i]);
      EXPECT_LE(a.t, b.t);
      EXPECT_LE(a.q, b.q);
    }
    // Indifference at every breakpoint, and no third bundle indifferent there.
    for (std::size_t k = 0; k < bps.size(); ++k) {
      EXPECT_EQ(prefers(d, bps[k], m->bundles()[k], m->bundles()[k + 1]), Choice::indifferent);
      int ties = 0;
      for (const auto& z : m->bundles()) {
        if (admissible(d, bps[k], z) && prefers(d, bps[k], z, m->bundles()[k]) == Choice::indifferent) ++ties;
      }
      EXPECT_LE(ties, 2 + static_cast<int>(std::count(bps.begin(), bps.end(), bps[k])) - 1);
    }
    // Truthful report never strictly worse than a misreport.
    for (double r : grid) {
      for (double s : grid) {
        Bundle own = m->evaluate(r), other = m->evaluate(s);
        if (!admissible(d, r, other)) continue;
        EXPECT_LE(d.canonical_payment(r, own), d.canonical_payment(r, other) + kIcTol);
      }
    }
  }
  EXPECT_EQ(built, 25);
}

INSTANTIATE_TEST_SUITE_P(Families, Soundness,
                         ::testing::Values(Family::quasilinear, Family::income_effect,
                                           Family::payment_param, Family::two_param,
                                           Family::myerson, Family::risk_averse),
                         [](const auto& info) { return std::string(to_string(info.param)); });
