#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"
#include "scmech/revenue.hpp"

using namespace scmech;

namespace {

std::vector<TypeDistribution> sample_distributions() {
  return {TypeDistribution::uniform(0, 1), TypeDistribution::uniform(1, 2),
          TypeDistribution::truncated_exponential(2.0, 0.0, 1.5), TypeDistribution::beta(2.0, 3.0),
          TypeDistribution::beta(1.0, 1.0),
          TypeDistribution::tabulated({{0.0, 0.0}, {0.4, 0.2}, {0.8, 0.7}, {1.0, 1.0}})};
}

}  // namespace

TEST(Hazard, UniformExamples) {
  auto u = TypeDistribution::uniform(0, 1);
  EXPECT_NEAR(hazard(u, 0.5), 1.0 / (1.0 - 0.5), 1e-12);
  EXPECT_NEAR(virtual_valuation(u, 0.5), 0.0, 1e-12);
  EXPECT_NEAR(virtual_valuation(u, 1.0 - 1e-9), 1.0, 1e-8);
  auto v = TypeDistribution::uniform(1, 2);
  EXPECT_NEAR(virtual_valuation(v, 1.5), 2 * 1.5 - 2, 1e-12);
}

TEST(Hazard, UnboundedAtTop) {
  auto u = TypeDistribution::uniform(0, 1);
  try {
    hazard(u, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unbounded);
  }
  EXPECT_THROW(hazard(u, 1.5), Error);
}

TEST(InverseVirtual, Examples) {
  auto a = inverse_virtual(TypeDistribution::uniform(0, 1));
  EXPECT_NEAR(a.theta, oracle::bisect([](double t) { return t - (1 - t); }, 0, 1), 1e-12);
  EXPECT_TRUE(a.hazard_monotone);
  EXPECT_DOUBLE_EQ(inverse_virtual(TypeDistribution::uniform(1, 2)).theta, 1.0);
  EXPECT_DOUBLE_EQ(inverse_virtual(TypeDistribution::uniform(3, 4)).theta, 3.0);
}

TEST(InverseVirtual, TruncatedExponentialMatchesOracle) {
  auto d = TypeDistribution::truncated_exponential(2.0, 0.0, 2.0);
  double z = 1.0 - std::exp(-4.0);
  auto cdf = [&](double x) { return (1.0 - std::exp(-2.0 * x)) / z; };
  auto pdf = [&](double x) { return 2.0 * std::exp(-2.0 * x) / z; };
  double expect = oracle::bisect([&](double x) { return x - (1 - cdf(x)) / pdf(x); }, 0.0, 2.0);
  EXPECT_NEAR(inverse_virtual(d).theta, expect, 1e-10);
}

TEST(Distribution, PdfMatchesCdf) {
  const double h = 1e-5;
  for (const auto& d : sample_distributions()) {
    for (int i = 1; i < 50; ++i) {
      double x = d.lower() + (d.upper() - d.lower()) * i / 50.0;
      if (d.name() == "tabulated" && (std::abs(x - 0.4) < 2 * h || std::abs(x - 0.8) < 2 * h)) continue;
      double fd = (d.cdf(x + h) - d.cdf(x - h)) / (2 * h);
      EXPECT_NEAR(fd, d.pdf(x), 1e-4) << d.name() << " x=" << x;
    }
    EXPECT_DOUBLE_EQ(d.cdf(d.lower()), 0.0);
    EXPECT_DOUBLE_EQ(d.cdf(d.upper()), 1.0);
  }
}

TEST(Distribution, QuantileInvertsCdf) {
  for (const auto& d : sample_distributions()) {
    for (double u : {0.01, 0.2, 0.5, 0.77, 0.99}) EXPECT_NEAR(d.cdf(d.quantile(u)), u, 1e-9) << d.name();
  }
}

TEST(Distribution, RejectsInvalidSpecs) {
  EXPECT_THROW(TypeDistribution::uniform(1, 1), Error);
  EXPECT_THROW(TypeDistribution::uniform(2, 1), Error);
  EXPECT_THROW(TypeDistribution::beta(-1, 2), Error);
  EXPECT_THROW(TypeDistribution::truncated_exponential(0.0, 0, 1), Error);
  EXPECT_THROW(TypeDistribution::tabulated({{0, 0}, {1, 0.5}}), Error);
  EXPECT_THROW(TypeDistribution::tabulated({{0, 0}, {0.5, 0.7}, {1, 0.6}, {2, 1}}), Error);
}

TEST(Distribution, VirtualValuationMonotoneWhenHazardIs) {
  for (const auto& d : sample_distributions()) {
    if (!hazard_nondecreasing(d)) continue;
    double prev = -kInf;
    for (int i = 0; i < 200; ++i) {
      double x = d.lower() + (d.upper() - d.lower()) * (i + 0.5) / 200.0;
      double v = virtual_valuation(d, x);
      EXPECT_GE(v, prev - 1e-9) << d.name();
      prev = v;
    }
  }
}

TEST(ExpectedRevenue, Examples) {
  auto u = TypeDistribution::uniform(0, 1);
  auto ql = FiniteMechanism<>::from_range(Domain(Family::quasilinear), {{0, 0}, {0.5, 1}});
  EXPECT_NEAR(expected_revenue(ql, u), 0.5 * (1 - 0.5), 1e-15);
  auto zero = FiniteMechanism<>::from_range(Domain(Family::quasilinear), {{0, 0}});
  EXPECT_EQ(expected_revenue(zero, u), 0.0);
  auto my = FiniteMechanism<>::from_range(Domain(Family::myerson), {{0, 0}, {0.5, 1}});
  EXPECT_NEAR(expected_revenue(my, u, RevenueMode::expected_payment), 1 * 0.5 * 0.5, 1e-15);
}

TEST(ExpectedRevenue, ChartMismatch) {
  auto m = FiniteMechanism<>::from_range(Domain(Family::power), {{0, 0}, {0.1, 0.5}});
  EXPECT_THROW(expected_revenue(m, TypeDistribution::uniform(0, 2)), Error);
}

TEST(ExpectedRevenue, ExactSumMatchesQuadrature) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Domain d(Family::income_effect);
  for (const auto& dist : {TypeDistribution::uniform(0, 3), TypeDistribution::truncated_exponential(1.0, 0, 3)}) {
    for (int i = 0; i < 10; ++i) {
      double q1 = 0.2 + 0.3 * unit(rng), t1 = 0.2 + 0.3 * unit(rng);
      auto m = FiniteMechanism<>::from_range(d, {{0, 0}, {t1, q1}, {t1 + 0.4 + unit(rng), 1.0}});
      for (auto mode : {RevenueMode::payment, RevenueMode::expected_payment}) {
        double exact = expected_revenue(m, dist, mode);
        double quad = expected_revenue(std::function<Bundle(double)>(m), dist, mode);
        EXPECT_NEAR(exact, quad, 1e-6);
      }
    }
  }
}

TEST(ExpectedRevenue, BoundedByTopIndifferencePayment) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Domain d(Family::quasilinear);
  auto dist = TypeDistribution::uniform(0, 2);
  double bound = revenue_upper_bound(d, dist);
  EXPECT_DOUBLE_EQ(bound, 2.0);
  for (int i = 0; i < 50; ++i) {
    double q1 = unit(rng), t1 = 2.0 * q1 * unit(rng);
    try {
      auto m = FiniteMechanism<>::from_range(d, {{0, 0}, {t1, q1}, {t1 + (1 - q1) * 2.0 * unit(rng), 1.0}});
      double rev = expected_revenue(m, dist);
      EXPECT_GE(rev, 0.0);
      EXPECT_LE(rev, bound);
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == Errc::infeasible_range || e.code() == Errc::non_diagonal);
    }
  }
}
