#include <iostream>

#include "scmech/scmech.hpp"

int main() {
  using namespace scmech;
  Domain d(Family::quasilinear);
  auto dist = TypeDistribution::uniform(0.0, 1.0);
  auto m = FiniteMechanism<>::from_range(d, {{0.0, 0.0}, {0.25, 0.5}, {0.6, 1.0}});
  std::cout << "breakpoints:";
  for (double b : m.breakpoints()) std::cout << ' ' << b;
  std::cout << "\nrevenue: " << expected_revenue(m, dist) << '\n';
  auto rep = verify_all(m, support_grid(dist, 200));
  std::cout << "verified: " << (rep.pass() ? "yes" : "no") << '\n';
  auto best = solve_finite(d, dist, OptimizeOptions{});
  std::cout << "optimal revenue: " << best.revenue << " with " << best.active_bundles << " bundles\n";
  return rep.pass() ? 0 : 1;
}
