#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/error.hpp"
#include "scmech/measure.hpp"
#include "scmech/parallel.hpp"

namespace scmech {

/// Second-price sale with a reserve among n symmetric buyers.
struct MultiBuyerMechanism {
  std::size_t n = 2;
  double reserve = 0.0;
  TypeDistribution dist;
};

/// Per-buyer (payment, quantity). The highest type above the reserve wins
/// and pays max(reserve, runner-up); k tied top types share q = 1/k and
/// each pays value / k.
inline std::vector<Bundle> allocate(const MultiBuyerMechanism& mech, const std::vector<double>& profile) {
  if (profile.empty()) throw Error(Errc::invalid_argument, "profile is empty");
  for (double v : profile) {
    if (!(v >= mech.dist.lower() && v <= mech.dist.upper())) {
      throw Error(Errc::invalid_argument, "profile type outside the support");
    }
  }
  std::vector<Bundle> out(profile.size(), Bundle{0.0, 0.0});
  double top = *std::max_element(profile.begin(), profile.end());
  if (top <= mech.reserve) return out;
  std::size_t ties = 0;
  double runner_up = -kInf;
  for (double v : profile) {
    if (v == top) ++ties;
    else runner_up = std::max(runner_up, v);
  }
  if (ties == 1) {
    double price = std::max(mech.reserve, runner_up);
    for (std::size_t i = 0; i < profile.size(); ++i) {
      if (profile[i] == top) out[i] = Bundle{price, 1.0};
    }
  } else {
    double share = 1.0 / static_cast<double>(ties);
    for (std::size_t i = 0; i < profile.size(); ++i) {
      if (profile[i] == top) out[i] = Bundle{top * share, share};
    }
  }
  return out;
}

struct SimulationResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t feasibility_violations = 0;  // profiles with total q above 1
  std::size_t efficiency_violations = 0;   // positive q given to a non-maximal type
};

inline constexpr std::size_t kSimulationBlock = 1u << 15;

/// Monte Carlo revenue over i.i.d. profiles. Each block of draws has its own
/// seeded stream and blocks are merged in order, so the result does not
/// depend on the number of workers.
inline SimulationResult simulate_revenue(const MultiBuyerMechanism& mech, std::size_t samples,
                                         std::uint64_t seed, unsigned threads = 0) {
  if (samples < 1) throw Error(Errc::invalid_argument, "samples must be at least 1");
  if (mech.n < 1) throw Error(Errc::invalid_argument, "need at least one buyer");
  const std::size_t blocks = (samples + kSimulationBlock - 1) / kSimulationBlock;
  struct Partial {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t infeasible = 0;
    std::size_t inefficient = 0;
  };
  std::vector<Partial> parts(blocks);
  parallel_for(blocks, worker_count(threads), [&](std::size_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::mt19937_64 rng(seq);
    std::size_t begin = b * kSimulationBlock;
    std::size_t end = std::min(samples, begin + kSimulationBlock);
    Partial p;
    std::vector<double> profile(mech.n);
    for (std::size_t s = begin; s < end; ++s) {
      for (auto& v : profile) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = mech.dist.quantile(u);
      }
      auto alloc = allocate(mech, profile);
      double top = *std::max_element(profile.begin(), profile.end());
      double paid = 0.0, qsum = 0.0;
      for (std::size_t i = 0; i < mech.n; ++i) {
        paid += alloc[i].t;
        qsum += alloc[i].q;
        if (alloc[i].q > 0.0 && profile[i] < top) ++p.inefficient;
      }
      if (qsum > 1.0 + 1e-12) ++p.infeasible;
      ++p.count;
      double delta = paid - p.mean;
      p.mean += delta / static_cast<double>(p.count);
      p.m2 += delta * (paid - p.mean);
    }
    parts[b] = p;
  });
  Partial all;
  for (const auto& p : parts) {
    if (p.count == 0) continue;
    std::size_t n = all.count + p.count;
    double delta = p.mean - all.mean;
    all.mean += delta * static_cast<double>(p.count) / static_cast<double>(n);
    all.m2 += p.m2 + delta * delta * static_cast<double>(all.count) * static_cast<double>(p.count) /
                         static_cast<double>(n);
    all.count = n;
    all.infeasible += p.infeasible;
    all.inefficient += p.inefficient;
  }
  SimulationResult r;
  r.estimate = all.mean;
  r.std_error = all.count > 1 ? std::sqrt(all.m2 / static_cast<double>(all.count - 1) /
                                        static_cast<double>(all.count))
                            : 0.0;
  r.samples = all.count;
  r.seed = seed;
  r.feasibility_violations = all.infeasible;
  r.efficiency_violations = all.inefficient;
  return r;
}

}  // namespace scmech
