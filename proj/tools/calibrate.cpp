// Pilot run behind include/aglqr/calibration.hpp. Prints the pilot
// statistics and the thresholds derived from them; the header is edited by
// hand from this output and then left alone.

#include <cmath>
#include <cstdio>

#include "aglqr/calibration.hpp"
#include "aglqr/verify.hpp"

int main() {
  using namespace aglqr;
  const std::uint64_t seed = calibration::kPilotSeed;

  const HittingResult h20 = simulate_hitting(20.0, 0.5, 10000, seed, 1.0, {});
  const HittingResult h40 = simulate_hitting(40.0, 0.5, 10000, seed + 1, 1.0, {});
  // Threshold: pilot containment minus four binomial standard errors.
  const double se20 = std::sqrt(h20.containment * (1.0 - h20.containment) /
                                static_cast<double>(h20.reached));
  std::printf("hitting a=20: containment %.6f (%lld/%lld), se %.6f -> threshold %.4f\n",
              h20.containment, static_cast<long long>(h20.contained),
              static_cast<long long>(h20.reached), se20,
              std::floor((h20.containment - 4.0 * se20) * 1e4) / 1e4);
  std::printf("hitting a=40: containment %.6f\n", h40.containment);

  const RegretBoundResult res = check_regret_bounded(1.0, 1e-3, 20000, seed + 2, {}, 1e9);
  for (const auto& r : res.records) {
    std::printf("a=%6g  S*=%.6g  MR=%.6g\n", r.a, r.s_est.mean, r.mr);
  }
  std::printf("a=     8  S*=%.6g  MR=%.6g\n", res.at_8.s_est.mean, res.at_8.mr);
  const double spread = res.mr_max / res.mr_median;
  std::printf("MR spread %.6f -> kappa %.1f (1.5x pilot, rounded up to 0.5)\n", spread,
              std::ceil(3.0 * spread) / 2.0);
  for (const auto& c : res.checks) {
    std::printf("%s: %.6f\n", c.name.c_str(), c.statistic);
  }

  MonteCarloOptions mc;
  mc.auto_refine = true;
  for (double a : {5.0, 10.0, 20.0}) {
    const EpochTable t = epoch_statistics(a, 1.0, 1e-3, 100000, seed + 3, mc);
    std::printf("epochs a=%g:", a);
    for (std::size_t nu = 0; nu < t.occupancy.size(); ++nu) {
      std::printf(" P(E%zu)=%lld", nu, static_cast<long long>(t.occupancy[nu].count));
    }
    std::printf("  multi-crossing paths %lld\n", static_cast<long long>(t.multi_crossing_paths));
  }
  return 0;
}
