#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "aglqr/ou_engine.hpp"

namespace aglqr {
namespace {

TEST(VarianceTest, Examples) {
  EXPECT_DOUBLE_EQ(variance_xtb(0.0, 0.7), 0.7);
  EXPECT_EQ(variance_xtb(3.0, 0.0), 0.0);
  EXPECT_EQ(variance_xtb(-3.0, 0.0), 0.0);
  EXPECT_NEAR(variance_xtb(1.0, 1.0), 0.432332358381693654, 1e-15);
  EXPECT_NEAR(variance_xtb(2.0, 0.5), 0.216166179190846827, 1e-15);
  EXPECT_NEAR(variance_xtb(-2.0, 0.5), 1.59726402473266256, 1e-14);
}

TEST(VarianceTest, ContinuousAcrossZeroDrift) {
  // Near b = 0: t (1 - b t) to second order.
  for (double t : {0.1, 1.0, 10.0}) {
    for (double b : {1e-9, -1e-9, 0.99e-8 / (2.0 * t), 1.01e-8 / (2.0 * t)}) {
      EXPECT_NEAR(variance_xtb(b, t), t * (1.0 - b * t), 1e-14 * t) << b << ' ' << t;
    }
  }
}

TEST(VarianceTest, NonNegative) {
  for (double b : {-50.0, -1.0, -1e-12, 0.0, 1e-12, 1.0, 50.0}) {
    for (double t : {0.0, 1e-9, 0.3, 2.0}) EXPECT_GE(variance_xtb(b, t), 0.0);
  }
}

TEST(ExactStepTest, Examples) {
  EXPECT_EQ(exact_ou_step(1.0, 0.0, 0.01, 0.0).q, 1.0);
  EXPECT_NEAR(exact_ou_step(2.0, -1.0, 0.5, 0.0).q, 1.21306131942526685, 1e-15);
  EXPECT_FALSE(exact_ou_step(2.0, -1.0, 0.5, 0.0).diverged);
}

TEST(ExactStepTest, SampleVarianceMatchesTransitionLaw) {
  // q = 0, b = 1, dt = 1: Var = e^2 (1 - e^-2) / 2.
  constexpr int n = 100000;
  const double target = 3.19452804946532511;
  NormalStream noise(2024, 0);
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = exact_ou_step(0.0, 1.0, 1.0, noise()).q;
    const double d = x - mean;
    mean += d / (i + 1);
    m2 += d * (x - mean);
  }
  const double var = m2 / (n - 1);
  const double se = target * std::sqrt(2.0 / (n - 1));
  EXPECT_LE(std::fabs(var - target), 3.0 * se) << var;
}

TEST(ExactStepTest, TwoHalfStepsComposeToOneStep) {
  for (double b : {-7.0, -0.5, 0.0, 0.3, 4.0}) {
    for (double dt : {1e-3, 0.1, 1.0}) {
      const double q = 1.7;
      // Conditional mean: deterministic part of two half steps.
      const double half = exact_ou_step(exact_ou_step(q, b, dt / 2, 0.0).q, b, dt / 2, 0.0).q;
      EXPECT_NEAR(half, exact_ou_step(q, b, dt, 0.0).q, 1e-14 * std::fabs(q) * std::exp(b * dt));
      // Variance of the composition: e^{2b dt/2} V(dt/2) + V(dt/2) = V(dt).
      const double v_half = transition_variance(b, dt / 2);
      const double composed = std::exp(b * dt) * v_half + v_half;
      EXPECT_NEAR(composed, transition_variance(b, dt), 1e-12 * transition_variance(b, dt));
    }
  }
}

TEST(ExactStepTest, FlagsDivergence) {
  EXPECT_TRUE(exact_ou_step(1e149, 10.0, 1.0, 0.0).diverged);
  EXPECT_TRUE(exact_ou_step(1.0, 1e4, 1.0, 0.0).diverged);
  EXPECT_FALSE(exact_ou_step(1e140, -10.0, 1.0, 0.0).diverged);
}

TEST(ExactStepTest, HugeNegativeDriftCollapsesToStationaryNoise) {
  const OuStep step = exact_ou_step(3.0, -1e7, 1e-3, 1.0);
  EXPECT_FALSE(step.diverged);
  EXPECT_NEAR(step.q, std::sqrt(1.0 / 2e7), 1e-12);
}

TEST(SimGridTest, StepCountBracketsHorizon) {
  for (double T : {1.0, 2.0, 0.37, 1.0 / 3.0}) {
    for (double dt : {1e-3, 0.01, 0.03, 0.1 / 3.0}) {
      const SimGrid g = SimGrid::make(T, dt);
      const double n = static_cast<double>(g.n_steps);
      EXPECT_GE(n * dt, T * (1.0 - 1e-12)) << T << ' ' << dt;
      EXPECT_GT(T, (n - 1.0) * dt) << T << ' ' << dt;
      EXPECT_EQ(g.time(g.n_steps), T);
      EXPECT_GT(g.step_length(g.n_steps - 1), 0.0);
    }
  }
  EXPECT_EQ(SimGrid::make(1.0, 1e-3).n_steps, 1000);
  EXPECT_EQ(SimGrid::make(2.0, 1e-3).n_steps, 2000);
  EXPECT_THROW(SimGrid::make(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(SimGrid::make(0.0, 1e-3), std::invalid_argument);
}

TEST(SimulatePathTest, NoNoiseNoDriftStaysAtOrigin) {
  const SimGrid grid = SimGrid::make(1.0, 1e-3);
  const Trajectory traj = simulate_path(ZeroPolicy{}, {0.0, 1.0}, grid, ZeroNoise{});
  EXPECT_EQ(traj.cost, 0.0);
  for (double q : traj.q) ASSERT_EQ(q, 0.0);
}

TEST(SimulatePathTest, StableDriftNeverLeavesPrologue) {
  const Trajectory traj =
      simulate_path(ZeroPolicy{}, {-5.0, 1.0}, SimGrid::make(1.0, 1e-3, 42, 0));
  EXPECT_TRUE(std::all_of(traj.epoch.begin(), traj.epoch.end(), [](int e) { return e == -1; }));
}

TEST(SimulatePathTest, TrajectoryInvariants) {
  for (std::uint64_t path = 0; path < 20; ++path) {
    const SimGrid grid = SimGrid::make(1.0, 1e-3, 9, path);
    const Trajectory traj = simulate_path(SigmaStarPolicy{}, {6.0, 1.0}, grid);
    ASSERT_FALSE(traj.diverged);
    const std::size_t n = static_cast<std::size_t>(grid.n_steps) + 1;
    ASSERT_EQ(traj.times.size(), n);
    ASSERT_EQ(traj.q.size(), n);
    ASSERT_EQ(traj.u.size(), n);
    ASSERT_EQ(traj.epoch.size(), n);
    ASSERT_EQ(traj.cum_cost.size(), n);
    EXPECT_EQ(traj.times.front(), 0.0);
    EXPECT_EQ(traj.times.back(), 1.0);
    EXPECT_EQ(traj.epoch.front(), -1);
    EXPECT_TRUE(std::is_sorted(traj.epoch.begin(), traj.epoch.end()));
    EXPECT_TRUE(std::is_sorted(traj.cum_cost.begin(), traj.cum_cost.end()));
    EXPECT_GE(traj.cost, 0.0);
    EXPECT_EQ(traj.cost, traj.cum_cost.back());
  }
}

TEST(SimulatePathTest, BitReproducible) {
  const SimGrid grid = SimGrid::make(1.0, 1e-3, 77, 5);
  const auto first = trajectory_csv(simulate_path(SigmaStarPolicy{}, {3.0, 1.0}, grid));
  const auto second = trajectory_csv(simulate_path(SigmaStarPolicy{}, {3.0, 1.0}, grid));
  EXPECT_EQ(first, second);
  SimGrid other = grid;
  other.path_index = 6;
  EXPECT_NE(first, trajectory_csv(simulate_path(SigmaStarPolicy{}, {3.0, 1.0}, other)));
}

TEST(SimulatePathTest, CostIsTrapezoidWithStepGain) {
  const SimGrid grid = SimGrid::make(0.05, 0.01, 5, 0);
  const double g = 2.5;
  const Trajectory traj = simulate_path(ConstantGainPolicy{g}, {1.0, 0.05}, grid);
  double cost = 0.0;
  for (std::size_t k = 0; k + 1 < traj.q.size(); ++k) {
    cost += 0.5 * 0.01 * (1.0 + g * g) *
            (traj.q[k] * traj.q[k] + traj.q[k + 1] * traj.q[k + 1]);
  }
  EXPECT_NEAR(traj.cost, cost, 1e-15);
  for (std::size_t k = 0; k < traj.q.size(); ++k) EXPECT_EQ(traj.u[k], -g * traj.q[k]);
}

TEST(SimulatePathTest, DivergentPathIsFlagged) {
  // b = 1 + 400: |q| passes 1e150 well before T.
  const Trajectory traj =
      simulate_path(ConstantGainPolicy{-400.0}, {1.0, 1.0}, SimGrid::make(1.0, 1e-3, 1, 0));
  EXPECT_TRUE(traj.diverged);
  EXPECT_TRUE(std::isinf(traj.cost));
  EXPECT_LT(traj.q.size(), 1001u);
}

TEST(SimulatePathTest, EulerAgreesWithExactOnZeroControlCost) {
  // E int_0^1 W^2 dt = 1/2.
  constexpr int n = 4000;
  for (Scheme scheme : {Scheme::exact, Scheme::euler_maruyama}) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      SimGrid grid = SimGrid::make(1.0, 1e-3, 13, static_cast<std::uint64_t>(i), scheme);
      const double c = simulate_path(ZeroPolicy{}, {0.0, 1.0}, grid).cost;
      sum += c;
      sum_sq += c * c;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    EXPECT_LE(std::fabs(mean - 0.5), 4.0 * se) << static_cast<int>(scheme);
  }
}

TEST(SimulatePathTest, CsvFormat) {
  const Trajectory traj =
      simulate_path(ZeroPolicy{}, {0.0, 0.002}, SimGrid::make(0.002, 1e-3, 1, 0));
  const std::string csv = trajectory_csv(traj);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,q,u,epoch,cum_cost");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

}  // namespace
}  // namespace aglqr
