#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "aglqr/ou_engine.hpp"
#include "aglqr/strategy.hpp"

namespace aglqr {
namespace {

constexpr double kA1 = 27.7258872223978124;      // 4 ln2 / 0.1
constexpr double kA2 = 113620.685837386235;      // 4 ln2 / 0.05 + 4096 kA1

TEST(SigmaStarTest, GainByPhase) {
  EXPECT_EQ(sigma_star_gain({-1, 0.0, 0.0, 1.0}), 0.0);
  EXPECT_EQ(sigma_star_gain({0, 0.1, 0.0, 2.0}), 0.0);
  EXPECT_NEAR(sigma_star_gain({1, 0.2, 27.7259, 4.0}), 55.4518, 1e-12);
}

TEST(SigmaStarTest, TransitionSequence) {
  const EpochState prologue{};
  EXPECT_EQ(sigma_star_observe(prologue, 0.05, 0.99), prologue);

  const EpochState e0 = sigma_star_observe(prologue, 0.1, -1.0);
  EXPECT_EQ(e0.nu, 0);
  EXPECT_EQ(e0.a_nu, 0.0);
  EXPECT_EQ(e0.threshold_exit, 2.0);
  EXPECT_EQ(e0.t_start, 0.1);

  const EpochState e1 = sigma_star_observe(e0, 0.2, 2.0);
  EXPECT_EQ(e1.nu, 1);
  EXPECT_NEAR(e1.a_nu, kA1, 1e-12);
  EXPECT_EQ(e1.threshold_exit, 4.0);
  EXPECT_NEAR(e1.guess_a(), kA1 / 4.0, 1e-12);

  const EpochState e2 = sigma_star_observe(e1, 0.25, 4.0);
  EXPECT_EQ(e2.nu, 2);
  EXPECT_NEAR(e2.a_nu, kA2, 1e-8);
  EXPECT_EQ(e2.threshold_exit, 8.0);
}

TEST(SigmaStarTest, RejectsZeroLengthEpoch) {
  const EpochState e0{0, 0.3, 0.0, 2.0};
  EXPECT_THROW(sigma_star_observe(e0, 0.3, 2.5), std::domain_error);
  // Entering Epoch 0 needs no duration.
  EXPECT_NO_THROW(sigma_star_observe(EpochState{}, 0.0, 1.0));
}

TEST(SigmaStarTest, ConstantsValidated) {
  EXPECT_THROW(SigmaStarPolicy(StrategyConstants{4.0, 4.0}), std::invalid_argument);
  EXPECT_THROW(SigmaStarPolicy(StrategyConstants{0.0, 4096.0}), std::invalid_argument);
  EXPECT_NO_THROW(SigmaStarPolicy(StrategyConstants{1.0, 8.0}));
}

// Random observation sequences: the state machine keeps its invariants.
TEST(SigmaStarTest, InvariantsOnRandomSequences) {
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    Xoshiro256pp rng(stream_key(5, trial));
    EpochState state;
    double t = 0.0;
    for (int step = 0; step < 400; ++step) {
      t += 1e-4 + 1e-2 * rng.uniform();
      const double q = (rng.uniform() - 0.5) * 4.0 * state.threshold_exit;
      const EpochState next = sigma_star_observe(state, t, q);
      if (std::fabs(q) < state.threshold_exit) {
        ASSERT_EQ(next, state);
      } else {
        ASSERT_EQ(next.nu, state.nu + 1);
        ASSERT_EQ(next.threshold_exit, 2.0 * state.threshold_exit);
        ASSERT_EQ(next.threshold_exit, std::ldexp(1.0, next.nu + 1));
        if (next.nu <= 0) {
          ASSERT_EQ(next.a_nu, 0.0);
        } else {
          ASSERT_GT(next.a_nu, 0.0);
          ASSERT_GE(next.a_nu, 4096.0 * state.a_nu);
        }
      }
      state = next;
      if (state.nu > 8) break;
    }
  }
}

/// Records the controller state after every observation.
struct RecordingSigmaStar {
  SigmaStarPolicy inner;
  std::vector<EpochState>* states;
  double gain(double t) const { return inner.gain(t); }
  void observe(double t, double q) {
    inner.observe(t, q);
    states->push_back(inner.state());
  }
};

TEST(SigmaStarTest, EpochExitConsistencyAlongPaths) {
  for (std::uint64_t path = 0; path < 50; ++path) {
    std::vector<EpochState> states;
    const SimGrid grid = SimGrid::make(1.0, 1e-3, 3, path);
    const Trajectory traj =
        simulate_path(RecordingSigmaStar{SigmaStarPolicy{}, &states}, {10.0, 1.0}, grid);
    ASSERT_EQ(states.size(), traj.q.size() - 1);
    for (std::size_t k = 0; k < states.size(); ++k) {
      const EpochState before = k == 0 ? EpochState{} : states[k - 1];
      const double q = std::fabs(traj.q[k + 1]);
      ASSERT_EQ(states[k].nu, traj.epoch[k + 1]);
      if (states[k].nu != before.nu) {
        ASSERT_GE(q, before.threshold_exit);
        if (states[k].nu >= 2) ASSERT_GE(states[k].a_nu, 4096.0 * before.a_nu);
      } else {
        ASSERT_LT(q, before.threshold_exit);
      }
    }
  }
}

TEST(SigmaStarTest, NoiselessDoublingRecoversDrift) {
  // Epoch 0 entered at |q| = 1, t_0 = 0; q grows as e^{a t} exactly.
  for (double a : {2.0, 5.0, 20.0}) {
    const double dt = 1e-4;
    SigmaStarPolicy policy;
    policy.observe(0.0, 1.0);
    ASSERT_EQ(policy.state().nu, 0);
    double q = 1.0;
    for (int k = 1; policy.state().nu == 0; ++k) {
      q = exact_ou_step(q, a - policy.gain(0.0), dt, 0.0).q;
      ASSERT_NEAR(q, std::exp(a * k * dt), 1e-12 * q);
      policy.observe(k * dt, q);
    }
    const double a1 = policy.state().a_nu;
    const double eps = a * dt / std::numbers::ln2;
    EXPECT_LE(a1, 4.0 * a * (1.0 + 1e-12));
    EXPECT_GE(a1, 4.0 * a * (1.0 - eps));
  }
}

TEST(SigmaStarTest, IndependentOfHorizon) {
  for (std::uint64_t path = 0; path < 10; ++path) {
    const Trajectory short_run =
        simulate_path(SigmaStarPolicy{}, {5.0, 1.0}, SimGrid::make(1.0, 1e-3, 42, path));
    const Trajectory long_run =
        simulate_path(SigmaStarPolicy{}, {5.0, 2.0}, SimGrid::make(2.0, 1e-3, 42, path));
    for (std::size_t k = 0; k < short_run.q.size(); ++k) {
      ASSERT_EQ(std::memcmp(&short_run.q[k], &long_run.q[k], sizeof(double)), 0) << k;
      ASSERT_EQ(std::memcmp(&short_run.u[k], &long_run.u[k], sizeof(double)), 0) << k;
      ASSERT_EQ(short_run.epoch[k], long_run.epoch[k]) << k;
    }
  }
}

TEST(SigmaOptTest, Gain) {
  const SystemParams params{0.0, 1.0};
  EXPECT_EQ(sigma_opt_gain(1.0, params), 0.0);
  EXPECT_NEAR(sigma_opt_gain(0.0, params), 0.7615941559557649, 1e-15);
  for (double a : {-10.0, 0.0, 10.0}) {
    for (int i = 0; i < 100; ++i) {
      const double t = 0.0099 * i;
      // |p'| = |2ap + 1 - p^2| <= a^2 + 1.
      EXPECT_LE(std::fabs(sigma_opt_gain(t + 1e-6, {a, 1.0}) - sigma_opt_gain(t, {a, 1.0})),
                1.01e-6 * (a * a + 1.0));
    }
  }
}

TEST(BaselineTest, ZeroAndConstant) {
  EXPECT_EQ(zero_gain(), 0.0);
  EXPECT_EQ(constant_gain(3.0), 3.0);
  const SimGrid grid = SimGrid::make(1.0, 1e-3, 8, 2);
  EXPECT_EQ(trajectory_csv(simulate_path(ConstantGainPolicy{0.0}, {1.5, 1.0}, grid)),
            trajectory_csv(simulate_path(ZeroPolicy{}, {1.5, 1.0}, grid)));
}

TEST(PolicySpecTest, Parse) {
  EXPECT_EQ(PolicySpec::parse("sigma-star").kind, PolicySpec::Kind::sigma_star);
  EXPECT_EQ(PolicySpec::parse("sigma-opt").kind, PolicySpec::Kind::sigma_opt);
  EXPECT_EQ(PolicySpec::parse("zero").kind, PolicySpec::Kind::zero);
  const PolicySpec c = PolicySpec::parse("const:3.5");
  EXPECT_EQ(c.kind, PolicySpec::Kind::constant);
  EXPECT_EQ(c.g, 3.5);
  EXPECT_TRUE(std::holds_alternative<SigmaOptPolicy>(
      PolicySpec::parse("sigma-opt").make({2.0, 1.0})));
  for (const char* bad : {"", "sigma", "const:", "const:abc", "const:1x", "const:inf"}) {
    EXPECT_THROW(PolicySpec::parse(bad), std::invalid_argument) << bad;
  }
}

}  // namespace
}  // namespace aglqr
