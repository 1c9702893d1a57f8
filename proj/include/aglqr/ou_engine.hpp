#pragma once

// Simulation of dq = (a q + u) dt + dW under linear feedback u = -g q.
// With g frozen over a step the dynamics are Ornstein-Uhlenbeck with
// coefficient b = a - g, whose one-step transition law is sampled exactly.

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include "aglqr/io.hpp"
#include "aglqr/ou_types.hpp"
#include "aglqr/random.hpp"
#include "aglqr/strategy.hpp"

namespace aglqr {

inline constexpr double kDivergenceCeiling = 1e150;

/// Variance of X_t = int_0^t e^{-bs} dW_s, i.e. (1 - e^{-2bt}) / (2b),
/// with the series t (1 - b t) when |2bt| < 1e-8.
inline double variance_xtb(double b, double t) {
  const double x = 2.0 * b * t;
  if (std::fabs(x) < 1e-8) return t * (1.0 - b * t);
  return -std::expm1(-x) / (2.0 * b);
}

/// Conditional variance of q(t) given q(0) for dq = b q dt + dW:
/// e^{2bt} variance_xtb(b, t) = (e^{2bt} - 1) / (2b). Finite for any
/// b <= 0, unlike the product form.
inline double transition_variance(double b, double t) {
  const double x = 2.0 * b * t;
  if (std::fabs(x) < 1e-8) return t * (1.0 + b * t);
  return std::expm1(x) / (2.0 * b);
}

struct OuStep {
  double q = 0.0;
  bool diverged = false;
};

/// Exact OU transition over dt driven by the standard normal draw z.
inline OuStep exact_ou_step(double q, double b, double dt, double z) {
  const double mean = q * std::exp(b * dt);
  const double next = mean + std::sqrt(transition_variance(b, dt)) * z;
  if (!(std::fabs(mean) <= kDivergenceCeiling) || !std::isfinite(next)) {
    return {next, true};
  }
  return {next, false};
}

/// Euler-Maruyama step, kept for cross-validation of the exact scheme.
inline OuStep euler_ou_step(double q, double b, double dt, double z) {
  const double next = q + b * q * dt + std::sqrt(dt) * z;
  return {next, !(std::fabs(next) <= kDivergenceCeiling)};
}

/// Labels grid points with the epoch index: Epoch nu is entered the first
/// time |q| >= 2^nu. One label advance per observation.
struct EpochTracker {
  int nu = -1;
  double threshold = 1.0;
  int multi_crossings = 0;

  void observe(double q) {
    const double aq = std::fabs(q);
    if (aq >= threshold) {
      ++nu;
      threshold *= 2.0;
      if (aq >= threshold) ++multi_crossings;
    }
  }
};

struct PathOutcome {
  double cost = 0.0;
  bool diverged = false;
  int max_epoch = -1;
  int multi_crossings = 0;
};

/// Sink that discards per-point output.
struct NullSink {
  void operator()(std::int64_t, double, double, double, int, double) const {}
};

/// Core path loop. Calls sink(k, t, q, u, epoch, cum_cost) at every grid
/// point, where u = -gain q is the control in force from that point on.
/// The policy is observed after each completed step and its new gain takes
/// effect from the next step. Cost is the trapezoidal rule per step with
/// that step's constant gain: h/2 (1 + g^2) (q_k^2 + q_{k+1}^2).
template <Policy P, class Noise, class Sink = NullSink>
PathOutcome run_path(P policy, const SystemParams& params, const SimGrid& grid,
                     Noise&& noise, Sink&& sink = Sink{}) {
  EpochTracker tracker;
  double q = 0.0;
  double cum = 0.0;
  double g = policy.gain(0.0);
  sink(std::int64_t{0}, 0.0, q, -g * q, tracker.nu, cum);

  double cached_b = std::numeric_limits<double>::quiet_NaN();
  double cached_h = 0.0;
  double decay = 1.0;
  double sd = 0.0;

  for (std::int64_t k = 0; k < grid.n_steps; ++k) {
    const double h = grid.step_length(k);
    const double b = params.a - g;
    const double z = noise();
    OuStep step;
    if (grid.scheme == Scheme::exact) {
      if (b != cached_b || h != cached_h) {
        cached_b = b;
        cached_h = h;
        decay = std::exp(b * h);
        sd = std::sqrt(transition_variance(b, h));
      }
      const double mean = q * decay;
      step.q = mean + sd * z;
      step.diverged = !(std::fabs(mean) <= kDivergenceCeiling) || !std::isfinite(step.q);
    } else {
      step = euler_ou_step(q, b, h, z);
    }
    if (step.diverged) {
      return {std::numeric_limits<double>::infinity(), true, tracker.nu,
              tracker.multi_crossings};
    }
    cum += 0.5 * h * (1.0 + g * g) * (q * q + step.q * step.q);
    q = step.q;
    const double t = grid.time(k + 1);
    policy.observe(t, q);
    tracker.observe(q);
    g = policy.gain(t);
    sink(k + 1, t, q, -g * q, tracker.nu, cum);
  }
  return {cum, false, tracker.nu, tracker.multi_crossings};
}

template <Policy P, class Noise>
Trajectory simulate_path(const P& policy, const SystemParams& params,
                         const SimGrid& grid, Noise&& noise) {
  params.validate();
  Trajectory traj;
  const auto n = static_cast<std::size_t>(grid.n_steps) + 1;
  traj.times.reserve(n);
  traj.q.reserve(n);
  traj.u.reserve(n);
  traj.epoch.reserve(n);
  traj.cum_cost.reserve(n);
  const PathOutcome out = run_path(
      policy, params, grid, std::forward<Noise>(noise),
      [&traj](std::int64_t, double t, double q, double u, int epoch, double cum) {
        traj.times.push_back(t);
        traj.q.push_back(q);
        traj.u.push_back(u);
        traj.epoch.push_back(epoch);
        traj.cum_cost.push_back(cum);
      });
  traj.cost = out.cost;
  traj.diverged = out.diverged;
  traj.multi_crossings = out.multi_crossings;
  return traj;
}

/// Simulates one path with the noise stream addressed by the grid.
template <Policy P>
Trajectory simulate_path(const P& policy, const SystemParams& params,
                         const SimGrid& grid) {
  return simulate_path(policy, params, grid,
                       NormalStream(grid.master_seed, grid.path_index));
}

template <class Noise>
Trajectory simulate_path(const AnyPolicy& policy, const SystemParams& params,
                         const SimGrid& grid, Noise&& noise) {
  return std::visit(
      [&](const auto& p) {
        return simulate_path(p, params, grid, std::forward<Noise>(noise));
      },
      policy);
}

inline Trajectory simulate_path(const AnyPolicy& policy, const SystemParams& params,
                                const SimGrid& grid) {
  return simulate_path(policy, params, grid,
                       NormalStream(grid.master_seed, grid.path_index));
}

/// CSV dump: header `t,q,u,epoch,cum_cost`, %.17g floats.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  out << "t,q,u,epoch,cum_cost\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out << format_double(traj.times[i]) << ',' << format_double(traj.q[i]) << ','
        << format_double(traj.u[i]) << ',' << traj.epoch[i] << ','
        << format_double(traj.cum_cost[i]) << '\n';
  }
  return out.str();
}

}  // namespace aglqr
