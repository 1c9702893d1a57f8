#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aglqr {

/// One problem instance: true drift a and horizon T.
struct SystemParams {
  double a = 0.0;
  double T = 1.0;

  void validate() const {
    if (!std::isfinite(a)) throw std::invalid_argument("SystemParams: a must be finite");
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw std::invalid_argument("SystemParams: T must be positive and finite");
    }
  }
};

enum class Scheme { exact, euler_maruyama };

/// Time discretisation and noise address of one path.
///
/// Grid times are k * dt for k < n_steps and exactly T at k = n_steps. The
/// final step is shortened to land on T; when T / dt is an integer up to
/// rounding the final step is exactly dt, so paths with different horizons
/// share bit-identical prefixes.
struct SimGrid {
  double dt = 1e-3;
  std::int64_t n_steps = 1000;
  double T = 1.0;
  std::uint64_t master_seed = 42;
  std::uint64_t path_index = 0;
  Scheme scheme = Scheme::exact;

  static SimGrid make(double T, double dt, std::uint64_t master_seed = 42,
                      std::uint64_t path_index = 0, Scheme scheme = Scheme::exact) {
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw std::invalid_argument("SimGrid: T must be positive and finite");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw std::invalid_argument("SimGrid: dt must be positive and finite");
    }
    const double ratio = T / dt;
    const double nearest = std::round(ratio);
    double n = std::ceil(ratio);
    if (std::fabs(ratio - nearest) <= 1e-9 * std::fmax(1.0, ratio)) n = nearest;
    if (n < 1.0) n = 1.0;
    if (n > 1e12) throw std::invalid_argument("SimGrid: T/dt too large");
    return {dt, static_cast<std::int64_t>(n), T, master_seed, path_index, scheme};
  }

  double time(std::int64_t k) const {
    return k >= n_steps ? T : static_cast<double>(k) * dt;
  }

  double step_length(std::int64_t k) const {
    if (k + 1 < n_steps) return dt;
    const double last = T - static_cast<double>(n_steps - 1) * dt;
    return std::fabs(last - dt) <= 1e-9 * dt ? dt : last;
  }
};

/// Sampled path. Arrays have n_steps + 1 entries unless the path diverged,
/// in which case they stop at the last finite state and cost is +inf.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> q;
  std::vector<double> u;
  std::vector<int> epoch;
  std::vector<double> cum_cost;
  double cost = 0.0;
  bool diverged = false;
  int multi_crossings = 0;  // steps that jumped past more than one threshold
};

}  // namespace aglqr
