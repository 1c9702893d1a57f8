#pragma once

// Feedback policies u = -gain(t) q. A policy is a small value type: the
// simulator copies a prototype per path, asks for the gain at the start of
// each step, and reports the post-step state through observe().

#include <cmath>
#include <concepts>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "aglqr/classical_lqr.hpp"
#include "aglqr/ou_types.hpp"

namespace aglqr {

template <class P>
concept Policy = std::copy_constructible<P> &&
                 requires(P policy, const P& cpolicy, double t, double q) {
                   { cpolicy.gain(t) } -> std::convertible_to<double>;
                   policy.observe(t, q);
                 };

struct StrategyConstants {
  double C0 = 4.0;
  double C1 = 4096.0;  // 2^12

  void validate() const {
    if (!(C0 > 0.0) || !std::isfinite(C0)) {
      throw std::invalid_argument("StrategyConstants: C0 must be positive");
    }
    if (!(C1 > 4.0) || !std::isfinite(C1)) {
      throw std::invalid_argument("StrategyConstants: C1 must exceed 4");
    }
  }
};

/// Internal state of the epoch controller.
/// nu = -1 is the Prologue; Epoch nu ends when |q| first reaches 2^(nu+1).
struct EpochState {
  int nu = -1;
  double t_start = 0.0;
  double a_nu = 0.0;
  double threshold_exit = 1.0;

  /// Running estimate of the drift, a_nu / 4. Reporting only.
  double guess_a() const { return a_nu / 4.0; }

  friend bool operator==(const EpochState&, const EpochState&) = default;
};

/// Gain applied in the current phase: none before Epoch 1, else 2 a_nu.
inline double sigma_star_gain(const EpochState& state) {
  return state.nu <= 0 ? 0.0 : 2.0 * state.a_nu;
}

/// Advances the controller after observing q at time t. At most one epoch
/// transition per call; the horizon T is never consulted.
inline EpochState sigma_star_observe(const EpochState& state, double t, double q,
                                     const StrategyConstants& consts = {}) {
  if (!(std::fabs(q) >= state.threshold_exit)) return state;

  EpochState next;
  next.nu = state.nu + 1;
  next.t_start = t;
  next.threshold_exit = 2.0 * state.threshold_exit;
  if (next.nu >= 1) {
    const double duration = t - state.t_start;
    if (!(duration > 0.0)) {
      throw std::domain_error(
          "sigma_star_observe: zero-length epoch at t = " + std::to_string(t) +
          " (crossings must be detected at distinct times)");
    }
    next.a_nu = consts.C0 * std::numbers::ln2 / duration + consts.C1 * state.a_nu;
  }
  return next;
}

inline double sigma_opt_gain(double t, const SystemParams& params) {
  return optimal_gain(t, params.a, params.T);
}

constexpr double zero_gain() { return 0.0; }
constexpr double constant_gain(double g) { return g; }

struct ZeroPolicy {
  double gain(double) const { return zero_gain(); }
  void observe(double, double) {}
};

struct ConstantGainPolicy {
  double g = 0.0;
  double gain(double) const { return constant_gain(g); }
  void observe(double, double) {}
};

/// Optimal policy for a known drift.
struct SigmaOptPolicy {
  SystemParams params;
  double gain(double t) const { return sigma_opt_gain(t, params); }
  void observe(double, double) {}
};

/// The agnostic epoch strategy.
class SigmaStarPolicy {
 public:
  SigmaStarPolicy() = default;
  explicit SigmaStarPolicy(StrategyConstants consts) : consts_(consts) {
    consts_.validate();
  }

  double gain(double) const { return sigma_star_gain(state_); }
  void observe(double t, double q) { state_ = sigma_star_observe(state_, t, q, consts_); }

  const EpochState& state() const { return state_; }
  const StrategyConstants& constants() const { return consts_; }

 private:
  StrategyConstants consts_{};
  EpochState state_{};
};

using AnyPolicy =
    std::variant<ZeroPolicy, ConstantGainPolicy, SigmaOptPolicy, SigmaStarPolicy>;

/// Parsed form of the policy names accepted on the command line:
/// `sigma-star`, `sigma-opt`, `zero`, `const:<g>`.
struct PolicySpec {
  enum class Kind { sigma_star, sigma_opt, zero, constant };
  Kind kind = Kind::sigma_star;
  double g = 0.0;

  static PolicySpec parse(std::string_view text) {
    if (text == "sigma-star") return {Kind::sigma_star, 0.0};
    if (text == "sigma-opt") return {Kind::sigma_opt, 0.0};
    if (text == "zero") return {Kind::zero, 0.0};
    constexpr std::string_view prefix = "const:";
    if (text.starts_with(prefix)) {
      const std::string number(text.substr(prefix.size()));
      std::size_t used = 0;
      double g = 0.0;
      try {
        g = std::stod(number, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != number.size() || !std::isfinite(g)) {
        throw std::invalid_argument("bad constant gain in policy '" +
                                    std::string(text) + "'");
      }
      return {Kind::constant, g};
    }
    throw std::invalid_argument("unknown policy '" + std::string(text) +
                                "' (expected sigma-star, sigma-opt, zero, const:<g>)");
  }

  std::string name() const {
    switch (kind) {
      case Kind::sigma_star: return "sigma-star";
      case Kind::sigma_opt: return "sigma-opt";
      case Kind::zero: return "zero";
      case Kind::constant: break;
    }
    return "const:" + std::to_string(g);
  }

  /// sigma-opt needs the true (a, T); the others ignore params.
  AnyPolicy make(const SystemParams& params,
                 const StrategyConstants& consts = {}) const {
    switch (kind) {
      case Kind::sigma_star: return SigmaStarPolicy(consts);
      case Kind::sigma_opt: return SigmaOptPolicy{params};
      case Kind::zero: return ZeroPolicy{};
      case Kind::constant: break;
    }
    return ConstantGainPolicy{g};
  }
};

}  // namespace aglqr
