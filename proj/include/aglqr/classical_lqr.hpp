#pragma once

// Finite-horizon scalar LQR with known drift a:
//
//   dq = (a q + u) dt + dW,   cost = E int_0^T (q^2 + u^2) dt.
//
// The cost-to-go is J(q, t) = p(t) q^2 + r(t) with
//   -p' = 2 a p + 1 - p^2,  p(T) = 0,
//   -r' = p,                r(T) = 0,
// and the optimal control is u = -p(t) q. The closed forms below are
// rearranged so that nothing overflows or cancels for large |a| T; the
// Runge-Kutta tabulation is the independent check on both.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace aglqr {

/// log(cosh(x)) without overflow.
inline double log_cosh(double x) {
  const double ax = std::fabs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

/// log(sinh(x)) for x > 0.
inline double log_sinh(double x) {
  return x - std::numbers::ln2 + std::log(-std::expm1(-2.0 * x));
}

/// Closed-form Riccati gain p(t; a) on [0, T].
///
/// Uses p = sinh(tau) / cosh(asinh(a) - tau) with tau = (T - t) sqrt(a^2 + 1),
/// which is the tanh expression a - s tanh((t - T) s + artanh(a / s)) with
/// artanh(a / s) = log(s + a) = asinh(a) and the subtraction done
/// analytically. Requires 0 <= t <= T.
inline double riccati_p_closed(double t, double a, double T) {
  const double s = std::hypot(a, 1.0);
  const double tau = (T - t) * s;
  if (tau <= 0.0) return 0.0;
  return std::exp(log_sinh(tau) - log_cosh(std::asinh(a) - tau));
}

/// Optimal expected cost S_opt(a) = r(0; a) from q(0) = 0.
///
/// Algebraically equal to aT - log(s) + log cosh(log(s + a) - T s) with
/// s = sqrt(a^2 + 1), written as
///   T (a + s) + log(alpha) + log1p(exp(2 (asinh(a) - T s)))
/// where alpha = (1 - a/s) / 2 is evaluated without cancellation for either
/// sign of a. Finite and positive for every finite a and T > 0.
inline double s_opt_closed(double a, double T) {
  const double s = std::hypot(a, 1.0);
  double lead;       // T (a + s)
  double log_alpha;  // log((1 - a/s) / 2)
  if (a >= 0.0) {
    lead = T * (a + s);
    log_alpha = -std::numbers::ln2 - std::log(s) - std::asinh(a);
  } else {
    lead = T / (s - a);
    log_alpha = std::log1p(-1.0 / (2.0 * s * (s - a)));
  }
  return lead + log_alpha + std::log1p(std::exp(2.0 * (std::asinh(a) - T * s)));
}

/// Optimal feedback gain K(t, a); sigma_opt applies u = -K q.
inline double optimal_gain(double t, double a, double T) {
  return riccati_p_closed(t, a, T);
}

/// p(t) and r(t) of the Riccati pair for one (a, T).
struct RiccatiSolution {
  double a = 0.0;
  double T = 1.0;
  std::function<double(double)> p;
  std::function<double(double)> r;
};

/// Closed-form evaluators. r(t) is the optimal cost over the remaining
/// horizon T - t, so it reuses s_opt_closed.
inline RiccatiSolution riccati_closed(double a, double T) {
  return {a, T,
          [a, T](double t) { return riccati_p_closed(t, a, T); },
          [a, T](double t) { return t >= T ? 0.0 : s_opt_closed(a, T - t); }};
}

/// Knot values from a backward integration, ascending in t.
struct RiccatiTable {
  double a = 0.0;
  double T = 1.0;
  double h = 0.0;  // uniform knot spacing
  std::vector<double> p;
  std::vector<double> r;

  double time(std::size_t k) const {
    return k + 1 == p.size() ? T : static_cast<double>(k) * h;
  }

  double interpolate(const std::vector<double>& values, double t) const {
    if (t <= 0.0) return values.front();
    if (t >= T) return values.back();
    const double x = t / h;
    auto k = static_cast<std::size_t>(x);
    if (k + 1 >= values.size()) return values.back();
    const double w = x - static_cast<double>(k);
    return (1.0 - w) * values[k] + w * values[k + 1];
  }
};

/// Integrates -p' = 2ap + 1 - p^2 and -r' = p backward from t = T with
/// classical RK4 and uniform step T / ceil(T / dt_ode).
inline RiccatiTable riccati_table(double a, double T, double dt_ode) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw std::invalid_argument("riccati_ode: T must be positive and finite");
  }
  if (!(dt_ode > 0.0) || dt_ode > T / 100.0) {
    throw std::invalid_argument("riccati_ode: need 0 < dt_ode <= T/100");
  }
  const auto n = static_cast<std::size_t>(std::ceil(T / dt_ode));
  RiccatiTable table;
  table.a = a;
  table.T = T;
  table.h = T / static_cast<double>(n);
  table.p.assign(n + 1, 0.0);
  table.r.assign(n + 1, 0.0);

  // Reversed time s = T - t turns the terminal problem into an initial one:
  // dp/ds = 2ap + 1 - p^2, dr/ds = p.
  const auto dp = [a](double p) { return 2.0 * a * p + 1.0 - p * p; };
  const double h = table.h;
  double p = 0.0;
  double r = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    const double k1p = dp(p);
    const double k1r = p;
    const double p2 = p + 0.5 * h * k1p;
    const double k2p = dp(p2);
    const double k2r = p2;
    const double p3 = p + 0.5 * h * k2p;
    const double k3p = dp(p3);
    const double k3r = p3;
    const double p4 = p + h * k3p;
    const double k4p = dp(p4);
    const double k4r = p4;
    p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
    if (!(std::fabs(p) <= 1e12)) {
      throw std::runtime_error("riccati_ode: |p| exceeded 1e12 at a = " +
                               std::to_string(a));
    }
    table.p[n - 1 - step] = p;
    table.r[n - 1 - step] = r;
  }
  return table;
}

/// Tabulated oracle with linear interpolation between knots.
inline RiccatiSolution riccati_ode(double a, double T, double dt_ode) {
  auto table = std::make_shared<const RiccatiTable>(riccati_table(a, T, dt_ode));
  return {a, T,
          [table](double t) { return table->interpolate(table->p, t); },
          [table](double t) { return table->interpolate(table->r, t); }};
}

/// r(0) from the ODE oracle with the default step 1e-5 T.
inline double s_opt_ode(double a, double T, double dt_ode = 0.0) {
  if (dt_ode <= 0.0) dt_ode = 1e-5 * T;
  return riccati_table(a, T, dt_ode).r.front();
}

}  // namespace aglqr
