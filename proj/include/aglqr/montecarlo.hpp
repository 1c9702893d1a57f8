#pragma once

// Monte Carlo estimation of expected cost and regret. Paths are independent
// jobs addressed by path_index; workers write into per-index slots and all
// reductions run afterwards in ascending index order, so the thread count
// never changes a result bit.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aglqr/classical_lqr.hpp"
#include "aglqr/io.hpp"
#include "aglqr/ou_engine.hpp"
#include "aglqr/strategy.hpp"

namespace aglqr {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MonteCarloOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  Scheme scheme = Scheme::exact;
  bool zero_noise = false;        // test hook
  std::uint64_t path_offset = 0;  // first path_index used
  bool auto_refine = false;       // shrink dt for |a| > 16 (sweeps only)
  StrategyConstants constants{};
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on a pool of workers. If any call throws,
/// the exception from the smallest index is rethrown after all workers stop.
template <class Body>
void parallel_for(std::int64_t n, unsigned threads, Body&& body) {
  constexpr std::int64_t kChunk = 64;
  threads = static_cast<unsigned>(
      std::min<std::int64_t>(resolve_threads(threads), std::max<std::int64_t>(1, (n + kChunk - 1) / kChunk)));
  std::atomic<std::int64_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::int64_t error_index = n;

  auto worker = [&] {
    for (;;) {
      const std::int64_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      const std::int64_t end = std::min(n, begin + kChunk);
      for (std::int64_t i = begin; i < end; ++i) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
        }
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

/// dt used by sweeps: unchanged for |a| <= 16, else scaled by 16 / |a| so
/// that |a| dt stays at its |a| = 16 value.
inline double auto_refined_dt(double dt, double a) {
  const double abs_a = std::fabs(a);
  return abs_a > 16.0 ? dt * 16.0 / abs_a : dt;
}

/// Runs n independent paths of one policy and returns per-path outcomes in
/// path order. Path i uses noise stream (master_seed, path_offset + i).
inline std::vector<PathOutcome> simulate_paths(const AnyPolicy& policy,
                                               const SystemParams& params, double dt,
                                               std::int64_t n_paths,
                                               std::uint64_t master_seed,
                                               const MonteCarloOptions& options = {}) {
  params.validate();
  std::vector<PathOutcome> outcomes(static_cast<std::size_t>(std::max<std::int64_t>(0, n_paths)));
  const SimGrid base = SimGrid::make(params.T, dt, master_seed, 0, options.scheme);
  parallel_for(n_paths, options.threads, [&](std::int64_t i) {
    SimGrid grid = base;
    grid.path_index = options.path_offset + static_cast<std::uint64_t>(i);
    outcomes[static_cast<std::size_t>(i)] = std::visit(
        [&](const auto& p) {
          if (options.zero_noise) return run_path(p, params, grid, ZeroNoise{});
          return run_path(p, params, grid, NormalStream(grid.master_seed, grid.path_index));
        },
        policy);
  });
  return outcomes;
}

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n_paths = 0;
  std::int64_t n_flagged = 0;
  int max_epoch_seen = -1;
  double sample_variance = 0.0;
};

/// Mean and standard error over unflagged paths (Welford, index order).
inline CostEstimate summarize_costs(const std::vector<PathOutcome>& outcomes) {
  CostEstimate est;
  est.n_paths = static_cast<std::int64_t>(outcomes.size());
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t count = 0;
  for (const auto& o : outcomes) {
    est.max_epoch_seen = std::max(est.max_epoch_seen, o.max_epoch);
    if (o.diverged) {
      ++est.n_flagged;
      continue;
    }
    ++count;
    const double delta = o.cost - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (o.cost - mean);
  }
  est.mean = mean;
  if (count > 1) {
    est.sample_variance = m2 / static_cast<double>(count - 1);
    est.std_error = std::sqrt(est.sample_variance / static_cast<double>(count));
  }
  return est;
}

/// Expected cost S(policy, a) over n_paths paths. Throws ExperimentError if
/// any path diverges.
inline CostEstimate estimate_cost(const AnyPolicy& policy, double a, double T,
                                  double dt, std::int64_t n_paths,
                                  std::uint64_t master_seed,
                                  const MonteCarloOptions& options = {}) {
  if (n_paths < 2) throw std::invalid_argument("estimate_cost: n_paths must be >= 2");
  const auto outcomes = simulate_paths(policy, {a, T}, dt, n_paths, master_seed, options);
  const CostEstimate est = summarize_costs(outcomes);
  if (est.n_flagged > 0) {
    throw ExperimentError("estimate_cost: " + std::to_string(est.n_flagged) + " of " +
                          std::to_string(est.n_paths) + " paths diverged at a = " +
                          format_double(a));
  }
  return est;
}

inline CostEstimate estimate_cost(const PolicySpec& spec, double a, double T, double dt,
                                  std::int64_t n_paths, std::uint64_t master_seed,
                                  const MonteCarloOptions& options = {}) {
  return estimate_cost(spec.make({a, T}, options.constants), a, T, dt, n_paths,
                       master_seed, options);
}

/// 95% normal quantile used for every reported interval.
inline constexpr double kZ95 = 1.959963984540054;

struct RegretRecord {
  double a = 0.0;
  double dt = 0.0;
  double s_opt = 0.0;
  CostEstimate s_est;
  double mr = 0.0;
  double ar = 0.0;
  double mr_lo = 0.0;
  double mr_hi = 0.0;

  double mr_half_width() const { return 0.5 * (mr_hi - mr_lo); }
};

/// MR = mean / S_opt with S_opt exact, so the interval is the cost interval
/// scaled by 1 / S_opt.
inline RegretRecord make_regret_record(double a, double T, double dt,
                                       const CostEstimate& est) {
  RegretRecord rec;
  rec.a = a;
  rec.dt = dt;
  rec.s_opt = s_opt_closed(a, T);
  rec.s_est = est;
  rec.mr = est.mean / rec.s_opt;
  rec.ar = est.mean - rec.s_opt;
  const double half = kZ95 * est.std_error / rec.s_opt;
  rec.mr_lo = rec.mr - half;
  rec.mr_hi = rec.mr + half;
  return rec;
}

/// One RegretRecord per drift value. Grid point i uses path indices
/// [offset + i n_paths, offset + (i+1) n_paths).
inline std::vector<RegretRecord> regret_sweep(const std::vector<double>& a_grid,
                                              const PolicySpec& spec, double T, double dt,
                                              std::int64_t n_paths,
                                              std::uint64_t master_seed,
                                              const MonteCarloOptions& options = {}) {
  if (a_grid.empty()) throw std::invalid_argument("regret_sweep: empty a grid");
  for (double a : a_grid) {
    if (!std::isfinite(a)) throw std::invalid_argument("regret_sweep: non-finite a");
  }
  std::vector<RegretRecord> records;
  records.reserve(a_grid.size());
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    const double a = a_grid[i];
    const double dt_a = options.auto_refine ? auto_refined_dt(dt, a) : dt;
    MonteCarloOptions opts = options;
    opts.path_offset = options.path_offset + i * static_cast<std::uint64_t>(n_paths);
    CostEstimate est;
    try {
      est = estimate_cost(spec, a, T, dt_a, n_paths, master_seed, opts);
    } catch (const ExperimentError& e) {
      throw ExperimentError(std::string("regret_sweep [a = ") + format_double(a) +
                            "]: " + e.what());
    }
    records.push_back(make_regret_record(a, T, dt_a, est));
  }
  return records;
}

inline std::string regret_csv(const std::vector<RegretRecord>& records) {
  std::ostringstream out;
  out << "a,s_opt,s_est_mean,s_est_se,mr,mr_lo,mr_hi,ar,n_paths,n_flagged,max_epoch_seen\n";
  for (const auto& r : records) {
    out << format_double(r.a) << ',' << format_double(r.s_opt) << ','
        << format_double(r.s_est.mean) << ',' << format_double(r.s_est.std_error) << ','
        << format_double(r.mr) << ',' << format_double(r.mr_lo) << ','
        << format_double(r.mr_hi) << ',' << format_double(r.ar) << ',' << r.s_est.n_paths
        << ',' << r.s_est.n_flagged << ',' << r.s_est.max_epoch_seen << '\n';
  }
  return out.str();
}

inline std::string regret_json(const std::vector<RegretRecord>& records) {
  auto rows = nlohmann::json::array();
  for (const auto& r : records) {
    rows.push_back({{"a", r.a},
                    {"s_opt", r.s_opt},
                    {"s_est_mean", r.s_est.mean},
                    {"s_est_se", r.s_est.std_error},
                    {"mr", r.mr},
                    {"mr_lo", r.mr_lo},
                    {"mr_hi", r.mr_hi},
                    {"ar", r.ar},
                    {"n_paths", r.s_est.n_paths},
                    {"n_flagged", r.s_est.n_flagged},
                    {"max_epoch_seen", r.s_est.max_epoch_seen}});
  }
  return rows.dump(2) + "\n";
}

// Epoch occupancy -----------------------------------------------------------

/// Wilson score interval for a binomial proportion.
struct Proportion {
  std::int64_t count = 0;
  std::int64_t n = 0;
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline Proportion wilson_interval(std::int64_t count, std::int64_t n, double z = kZ95) {
  Proportion out{count, n, 0.0, 0.0, 1.0};
  if (n <= 0) return out;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(count) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  out.p = p;
  out.lo = std::max(0.0, centre - half);
  out.hi = std::min(1.0, centre + half);
  return out;
}

struct EpochTable {
  double a = 0.0;
  double dt = 0.0;
  std::int64_t n_paths = 0;
  std::int64_t multi_crossing_paths = 0;
  std::vector<Proportion> occupancy;            // index nu: P(E_nu)
  std::vector<int> max_epoch;                   // per path
  std::vector<std::vector<double>> entry_times;  // per path, t_0, t_1, ...

  Proportion p_epoch(int nu) const {
    if (nu >= 0 && static_cast<std::size_t>(nu) < occupancy.size()) return occupancy[nu];
    return wilson_interval(0, n_paths);
  }
};

/// Occupancy of the sigma_star epochs: the fraction of paths that enter
/// Epoch nu, with per-path entry times.
inline EpochTable epoch_statistics(double a, double T, double dt, std::int64_t n_paths,
                                   std::uint64_t master_seed,
                                   const MonteCarloOptions& options = {}) {
  const SystemParams params{a, T};
  params.validate();
  if (n_paths < 1) throw std::invalid_argument("epoch_statistics: n_paths must be >= 1");
  EpochTable table;
  table.a = a;
  table.dt = options.auto_refine ? auto_refined_dt(dt, a) : dt;
  table.n_paths = n_paths;
  table.max_epoch.assign(static_cast<std::size_t>(n_paths), -1);
  table.entry_times.assign(static_cast<std::size_t>(n_paths), {});
  std::vector<char> diverged(static_cast<std::size_t>(n_paths), 0);
  std::vector<char> multi(static_cast<std::size_t>(n_paths), 0);

  const SigmaStarPolicy policy(options.constants);
  const SimGrid base = SimGrid::make(T, table.dt, master_seed, 0, options.scheme);
  parallel_for(n_paths, options.threads, [&](std::int64_t i) {
    SimGrid grid = base;
    grid.path_index = options.path_offset + static_cast<std::uint64_t>(i);
    auto& entries = table.entry_times[static_cast<std::size_t>(i)];
    int last = -1;
    auto sink = [&](std::int64_t, double t, double, double, int epoch, double) {
      if (epoch > last) {
        entries.push_back(t);
        last = epoch;
      }
    };
    const PathOutcome out =
        options.zero_noise
            ? run_path(policy, params, grid, ZeroNoise{}, sink)
            : run_path(policy, params, grid, NormalStream(grid.master_seed, grid.path_index), sink);
    table.max_epoch[static_cast<std::size_t>(i)] = out.max_epoch;
    diverged[static_cast<std::size_t>(i)] = out.diverged;
    multi[static_cast<std::size_t>(i)] = out.multi_crossings > 0;
  });

  std::int64_t n_diverged = 0;
  int top = -1;
  for (std::int64_t i = 0; i < n_paths; ++i) {
    n_diverged += diverged[static_cast<std::size_t>(i)];
    table.multi_crossing_paths += multi[static_cast<std::size_t>(i)];
    top = std::max(top, table.max_epoch[static_cast<std::size_t>(i)]);
  }
  if (n_diverged > 0) {
    throw ExperimentError("epoch_statistics: " + std::to_string(n_diverged) +
                          " paths diverged at a = " + format_double(a));
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(top + 1), 0);
  for (int m : table.max_epoch) {
    for (int nu = 0; nu <= m; ++nu) ++counts[static_cast<std::size_t>(nu)];
  }
  for (auto c : counts) table.occupancy.push_back(wilson_interval(c, n_paths));
  return table;
}

inline std::string epoch_csv(const EpochTable& table) {
  std::ostringstream out;
  out << "nu,count,n_paths,p,p_lo,p_hi\n";
  for (std::size_t nu = 0; nu < table.occupancy.size(); ++nu) {
    const auto& row = table.occupancy[nu];
    out << nu << ',' << row.count << ',' << row.n << ',' << format_double(row.p) << ','
        << format_double(row.lo) << ',' << format_double(row.hi) << '\n';
  }
  return out.str();
}

inline std::string epoch_json(const EpochTable& table) {
  auto rows = nlohmann::json::array();
  for (std::size_t nu = 0; nu < table.occupancy.size(); ++nu) {
    const auto& row = table.occupancy[nu];
    rows.push_back({{"nu", nu},
                    {"count", row.count},
                    {"n_paths", row.n},
                    {"p", row.p},
                    {"p_lo", row.lo},
                    {"p_hi", row.hi}});
  }
  return rows.dump(2) + "\n";
}

// Common random numbers -----------------------------------------------------

/// MR difference between two policies estimated twice: paired (both
/// policies see the same noise streams) and unpaired (disjoint streams).
struct PairedComparison {
  double a = 0.0;
  double s_opt = 0.0;
  double mr_diff_paired = 0.0;
  double mr_diff_unpaired = 0.0;
  double var_paired = 0.0;    // variance of the paired MR-difference estimator
  double var_unpaired = 0.0;  // same for the unpaired estimator
};

inline PairedComparison compare_policies(const PolicySpec& first, const PolicySpec& second,
                                         double a, double T, double dt,
                                         std::int64_t n_paths, std::uint64_t master_seed,
                                         const MonteCarloOptions& options = {}) {
  if (n_paths < 2) throw std::invalid_argument("compare_policies: n_paths must be >= 2");
  const SystemParams params{a, T};
  const auto run = [&](const PolicySpec& spec, std::uint64_t offset) {
    MonteCarloOptions opts = options;
    opts.path_offset = offset;
    auto out = simulate_paths(spec.make(params, options.constants), params, dt, n_paths,
                              master_seed, opts);
    for (const auto& o : out) {
      if (o.diverged) throw ExperimentError("compare_policies: path diverged");
    }
    return out;
  };
  const auto x = run(first, options.path_offset);
  const auto y_same = run(second, options.path_offset);
  const auto y_other = run(second, options.path_offset + static_cast<std::uint64_t>(n_paths));

  std::vector<PathOutcome> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i].cost = x[i].cost - y_same[i].cost;

  const CostEstimate ex = summarize_costs(x);
  const CostEstimate ed = summarize_costs(diff);
  const CostEstimate ey = summarize_costs(y_other);
  const double nn = static_cast<double>(n_paths);

  PairedComparison cmp;
  cmp.a = a;
  cmp.s_opt = s_opt_closed(a, T);
  const double s2 = cmp.s_opt * cmp.s_opt;
  cmp.mr_diff_paired = ed.mean / cmp.s_opt;
  cmp.mr_diff_unpaired = (ex.mean - ey.mean) / cmp.s_opt;
  cmp.var_paired = ed.sample_variance / nn / s2;
  cmp.var_unpaired = (ex.sample_variance + ey.sample_variance) / nn / s2;
  return cmp;
}

}  // namespace aglqr
