#pragma once

// Command-line front end: `aglqr <command> [flags]` with commands sopt,
// simulate, regret-sweep, epochs and verify.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aglqr/classical_lqr.hpp"
#include "aglqr/io.hpp"
#include "aglqr/montecarlo.hpp"
#include "aglqr/ou_engine.hpp"
#include "aglqr/strategy.hpp"
#include "aglqr/verify.hpp"

namespace aglqr::cli {

enum class Command { sopt, simulate, regret_sweep, epochs, verify };
enum class Format { csv, json };

struct RunConfig {
  Command command = Command::sopt;
  double a = 0.0;
  std::vector<double> a_grid;
  double T = 1.0;
  double dt = 1e-3;
  std::int64_t n_paths = 20000;
  std::uint64_t seed = 42;
  std::string policy = "sigma-star";
  std::string out_path;
  Format format = Format::csv;
  unsigned threads = 0;
  Suite suite = Suite::all;
  bool zero_noise = false;
  Scheme scheme = Scheme::exact;
};

/// Bad or missing arguments; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --help was given; what() holds the usage text (exit code 0).
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Reads `key = value` lines ('#' starts a comment) into `--key=value`.
inline std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--config: cannot read '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--config: line " + std::to_string(lineno) + " is not `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw UsageError("--config: bad key on line " + std::to_string(lineno));
    }
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

/// Value of --config in args, if any.
inline std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config: missing path");
      return args[i + 1];
    }
    if (args[i].starts_with("--config=")) return args[i].substr(9);
  }
  return std::nullopt;
}

inline void require_positive(double x, const char* flag) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw UsageError(std::string(flag) + " must be a positive finite number");
  }
}

}  // namespace detail

/// Parses argv (without the program name). Flags from --config are applied
/// first and command-line flags override them.
inline RunConfig parse_args(std::vector<std::string> args) {
  RunConfig cfg;
  std::string format = "csv";
  std::string suite = "all";
  std::string scheme = "exact";
  std::string config_path;

  CLI::App app{"Agnostic control of the scalar LQ system: closed forms, simulation, "
               "regret experiments and statistical checks.",
               "aglqr"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every command");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--T", cfg.T, "Horizon (default 1)");
    sub->add_option("--config", config_path, "File of `key = value` defaults");
    sub->add_option("--out", cfg.out_path, "Output file (default: stdout)");
    sub->add_option("--threads", cfg.threads, "Worker threads (default: all cores)");
    sub->add_option("--seed", cfg.seed, "Master seed (default 42)");
  };
  auto add_mc = [&](CLI::App* sub) {
    sub->add_option("--dt", cfg.dt, "Time step (default 1e-3)");
    sub->add_option("--n-paths", cfg.n_paths, "Monte Carlo paths (default 20000)");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--zero-noise", cfg.zero_noise, "Test hook: replace all noise by zeros");
  };

  CLI::App* sopt = app.add_subcommand("sopt", "Optimal cost S_opt(a): closed form and ODE oracle");
  sopt->add_option("--a", cfg.a, "Drift")->required();
  add_common(sopt);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Simulate one policy; one path writes a trajectory, more give a cost estimate");
  simulate->add_option("--a", cfg.a, "Drift")->required();
  simulate->add_option("--policy", cfg.policy, "sigma-star, sigma-opt, zero or const:<g>");
  simulate->add_option("--scheme", scheme, "exact or euler")
      ->check(CLI::IsMember({"exact", "euler"}));
  add_common(simulate);
  add_mc(simulate);

  CLI::App* sweep = app.add_subcommand("regret-sweep", "Regret of a policy over a grid of drifts");
  sweep->add_option("--a-grid", cfg.a_grid, "Comma-separated drifts")->required()->delimiter(',');
  sweep->add_option("--policy", cfg.policy, "sigma-star, sigma-opt, zero or const:<g>");
  add_common(sweep);
  add_mc(sweep);

  CLI::App* epochs = app.add_subcommand("epochs", "Epoch occupancy of sigma-star");
  epochs->add_option("--a", cfg.a, "Drift")->required();
  add_common(epochs);
  add_mc(epochs);

  CLI::App* verify = app.add_subcommand("verify", "Statistical verification suite");
  verify->add_option("--suite", suite, "lemmas, regret or all")
      ->check(CLI::IsMember({"lemmas", "regret", "all"}));
  verify->add_option("--dt", cfg.dt, "Time step for the regret suite (default 1e-3)");
  verify->add_option("--n-paths", cfg.n_paths, "Paths per drift in the regret suite");
  add_common(verify);

  for (CLI::App* sub : {sopt, simulate, sweep, epochs, verify}) {
    for (CLI::Option* opt : sub->get_options()) {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }
  sweep->get_option("--a-grid")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  if (const auto path = detail::find_config(args); path && !args.empty()) {
    const auto extra = detail::config_file_args(*path);
    // Config values go right after the command so later flags override them.
    args.insert(args.begin() + 1, extra.begin(), extra.end());
    // A grid from the command line replaces, not extends, one from the file.
    bool grid_on_cli = false;
    for (std::size_t i = 1 + extra.size(); i < args.size(); ++i) {
      grid_on_cli = grid_on_cli || args[i].starts_with("--a-grid");
    }
    if (grid_on_cli) {
      std::erase_if(args, [&](const std::string& s) {
        return s.starts_with("--a-grid") &&
               std::find(extra.begin(), extra.end(), s) != extra.end();
      });
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (sopt->parsed()) cfg.command = Command::sopt;
  if (simulate->parsed()) cfg.command = Command::simulate;
  if (sweep->parsed()) cfg.command = Command::regret_sweep;
  if (epochs->parsed()) cfg.command = Command::epochs;
  if (verify->parsed()) cfg.command = Command::verify;

  cfg.format = format == "json" ? Format::json : Format::csv;
  cfg.suite = suite == "lemmas" ? Suite::lemmas : suite == "regret" ? Suite::regret : Suite::all;
  cfg.scheme = scheme == "euler" ? Scheme::euler_maruyama : Scheme::exact;

  detail::require_positive(cfg.T, "--T");
  detail::require_positive(cfg.dt, "--dt");
  if (!std::isfinite(cfg.a)) throw UsageError("--a must be finite");
  if (cfg.dt > cfg.T) throw UsageError("--dt must not exceed --T");
  if (cfg.n_paths < 1) throw UsageError("--n-paths must be at least 1");
  if (cfg.command == Command::regret_sweep) {
    if (cfg.a_grid.empty()) throw UsageError("--a-grid must not be empty");
    for (double a : cfg.a_grid) {
      if (!std::isfinite(a)) throw UsageError("--a-grid values must be finite");
    }
    if (cfg.n_paths < 2) throw UsageError("--n-paths must be at least 2 for regret-sweep");
  }
  if (cfg.command == Command::simulate || cfg.command == Command::regret_sweep) {
    try {
      PolicySpec::parse(cfg.policy);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--policy: ") + e.what());
    }
  }
  return cfg;
}

inline RunConfig parse_args(int argc, const char* const* argv) {
  return parse_args(std::vector<std::string>(argv + 1, argv + argc));
}

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.out_path.empty()) {
    out << text;
  } else {
    write_file_atomic(cfg.out_path, text);
  }
}

inline MonteCarloOptions mc_options(const RunConfig& cfg) {
  MonteCarloOptions mc;
  mc.threads = cfg.threads;
  mc.zero_noise = cfg.zero_noise;
  mc.scheme = cfg.scheme;
  return mc;
}

inline std::string run_sopt(const RunConfig& cfg) {
  const double closed = s_opt_closed(cfg.a, cfg.T);
  const double oracle = s_opt_ode(cfg.a, cfg.T);
  std::ostringstream out;
  out << "a,T,s_opt_closed,s_opt_ode,abs_diff\n"
      << format_double(cfg.a) << ',' << format_double(cfg.T) << ',' << format_double(closed)
      << ',' << format_double(oracle) << ',' << format_double(std::fabs(closed - oracle))
      << '\n';
  return out.str();
}

inline std::string run_simulate(const RunConfig& cfg, std::ostream& out) {
  const PolicySpec spec = PolicySpec::parse(cfg.policy);
  const SystemParams params{cfg.a, cfg.T};
  if (cfg.n_paths == 1) {
    const SimGrid grid = SimGrid::make(cfg.T, cfg.dt, cfg.seed, 0, cfg.scheme);
    const AnyPolicy policy = spec.make(params);
    const Trajectory traj = cfg.zero_noise ? simulate_path(policy, params, grid, ZeroNoise{})
                                           : simulate_path(policy, params, grid);
    if (traj.diverged) throw ExperimentError("simulate: path diverged");
    out << "cost=" << format_double(traj.cost) << '\n';
    if (cfg.format == Format::json) {
      nlohmann::json j = {{"t", traj.times}, {"q", traj.q},           {"u", traj.u},
                          {"epoch", traj.epoch}, {"cum_cost", traj.cum_cost}, {"cost", traj.cost}};
      return j.dump() + "\n";
    }
    return trajectory_csv(traj);
  }
  const CostEstimate est =
      estimate_cost(spec, cfg.a, cfg.T, cfg.dt, cfg.n_paths, cfg.seed, mc_options(cfg));
  const RegretRecord rec = make_regret_record(cfg.a, cfg.T, cfg.dt, est);
  if (cfg.format == Format::json) return regret_json({rec});
  return regret_csv({rec});
}

}  // namespace detail

/// Executes a parsed configuration. Exit codes: 0 success, 1 experiment or
/// I/O failure (including failed checks), 2 usage error.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  try {
    switch (cfg.command) {
      case Command::sopt:
        detail::emit(cfg, detail::run_sopt(cfg), out);
        return 0;
      case Command::simulate:
        detail::emit(cfg, detail::run_simulate(cfg, out), out);
        return 0;
      case Command::regret_sweep: {
        MonteCarloOptions mc = detail::mc_options(cfg);
        mc.auto_refine = true;
        const auto records = regret_sweep(cfg.a_grid, PolicySpec::parse(cfg.policy), cfg.T,
                                          cfg.dt, cfg.n_paths, cfg.seed, mc);
        detail::emit(cfg, cfg.format == Format::json ? regret_json(records) : regret_csv(records),
                     out);
        return 0;
      }
      case Command::epochs: {
        MonteCarloOptions mc = detail::mc_options(cfg);
        mc.auto_refine = true;
        const EpochTable table = epoch_statistics(cfg.a, cfg.T, cfg.dt, cfg.n_paths, cfg.seed, mc);
        detail::emit(cfg, cfg.format == Format::json ? epoch_json(table) : epoch_csv(table), out);
        return 0;
      }
      case Command::verify: {
        SuiteConfig sc;
        sc.seed = cfg.seed;
        sc.T = cfg.T;
        sc.dt = cfg.dt;
        sc.n_paths = cfg.n_paths;
        sc.threads = cfg.threads;
        const auto reports = run_suite(cfg.suite, sc);
        detail::emit(cfg, report_csv(reports), out);
        int failures = 0;
        for (const auto& r : reports) {
          if (!r.pass) {
            ++failures;
            err << "FAIL " << r.name << ": " << r.detail << '\n';
          }
        }
        return failures == 0 ? 0 : 1;
      }
    }
  } catch (const IoError& e) {
    err << "aglqr: I/O error: " << e.what() << '\n';
    return 1;
  } catch (const ExperimentError& e) {
    err << "aglqr: experiment failed: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "aglqr: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "aglqr: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

/// parse_args + run with exit-code mapping.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = parse_args(argc, argv);
  } catch (const HelpRequested& help) {
    out << help.what();
    return 0;
  } catch (const UsageError& e) {
    err << "aglqr: " << e.what() << '\n';
    return 2;
  }
  return run(cfg, out, err);
}

}  // namespace aglqr::cli
