#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "driftls/errors.hpp"
#include "driftls/harness/config.hpp"
#include "driftls/harness/experiments.hpp"

namespace driftls::harness {

inline const char* kUsage =
    "usage: driftls <track|bandit|bench|bounds|gen> [--config PATH] [--key=value | --key value]...\n"
    "  common keys: seed, seeds, out, algo, variant, d, k, t, horizon, noise, sigma, timing, csv\n";

inline Config make_config(const std::string& cmd) {
  if (cmd == "track") {
    return Config(keys_with({"stream", "step", "c", "c1", "gamma0", "reg", "alpha", "lambda", "theta_norm", "average",
                             "burn_in", "epoch_factor", "sag_divide_by_seen", "per_decade", "fit_lo", "fit_hi"}));
  }
  if (cmd == "bandit") {
    return Config(keys_with({"kappa", "input", "log", "truth", "c_rule", "step_rule", "c", "c1", "gamma0", "step", "reg",
                             "alpha", "lambda", "theta_norm", "density", "nonnegative", "fixed_pool", "pool_seed",
                             "action_set", "track_error", "track_every", "track_from", "trace_every", "theta_steps",
                             "epoch_factor", "per_decade", "fit_lo", "fit_hi"}));
  }
  if (cmd == "bench") return Config(keys_with({"algos", "dims", "steps", "warmup", "warmup_ms", "repeats", "buffer_len", "block_ns"}));
  if (cmd == "bounds") return Config(keys_with({"delta", "mu", "c", "theta_norm", "k_lo", "k_hi", "mean_seeds"}));
  if (cmd == "gen") return Config(keys_with({"density", "nonnegative", "theta_norm", "log", "truth"}));
  throw ConfigError("unknown subcommand '" + cmd + "'");
}

inline Outcome dispatch(const std::string& cmd, const Config& cfg) {
  if (cmd == "track") return run_track(cfg);
  if (cmd == "bandit") return run_bandit(cfg);
  if (cmd == "bench") return run_bench(cfg);
  if (cmd == "bounds") return run_bounds(cfg);
  return run_gen(cfg);
}

// Runs one subcommand end to end and maps failures onto exit codes.
inline int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  if (argv.empty() || argv[0] == "--help" || argv[0] == "-h") {
    (argv.empty() ? err : out) << kUsage;
    return argv.empty() ? kExitConfig : kExitOk;
  }
  const std::string cmd = argv[0];
  try {
    Config cfg = make_config(cmd);
    apply_args(cfg, std::vector<std::string>(argv.begin() + 1, argv.end()));
    const Outcome o = dispatch(cmd, cfg);
    for (const auto& line : o.report) out << line << '\n';
    if (cfg.flag("csv") && !o.csv.empty()) {
      std::ifstream in(o.csv, std::ios::binary);
      out << in.rdbuf();
    }
    return o.exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SchemaError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ContractViolation& e) {
    err << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace driftls::harness
