#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftls/bandits.hpp"
#include "driftls/bounds.hpp"
#include "driftls/environments.hpp"
#include "driftls/event_log.hpp"
#include "driftls/exact.hpp"
#include "driftls/harness/config.hpp"
#include "driftls/harness/io.hpp"
#include "driftls/linalg.hpp"
#include "driftls/metrics.hpp"
#include "driftls/rng.hpp"
#include "driftls/schedules.hpp"
#include "driftls/trackers.hpp"

namespace driftls::harness {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitAcceptance = 4;

struct Outcome {
  int exit_code = kExitOk;
  json summary;
  std::vector<std::string> report;  // human-readable lines for stdout
  std::string csv;                  // path of the main table, echoed by --csv
};

inline const std::set<std::string>& common_keys() {
  static const std::set<std::string> keys{"seed", "seeds", "out", "algo", "variant", "d", "k", "t",
                                          "horizon", "csv", "noise", "sigma", "timing"};
  return keys;
}

inline std::set<std::string> keys_with(std::initializer_list<const char*> extra) {
  std::set<std::string> k = common_keys();
  for (const char* e : extra) k.insert(e);
  return k;
}

inline NoiseModel noise_from(const Config& cfg) {
  return parse_noise(cfg.str("noise", "uniform"), cfg.num("sigma", 0.5));
}

inline std::string seed_file(const std::string& prefix, std::uint64_t seed, const char* ext = ".csv") {
  return prefix + "_seed" + std::to_string(seed) + ext;
}

inline json checkpoint_stats(const std::vector<std::size_t>& checkpoints,
                             const std::vector<std::vector<double>>& per_seed) {
  json rows = json::array();
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    std::vector<double> v;
    for (const auto& s : per_seed) {
      if (c < s.size() && std::isfinite(s[c])) v.push_back(s[c]);
    }
    if (v.empty()) continue;
    rows.push_back({{"n", checkpoints[c]},
                    {"mean", mean(v)},
                    {"q10", quantile(v, 0.1)},
                    {"q50", quantile(v, 0.5)},
                    {"q90", quantile(v, 0.9)},
                    {"runs", v.size()}});
  }
  return rows;
}

// Slope of the per-checkpoint means over [lo, hi]; null with fewer than 10
// usable points.
inline json fitted_slope(const json& stats, double lo, double hi) {
  std::vector<std::pair<double, double>> series;
  for (const auto& r : stats) {
    const double n = r["n"].get<double>();
    const double m = r["mean"].get<double>();
    if (n >= lo && n <= hi && m > 0.0) series.emplace_back(n, m);
  }
  if (series.size() < 10) return nullptr;
  return slope_fit(series);
}

// ---------------------------------------------------------------------------
// track

// Synthetic design: "basis" cycles e_1..e_d (lambda_min(A_bar_n) >= 1/(2d)
// for n >= d); "sphere" draws uniform unit directions.
inline Vec stream_feature(const std::string& stream, std::size_t n, Index d, Rng& rng) {
  if (stream == "basis") return Vec::Unit(d, static_cast<Index>((n - 1) % static_cast<std::size_t>(d)));
  return random_direction(d, rng);
}

inline void check_stream(const std::string& stream) {
  if (stream != "basis" && stream != "sphere") throw ConfigError("unknown stream '" + stream + "'");
}

inline StepSchedule step_from(const Config& cfg, const std::string& fallback_kind, double default_c,
                              double default_gamma0) {
  const std::string kind = cfg.str("step", fallback_kind);
  StepSchedule s;
  if (kind == "shifted") {
    s = StepSchedule::shifted(cfg.num("c", default_c));
  } else if (kind == "harmonic") {
    s = StepSchedule::generic(cfg.num("c", default_c), 0.0);
  } else if (kind == "generic") {
    s = StepSchedule::generic(cfg.num("c", 1.0), cfg.num("c1", 100.0));
  } else if (kind == "constant") {
    s = StepSchedule::constant(cfg.num("gamma0", default_gamma0));
  } else {
    throw ConfigError("unknown step schedule '" + kind + "'");
  }
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline RegSchedule reg_from(const Config& cfg, const std::string& fallback_kind) {
  const std::string kind = cfg.str("reg", fallback_kind);
  RegSchedule r;
  if (kind == "zero") {
    r = RegSchedule::zero();
  } else if (kind == "constant") {
    r = RegSchedule::constant(cfg.num("lambda"));
  } else if (kind == "inverse_n") {
    r = RegSchedule::inverse_n();
  } else if (kind == "power") {
    r = RegSchedule::power(cfg.num("alpha", 0.6));
  } else {
    throw ConfigError("unknown regularisation schedule '" + kind + "'");
  }
  try {
    r.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return r;
}

struct TrackSeries {
  std::vector<TrackingRecord> records;  // one per checkpoint with a defined target
  std::vector<double> err_at;           // aligned with checkpoints; NaN where undefined
};

struct TrackSetup {
  std::string algo;
  std::string stream;
  Index d = 5;
  std::size_t horizon = 0;
  StepSchedule step;
  RegSchedule reg;
  NoiseModel noise;
  double theta_norm = 1.0;
  bool average = false;
  std::size_t burn_in = 0;
  double epoch_factor = 2.0;
  bool divide_by_seen = false;
  bool timing = false;
};

inline TrackSetup track_setup(const Config& cfg) {
  TrackSetup s;
  s.algo = cfg.str("algo", "fols");
  if (s.algo != "fols" && s.algo != "frls" && s.algo != "svrg" && s.algo != "sag") {
    throw ConfigError("track: unknown algo '" + s.algo + "' (fols, frls, svrg, sag)");
  }
  s.stream = cfg.str("stream", "basis");
  check_stream(s.stream);
  s.d = static_cast<Index>(cfg.count("d", 5));
  if (s.d < 1) throw ConfigError("d must be >= 1");
  s.horizon = cfg.count("horizon", 100000);
  // Default: mu = 1/(2d) for the basis stream, c = 3.2/mu so mu c / 4 = 0.8.
  const double default_c = 3.2 * 2.0 * static_cast<double>(s.d);
  const bool vr = s.algo == "svrg" || s.algo == "sag";
  s.step = step_from(cfg, vr ? "constant" : "shifted", default_c, s.algo == "svrg" ? 0.0005 : 0.005);
  s.reg = reg_from(cfg, s.algo == "fols" ? "zero" : (s.algo == "frls" ? "power" : "inverse_n"));
  if (s.algo == "fols" && s.reg.kind != RegSchedule::Kind::zero) throw ConfigError("fols tracks the OLS target; reg must be zero");
  s.noise = noise_from(cfg);
  s.theta_norm = cfg.num("theta_norm", 1.0);
  s.average = cfg.flag("average");
  s.burn_in = cfg.count("burn_in", 0);
  s.epoch_factor = cfg.num("epoch_factor", 2.0);
  if (!(s.epoch_factor > 0.0)) throw ConfigError("epoch_factor must be positive");
  s.divide_by_seen = cfg.flag("sag_divide_by_seen");
  s.timing = cfg.flag("timing");
  return s;
}

// One seeded run: each step appends a fresh sample, then takes one tracker
// step on the grown buffer. Errors are logged at the checkpoints.
inline TrackSeries track_one(const TrackSetup& s, const std::vector<std::size_t>& checkpoints, std::uint64_t seed) {
  const Rng root(seed);
  Rng truth_rng = root.split(1);
  Rng feat_rng = root.split(2);
  Rng noise_rng = root.split(3);
  Rng algo_rng = root.split(4);
  const Vec theta_star = random_direction(s.d, truth_rng, s.theta_norm);

  DataBuffer buffer(s.d);
  OlsState ols(s.d);
  RlsState rls(s.d, s.algo == "fols" ? RegSchedule::zero() : s.reg);
  TrackerState tracker = TrackerState::make(s.d, s.step, s.algo == "frls" ? s.reg : RegSchedule::zero());
  if (s.average) tracker.enable_averaging(s.burn_in);
  SvrgState svrg = SvrgState::make(s.d, s.epoch_factor);
  SagState sag = SagState::make(s.d, s.divide_by_seen);

  TrackSeries out;
  out.err_at.assign(checkpoints.size(), kNaN);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t next = 0;
  for (std::size_t n = 1; n <= s.horizon; ++n) {
    const Vec x = stream_feature(s.stream, n, s.d, feat_rng);
    const double y = x.dot(theta_star) + s.noise.draw(noise_rng);
    buffer.append({x, y});
    if (s.algo == "fols") {
      ols.append({x, y});
      fols_step(tracker, buffer, algo_rng);
    } else {
      rls.append({x, y});
      if (s.algo == "frls") {
        frls_step(tracker, buffer, algo_rng);
      } else if (s.algo == "svrg") {
        svrg_step(svrg, buffer, s.reg(n), s.step(n), algo_rng);
      } else {
        sag_step(sag, buffer, s.reg(n), s.step(n), algo_rng);
      }
    }
    while (next < checkpoints.size() && checkpoints[next] < n) ++next;
    if (next < checkpoints.size() && checkpoints[next] == n) {
      std::optional<Vec> target;
      if (s.algo == "fols") {
        if (ols.invertible()) target = ols.solution();
      } else {
        target = rls.solution();
      }
      if (target) {
        const Vec& theta = s.algo == "svrg" ? svrg.theta : (s.algo == "sag" ? sag.theta : tracker.estimate());
        const double err = tracking_error(theta, *target);
        const std::int64_t ns =
            s.timing ? std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count()
                     : 0;
        out.records.push_back({n, err, ns});
        out.err_at[next] = err;
      }
    }
  }
  return out;
}

inline Outcome run_track(const Config& cfg) {
  const TrackSetup s = track_setup(cfg);
  const auto seeds = cfg.seeds();
  const fs::path out_dir = ensure_dir(cfg.str("out", "out/track"));
  const auto per_decade = static_cast<int>(cfg.count("per_decade", 20));
  if (per_decade < 1) throw ConfigError("per_decade must be >= 1");
  const std::vector<std::size_t> checkpoints = s.horizon ? log_grid(1, s.horizon, per_decade) : std::vector<std::size_t>{};

  const auto series = parallel_map<TrackSeries>(
      seeds.size(), [&](std::size_t i) { return track_one(s, checkpoints, seeds[i]); });

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    CsvWriter w(out_dir / seed_file("track", seeds[i]), "driftls.track.v1", {"n", "err", "wall_ns"});
    for (const auto& r : series[i].records) w.row(r.n, r.err, r.wall_ns);
    w.close();
  }

  std::vector<std::vector<double>> per_seed;
  for (const auto& sr : series) per_seed.push_back(sr.err_at);
  const json stats = checkpoint_stats(checkpoints, per_seed);
  const double fit_lo = cfg.num("fit_lo", 1e3);
  const double fit_hi = cfg.num("fit_hi", 1e5);

  Outcome o;
  o.summary["schema"] = "driftls.track_summary.v1";
  o.summary["config"] = cfg.to_json();
  o.summary["seeds"] = seeds;
  o.summary["checkpoints"] = stats;
  o.summary["slope"] = fitted_slope(stats, fit_lo, fit_hi);
  o.summary["fit_range"] = {fit_lo, fit_hi};

  o.csv = (out_dir / "track_summary.csv").string();
  CsvWriter w(o.csv, "driftls.track_summary.v1", {"n", "mean", "q10", "q50", "q90", "runs"});
  for (const auto& r : stats) {
    w.row(r["n"].get<std::size_t>(), r["mean"].get<double>(), r["q10"].get<double>(), r["q50"].get<double>(),
          r["q90"].get<double>(), r["runs"].get<std::size_t>());
  }
  w.close();
  write_json(out_dir / "track_summary.json", o.summary);
  o.report.push_back("track: " + s.algo + " d=" + std::to_string(s.d) + " horizon=" + std::to_string(s.horizon) +
                     " seeds=" + std::to_string(seeds.size()));
  o.report.push_back("slope: " + (o.summary["slope"].is_null() ? std::string("n/a")
                                                                : format_number(o.summary["slope"].get<double>())));
  return o;
}

// ---------------------------------------------------------------------------
// bandit

struct BanditSeedResult {
  std::vector<BanditStep> rows;
  bool finite = true;
  std::size_t clamps = 0;
  double ctr = kNaN;
  std::size_t matched = 0;
  std::size_t events = 0;
  std::vector<PegePhaseEnd> phase_ends;
  double max_tracking_after = kNaN;  // max tracking error over rounds >= track_from
};

inline LinUcbConfig linucb_from(const Config& cfg) {
  if (!cfg.has("kappa")) throw ConfigError("linucb requires 'kappa' (no default is assumed)");
  const LinUcbVariant v = parse_linucb_variant(cfg.str("variant", "gd"));
  LinUcbConfig c = LinUcbConfig::defaults(v, cfg.num("kappa"));
  c.max_arms = cfg.count("k", 10);
  c.phi_steps = cfg.count("t", 1);
  c.theta_steps = cfg.count("theta_steps", 1);
  if (cfg.has("reg")) c.reg = reg_from(cfg, "power");
  if (cfg.has("step")) {
    c.step = step_from(cfg, "generic", 1.0, 0.005);
    c.phi_schedule = c.step;
  }
  c.svrg_epoch_factor = cfg.num("epoch_factor", 2.0);
  c.track_error = cfg.flag("track_error", true);
  c.track_every = cfg.count("track_every", 1);
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline ActionSet action_set_from(const Config& cfg, Index d) {
  const std::string kind = cfg.str("action_set", "sphere");
  if (kind == "sphere") return ActionSet::unit_sphere(d);
  if (kind == "ellipsoid") {
    // Fixed axis-aligned ellipsoid with semi-axes in [1/sqrt(2), 1].
    Vec diag(d);
    for (Index i = 0; i < d; ++i) diag(i) = 1.0 + static_cast<double>(i) / static_cast<double>(std::max<Index>(1, d - 1));
    return ActionSet::ellipsoid(diag.asDiagonal().toDenseMatrix());
  }
  throw ConfigError("unknown action_set '" + kind + "'");
}

inline Outcome run_bandit(const Config& cfg) {
  const std::string algo = cfg.str("algo", "pege");
  if (algo != "pege" && algo != "linucb") throw ConfigError("bandit: unknown algo '" + algo + "' (pege, linucb)");
  const auto seeds = cfg.seeds();
  const fs::path out_dir = ensure_dir(cfg.str("out", "out/bandit"));
  const std::string input = cfg.str("input", "synthetic");
  if (input != "synthetic" && input != "replay") throw ConfigError("unknown input '" + input + "'");
  const std::size_t trace_every = std::max<std::uint64_t>(1, cfg.count("trace_every", 1));
  const std::size_t track_from = cfg.count("track_from", 1000);
  const bool timing = cfg.flag("timing");
  const NoiseModel noise = noise_from(cfg);
  const double theta_norm = cfg.num("theta_norm", 1.0);
  if (!(theta_norm > 0.0)) throw ConfigError("theta_norm must be positive");

  std::function<BanditSeedResult(std::size_t)> run_seed;
  std::size_t horizon = cfg.count("horizon", 10000);
  std::optional<std::vector<EventRecord>> log;
  std::optional<Vec> truth;

  if (algo == "pege") {
    if (input != "synthetic") throw ConfigError("pege runs on synthetic environments only");
    const Index d = static_cast<Index>(cfg.count("d", 2));
    if (d < 1) throw ConfigError("d must be >= 1");
    const std::string variant = cfg.str("variant", "gd");
    if (variant != "gd" && variant != "exact") throw ConfigError("pege variant must be gd or exact");
    const std::string c_rule = cfg.str("c_rule", "ratio");
    const std::string step_rule = cfg.str("step_rule", "shifted");
    if (c_rule != "ratio" && c_rule != "inverse_lambda") throw ConfigError("c_rule must be ratio or inverse_lambda");
    if (step_rule != "shifted" && step_rule != "harmonic") throw ConfigError("step_rule must be shifted or harmonic");
    const ActionSet actions = action_set_from(cfg, d);
    PegeConfig pc = make_pege_config(boundary_basis(actions), horizon, variant == "gd",
                                     c_rule == "ratio" ? PegeCRule::ratio : PegeCRule::inverse_lambda);
    if (cfg.has("c")) pc.c = cfg.num("c");
    pc.step_rule = step_rule == "shifted" ? PegeStepRule::shifted : PegeStepRule::harmonic;
    pc.track_error = cfg.flag("track_error", true);
    pc.timing = timing;
    validate_pege(pc, actions);
    run_seed = [=](std::size_t i) {
      const Rng root(seeds[i]);
      Rng truth_rng = root.split(1);
      const LinearEnv env{random_direction(d, truth_rng, theta_norm), noise, actions};
      const PegeResult r = pege_run(pc, env, root.split(2));
      BanditSeedResult out;
      out.rows = r.ledger.steps();
      out.phase_ends = r.phase_ends;
      for (const auto& s : out.rows) {
        if (!std::isnan(s.tracking_error)) out.finite = out.finite && std::isfinite(s.tracking_error);
        out.finite = out.finite && std::isfinite(s.cum_regret);
        if (s.n >= track_from && !std::isnan(s.tracking_error)) {
          out.max_tracking_after = std::isnan(out.max_tracking_after) ? s.tracking_error
                                                                      : std::max(out.max_tracking_after, s.tracking_error);
        }
      }
      return out;
    };
  } else {
    const LinUcbConfig lc = linucb_from(cfg);
    if (input == "synthetic") {
      ArmSetSpec spec;
      spec.d = static_cast<Index>(cfg.count("d", 10));
      spec.k = lc.max_arms;
      spec.density = cfg.num("density", 1.0);
      spec.nonnegative = cfg.flag("nonnegative");
      spec.fixed_pool = cfg.flag("fixed_pool");
      if (spec.d < 1) throw ConfigError("d must be >= 1");
      if (!(spec.density > 0.0 && spec.density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
      run_seed = [=](std::size_t i) {
        const Rng root(seeds[i]);
        Rng truth_rng = root.split(1);
        ArmSetSpec sp = spec;
        sp.pool_seed = cfg.count("pool_seed", seeds[i]);
        const LinearEnv env{random_direction(sp.d, truth_rng, theta_norm), noise, ActionSet::unit_sphere(sp.d)};
        const LinUcbRun r = run_linucb_sim(lc, env, sp, horizon, root.split(2), timing);
        BanditSeedResult out;
        out.rows = r.ledger.steps();
        out.finite = r.finite;
        out.clamps = r.clamp_count;
        for (const auto& t : r.tracking) {
          if (t.n >= track_from) {
            out.max_tracking_after = std::isnan(out.max_tracking_after) ? t.err : std::max(out.max_tracking_after, t.err);
          }
        }
        return out;
      };
    } else {
      log = read_event_log(cfg.str("log"), lc.max_arms);
      if (cfg.has("truth")) truth = read_truth_file(cfg.str("truth"));
      horizon = log->size();
      run_seed = [&, lc](std::size_t i) {
        const ReplayResult r = run_linucb_replay(lc, *log, Rng(seeds[i]));
        BanditSeedResult out;
        out.finite = r.finite;
        out.ctr = r.ctr;
        out.matched = r.matched;
        out.events = r.events;
        // Ledger over matched events; regret needs the truth file.
        double cum = 0.0;
        for (std::size_t m = 0; m < r.rewards.size(); ++m) {
          const EventRecord& ev = (*log)[r.event_of[m]];
          BanditStep step;
          step.n = m + 1;
          step.phase = static_cast<std::size_t>(ev.t);
          step.arm_id = ev.arms[r.arm_of[m]].id;
          step.reward = r.rewards[m];
          step.inst_regret = kNaN;
          if (truth) {
            double best = -std::numeric_limits<double>::infinity();
            for (const Arm& a : ev.arms) best = std::max(best, a.x.dot(*truth));
            step.inst_regret = best - ev.arms[r.arm_of[m]].x.dot(*truth);
            cum += step.inst_regret;
          }
          step.cum_regret = truth ? cum : kNaN;
          out.rows.push_back(step);
        }
        return out;
      };
    }
  }

  const auto results = parallel_map<BanditSeedResult>(seeds.size(), run_seed);

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    CsvWriter w(out_dir / seed_file("bandit", seeds[i]), "driftls.bandit.v1",
                {"n", "phase", "arm_id", "reward", "inst_regret", "cum_regret", "tracking_error", "wall_ns"});
    const auto& rows = results[i].rows;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if ((r + 1) % trace_every != 0 && r + 1 != rows.size()) continue;
      const auto& s = rows[r];
      w.row(s.n, s.phase, s.arm_id, s.reward, s.inst_regret, s.cum_regret, s.tracking_error, s.wall_ns);
    }
    w.close();
  }

  const auto per_decade = static_cast<int>(cfg.count("per_decade", 20));
  const std::vector<std::size_t> checkpoints =
      horizon ? log_grid(1, horizon, std::max(1, per_decade)) : std::vector<std::size_t>{};
  std::vector<std::vector<double>> regret(seeds.size()), tracking(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t n : checkpoints) {
      const auto& rows = results[i].rows;
      regret[i].push_back(n <= rows.size() ? rows[n - 1].cum_regret : kNaN);
      tracking[i].push_back(n <= rows.size() ? rows[n - 1].tracking_error : kNaN);
    }
  }

  Outcome o;
  o.summary["schema"] = "driftls.bandit_summary.v1";
  o.summary["config"] = cfg.to_json();
  o.summary["seeds"] = seeds;
  const json regret_stats = checkpoint_stats(checkpoints, regret);
  o.summary["regret"] = regret_stats;
  o.summary["tracking"] = checkpoint_stats(checkpoints, tracking);
  o.summary["regret_exponent"] = fitted_slope(regret_stats, cfg.num("fit_lo", 1e3), cfg.num("fit_hi", 1e18));

  std::vector<double> finals, max_track, ctrs;
  bool finite = true;
  std::size_t clamps = 0, matched = 0, events = 0;
  for (const auto& r : results) {
    if (!r.rows.empty()) finals.push_back(r.rows.back().cum_regret);
    if (!std::isnan(r.max_tracking_after)) max_track.push_back(r.max_tracking_after);
    if (!std::isnan(r.ctr)) ctrs.push_back(r.ctr);
    finite = finite && r.finite;
    clamps += r.clamps;
    matched += r.matched;
    events += r.events;
  }
  o.summary["final_regret_mean"] = finals.empty() ? json(nullptr) : json(mean(finals));
  o.summary["max_tracking_error_after"] =
      max_track.empty() ? json(nullptr) : json(*std::max_element(max_track.begin(), max_track.end()));
  o.summary["track_from"] = track_from;
  o.summary["all_finite"] = finite;
  o.summary["ucb_clamps"] = clamps;
  if (input == "replay") {
    o.summary["events"] = events;
    o.summary["matched"] = matched;
    o.summary["ctr"] = ctrs.empty() ? json(nullptr) : json(mean(ctrs));
  }
  if (algo == "pege") {
    json phases = json::array();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      for (const auto& p : results[i].phase_ends) {
        phases.push_back({{"seed", seeds[i]},
                          {"phase", p.phase},
                          {"samples", p.samples},
                          {"tracker_error", std::isnan(p.tracker_error) ? json(nullptr) : json(p.tracker_error)},
                          {"estimate_error", p.estimate_error}});
      }
    }
    o.summary["phase_ends"] = std::move(phases);
  }

  o.csv = (out_dir / "bandit_summary.csv").string();
  CsvWriter w(o.csv, "driftls.bandit_summary.v1", {"n", "regret_mean", "regret_q10", "regret_q90", "runs"});
  for (const auto& r : regret_stats) {
    w.row(r["n"].get<std::size_t>(), r["mean"].get<double>(), r["q10"].get<double>(), r["q90"].get<double>(),
          r["runs"].get<std::size_t>());
  }
  w.close();
  write_json(out_dir / "bandit_summary.json", o.summary);
  o.report.push_back("bandit: " + algo + " seeds=" + std::to_string(seeds.size()) +
                     " horizon=" + std::to_string(horizon));
  if (!finals.empty()) o.report.push_back("final regret (mean): " + format_number(mean(finals)));
  if (!ctrs.empty()) o.report.push_back("ctr (mean): " + format_number(mean(ctrs)));
  o.report.push_back(std::string("all iterates finite: ") + (finite ? "yes" : "no"));
  return o;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  std::string algo;
  Index d = 0;
  std::size_t steps = 0;
  double median_ns = 0.0;
  double p90_ns = 0.0;
};

namespace detail {

// Times `step` in blocks sized to last at least block_ns; returns per-step
// times of each block after the warm-up.
template <class Step>
std::vector<double> time_blocks(Step&& step, std::size_t warmup, double warmup_ms, std::size_t steps,
                                double block_ns) {
  using clock = std::chrono::steady_clock;
  // Warm up for at least `warmup` steps and at least warmup_ms of wall time.
  const auto w0 = clock::now();
  const auto min_warm = std::chrono::duration<double, std::milli>(warmup_ms);
  std::size_t warm_steps = 0;
  while (warm_steps < warmup || clock::now() - w0 < min_warm) {
    step();
    ++warm_steps;
  }
  const double warm_ns =
      static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - w0).count());
  const double per_step = warm_steps ? warm_ns / static_cast<double>(warm_steps) : block_ns;
  const auto block = static_cast<std::size_t>(std::max(1.0, std::ceil(block_ns / std::max(per_step, 1.0))));
  std::vector<double> out;
  for (std::size_t done = 0; done < steps;) {
    const std::size_t b = std::min(block, steps - done);
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < b; ++i) step();
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();
    out.push_back(static_cast<double>(ns) / static_cast<double>(b));
    done += b;
  }
  return out;
}

}  // namespace detail

inline BenchRow bench_one(const std::string& algo, Index d, std::size_t steps, std::size_t warmup, double warmup_ms,
                          std::size_t buffer_len, double block_ns, std::uint64_t seed) {
  Rng rng(seed, static_cast<std::uint64_t>(d));
  DataBuffer buf(d);
  const Vec theta_star = random_direction(d, rng);
  for (std::size_t i = 0; i < buffer_len; ++i) {
    const Vec x = random_direction(d, rng);
    buf.append({x, x.dot(theta_star) + rng.uniform(-1.0, 1.0)});
  }
  std::vector<double> times;
  if (algo == "fols" || algo == "frls") {
    TrackerState st = TrackerState::make(d, StepSchedule::generic(1.0, 100.0),
                                         algo == "frls" ? RegSchedule::power(0.6) : RegSchedule::zero());
    times = detail::time_blocks([&] { algo == "fols" ? fols_step(st, buf, rng) : frls_step(st, buf, rng); }, warmup,
                                warmup_ms, steps, block_ns);
  } else if (algo == "phi") {
    PhiState st = PhiState::make(buf[0].x);
    times = detail::time_blocks([&] { phi_step(st, buf, 0.01, rng); }, warmup, warmup_ms, steps, block_ns);
  } else if (algo == "svrg") {
    SvrgState st = SvrgState::make(d);
    const double lambda = 1.0 / static_cast<double>(buffer_len);
    times = detail::time_blocks([&] { svrg_step(st, buf, lambda, 0.0005, rng); }, warmup, warmup_ms, steps, block_ns);
  } else if (algo == "sag") {
    SagState st = SagState::make(d);
    const double lambda = 1.0 / static_cast<double>(buffer_len);
    times = detail::time_blocks([&] { sag_step(st, buf, lambda, 0.005, rng); }, warmup, warmup_ms, steps, block_ns);
  } else if (algo == "sm") {
    Mat inv = Mat::Identity(d, d);
    std::size_t i = 0;
    times = detail::time_blocks(
        [&] {
          sm_update_inplace(inv, buf[i].x);
          i = (i + 1) % buffer_len;
        },
        warmup, warmup_ms, steps, block_ns);
  } else {
    throw ConfigError("bench: unknown algo '" + algo + "' (fols, frls, phi, svrg, sag, sm)");
  }
  return {algo, d, steps, quantile(times, 0.5), quantile(times, 0.9)};
}

inline Outcome run_bench(const Config& cfg) {
  const auto algos = cfg.has("algos") ? cfg.strs("algos") : (cfg.has("algo") ? cfg.strs("algo")
                                                                              : std::vector<std::string>{"fols", "frls", "phi", "svrg", "sag", "sm"});
  const auto dims = cfg.has("dims") ? cfg.counts("dims") : std::vector<std::uint64_t>{16, 64, 256, 1024};
  const std::size_t steps = cfg.count("steps", 10000);
  const std::size_t warmup = cfg.count("warmup", 1000);
  const double warmup_ms = cfg.num("warmup_ms", 5.0);
  const std::size_t buffer_len = cfg.count("buffer_len", 256);
  const double block_ns = cfg.num("block_ns", 2000.0);
  if (steps < 1 || buffer_len < 1) throw ConfigError("bench: steps and buffer_len must be >= 1");
  const fs::path out_dir = ensure_dir(cfg.str("out", "out/bench"));
  const std::uint64_t seed = cfg.seeds().front();

  const std::size_t repeats = cfg.count("repeats", 5);
  if (repeats < 1 || repeats > steps) throw ConfigError("bench: repeats must lie in [1, steps]");
  for (auto d : dims) {
    if (d < 1) throw ConfigError("bench: dims must be >= 1");
  }

  // Timing runs stay on one thread so measurements do not contend. The grid
  // is swept `repeats` times round-robin and each cell keeps its fastest
  // sweep, so a burst of host load skews one sweep rather than one cell.
  const std::size_t per_sweep = (steps + repeats - 1) / repeats;
  std::vector<BenchRow> rows;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::size_t cell = 0;
    for (const auto& a : algos) {
      for (auto d : dims) {
        BenchRow row = bench_one(a, static_cast<Index>(d), per_sweep, warmup, warmup_ms, buffer_len, block_ns, seed);
        row.steps = per_sweep * repeats;
        if (r == 0) {
          rows.push_back(row);
        } else if (row.median_ns < rows[cell].median_ns) {
          rows[cell] = row;
        }
        ++cell;
      }
    }
  }

  Outcome o;
  o.csv = (out_dir / "bench.csv").string();
  CsvWriter w(o.csv, "driftls.bench.v1", {"algo", "d", "steps", "median_ns", "p90_ns"});
  for (const auto& r : rows) w.row(r.algo, r.d, r.steps, r.median_ns, r.p90_ns);
  w.close();

  o.summary["schema"] = "driftls.bench_summary.v1";
  o.summary["config"] = cfg.to_json();
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"algo", r.algo}, {"d", r.d}, {"steps", r.steps}, {"median_ns", r.median_ns}, {"p90_ns", r.p90_ns}});
  }
  o.summary["rows"] = table;
  json slopes = json::object();
  for (const auto& a : algos) {
    std::vector<std::pair<double, double>> series;
    for (const auto& r : rows) {
      if (r.algo == a) series.emplace_back(static_cast<double>(r.d), r.median_ns);
    }
    if (series.size() >= 2) {
      slopes[a] = loglog_slope(series);
      o.report.push_back("slope " + a + ": " + format_number(slopes[a].get<double>()));
    }
  }
  o.summary["slopes"] = slopes;
  write_json(out_dir / "bench_summary.json", o.summary);
  return o;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsDesign {
  std::size_t n0 = 1;          // lambda_min(A_bar_n) >= mu for every n > n0 up to the horizon
  std::size_t first_half = 0;  // first n with lambda_min(A_bar_n) >= mu/2, 0 if never
};

// Scans lambda_min(A_bar_n) along the deterministic basis design.
inline BoundsDesign scan_design(Index d, std::size_t horizon, double mu) {
  BoundsDesign out;
  Mat a = Mat::Zero(d, d);
  std::size_t last_below = 0;
  for (std::size_t n = 1; n <= horizon; ++n) {
    const Index i = static_cast<Index>((n - 1) % static_cast<std::size_t>(d));
    a(i, i) += 1.0;
    // The basis design keeps A_sum diagonal.
    const double lmin = a.diagonal().minCoeff() / static_cast<double>(n);
    if (lmin < mu) last_below = n;
    if (out.first_half == 0 && lmin >= mu / 2.0) out.first_half = n;
  }
  out.n0 = std::max<std::size_t>(1, last_below);
  return out;
}

inline Outcome run_bounds(const Config& cfg) {
  const Index d = static_cast<Index>(cfg.count("d", 5));
  if (d < 1) throw ConfigError("d must be >= 1");
  const std::size_t k_lo = cfg.count("k_lo", 7);
  const std::size_t k_hi = cfg.count("k_hi", 17);
  if (k_lo > k_hi || k_hi > 40) throw ConfigError("bounds: need k_lo <= k_hi <= 40");
  const std::size_t horizon = cfg.count("horizon", std::size_t{1} << k_hi);
  const double delta = cfg.num("delta", 0.1);
  BoundParams p;
  p.d = static_cast<std::size_t>(d);
  p.mu = cfg.num("mu", 1.0 / (2.0 * static_cast<double>(d)));
  p.c = cfg.num("c", 3.2 / p.mu);
  p.delta = delta;
  const double theta_norm = cfg.num("theta_norm", 1.0);
  p.theta_init_dist = theta_norm;  // theta_0 = 0
  try {
    require_step_condition(p);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  const BoundsDesign design = scan_design(d, horizon, p.mu);
  p.n0 = design.n0;

  std::vector<std::size_t> checkpoints;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const std::size_t n = std::size_t{1} << k;
    if (n <= horizon && n > p.n0) checkpoints.push_back(n);
  }
  if (checkpoints.empty()) throw ConfigError("bounds: no checkpoint 2^k lies in (n0, horizon]");

  Config track_cfg(keys_with({"stream", "c", "step", "theta_norm", "per_decade"}));
  track_cfg.set("algo", "fols");
  track_cfg.set("stream", "basis");
  track_cfg.set("d", std::to_string(d));
  track_cfg.set("horizon", std::to_string(checkpoints.back()));
  track_cfg.set("step", "shifted");
  track_cfg.set("c", format_number(p.c));
  track_cfg.set("theta_norm", format_number(theta_norm));
  track_cfg.set("noise", cfg.str("noise", "uniform"));
  if (cfg.has("sigma")) track_cfg.set("sigma", cfg.str("sigma"));
  const TrackSetup setup = track_setup(track_cfg);

  const auto seeds = cfg.seeds();
  const std::size_t mean_seeds = std::min<std::size_t>(seeds.size(), cfg.count("mean_seeds", 100));
  const auto series = parallel_map<TrackSeries>(
      seeds.size(), [&](std::size_t i) { return track_one(setup, checkpoints, seeds[i]); });

  const fs::path out_dir = ensure_dir(cfg.str("out", "out/bounds"));
  Outcome o;
  o.csv = (out_dir / "bounds.csv").string();
  CsvWriter w(o.csv, "driftls.bounds.v1", {"n", "mean_err", "k1_bound", "exceed_frac", "k2_bound"});
  bool mean_ok = true;
  json rows = json::array();
  double final_exceed = 0.0;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const double n = static_cast<double>(checkpoints[c]);
    std::vector<double> errs;
    for (std::size_t i = 0; i < mean_seeds; ++i) errs.push_back(series[i].err_at[c]);
    const double m = mean(errs);
    const double b1 = expectation_bound(n, p);
    const double b2 = high_probability_bound(n, p);
    std::size_t exceed = 0;
    for (const auto& s : series) exceed += s.err_at[c] > b2 ? 1 : 0;
    const double frac = static_cast<double>(exceed) / static_cast<double>(series.size());
    mean_ok = mean_ok && m <= b1;
    final_exceed = frac;
    w.row(checkpoints[c], m, b1, frac, b2);
    rows.push_back({{"n", checkpoints[c]}, {"mean_err", m}, {"k1_bound", b1}, {"exceed_frac", frac}, {"k2_bound", b2}});
  }
  w.close();
  const bool exceed_ok = final_exceed <= delta;

  o.summary["schema"] = "driftls.bounds_summary.v1";
  o.summary["config"] = cfg.to_json();
  o.summary["mu"] = p.mu;
  o.summary["c"] = p.c;
  o.summary["n0"] = p.n0;
  o.summary["first_n_half_mu"] = design.first_half;
  o.summary["seeds"] = seeds.size();
  o.summary["mean_seeds"] = mean_seeds;
  o.summary["rows"] = rows;
  o.summary["expectation_pass"] = mean_ok;
  o.summary["exceedance_fraction"] = final_exceed;
  o.summary["exceedance_pass"] = exceed_ok;
  write_json(out_dir / "bounds_summary.json", o.summary);

  o.report.push_back("n0 = " + std::to_string(p.n0) + ", first n with lambda_min >= mu/2: " +
                     std::to_string(design.first_half));
  o.report.push_back(std::string(mean_ok ? "PASS" : "FAIL") + " mean error <= K1(n)/sqrt(n+c) at every checkpoint");
  o.report.push_back(std::string(exceed_ok ? "PASS" : "FAIL") + " exceedance fraction " + format_number(final_exceed) +
                     " <= delta " + format_number(delta));
  o.exit_code = mean_ok && exceed_ok ? kExitOk : kExitAcceptance;
  return o;
}

// ---------------------------------------------------------------------------
// gen

inline Outcome run_gen(const Config& cfg) {
  NewsStreamConfig nc;
  nc.arms.d = static_cast<Index>(cfg.count("d", 20));
  nc.arms.k = cfg.count("k", 10);
  nc.arms.density = cfg.num("density", 0.3);
  nc.arms.nonnegative = cfg.flag("nonnegative", true);
  nc.horizon = cfg.count("horizon", 10000);
  nc.theta_norm = cfg.num("theta_norm", 1.0);
  nc.noise = noise_from(cfg);
  if (nc.arms.d < 1 || nc.arms.k < 1) throw ConfigError("gen: d and k must be >= 1");
  if (!(nc.arms.density > 0.0 && nc.arms.density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
  const fs::path out_dir = ensure_dir(cfg.str("out", "out/gen"));
  const std::uint64_t seed = cfg.seeds().front();
  const NewsStream s = synth_news_stream(nc, Rng(seed));
  const fs::path log_path = cfg.has("log") ? fs::path(cfg.str("log")) : out_dir / "events.jsonl";
  const fs::path truth_path = cfg.has("truth") ? fs::path(cfg.str("truth")) : out_dir / "truth.json";
  write_event_log(log_path, s.records);
  write_truth_file(truth_path, s.theta_star);
  Outcome o;
  o.summary["schema"] = "driftls.gen_summary.v1";
  o.summary["config"] = cfg.to_json();
  o.summary["records"] = s.records.size();
  o.summary["log"] = log_path.string();
  o.summary["truth"] = truth_path.string();
  o.report.push_back("wrote " + std::to_string(s.records.size()) + " records to " + log_path.string());
  return o;
}

}  // namespace driftls::harness
