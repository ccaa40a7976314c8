#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "driftls/environments.hpp"
#include "driftls/errors.hpp"
#include "driftls/event_log.hpp"
#include "driftls/exact.hpp"
#include "driftls/linalg.hpp"
#include "driftls/metrics.hpp"
#include "driftls/rng.hpp"
#include "driftls/schedules.hpp"
#include "driftls/trackers.hpp"

namespace driftls {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One row of a bandit trace.
struct BanditStep {
  std::size_t n = 0;        // 1-based pull / round index
  std::size_t phase = 0;    // PEGE phase m, or the round for LinUCB
  std::int64_t arm_id = 0;  // basis index, -1 for a PEGE greedy pull, arm id for LinUCB
  double reward = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  double tracking_error = kNaN;
  std::int64_t wall_ns = 0;
};

// Per-step log of actions and regret under the maximisation convention.
class RegretLedger {
 public:
  void record(BanditStep step, Vec action, double best_value) {
    cum_ += step.inst_regret;
    step.cum_regret = cum_;
    steps_.push_back(step);
    actions_.push_back(std::move(action));
    best_values_.push_back(best_value);
  }

  const std::vector<BanditStep>& steps() const { return steps_; }
  const std::vector<Vec>& actions() const { return actions_; }
  const std::vector<double>& best_values() const { return best_values_; }
  double cumulative() const { return cum_; }
  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<BanditStep> steps_;
  std::vector<Vec> actions_;
  std::vector<double> best_values_;
  double cum_ = 0.0;
};

// ---------------------------------------------------------------------------
// PEGE / fPEGE-GD

enum class PegeCRule {
  ratio,           // c = 3.2 / mu_hat, so mu_hat c / 4 = 0.8
  inverse_lambda,  // c = 4 d / (3 lambda_PEGE)
};

enum class PegeStepRule {
  shifted,   // gamma_n = c / (4 (c + n))
  harmonic,  // gamma_n = c / n
};

struct PegeConfig {
  std::vector<Vec> basis;
  double c = 0.0;
  std::size_t horizon = 0;
  bool use_tracker = true;
  PegeCRule c_rule = PegeCRule::ratio;
  PegeStepRule step_rule = PegeStepRule::shifted;
  bool track_error = true;  // keep an exact solver alongside the tracker
  bool timing = false;      // fill wall_ns

  // lambda_min(sum b_i b_i^T)
  double lambda_pege() const {
    Mat s = Mat::Zero(basis.front().size(), basis.front().size());
    for (const Vec& b : basis) s.noalias() += b * b.transpose();
    return min_eigenvalue(s);
  }

  // Strong-convexity floor of A_bar_n under cycled exploration.
  double mu_hat() const { return lambda_pege() / (2.0 * static_cast<double>(basis.size())); }

  StepSchedule step_schedule() const {
    return step_rule == PegeStepRule::shifted ? StepSchedule::shifted(c) : StepSchedule::generic(c, 0.0);
  }
};

inline PegeConfig make_pege_config(std::vector<Vec> basis, std::size_t horizon, bool use_tracker,
                                   PegeCRule c_rule = PegeCRule::ratio) {
  if (basis.empty()) throw ConfigError("pege: empty basis");
  PegeConfig cfg;
  cfg.basis = std::move(basis);
  cfg.horizon = horizon;
  cfg.use_tracker = use_tracker;
  cfg.c_rule = c_rule;
  const double lambda = cfg.lambda_pege();
  if (!(lambda > 0.0)) throw ConfigError("pege: basis does not span R^d");
  const double d = static_cast<double>(cfg.basis.size());
  cfg.c = c_rule == PegeCRule::ratio ? 3.2 / (lambda / (2.0 * d)) : 4.0 * d / (3.0 * lambda);
  return cfg;
}

inline std::vector<Vec> standard_basis(Index d) {
  std::vector<Vec> out;
  for (Index i = 0; i < d; ++i) out.push_back(Vec::Unit(d, i));
  return out;
}

// Standard basis scaled onto the boundary of the action set.
inline std::vector<Vec> boundary_basis(const ActionSet& set) {
  std::vector<Vec> out = standard_basis(set.dim());
  if (set.kind() == ActionSet::Kind::ellipsoid) {
    for (Index i = 0; i < set.dim(); ++i) out[static_cast<std::size_t>(i)] /= std::sqrt(set.q()(i, i));
  }
  return out;
}

inline void validate_pege(const PegeConfig& cfg, const ActionSet& set) {
  const auto d = static_cast<std::size_t>(set.dim());
  if (cfg.basis.size() != d) throw ConfigError("pege: basis must contain exactly d vectors");
  for (const Vec& b : cfg.basis) {
    if (b.size() != set.dim()) throw ConfigError("pege: basis vector has the wrong dimension");
    if (!set.admits(b)) throw ConfigError("pege: basis vector is not in the action set");
  }
  const double lambda = cfg.lambda_pege();
  if (!(lambda > 0.0)) throw ConfigError("pege: basis does not span R^d");
  if (!(cfg.c > 0.0)) throw ConfigError("pege: c must be positive");
  if (cfg.c_rule == PegeCRule::ratio) {
    const double r = cfg.mu_hat() * cfg.c / 4.0;
    if (!(r > 2.0 / 3.0 && r < 1.0)) {
      throw ConfigError("pege: mu*c/4 = " + std::to_string(r) + " is outside (2/3, 1)");
    }
  }
  cfg.step_schedule().validate();
}

struct PegePhaseEnd {
  std::size_t phase = 0;
  std::size_t samples = 0;     // m d exploration samples so far
  double tracker_error = kNaN;  // ||theta_md - theta_hat_md||, tracker variant only
  double estimate_error = 0.0;  // ||estimate - theta*||
};

struct PegeResult {
  RegretLedger ledger;
  std::vector<PegePhaseEnd> phase_ends;
  bool degenerate_greedy = false;
};

// Phase m plays b_1..b_d once (each observation goes to the buffer and to the
// tracker or exact solver), then the greedy arm for the current estimate m
// times. Only exploration samples enter the buffer.
inline PegeResult pege_run(const PegeConfig& cfg, const LinearEnv& env, const Rng& rng) {
  validate_pege(cfg, env.actions);
  const Index d = env.actions.dim();
  Rng noise_rng = rng.split(1);
  Rng sample_rng = rng.split(2);

  DataBuffer buffer(d);
  OlsState ols(d);
  TrackerState tracker = TrackerState::make(d, cfg.step_schedule());
  const bool keep_exact = !cfg.use_tracker || cfg.track_error;
  const double best = env.best();

  PegeResult result;
  std::size_t pulls = 0;
  double last_tracking = kNaN;

  auto pull = [&](const Vec& x, std::size_t phase, std::int64_t arm_id, bool explore) {
    const auto t0 = cfg.timing ? std::chrono::steady_clock::now() : std::chrono::steady_clock::time_point{};
    const double y = sample_reward(env, x, noise_rng);
    if (explore) {
      buffer.append({x, y});
      if (keep_exact) ols.append({x, y});
      if (cfg.use_tracker) {
        fols_step(tracker, buffer, sample_rng);
        if (cfg.track_error && ols.invertible()) last_tracking = tracking_error(tracker.theta, ols.solution());
      }
    }
    BanditStep step;
    step.n = ++pulls;
    step.phase = phase;
    step.arm_id = arm_id;
    step.reward = y;
    step.inst_regret = best - env.mean_reward(x);
    step.tracking_error = cfg.use_tracker ? last_tracking : kNaN;
    if (cfg.timing) {
      step.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    }
    result.ledger.record(step, x, best);
  };

  for (std::size_t m = 1; pulls < cfg.horizon; ++m) {
    for (std::size_t i = 0; i < cfg.basis.size() && pulls < cfg.horizon; ++i) {
      pull(cfg.basis[i], m, static_cast<std::int64_t>(i), true);
    }
    if (pulls >= cfg.horizon) break;

    Vec estimate = tracker.theta;
    if (!cfg.use_tracker) estimate = ols.invertible() ? ols.solution() : Vec::Zero(d);
    PegePhaseEnd end;
    end.phase = m;
    end.samples = buffer.size();
    end.estimate_error = (estimate - env.theta_star).norm();
    if (cfg.use_tracker && cfg.track_error && ols.invertible()) {
      end.tracker_error = tracking_error(tracker.theta, ols.solution());
    }
    result.phase_ends.push_back(end);

    const BestAction greedy = best_action(estimate, env.actions);
    result.degenerate_greedy = result.degenerate_greedy || greedy.degenerate;
    for (std::size_t k = 0; k < m && pulls < cfg.horizon; ++k) pull(greedy.x, m, -1, false);
  }
  return result;
}

// ---------------------------------------------------------------------------
// LinUCB / fLinUCB-{GD, SVRG, SAG}

enum class LinUcbVariant { exact, gd, svrg, sag };

inline std::string to_string(LinUcbVariant v) {
  switch (v) {
    case LinUcbVariant::exact: return "exact";
    case LinUcbVariant::gd: return "gd";
    case LinUcbVariant::svrg: return "svrg";
    case LinUcbVariant::sag: return "sag";
  }
  return "?";
}

inline LinUcbVariant parse_linucb_variant(const std::string& s) {
  if (s == "exact") return LinUcbVariant::exact;
  if (s == "gd") return LinUcbVariant::gd;
  if (s == "svrg") return LinUcbVariant::svrg;
  if (s == "sag") return LinUcbVariant::sag;
  throw ConfigError("unknown LinUCB variant '" + s + "'");
}

struct LinUcbConfig {
  double kappa = 1.0;
  std::size_t max_arms = 10;     // K
  std::size_t phi_steps = 1;     // T, phi steps per arm per round
  std::size_t theta_steps = 1;   // parameter steps per round
  LinUcbVariant variant = LinUcbVariant::gd;
  RegSchedule reg = RegSchedule::power(0.6);
  StepSchedule step = StepSchedule::generic(1.0, 100.0);
  StepSchedule phi_schedule = StepSchedule::generic(1.0, 100.0);
  double svrg_epoch_factor = 2.0;
  bool track_error = true;
  std::size_t track_every = 1;

  // Parameter table: GD uses lambda_n = n^{-0.4}, gamma_n = 1/(100 + n);
  // SVRG lambda_n = 1/n, gamma = 0.0005; SAG lambda_n = 1/n, gamma = 0.005.
  // The exact variant regularises with 1/n, i.e. A_sum + I.
  static LinUcbConfig defaults(LinUcbVariant v, double kappa) {
    LinUcbConfig c;
    c.kappa = kappa;
    c.variant = v;
    switch (v) {
      case LinUcbVariant::exact:
        c.reg = RegSchedule::inverse_n();
        break;
      case LinUcbVariant::gd:
        c.reg = RegSchedule::power(0.6);
        c.step = StepSchedule::generic(1.0, 100.0);
        break;
      case LinUcbVariant::svrg:
        c.reg = RegSchedule::inverse_n();
        c.step = StepSchedule::constant(0.0005);
        break;
      case LinUcbVariant::sag:
        c.reg = RegSchedule::inverse_n();
        c.step = StepSchedule::constant(0.005);
        break;
    }
    c.phi_schedule = c.step;
    return c;
  }

  void validate() const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("linucb: kappa must be finite and >= 0");
    if (max_arms < 1) throw ConfigError("linucb: K must be >= 1");
    if (phi_steps < 1) throw ConfigError("linucb: T must be >= 1");
    if (theta_steps < 1) throw ConfigError("linucb: theta_steps must be >= 1");
    if (track_every < 1) throw ConfigError("linucb: track_every must be >= 1");
    reg.validate();
    step.validate();
    phi_schedule.validate();
  }
};

// x^T theta + kappa sqrt(max(0, conf)); sets *clamped when conf was negative.
inline double ucb_value(const Vec& theta, double conf, const Vec& x, double kappa, bool* clamped = nullptr) {
  if (clamped) *clamped = conf < 0.0;
  return theta.dot(x) + kappa * std::sqrt(std::max(0.0, conf));
}

inline double ucb_value(const Vec& theta, const Vec& phi, const Vec& x, double kappa, bool* clamped = nullptr) {
  return ucb_value(theta, x.dot(phi), x, kappa, clamped);
}

class LinUcbPolicy {
 public:
  struct Decision {
    std::size_t index = 0;
    std::vector<double> ucb;
  };

  LinUcbPolicy(Index d, LinUcbConfig cfg)
      : d_(d),
        cfg_(cfg),
        buffer_(d),
        exact_(d, cfg.reg),
        gd_(TrackerState::make(d, cfg.step, cfg.reg)),
        svrg_(SvrgState::make(d, cfg.svrg_epoch_factor)),
        sag_(SagState::make(d)) {
    cfg_.validate();
  }

  // Refines the parameter and confidence trackers on the current buffer,
  // scores every arm and returns the highest UCB (lowest index on ties).
  Decision decide(const std::vector<Arm>& arms, Rng& rng) {
    if (arms.empty()) throw ContractViolation("linucb_step: empty arm list");
    if (arms.size() > cfg_.max_arms) throw ContractViolation("linucb_step: more arms than K");
    for (const Arm& a : arms) {
      if (a.x.size() != d_) throw ContractViolation("linucb_step: arm dimension mismatch");
    }
    const std::size_t n = buffer_.size();
    Decision out;
    out.ucb.reserve(arms.size());
    last_tracking_ = kNaN;

    if (cfg_.variant == LinUcbVariant::exact) {
      if (n == 0) {
        // Empty history: theta = 0 and A_0 = I.
        for (const Arm& a : arms) out.ucb.push_back(score(Vec::Zero(d_), a.x.squaredNorm(), a.x));
      } else {
        const RlsSystem sys = exact_.system();
        const Vec theta = sys.solve(exact_.b_sum());
        for (const Arm& a : arms) out.ucb.push_back(score(theta, sys.confidence(a.x), a.x));
      }
    } else {
      if (n > 0) {
        update_theta(rng);
        if (cfg_.track_error && n % cfg_.track_every == 0) last_tracking_ = tracking_error(theta(), exact_.solution());
      }
      sync_phi(arms);
      const double gamma = cfg_.phi_schedule(std::max<std::size_t>(n, 1));
      for (const Arm& a : arms) {
        PhiState& phi = phis_.at(a.id);
        if (n > 0) {
          for (std::size_t t = 0; t < cfg_.phi_steps; ++t) phi_step(phi, buffer_, gamma, rng);
        }
        const double conf = n > 0 ? phi.confidence() : a.x.squaredNorm();
        out.ucb.push_back(score(theta(), conf, a.x));
      }
    }

    for (std::size_t k = 1; k < out.ucb.size(); ++k) {
      if (out.ucb[k] > out.ucb[out.index]) out.index = k;
    }
    return out;
  }

  void observe(const Vec& x, double reward) {
    buffer_.append({x, reward});
    if (cfg_.variant == LinUcbVariant::exact || cfg_.track_error) exact_.append({x, reward});
  }

  const Vec& theta() const {
    switch (cfg_.variant) {
      case LinUcbVariant::svrg: return svrg_.theta;
      case LinUcbVariant::sag: return sag_.theta;
      default: return gd_.theta;
    }
  }

  // Exact regularised solution on the current buffer.
  Vec rls_target() const { return exact_.solution(); }

  // ||theta - theta_tilde|| measured in the last decide(); NaN when skipped.
  double last_tracking_error() const { return last_tracking_; }
  std::size_t clamp_count() const { return clamps_; }
  const DataBuffer& buffer() const { return buffer_; }
  const LinUcbConfig& config() const { return cfg_; }
  std::size_t tracked_arms() const { return phis_.size(); }

 private:
  double score(const Vec& theta, double conf, const Vec& x) {
    bool clamped = false;
    const double v = ucb_value(theta, conf, x, cfg_.kappa, &clamped);
    if (clamped) ++clamps_;
    return v;
  }

  void update_theta(Rng& rng) {
    const std::size_t n = buffer_.size();
    for (std::size_t s = 0; s < cfg_.theta_steps; ++s) {
      switch (cfg_.variant) {
        case LinUcbVariant::gd:
          frls_step(gd_, buffer_, rng);
          break;
        case LinUcbVariant::svrg:
          svrg_step(svrg_, buffer_, cfg_.reg(n), cfg_.step(++theta_step_count_), rng);
          break;
        case LinUcbVariant::sag:
          sag_step(sag_, buffer_, cfg_.reg(n), cfg_.step(++theta_step_count_), rng);
          break;
        case LinUcbVariant::exact:
          break;
      }
    }
  }

  // Keeps one phi per offered arm id; arms absent from this round are dropped.
  void sync_phi(const std::vector<Arm>& arms) {
    std::unordered_map<std::int64_t, PhiState> next;
    next.reserve(arms.size());
    for (const Arm& a : arms) {
      auto it = phis_.find(a.id);
      if (it != phis_.end() && it->second.target_x == a.x) {
        next.emplace(a.id, std::move(it->second));
      } else {
        next.emplace(a.id, PhiState::make(a.x));
      }
    }
    phis_ = std::move(next);
  }

  Index d_;
  LinUcbConfig cfg_;
  DataBuffer buffer_;
  RlsState exact_;
  TrackerState gd_;
  SvrgState svrg_;
  SagState sag_;
  std::unordered_map<std::int64_t, PhiState> phis_;
  std::size_t theta_step_count_ = 0;
  std::size_t clamps_ = 0;
  double last_tracking_ = kNaN;
};

struct LinUcbStepResult {
  std::size_t index = 0;
  double reward = 0.0;
  double ucb = 0.0;
};

// One round: decide, ask reward_of for the chosen arm only, append the sample.
inline LinUcbStepResult linucb_step(LinUcbPolicy& policy, const std::vector<Arm>& arms,
                                    const std::function<double(std::size_t)>& reward_of, Rng& rng) {
  const auto decision = policy.decide(arms, rng);
  const double reward = reward_of(decision.index);
  policy.observe(arms[decision.index].x, reward);
  return {decision.index, reward, decision.ucb[decision.index]};
}

struct LinUcbRun {
  RegretLedger ledger;
  std::vector<TrackingRecord> tracking;
  std::size_t clamp_count = 0;
  bool finite = true;
  Vec final_theta;
};

// Online simulation against a linear environment with per-round arm sets.
inline LinUcbRun run_linucb_sim(const LinUcbConfig& cfg, const LinearEnv& env, const ArmSetSpec& arms_spec,
                                std::size_t horizon, const Rng& rng, bool timing = false) {
  const Index d = env.theta_star.size();
  if (arms_spec.d != d) throw ConfigError("linucb: arm dimension differs from theta*");
  LinUcbPolicy policy(d, cfg);
  const Rng arm_rng = rng.split(1);
  Rng noise_rng = rng.split(2);
  Rng algo_rng = rng.split(3);
  LinUcbRun run;
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto t0 = timing ? std::chrono::steady_clock::now() : std::chrono::steady_clock::time_point{};
    const std::vector<Arm> arms = gen_arm_set(arms_spec, t, arm_rng);
    const auto res = linucb_step(
        policy, arms, [&](std::size_t k) { return sample_reward(env, arms[k].x, noise_rng); }, algo_rng);
    double best = -std::numeric_limits<double>::infinity();
    for (const Arm& a : arms) best = std::max(best, env.mean_reward(a.x));
    BanditStep step;
    step.n = t + 1;
    step.phase = t + 1;
    step.arm_id = arms[res.index].id;
    step.reward = res.reward;
    step.inst_regret = best - env.mean_reward(arms[res.index].x);
    step.tracking_error = policy.last_tracking_error();
    if (timing) {
      step.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    }
    if (!std::isnan(step.tracking_error)) run.tracking.push_back({t, step.tracking_error, 0});
    run.ledger.record(step, arms[res.index].x, best);
  }
  run.final_theta = policy.theta();
  run.finite = run.final_theta.allFinite();
  for (const auto& r : run.tracking) run.finite = run.finite && std::isfinite(r.err);
  run.clamp_count = policy.clamp_count();
  return run;
}

struct ReplayResult {
  std::size_t events = 0;
  std::size_t matched = 0;
  std::vector<double> rewards;        // rewards of matched events
  std::vector<std::size_t> event_of;  // log position of each matched event
  std::vector<std::size_t> arm_of;    // offered-arm position chosen in it
  std::vector<TrackingRecord> tracking;
  double ctr = kNaN;  // CTR score of matched events when rewards are binary
  bool finite = true;
};

// Rejection-sampling replay over a log from a uniform-random display policy:
// only events whose logged arm equals the policy's choice are scored and
// learned from. Tracker refinement still runs on unmatched events, using only
// data already in the buffer.
inline ReplayResult run_linucb_replay(const LinUcbConfig& cfg, const std::vector<EventRecord>& log, const Rng& rng) {
  ReplayResult out;
  if (log.empty()) return out;
  const Index d = log.front().arms.front().x.size();
  LinUcbPolicy policy(d, cfg);
  Rng algo_rng = rng.split(3);
  for (std::size_t e = 0; e < log.size(); ++e) {
    const EventRecord& ev = log[e];
    if (!ev.chosen || !ev.reward) throw ContractViolation("replay: event without a logged choice and reward");
    ++out.events;
    const auto decision = policy.decide(ev.arms, algo_rng);
    if (!std::isnan(policy.last_tracking_error())) {
      out.tracking.push_back({policy.buffer().size(), policy.last_tracking_error(), 0});
    }
    const Arm& pick = ev.arms[decision.index];
    if (pick.id != *ev.chosen) continue;
    ++out.matched;
    out.rewards.push_back(*ev.reward);
    out.event_of.push_back(e);
    out.arm_of.push_back(decision.index);
    policy.observe(pick.x, *ev.reward);
  }
  const bool binary = std::all_of(out.rewards.begin(), out.rewards.end(), [](double r) { return r == 0.0 || r == 1.0; });
  if (!out.rewards.empty() && binary) out.ctr = ctr_score(out.rewards);
  out.finite = policy.theta().allFinite();
  for (const auto& r : out.tracking) out.finite = out.finite && std::isfinite(r.err);
  return out;
}

}  // namespace driftls
