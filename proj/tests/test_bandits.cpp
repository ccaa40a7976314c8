#include <gtest/gtest.h>

#include <cmath>

#include "driftls/bandits.hpp"
#include "driftls/bounds.hpp"
#include "driftls/metrics.hpp"
#include "test_util.hpp"

using namespace driftls;

namespace {

LinearEnv sphere_env(Index d, std::uint64_t seed, NoiseModel noise = NoiseModel::uniform()) {
  Rng rng(seed, 99);
  return {random_direction(d, rng), noise, ActionSet::unit_sphere(d)};
}

}  // namespace

TEST(Pege, PhaseStructure) {
  const LinearEnv env = sphere_env(2, 1);
  const PegeConfig cfg = make_pege_config(standard_basis(2), 7, true);
  const PegeResult r = pege_run(cfg, env, Rng(1));
  const auto& steps = r.ledger.steps();
  ASSERT_EQ(steps.size(), 7u);
  const std::vector<std::int64_t> ids{0, 1, -1, 0, 1, -1, -1};
  const std::vector<std::size_t> phases{1, 1, 1, 2, 2, 2, 2};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(steps[i].arm_id, ids[i]) << i;
    EXPECT_EQ(steps[i].phase, phases[i]) << i;
  }
  EXPECT_EQ(r.ledger.actions()[0], Vec::Unit(2, 0));
  EXPECT_EQ(r.ledger.actions()[1], Vec::Unit(2, 1));
  EXPECT_EQ(r.ledger.actions()[5], r.ledger.actions()[6]);
}

TEST(Pege, PullAccounting) {
  const std::size_t d = 3, m = 6;
  const std::size_t horizon = m * d + m * (m + 1) / 2;
  const PegeConfig cfg = make_pege_config(standard_basis(3), horizon, true);
  const PegeResult r = pege_run(cfg, sphere_env(3, 2), Rng(2));
  for (std::size_t k = 1; k <= m; ++k) {
    std::size_t upto = 0;
    for (const auto& s : r.ledger.steps()) upto += s.phase <= k ? 1 : 0;
    EXPECT_EQ(upto, k * d + k * (k + 1) / 2);
  }
  EXPECT_EQ(r.ledger.steps().back().phase, m);
}

TEST(Pege, NoiselessExactHasNoExploitationRegret) {
  const LinearEnv env = sphere_env(4, 3, NoiseModel::none());
  const PegeConfig cfg = make_pege_config(standard_basis(4), 500, false);
  const PegeResult r = pege_run(cfg, env, Rng(3));
  for (const auto& s : r.ledger.steps()) {
    if (s.arm_id == -1) {
      EXPECT_LE(std::abs(s.inst_regret), 1e-12);
    }
  }
}

TEST(Pege, LedgerMatchesRecomputation) {
  const LinearEnv env = sphere_env(3, 4);
  const PegeResult r = pege_run(make_pege_config(standard_basis(3), 2000, true), env, Rng(4));
  const auto recomputed = cumulative_regret(r.ledger.actions(), env.theta_star, env.best());
  double prefix = 0.0;
  for (std::size_t i = 0; i < r.ledger.size(); ++i) {
    const auto& s = r.ledger.steps()[i];
    prefix += s.inst_regret;
    EXPECT_GE(s.inst_regret, -1e-12);
    EXPECT_NEAR(s.cum_regret, prefix, 1e-12);
    EXPECT_NEAR(s.cum_regret, recomputed[i], 1e-12 * std::max(1.0, recomputed[i]));
  }
}

TEST(Pege, BasisOutsideActionSetRejected) {
  PegeConfig cfg = make_pege_config(standard_basis(2), 10, true);
  for (auto& b : cfg.basis) b *= 2.0;
  cfg.c = 3.2 / cfg.mu_hat();
  EXPECT_THROW(pege_run(cfg, sphere_env(2, 5), Rng(5)), ConfigError);
}

TEST(Pege, DefaultStepConstant) {
  const PegeConfig cfg = make_pege_config(standard_basis(4), 10, true);
  EXPECT_NEAR(cfg.mu_hat() * cfg.c / 4.0, 0.8, 1e-12);
  PegeConfig bad = cfg;
  bad.c = 1.0;
  EXPECT_THROW(validate_pege(bad, ActionSet::unit_sphere(4)), ConfigError);
}

TEST(Pege, InverseLambdaConstantIsAvailable) {
  const PegeConfig cfg = make_pege_config(standard_basis(4), 10, true, PegeCRule::inverse_lambda);
  EXPECT_NEAR(cfg.c, 4.0 * 4.0 / 3.0, 1e-12);
  EXPECT_NO_THROW(validate_pege(cfg, ActionSet::unit_sphere(4)));
}

TEST(Pege, EllipsoidBasisOnBoundary) {
  Mat q = Mat::Zero(2, 2);
  q.diagonal() << 1.0, 4.0;
  const ActionSet set = ActionSet::ellipsoid(q);
  const auto basis = boundary_basis(set);
  EXPECT_NEAR(basis[1](1), 0.5, 1e-15);
  Rng rng(6);
  const LinearEnv env{random_direction(2, rng), NoiseModel::uniform(), set};
  const PegeResult r = pege_run(make_pege_config(basis, 300, true), env, Rng(6));
  for (const auto& x : r.ledger.actions()) EXPECT_TRUE(set.admits(x));
}

TEST(Pege, PhaseEndErrorsUnderExpectationBound) {
  const std::size_t d = 2;
  const PegeConfig cfg = make_pege_config(standard_basis(2), 20000, true);
  BoundParams p;
  p.mu = cfg.mu_hat();
  p.c = cfg.c;
  p.d = d;
  p.n0 = d - 1;
  p.delta = 0.1;
  p.theta_init_dist = 1.0;
  std::vector<double> sum;
  std::vector<std::size_t> samples;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const PegeResult r = pege_run(cfg, sphere_env(2, 100 + s), Rng(s));
    if (sum.empty()) {
      sum.assign(r.phase_ends.size(), 0.0);
      for (const auto& e : r.phase_ends) samples.push_back(e.samples);
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += r.phase_ends[i].tracker_error;
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double n = static_cast<double>(samples[i]);
    if (samples[i] <= p.n0) continue;
    EXPECT_LE(sum[i] / seeds, expectation_bound(n, p)) << "md=" << samples[i];
  }
}

TEST(Pege, TrackerRegretGrowsLikeSqrtN) {
  const std::size_t horizon = 100000;
  const auto grid = log_grid(1000, horizon, 10);
  std::vector<double> mean_regret(grid.size(), 0.0);
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const PegeResult r = pege_run(make_pege_config(standard_basis(2), horizon, true), sphere_env(2, 300 + s), Rng(s));
    for (std::size_t i = 0; i < grid.size(); ++i) mean_regret[i] += r.ledger.steps()[grid[i] - 1].cum_regret / seeds;
  }
  std::vector<std::pair<double, double>> series;
  for (std::size_t i = 0; i < grid.size(); ++i) series.emplace_back(static_cast<double>(grid[i]), mean_regret[i]);
  EXPECT_NEAR(slope_fit(series), 0.5, 0.1);
}

TEST(Ucb, Arithmetic) {
  EXPECT_DOUBLE_EQ(ucb_value(Vec::Unit(2, 0), 0.25, Vec::Unit(2, 0), 2.0), 2.0);
  Vec th(2), x(2);
  th << 0.3, -0.7;
  x << 0.5, 0.5;
  EXPECT_DOUBLE_EQ(ucb_value(th, 0.9, x, 0.0), th.dot(x));
}

TEST(Ucb, NegativeConfidenceClamps) {
  bool clamped = false;
  EXPECT_DOUBLE_EQ(ucb_value(Vec::Unit(2, 0), -0.3, Vec::Unit(2, 0), 5.0, &clamped), 1.0);
  EXPECT_TRUE(clamped);
  Vec phi(2);
  phi << 0.25, 0.0;
  EXPECT_DOUBLE_EQ(ucb_value(Vec::Unit(2, 0), phi, Vec::Unit(2, 0), 2.0), 2.0);
}

TEST(LinUcb, PicksLargestUcb) {
  LinUcbPolicy policy(2, LinUcbConfig::defaults(LinUcbVariant::exact, 2.0));
  // No data yet: theta = 0 and A_0 = I, so UCB = kappa ||x||.
  const std::vector<Arm> arms{{0, Vec::Unit(2, 0)}, {1, 0.5 * Vec::Unit(2, 1)}};
  Rng rng(1);
  const auto d = policy.decide(arms, rng);
  EXPECT_DOUBLE_EQ(d.ucb[0], 2.0);
  EXPECT_DOUBLE_EQ(d.ucb[1], 1.0);
  EXPECT_EQ(d.index, 0u);
}

TEST(LinUcb, TiesGoToLowestIndex) {
  for (auto v : {LinUcbVariant::exact, LinUcbVariant::gd, LinUcbVariant::svrg, LinUcbVariant::sag}) {
    LinUcbPolicy policy(2, LinUcbConfig::defaults(v, 1.0));
    const std::vector<Arm> arms{{4, Vec::Unit(2, 1)}, {5, Vec::Unit(2, 0)}, {6, Vec::Unit(2, 1)}};
    Rng rng(2);
    EXPECT_EQ(policy.decide(arms, rng).index, 0u);
  }
}

TEST(LinUcb, ArmListContract) {
  LinUcbConfig cfg = LinUcbConfig::defaults(LinUcbVariant::gd, 1.0);
  cfg.max_arms = 2;
  LinUcbPolicy policy(2, cfg);
  Rng rng(3);
  EXPECT_THROW(policy.decide({}, rng), ContractViolation);
  const std::vector<Arm> three{{0, Vec::Unit(2, 0)}, {1, Vec::Unit(2, 1)}, {2, Vec::Unit(2, 0)}};
  EXPECT_THROW(policy.decide(three, rng), ContractViolation);
}

TEST(LinUcb, OnlyChosenRewardIsRead) {
  for (auto v : {LinUcbVariant::exact, LinUcbVariant::gd, LinUcbVariant::svrg, LinUcbVariant::sag}) {
    LinUcbPolicy policy(3, LinUcbConfig::defaults(v, 1.0));
    ArmSetSpec spec;
    spec.d = 3;
    spec.k = 5;
    const Rng arm_rng(4);
    Rng rng(5);
    for (std::size_t t = 0; t < 200; ++t) {
      const auto arms = gen_arm_set(spec, t, arm_rng);
      std::vector<std::size_t> asked;
      const auto res = linucb_step(
          policy, arms,
          [&](std::size_t k) {
            asked.push_back(k);
            return 0.5;
          },
          rng);
      ASSERT_EQ(asked.size(), 1u);
      EXPECT_EQ(asked[0], res.index);
    }
    EXPECT_EQ(policy.buffer().size(), 200u);
  }
}

TEST(LinUcb, ExactRegretIsSublinear) {
  LinUcbConfig cfg = LinUcbConfig::defaults(LinUcbVariant::exact, 1.0);
  cfg.max_arms = 5;
  ArmSetSpec spec;
  spec.d = 10;
  spec.k = 5;
  double r1 = 0.0, r2 = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng truth(s, 1);
    const LinearEnv env{random_direction(10, truth), NoiseModel::uniform(), ActionSet::unit_sphere(10)};
    const LinUcbRun run = run_linucb_sim(cfg, env, spec, 20000, Rng(s));
    r1 += run.ledger.steps()[9999].cum_regret;
    r2 += run.ledger.steps()[19999].cum_regret;
  }
  EXPECT_LE(r2 / r1, 1.8);
}

TEST(LinUcb, GdRunStaysFinite) {
  LinUcbConfig cfg = LinUcbConfig::defaults(LinUcbVariant::gd, 1.0);
  ArmSetSpec spec;
  spec.d = 10;
  spec.k = 10;
  const LinearEnv env = sphere_env(10, 6);
  const LinUcbRun run = run_linucb_sim(cfg, env, spec, 5000, Rng(6));
  EXPECT_TRUE(run.finite);
  for (const auto& t : run.tracking) {
    if (t.n >= 1000) {
      EXPECT_LE(t.err, 1.0);
    }
  }
}

TEST(LinUcb, DefaultParameterTable) {
  const auto gd = LinUcbConfig::defaults(LinUcbVariant::gd, 1.0);
  EXPECT_DOUBLE_EQ(gd.reg(100), std::pow(100.0, -0.4));
  EXPECT_DOUBLE_EQ(gd.step(50), 1.0 / 150.0);
  const auto svrg = LinUcbConfig::defaults(LinUcbVariant::svrg, 1.0);
  EXPECT_DOUBLE_EQ(svrg.reg(100), 0.01);
  EXPECT_DOUBLE_EQ(svrg.step(7), 0.0005);
  const auto sag = LinUcbConfig::defaults(LinUcbVariant::sag, 1.0);
  EXPECT_DOUBLE_EQ(sag.step(7), 0.005);
}

TEST(LinUcb, TrackerConfidenceNearExactOnFrozenData) {
  Rng rng(7);
  const Index d = 4;
  DataBuffer buf(d);
  OlsState ols(d);
  for (int i = 0; i < 500; ++i) {
    const Vec x = random_direction(d, rng);
    buf.append({x, 0.0});
    ols.append({x, 0.0});
  }
  const Vec x = random_direction(d, rng);
  PhiState phi = PhiState::make(x);
  const StepSchedule gamma = StepSchedule::generic(8.0, 200.0);
  for (std::size_t k = 1; k <= 20000; ++k) phi_step(phi, buf, gamma(k), rng);
  const Vec theta = Vec::Zero(d);
  const double exact = ucb_value(theta, exact_confidence(ols, x), x, 1.0);
  EXPECT_LE(std::abs(ucb_value(theta, phi.phi, x, 1.0) - exact), 0.1 * exact);
}

TEST(Replay, CtrCountsMatchedClicks) {
  NewsStreamConfig ncfg;
  ncfg.arms.d = 5;
  ncfg.arms.k = 4;
  ncfg.horizon = 3000;
  const NewsStream s = synth_news_stream(ncfg, Rng(8));
  LinUcbConfig cfg = LinUcbConfig::defaults(LinUcbVariant::gd, 0.5);
  cfg.max_arms = 4;
  const ReplayResult r = run_linucb_replay(cfg, s.records, Rng(9));
  EXPECT_EQ(r.events, 3000u);
  ASSERT_GT(r.matched, 0u);
  double clicks = 0.0;
  for (std::size_t m = 0; m < r.matched; ++m) {
    const auto& ev = s.records[r.event_of[m]];
    EXPECT_EQ(ev.arms[r.arm_of[m]].id, *ev.chosen);
    clicks += *ev.reward;
  }
  EXPECT_DOUBLE_EQ(r.ctr, clicks / static_cast<double>(r.matched) * 10000.0);
  EXPECT_TRUE(r.finite);
}
