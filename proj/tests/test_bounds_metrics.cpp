#include <gtest/gtest.h>

#include <cmath>

#include "driftls/bounds.hpp"
#include "driftls/environments.hpp"
#include "driftls/metrics.hpp"
#include "test_util.hpp"

using namespace driftls;

namespace {

BoundParams params(double mu, double c, std::size_t d = 1) {
  BoundParams p;
  p.mu = mu;
  p.c = c;
  p.d = d;
  p.n0 = 1;
  p.delta = 0.1;
  return p;
}

}  // namespace

TEST(Bounds, HOfExamples) {
  BoundParams p = params(1.0, 3.2);
  EXPECT_DOUBLE_EQ(h_of(1.0, p), 2.0);
  EXPECT_NEAR(h_of(std::exp(1.0), p), 6.0, 1e-12);
  p.theta_init_dist = 1.5;
  EXPECT_NEAR(h_of(100.0, p), 151.09241199951148, 1e-9);
  EXPECT_THROW(h_of(0.5, p), ContractViolation);
}

TEST(Bounds, BetaOfBranches) {
  BoundParams p = params(1.0, 3.2);
  EXPECT_NEAR(beta_of(10.0, p), 128.0 * std::log(10.0) * std::log(1000.0), 1e-9);
  EXPECT_NEAR(beta_of(10.0, p), 2035.9288744237049, 1e-9);
  // ln n < ln(n^2/delta) / 32 selects the squared branch.
  const double n = 2.0;
  p.delta = 1e-30;
  const double l = std::log(n * n / p.delta);
  EXPECT_DOUBLE_EQ(beta_of(n, p), 4.0 * l * l);
  EXPECT_THROW(beta_of(1.5, p), ContractViolation);
  p.delta = 1.0;
  EXPECT_THROW(beta_of(10.0, p), ContractViolation);
}

TEST(Bounds, BetaIsMonotone) {
  for (std::size_t d : {1u, 5u, 50u}) {
    const BoundParams p = params(1.0, 3.2, d);
    double prev = 0.0;
    for (double n = 2.0; n <= 1e4; n += 1.0) {
      const double b = beta_of(n, p);
      EXPECT_GT(b, prev);
      prev = b;
    }
  }
}

TEST(Bounds, KMuCExample) {
  EXPECT_NEAR(k_mu_c(params(1.0, 3.2)), 3.2, 1e-12);
}

TEST(Bounds, StepConditionViolationNamesRatio) {
  try {
    k_mu_c(params(1.0, 2.0));
    FAIL() << "expected ContractViolation";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos) << e.what();
  }
  EXPECT_THROW(k1_of(10.0, params(1.0, 4.0)), ContractViolation);
  EXPECT_THROW(expectation_bound(10.0, params(0.0, 4.0)), ContractViolation);
}

TEST(Bounds, K2MinusK1IsConstant) {
  const BoundParams p = params(0.25, 12.8, 3);
  const double gap = std::sqrt(2.0 * k_mu_c(p) * std::log(1.0 / p.delta));
  for (double n : {2.0, 10.0, 1e3, 1e6}) {
    EXPECT_NEAR(k2_of(n, p) - k1_of(n, p), gap, 1e-9 * k2_of(n, p));
    EXPECT_GE(k2_of(n, p), k1_of(n, p));
    EXPECT_GT(k1_of(n, p), 0.0);
    EXPECT_TRUE(std::isfinite(k2_of(n, p)));
  }
}

TEST(Bounds, ProbabilityBoundDominatesExpectationBound) {
  const BoundParams p = params(0.125, 25.6, 4);
  for (double n = 2.0; n < 1e5; n *= 1.7) {
    EXPECT_GE(high_probability_bound(n, p), expectation_bound(n, p));
    EXPECT_NEAR(expectation_bound(n, p), k1_of(n, p) / std::sqrt(n + p.c), 1e-15);
  }
}

TEST(Bounds, K1RequiresNAboveN0) {
  BoundParams p = params(1.0, 3.2);
  p.n0 = 10;
  EXPECT_THROW(k1_of(10.0, p), ContractViolation);
  EXPECT_NO_THROW(k1_of(11.0, p));
}

TEST(Bounds, PegeBoundScaling) {
  const BoundParams p = params(0.25, 12.8, 2);
  const double n = 1e4;
  const double base = pege_bound(n, p, 1.0, 1.0);
  EXPECT_NEAR(pege_bound(n, p, 1.0, 3.0), 3.0 * base, 1e-9 * base);
  EXPECT_NEAR(pege_bound(n, p, 2.0, 1.0), base * 2.5 / 2.0, 1e-9 * base);
  EXPECT_NEAR(pege_bound(n, p, 0.5, 1.0), pege_bound(n, p, 2.0, 1.0), 1e-9 * base);
  for (double s : {0.1, 0.5, 0.9, 1.1, 3.0}) EXPECT_GT(pege_bound(n, p, s, 1.0), base);
  EXPECT_NEAR(base, 21742269.85615802, 1e-6);
  EXPECT_THROW(pege_bound(n, p, 0.0, 1.0), ContractViolation);
}

TEST(Metrics, TrackingError) {
  Vec a(2), b(2);
  a << 3.0, 0.0;
  b << 0.0, 4.0;
  EXPECT_DOUBLE_EQ(tracking_error(a, b), 5.0);
  EXPECT_DOUBLE_EQ(tracking_error(a, a), 0.0);
  EXPECT_THROW(tracking_error(a, Vec::Zero(3)), ContractViolation);
}

TEST(Metrics, CumulativeRegretExamples) {
  const Vec theta = Vec::Unit(2, 0);
  const std::vector<Vec> actions{Vec::Unit(2, 1), Vec::Unit(2, 0), -Vec::Unit(2, 0)};
  const auto r = cumulative_regret(actions, theta, 1.0);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  EXPECT_DOUBLE_EQ(r[1], 1.0);
  EXPECT_DOUBLE_EQ(r[2], 3.0);
  EXPECT_TRUE(cumulative_regret({}, theta, 1.0).empty());
  EXPECT_THROW(cumulative_regret(actions, theta, std::vector<double>{1.0}), ContractViolation);
}

TEST(Metrics, CumulativeRegretNondecreasingForAdmissibleActions) {
  Rng rng(1);
  const Vec theta = random_direction(5, rng);
  std::vector<Vec> actions;
  for (int i = 0; i < 500; ++i) actions.push_back(random_direction(5, rng, rng.uniform(0.0, 1.0)));
  const auto r = cumulative_regret(actions, theta, theta.norm());
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r[i], r[i - 1]);
}

TEST(Metrics, SlopeOfPowerLaws) {
  std::vector<std::pair<double, double>> s, flat;
  for (double n = 1e2; n <= 1e6; n *= 2.0) {
    s.emplace_back(n, 3.0 / std::sqrt(n));
    flat.emplace_back(n, 7.0);
  }
  EXPECT_NEAR(slope_fit(s), -0.5, 1e-12);
  EXPECT_NEAR(slope_fit(flat), 0.0, 1e-12);
}

TEST(Metrics, SlopeMatchesNormalEquations) {
  Rng rng(2);
  std::vector<std::pair<double, double>> s;
  for (int i = 0; i < 40; ++i) s.emplace_back(std::exp(rng.uniform(0.0, 10.0)), std::exp(rng.normal()));
  Mat x(40, 2);
  Vec y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = std::log(s[static_cast<std::size_t>(i)].first);
    y(i) = std::log(s[static_cast<std::size_t>(i)].second);
  }
  const Vec coef = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  EXPECT_NEAR(slope_fit(s), coef(1), 1e-10);
}

TEST(Metrics, SlopeScaleInvariance) {
  Rng rng(3);
  std::vector<std::pair<double, double>> s, scaled;
  for (int i = 1; i <= 20; ++i) {
    const double n = 10.0 * i, v = std::exp(rng.normal());
    s.emplace_back(n, v);
    scaled.emplace_back(n, 42.0 * v);
  }
  EXPECT_NEAR(slope_fit(s), slope_fit(scaled), 1e-12);
}

TEST(Metrics, SlopeRejectsBadSeries) {
  std::vector<std::pair<double, double>> s;
  for (int i = 1; i <= 9; ++i) s.emplace_back(i, 1.0);
  EXPECT_THROW(slope_fit(s), ContractViolation);
  s.emplace_back(10.0, 0.0);
  EXPECT_THROW(slope_fit(s), ContractViolation);
  std::vector<std::pair<double, double>> same(12, {5.0, 1.0});
  EXPECT_THROW(slope_fit(same), ContractViolation);
  EXPECT_NO_THROW(loglog_slope({{1.0, 1.0}, {2.0, 2.0}}));
}

TEST(Metrics, CtrScore) {
  EXPECT_DOUBLE_EQ(ctr_score({1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                              0.0, 0.0, 0.0}),
                   500.0);
  EXPECT_DOUBLE_EQ(ctr_score(std::vector<double>(7, 0.0)), 0.0);
  EXPECT_THROW(ctr_score({}), ContractViolation);
  EXPECT_THROW(ctr_score({0.5}), ContractViolation);
  const std::vector<double> r{1.0, 0.0, 1.0};
  EXPECT_EQ(ctr_score(r), ctr_score(r));
}

TEST(Metrics, QuantileAndGrid) {
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({0.0, 10.0}, 0.25), 2.5);
  const auto g = log_grid(1000, 100000, 10);
  EXPECT_EQ(g.front(), 1000u);
  EXPECT_EQ(g.back(), 100000u);
  EXPECT_EQ(g.size(), 21u);
}
