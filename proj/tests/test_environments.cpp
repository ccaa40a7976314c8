#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftls/environments.hpp"
#include "driftls/event_log.hpp"
#include "test_util.hpp"

using namespace driftls;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "driftls_env_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace

TEST(Noise, BoundedAndCentred) {
  const std::vector<NoiseModel> models{NoiseModel::uniform(), NoiseModel::rademacher(),
                                       NoiseModel::truncated_gaussian(0.5), NoiseModel::truncated_gaussian(2.0)};
  for (const auto& m : models) {
    Rng rng(51);
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = m.draw(rng);
      ASSERT_LE(std::abs(z), 1.0);
      sum += z;
      sq += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_LE(std::abs(mean), 5 * sd / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Noise, ParseNames) {
  EXPECT_EQ(parse_noise("uniform").kind, NoiseModel::Kind::uniform);
  EXPECT_EQ(parse_noise("none").kind, NoiseModel::Kind::none);
  EXPECT_THROW(parse_noise("cauchy"), ConfigError);
  EXPECT_THROW(parse_noise("gaussian", 0.0), ConfigError);
}

TEST(SampleReward, ZeroNoiseIsExact) {
  Rng rng(52);
  const LinearEnv env{random_direction(3, rng), NoiseModel::none(), ActionSet::unit_sphere(3)};
  const Vec x = random_direction(3, rng);
  EXPECT_EQ(sample_reward(env, x, rng), x.dot(env.theta_star));
}

TEST(SampleReward, NoiseWithinOne) {
  Rng rng(53);
  const LinearEnv env{random_direction(3, rng, 2.0), NoiseModel::uniform(), ActionSet::unit_sphere(3)};
  for (int i = 0; i < 10000; ++i) {
    const Vec x = random_direction(3, rng);
    EXPECT_LE(std::abs(sample_reward(env, x, rng) - x.dot(env.theta_star)), 1.0);
  }
}

TEST(SampleReward, SampleMeanMatchesClt) {
  Rng rng(54);
  const LinearEnv env{random_direction(4, rng), NoiseModel::rademacher(), ActionSet::unit_sphere(4)};
  const Vec x = random_direction(4, rng);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = sample_reward(env, x, rng);
    sum += y;
    sq += y * y;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_LE(std::abs(mean - x.dot(env.theta_star)), 4 * sd / std::sqrt(static_cast<double>(n)));
}

TEST(SampleReward, InadmissibleActionThrows) {
  Rng rng(55);
  const LinearEnv env{random_direction(2, rng), NoiseModel::uniform(), ActionSet::unit_sphere(2)};
  EXPECT_THROW(sample_reward(env, Vec::Constant(2, 1.0), rng), ContractViolation);
}

TEST(ArmSets, SingleArm) {
  ArmSetSpec spec;
  spec.d = 3;
  spec.k = 1;
  const auto arms = gen_arm_set(spec, 0, Rng(1));
  ASSERT_EQ(arms.size(), 1u);
  EXPECT_NEAR(arms[0].x.norm(), 1.0, 1e-12);
}

TEST(ArmSets, FixedPoolRepeats) {
  ArmSetSpec spec;
  spec.d = 5;
  spec.k = 4;
  spec.fixed_pool = true;
  spec.pool_seed = 9;
  const auto a = gen_arm_set(spec, 0, Rng(1));
  const auto b = gen_arm_set(spec, 17, Rng(2));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].id, b[k].id);
    EXPECT_EQ(a[k].x, b[k].x);
  }
}

TEST(ArmSets, RoundsIndependentOfCallOrder) {
  ArmSetSpec spec;
  spec.d = 4;
  spec.k = 3;
  const Rng rng(3);
  const auto late = gen_arm_set(spec, 5, rng);
  for (std::size_t r = 0; r < 5; ++r) gen_arm_set(spec, r, rng);
  const auto again = gen_arm_set(spec, 5, rng);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(late[k].x, again[k].x);
  EXPECT_EQ(late[0].id, 15);
}

TEST(ArmSets, SparsityMatchesDensity) {
  ArmSetSpec spec;
  spec.d = 100;
  spec.k = 10;
  spec.density = 0.1;
  const Rng rng(4);
  double nnz = 0.0;
  std::size_t arms = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    for (const auto& a : gen_arm_set(spec, r, rng)) {
      EXPECT_LE(a.x.norm(), 1.0 + 1e-12);
      nnz += static_cast<double>((a.x.array() != 0.0).count());
      ++arms;
    }
  }
  ASSERT_EQ(arms, 1000u);
  EXPECT_GE(nnz / 1000.0, 5.0);
  EXPECT_LE(nnz / 1000.0, 15.0);
}

TEST(BestAction, SphereNormalises) {
  Vec t(2);
  t << 3, 4;
  const auto b = best_action(t, ActionSet::unit_sphere(2));
  EXPECT_NEAR(b.x(0), 0.6, 1e-15);
  EXPECT_NEAR(b.x(1), 0.8, 1e-15);
  EXPECT_FALSE(b.degenerate);
}

TEST(BestAction, ScaleInvariant) {
  Rng rng(56);
  const ActionSet sphere = ActionSet::unit_sphere(5);
  Mat q = testutil::random_spd(5, rng, 0.0);
  q += (1.0 - min_eigenvalue(q) + 0.5) * Mat::Identity(5, 5);
  const ActionSet ell = ActionSet::ellipsoid(q);
  for (int i = 0; i < 100; ++i) {
    const Vec t = testutil::gaussian_vec(5, rng);
    EXPECT_TRUE(best_action(t, sphere).x.isApprox(best_action(7.0 * t, sphere).x, 1e-15));
    EXPECT_TRUE(best_action(t, ell).x.isApprox(best_action(7.0 * t, ell).x, 1e-15));
    // Power-of-two factors scale exactly.
    EXPECT_EQ(best_action(t, sphere).x, best_action(0.25 * t, sphere).x);
    EXPECT_EQ(best_action(t, ell).x, best_action(0.25 * t, ell).x);
  }
}

TEST(BestAction, ZeroThetaIsDegenerate) {
  const auto b = best_action(Vec::Zero(3), ActionSet::unit_sphere(3));
  EXPECT_TRUE(b.degenerate);
  EXPECT_EQ(b.x, Vec::Unit(3, 0));
}

TEST(BestAction, EllipsoidMatchesDenseSampling) {
  Rng rng(57);
  Mat q = testutil::random_spd(3, rng, 0.0);
  q += (1.0 - min_eigenvalue(q) + 0.3) * Mat::Identity(3, 3);
  const ActionSet set = ActionSet::ellipsoid(q);
  const Vec t = testutil::gaussian_vec(3, rng);
  const auto b = best_action(t, set);
  EXPECT_TRUE(set.admits(b.x));
  double brute = -1e300;
  for (int i = 0; i < 1000000; ++i) {
    const Vec z = testutil::gaussian_vec(3, rng);
    const Vec x = z / std::sqrt(z.dot(q * z));
    brute = std::max(brute, x.dot(t));
  }
  EXPECT_GE(b.x.dot(t), brute - 1e-12);
  EXPECT_LE(b.x.dot(t) - brute, 1e-3);
  EXPECT_NEAR(b.x.dot(t), best_value(t, set), 1e-12);
}

TEST(BestAction, PoolTiesGoToLowestIndex) {
  std::vector<Vec> pool{Vec::Unit(2, 1), Vec::Unit(2, 0), Vec::Unit(2, 0)};
  const auto b = best_action(Vec::Unit(2, 0), ActionSet::finite_pool(pool));
  EXPECT_EQ(b.index, 1u);
}

TEST(ActionSet, EllipsoidMustStayInUnitBall) {
  EXPECT_THROW(ActionSet::ellipsoid(0.5 * Mat::Identity(2, 2)), ConfigError);
}

namespace {

std::vector<EventRecord> sample_records(std::size_t n, std::uint64_t seed) {
  NewsStreamConfig cfg;
  cfg.arms.d = 6;
  cfg.arms.k = 4;
  cfg.horizon = n;
  return synth_news_stream(cfg, Rng(seed)).records;
}

}  // namespace

TEST(EventLog, RoundTrip) {
  const auto records = sample_records(1000, 1);
  const fs::path p = temp_path("roundtrip.jsonl");
  write_event_log(p, records);
  const auto back = read_event_log(p);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_TRUE(back[i] == records[i]) << "record " << i;
}

TEST(EventLog, RoundTripWithoutChoice) {
  EventRecord r;
  r.t = 3;
  r.arms.push_back({7, Vec::Unit(2, 1)});
  const fs::path p = temp_path("nochoice.jsonl");
  write_event_log(p, {r});
  const auto back = read_event_log(p);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_TRUE(back[0] == r);
  EXPECT_FALSE(back[0].chosen.has_value());
}

TEST(EventLog, EmptyFile) {
  const fs::path p = temp_path("empty.jsonl");
  dump(p, "");
  EXPECT_TRUE(read_event_log(p).empty());
}

TEST(EventLog, MissingFileIsIoError) {
  EXPECT_THROW(read_event_log(temp_path("does_not_exist.jsonl")), IoError);
}

TEST(EventLog, RejectsLongFeatures) {
  const fs::path p = temp_path("long.jsonl");
  dump(p, "{\"t\":0,\"arms\":[{\"id\":1,\"x\":[0.8,0.6000001]}]}\n");
  try {
    read_event_log(p);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(EventLog, EnforcesArmBound) {
  const auto records = sample_records(3, 2);
  const fs::path p = temp_path("k.jsonl");
  write_event_log(p, records);
  EXPECT_NO_THROW(read_event_log(p, 4));
  EXPECT_THROW(read_event_log(p, 3), SchemaError);
}

TEST(EventLog, FuzzedDeletionsReportLine) {
  const auto records = sample_records(50, 3);
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(to_json(r).dump());
  Rng rng(58);
  const std::vector<std::string> paths{"t", "arms", "chosen", "reward", "arm.id", "arm.x"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t line = rng.uniform_index(lines.size());
    const std::string& field = paths[rng.uniform_index(paths.size())];
    auto j = nlohmann::json::parse(lines[line]);
    if (field.rfind("arm.", 0) == 0) {
      auto& arm = j["arms"][rng.uniform_index(j["arms"].size())];
      arm.erase(field.substr(4));
    } else {
      j.erase(field);
    }
    std::string text;
    for (std::size_t i = 0; i < lines.size(); ++i) text += (i == line ? j.dump() : lines[i]) + "\n";
    const fs::path p = temp_path("fuzz.jsonl");
    dump(p, text);
    try {
      read_event_log(p);
      FAIL() << "deleting " << field << " on line " << line + 1 << " was accepted";
    } catch (const SchemaError& e) {
      EXPECT_EQ(e.line(), line + 1) << field;
    }
  }
}

TEST(EventLog, BlankLinesKeepNumbering) {
  const fs::path p = temp_path("blank.jsonl");
  dump(p, "\n{\"t\":0,\"arms\":[{\"id\":1,\"x\":[0.5]}]}\n\n{\"t\":1}\n");
  try {
    read_event_log(p);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(EventLog, UnknownFieldRejected) {
  const fs::path p = temp_path("extra.jsonl");
  dump(p, "{\"t\":0,\"arms\":[{\"id\":1,\"x\":[0.5]}],\"extra\":1}\n");
  EXPECT_THROW(read_event_log(p), SchemaError);
}

TEST(NewsStream, EmptyHorizon) {
  NewsStreamConfig cfg;
  cfg.horizon = 0;
  EXPECT_TRUE(synth_news_stream(cfg, Rng(1)).records.empty());
}

TEST(NewsStream, BinaryRewardsAndUnitBall) {
  for (const auto& r : sample_records(500, 4)) {
    ASSERT_TRUE(r.reward.has_value());
    EXPECT_TRUE(*r.reward == 0.0 || *r.reward == 1.0);
    for (const auto& a : r.arms) EXPECT_LE(a.x.norm(), 1.0 + 1e-12);
  }
}

TEST(NewsStream, ByteIdenticalForSameSeed) {
  const fs::path a = temp_path("a.jsonl"), b = temp_path("b.jsonl");
  write_event_log(a, sample_records(200, 5));
  write_event_log(b, sample_records(200, 5));
  EXPECT_EQ(slurp(a), slurp(b));
  write_event_log(b, sample_records(200, 6));
  EXPECT_NE(slurp(a), slurp(b));
}

TEST(NewsStream, BestArmBeatsRandomPolicy) {
  NewsStreamConfig cfg;
  cfg.arms.fixed_pool = true;
  cfg.arms.pool_seed = 3;
  const NewsStream s = synth_news_stream(cfg, Rng(7));
  const ClickModel clicks{s.theta_star, cfg.noise, 0.5};
  const auto pool = gen_arm_set(cfg.arms, 0, Rng(0));
  std::size_t best = 0;
  for (std::size_t k = 1; k < pool.size(); ++k) {
    if (pool[k].x.dot(s.theta_star) > pool[best].x.dot(s.theta_star)) best = k;
  }
  Rng rng(8);
  double best_clicks = 0.0, random_clicks = 0.0;
  for (int t = 0; t < 10000; ++t) {
    best_clicks += clicks.click(pool[best].x, rng);
    random_clicks += clicks.click(pool[rng.uniform_index(pool.size())].x, rng);
  }
  EXPECT_GT(best_clicks, random_clicks);
}

TEST(TruthFile, RoundTrip) {
  Rng rng(59);
  const Vec t = random_direction(7, rng);
  const fs::path p = temp_path("truth.json");
  write_truth_file(p, t);
  EXPECT_EQ(read_truth_file(p), t);
}
