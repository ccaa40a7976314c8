#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "driftls/errors.hpp"
#include "driftls/linalg.hpp"
#include "driftls/rng.hpp"

namespace driftls {

// Bounded zero-mean noise, |xi| <= 1.
struct NoiseModel {
  enum class Kind { none, uniform, rademacher, truncated_gaussian };

  Kind kind = Kind::uniform;
  double sigma = 0.5;  // truncated_gaussian only

  static NoiseModel none() { return {Kind::none, 0.0}; }
  static NoiseModel uniform() { return {Kind::uniform, 0.0}; }
  static NoiseModel rademacher() { return {Kind::rademacher, 0.0}; }
  static NoiseModel truncated_gaussian(double sigma) { return {Kind::truncated_gaussian, sigma}; }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::uniform:
        return rng.uniform(-1.0, 1.0);
      case Kind::rademacher:
        return rng.rademacher();
      case Kind::truncated_gaussian:
        // Symmetric rejection keeps the mean at zero.
        for (;;) {
          const double z = sigma * rng.normal();
          if (std::abs(z) <= 1.0) return z;
        }
    }
    return 0.0;
  }
};

inline NoiseModel parse_noise(const std::string& name, double sigma = 0.5) {
  if (name == "none" || name == "zero") return NoiseModel::none();
  if (name == "uniform") return NoiseModel::uniform();
  if (name == "rademacher") return NoiseModel::rademacher();
  if (name == "gaussian" || name == "truncated_gaussian") {
    if (!(sigma > 0.0)) throw ConfigError("noise: sigma must be positive");
    return NoiseModel::truncated_gaussian(sigma);
  }
  throw ConfigError("unknown noise model '" + name + "'");
}

// Admissible actions D. The unit sphere stands for the closed unit ball
// (its strongly convex hull); best actions always land on the sphere.
class ActionSet {
 public:
  enum class Kind { unit_sphere, ellipsoid, finite_pool };

  static ActionSet unit_sphere(Index d) {
    ActionSet a;
    a.kind_ = Kind::unit_sphere;
    a.d_ = d;
    return a;
  }

  // {x : x^T Q x <= 1}; Q SPD with eigenvalues >= 1 so that ||x|| <= 1.
  static ActionSet ellipsoid(Mat q) {
    if (!is_symmetric(q)) throw ConfigError("ellipsoid: Q must be symmetric");
    if (min_eigenvalue(q) < 1.0 - 1e-12) {
      throw ConfigError("ellipsoid: Q must have eigenvalues >= 1 to keep actions in the unit ball");
    }
    ActionSet a;
    a.kind_ = Kind::ellipsoid;
    a.d_ = q.rows();
    a.q_inv_ = inverse_spd(q);
    a.q_ = std::move(q);
    return a;
  }

  static ActionSet finite_pool(std::vector<Vec> arms) {
    if (arms.empty()) throw ConfigError("finite pool: at least one arm required");
    ActionSet a;
    a.kind_ = Kind::finite_pool;
    a.d_ = arms.front().size();
    for (const Vec& x : arms) {
      if (x.size() != a.d_) throw ConfigError("finite pool: arms must share one dimension");
      if (x.norm() > 1.0 + 1e-9) throw ConfigError("finite pool: arm norm exceeds 1");
    }
    a.pool_ = std::move(arms);
    return a;
  }

  Kind kind() const { return kind_; }
  Index dim() const { return d_; }
  const Mat& q() const { return q_; }
  const Mat& q_inv() const { return q_inv_; }
  const std::vector<Vec>& pool() const { return pool_; }

  bool admits(const Vec& x, double tol = 1e-9) const {
    if (x.size() != d_ || !x.allFinite()) return false;
    switch (kind_) {
      case Kind::unit_sphere:
        return x.norm() <= 1.0 + tol;
      case Kind::ellipsoid:
        return x.dot(q_ * x) <= 1.0 + tol;
      case Kind::finite_pool:
        return std::any_of(pool_.begin(), pool_.end(),
                           [&](const Vec& a) { return (a - x).cwiseAbs().maxCoeff() <= tol; });
    }
    return false;
  }

  // First basis direction scaled onto the set boundary (degenerate argmax).
  Vec first_direction() const {
    if (kind_ == Kind::finite_pool) return pool_.front();
    Vec e = Vec::Zero(d_);
    e(0) = kind_ == Kind::ellipsoid ? 1.0 / std::sqrt(q_(0, 0)) : 1.0;
    return e;
  }

 private:
  Kind kind_ = Kind::unit_sphere;
  Index d_ = 0;
  Mat q_;
  Mat q_inv_;
  std::vector<Vec> pool_;
};

// Result of argmax_{x in D} theta^T x.
struct BestAction {
  Vec x;
  std::size_t index = 0;  // position in a finite pool, else 0
  bool degenerate = false;
};

// Maximisation convention; invariant to positive rescaling of theta up to rounding.
inline BestAction best_action(const Vec& theta, const ActionSet& set) {
  if (theta.size() != set.dim() || !theta.allFinite()) {
    throw ContractViolation("best_action: theta must be finite with the action-set dimension");
  }
  if (set.kind() == ActionSet::Kind::finite_pool) {
    const auto& pool = set.pool();
    std::size_t best = 0;
    double best_val = pool[0].dot(theta);
    for (std::size_t k = 1; k < pool.size(); ++k) {
      const double v = pool[k].dot(theta);
      if (v > best_val) {
        best_val = v;
        best = k;
      }
    }
    const bool degenerate = theta.isZero(0.0);
    return {pool[degenerate ? 0 : best], degenerate ? 0 : best, degenerate};
  }
  if (theta.isZero(0.0)) return {set.first_direction(), 0, true};
  // Normalise by the largest entry first; power-of-two rescalings then give identical bits.
  const double scale = theta.cwiseAbs().maxCoeff();
  const Vec t = theta / scale;
  if (set.kind() == ActionSet::Kind::unit_sphere) return {t / t.norm(), 0, false};
  const Vec w = set.q_inv() * t;
  return {w / std::sqrt(t.dot(w)), 0, false};
}

// max_{x in D} theta^T x.
inline double best_value(const Vec& theta, const ActionSet& set) {
  switch (set.kind()) {
    case ActionSet::Kind::unit_sphere:
      return theta.norm();
    case ActionSet::Kind::ellipsoid:
      return std::sqrt(std::max(0.0, theta.dot(set.q_inv() * theta)));
    case ActionSet::Kind::finite_pool: {
      double v = -std::numeric_limits<double>::infinity();
      for (const Vec& x : set.pool()) v = std::max(v, x.dot(theta));
      return v;
    }
  }
  return 0.0;
}

// Linear reward environment y = x^T theta* + xi.
struct LinearEnv {
  Vec theta_star;
  NoiseModel noise;
  ActionSet actions;

  double mean_reward(const Vec& x) const { return x.dot(theta_star); }
  double best() const { return best_value(theta_star, actions); }
};

inline double sample_reward(const LinearEnv& env, const Vec& x, Rng& rng) {
  if (!env.actions.admits(x)) throw ContractViolation("sample_reward: action not admitted by the action set");
  return env.mean_reward(x) + env.noise.draw(rng);
}

// Uniform direction on the unit sphere, scaled to the given norm.
inline Vec random_direction(Index d, Rng& rng, double norm = 1.0) {
  Vec v(d);
  double n2 = 0.0;
  do {
    for (Index i = 0; i < d; ++i) v(i) = rng.normal();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v * (norm / std::sqrt(n2));
}

struct Arm {
  std::int64_t id = 0;
  Vec x;
};

// Shape of the per-round finite action sets.
struct ArmSetSpec {
  Index d = 10;
  std::size_t k = 10;
  double density = 1.0;   // probability a coordinate is nonzero
  bool nonnegative = false;
  bool fixed_pool = false;  // same arms every round
  std::uint64_t pool_seed = 0;
};

namespace detail {

inline Vec draw_arm_feature(const ArmSetSpec& spec, Rng& rng) {
  if (spec.density >= 1.0) {
    Vec v = random_direction(spec.d, rng);
    return spec.nonnegative ? Vec(v.cwiseAbs()) : v;
  }
  Vec v = Vec::Zero(spec.d);
  for (;;) {
    for (Index i = 0; i < spec.d; ++i) {
      if (rng.bernoulli(spec.density)) {
        const double z = rng.normal();
        v(i) = spec.nonnegative ? std::abs(z) : z;
      }
    }
    if (v.squaredNorm() > 0.0) break;
  }
  return v / v.norm();
}

}  // namespace detail

// K unit-norm arms for a round. Varying sets draw from rng.split(round), so
// the arms of any round are independent of the order rounds are generated in.
inline std::vector<Arm> gen_arm_set(const ArmSetSpec& spec, std::size_t round, const Rng& rng) {
  if (spec.k < 1) throw ContractViolation("gen_arm_set: K must be >= 1");
  if (spec.d < 1) throw ContractViolation("gen_arm_set: d must be >= 1");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) {
    throw ContractViolation("gen_arm_set: density must lie in (0, 1]");
  }
  std::vector<Arm> arms;
  arms.reserve(spec.k);
  if (spec.fixed_pool) {
    Rng pool_rng(spec.pool_seed, 0x9001);
    for (std::size_t k = 0; k < spec.k; ++k) {
      arms.push_back({static_cast<std::int64_t>(k), detail::draw_arm_feature(spec, pool_rng)});
    }
    return arms;
  }
  Rng round_rng = rng.split(round);
  for (std::size_t k = 0; k < spec.k; ++k) {
    arms.push_back({static_cast<std::int64_t>(round * spec.k + k), detail::draw_arm_feature(spec, round_rng)});
  }
  return arms;
}

// Synthetic click model: P(click) = clamp(x^T theta* + 0.5 xi, 0, 1) with xi
// from the noise model, then a Bernoulli draw.
struct ClickModel {
  Vec theta_star;
  NoiseModel noise = NoiseModel::uniform();
  double noise_scale = 0.5;

  double click_probability(const Vec& x, Rng& rng) const {
    return std::clamp(x.dot(theta_star) + noise_scale * noise.draw(rng), 0.0, 1.0);
  }

  double click(const Vec& x, Rng& rng) const {
    const double p = click_probability(x, rng);
    return rng.bernoulli(p) ? 1.0 : 0.0;
  }
};

}  // namespace driftls
