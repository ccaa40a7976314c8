#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "driftls/errors.hpp"
#include "driftls/linalg.hpp"
#include "driftls/trackers.hpp"

namespace driftls {

struct TrackingRecord {
  std::size_t n = 0;
  double err = 0.0;
  std::int64_t wall_ns = 0;
};

inline double tracking_error(const Vec& theta, const Vec& target) {
  if (theta.size() != target.size()) throw ContractViolation("tracking_error: dimension mismatch");
  return (theta - target).norm();
}

// Collects (step, error) pairs emitted through a TraceHook.
class TrackingRecorder {
 public:
  TraceHook hook() {
    return [this](std::size_t step, double err) { records_.push_back({step, err, 0}); };
  }
  const std::vector<TrackingRecord>& records() const { return records_; }

 private:
  std::vector<TrackingRecord> records_;
};

// Prefix sums of best_value - x_n^T theta*.
inline std::vector<double> cumulative_regret(const std::vector<Vec>& actions, const Vec& theta_star,
                                             double best_value) {
  std::vector<double> out;
  out.reserve(actions.size());
  double total = 0.0;
  for (const Vec& x : actions) {
    total += best_value - x.dot(theta_star);
    out.push_back(total);
  }
  return out;
}

// Per-step best values, for action sets that change between rounds.
inline std::vector<double> cumulative_regret(const std::vector<Vec>& actions, const Vec& theta_star,
                                             const std::vector<double>& best_values) {
  if (actions.size() != best_values.size()) throw ContractViolation("cumulative_regret: length mismatch");
  std::vector<double> out;
  out.reserve(actions.size());
  double total = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    total += best_values[i] - actions[i].dot(theta_star);
    out.push_back(total);
  }
  return out;
}

// Least-squares slope of log(value) against log(n), for short series such as
// a handful of benchmark dimensions.
inline double loglog_slope(const std::vector<std::pair<double, double>>& series, std::size_t min_points = 2) {
  if (series.size() < std::max<std::size_t>(2, min_points)) {
    throw ContractViolation("slope_fit: need at least " + std::to_string(std::max<std::size_t>(2, min_points)) +
                            " points");
  }
  const bool flat = std::all_of(series.begin(), series.end(), [&](const auto& p) { return p.first == series[0].first; });
  if (flat) throw ContractViolation("slope_fit: all n are equal");
  double mx = 0.0, my = 0.0;
  for (const auto& [n, v] : series) {
    if (!(n > 0.0) || !(v > 0.0)) throw ContractViolation("slope_fit: n and values must be positive");
    mx += std::log(n);
    my += std::log(v);
  }
  const double m = static_cast<double>(series.size());
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, v] : series) {
    const double dx = std::log(n) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(v) - my);
  }
  return sxy / sxx;
}

inline double slope_fit(const std::vector<std::pair<double, double>>& series) { return loglog_slope(series, 10); }

// Clicks per round, scaled by 10^4.
inline double ctr_score(const std::vector<double>& rewards) {
  if (rewards.empty()) throw ContractViolation("ctr_score: zero rounds");
  double clicks = 0.0;
  for (double r : rewards) {
    if (r != 0.0 && r != 1.0) throw ContractViolation("ctr_score: rewards must be binary");
    clicks += r;
  }
  return clicks / static_cast<double>(rewards.size()) * 10000.0;
}

// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractViolation("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ContractViolation("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Log-spaced integer grid on [lo, hi], per_decade points per factor of ten,
// always including both ends.
inline std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, int per_decade) {
  std::vector<std::size_t> out;
  if (lo == 0) lo = 1;
  if (hi < lo) return out;
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double v = static_cast<double>(lo); v < static_cast<double>(hi); v *= step) {
    const auto k = static_cast<std::size_t>(std::llround(v));
    if (out.empty() || k > out.back()) out.push_back(k);
  }
  if (out.empty() || out.back() != hi) out.push_back(hi);
  return out;
}

}  // namespace driftls
