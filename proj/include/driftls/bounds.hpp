#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "driftls/errors.hpp"

// Closed-form constants of the fOLS-GD error bounds and the fPEGE-GD regret
// bound. All logarithms are natural.

namespace driftls {

struct BoundParams {
  double mu = 0.0;               // strong-convexity floor on lambda_min(A_bar_n)
  double c = 0.0;                // step constant, gamma_n = c / (4 (c + n))
  std::size_t d = 1;
  std::size_t n0 = 1;            // lambda_min(A_bar_n) >= mu for all n > n0
  double delta = 0.1;
  double theta_init_dist = 0.0;  // ||theta_0 - theta*||
};

// mu c / 4 in (2/3, 1); the bound evaluators refuse anything else.
inline bool step_condition_holds(const BoundParams& p) {
  const double r = p.mu * p.c / 4.0;
  return r > 2.0 / 3.0 && r < 1.0;
}

inline void require_step_condition(const BoundParams& p) {
  if (!(p.mu > 0.0) || !(p.c > 0.0)) throw ContractViolation("bounds: mu and c must be positive");
  if (!step_condition_holds(p)) {
    throw ContractViolation("bounds: mu*c/4 = " + std::to_string(p.mu * p.c / 4.0) +
                            " lies outside (2/3, 1); the error bounds do not apply");
  }
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ContractViolation("bounds: delta must lie in (0, 1)");
  if (p.n0 < 1) throw ContractViolation("bounds: n0 must be >= 1");
}

// h(k) = 2 [1 + 2 (||theta_0 - theta*|| + log k)^2]. The noise-variance factor
// is fixed at 1, which |xi| <= 1 allows.
inline double h_of(double k, const BoundParams& p) {
  if (!(k >= 1.0)) throw ContractViolation("h_of: k must be >= 1");
  const double t = p.theta_init_dist + std::log(k);
  return 2.0 * (1.0 + 2.0 * t * t);
}

// beta_n = max(128 d log n log(n^2 / delta), (2 log(n^2 / delta))^2).
inline double beta_of(double n, const BoundParams& p) {
  if (!(n >= 2.0)) throw ContractViolation("beta_of: n must be >= 2");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ContractViolation("beta_of: delta must lie in (0, 1)");
  const double l = std::log(n * n / p.delta);
  const double first = 128.0 * static_cast<double>(p.d) * std::log(n) * l;
  const double second = (2.0 * l) * (2.0 * l);
  return std::max(first, second);
}

// K_{mu,c} = c^2 / [16 (1 - 2 (1 - 3 mu c / 16))].
inline double k_mu_c(const BoundParams& p) {
  require_step_condition(p);
  const double denom = 16.0 * (1.0 - 2.0 * (1.0 - 3.0 * p.mu * p.c / 16.0));
  return p.c * p.c / denom;
}

// K_1(n). The initial-distance term carries a ln(n0) factor as stated, which
// makes it vanish for n0 = 1 and shrink it for n0 < e.
inline double k1_of(double n, const BoundParams& p) {
  require_step_condition(p);
  if (!(n > static_cast<double>(p.n0))) throw ContractViolation("k1_of: n must exceed n0");
  const double r = p.mu * p.c / 4.0;
  const double initial = p.theta_init_dist * std::log(static_cast<double>(p.n0)) / std::pow(n + p.c, r);
  const double sampling = std::sqrt(h_of(n, p));
  const double drift = (std::sqrt(2.0) + std::sqrt(p.mu * beta_of(n + p.c, p))) / p.mu;
  return initial + sampling + drift;
}

inline double k2_of(double n, const BoundParams& p) {
  return std::sqrt(2.0 * k_mu_c(p) * std::log(1.0 / p.delta)) + k1_of(n, p);
}

// E||theta_n - theta_hat_n|| <= K_1(n) / sqrt(n + c).
inline double expectation_bound(double n, const BoundParams& p) { return k1_of(n, p) / std::sqrt(n + p.c); }

// P(||theta_n - theta_hat_n|| <= K_2(n) / sqrt(n + c)) >= 1 - delta.
inline double high_probability_bound(double n, const BoundParams& p) { return k2_of(n, p) / std::sqrt(n + p.c); }

// R_n <= C K_1(n)^2 d^{-1} (||theta*|| + ||theta*||^{-1}) n^{1/2}.
inline double pege_bound(double n, const BoundParams& p, double norm_theta, double constant) {
  if (!(n >= 1.0)) throw ContractViolation("pege_bound: n must be >= 1");
  if (!(norm_theta > 0.0)) throw ContractViolation("pege_bound: ||theta*|| must be positive");
  const double k1 = k1_of(n, p);
  return constant * k1 * k1 / static_cast<double>(p.d) * (norm_theta + 1.0 / norm_theta) * std::sqrt(n);
}

}  // namespace driftls
