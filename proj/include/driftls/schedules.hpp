#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "driftls/errors.hpp"

namespace driftls {

// Step-size sequence gamma_n, indexed from n = 1.
//   shifted:  gamma_n = c / (4 (c + n))
//   generic:  gamma_n = c / (c1 + n)      (c1 = 0 gives the plain c/n rule)
//   constant: gamma_n = gamma0
struct StepSchedule {
  enum class Kind { shifted, generic, constant };

  Kind kind = Kind::shifted;
  double c = 1.0;
  double c1 = 0.0;
  double gamma0 = 0.01;

  static StepSchedule shifted(double c) { return {Kind::shifted, c, 0.0, 0.0}; }
  static StepSchedule generic(double c, double c1) { return {Kind::generic, c, c1, 0.0}; }
  static StepSchedule constant(double gamma0) { return {Kind::constant, 0.0, 0.0, gamma0}; }

  double operator()(std::size_t n) const {
    const double nn = static_cast<double>(n == 0 ? 1 : n);
    switch (kind) {
      case Kind::shifted:
        return c / (4.0 * (c + nn));
      case Kind::generic:
        return c / (c1 + nn);
      case Kind::constant:
        return gamma0;
    }
    return 0.0;
  }

  // shifted and constant schedules must stay inside (0, 1). The generic rule
  // only has to be positive: c/n with c = 4d/(3 lambda) exceeds 1 early on and
  // must remain expressible.
  void validate() const {
    switch (kind) {
      case Kind::shifted:
        if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("step schedule: c must be positive");
        break;
      case Kind::generic:
        if (!(c > 0.0) || !(c1 >= 0.0) || !std::isfinite(c) || !std::isfinite(c1)) {
          throw ConfigError("step schedule: generic rule needs c > 0 and c1 >= 0");
        }
        if (c1 + 1.0 <= 0.0) throw ConfigError("step schedule: c1 + 1 must be positive");
        break;
      case Kind::constant:
        if (!(gamma0 > 0.0 && gamma0 < 1.0)) throw ConfigError("step schedule: gamma0 must lie in (0, 1)");
        break;
    }
  }
};

// Regularisation sequence lambda_n, indexed by the sample count n >= 1.
//   zero:      0
//   constant:  value
//   inverse_n: 1 / n
//   power:     n^{-(1 - alpha)}
struct RegSchedule {
  enum class Kind { zero, constant, inverse_n, power };

  Kind kind = Kind::zero;
  double value = 0.0;
  double alpha = 0.6;

  static RegSchedule zero() { return {Kind::zero, 0.0, 0.0}; }
  static RegSchedule constant(double v) { return {Kind::constant, v, 0.0}; }
  static RegSchedule inverse_n() { return {Kind::inverse_n, 0.0, 0.0}; }
  static RegSchedule power(double alpha) { return {Kind::power, 0.0, alpha}; }

  double operator()(std::size_t n) const {
    const double nn = static_cast<double>(n == 0 ? 1 : n);
    switch (kind) {
      case Kind::zero:
        return 0.0;
      case Kind::constant:
        return value;
      case Kind::inverse_n:
        return 1.0 / nn;
      case Kind::power:
        return std::pow(nn, -(1.0 - alpha));
    }
    return 0.0;
  }

  // n * lambda_n as a constant when it does not depend on n. Lets the exact
  // solver keep (A_sum + n lambda_n I)^{-1} current with rank-1 updates.
  bool scaled_is_constant() const { return kind == Kind::zero || kind == Kind::inverse_n; }
  double scaled_constant() const { return kind == Kind::inverse_n ? 1.0 : 0.0; }

  void validate() const {
    if (kind == Kind::constant && !(value >= 0.0)) throw ConfigError("reg schedule: lambda must be >= 0");
    if (kind == Kind::power && !(alpha >= 0.0 && alpha <= 1.0)) {
      throw ConfigError("reg schedule: alpha must lie in [0, 1]");
    }
  }
};

inline std::string to_string(StepSchedule::Kind k) {
  switch (k) {
    case StepSchedule::Kind::shifted: return "shifted";
    case StepSchedule::Kind::generic: return "generic";
    case StepSchedule::Kind::constant: return "constant";
  }
  return "?";
}

inline std::string to_string(RegSchedule::Kind k) {
  switch (k) {
    case RegSchedule::Kind::zero: return "zero";
    case RegSchedule::Kind::constant: return "constant";
    case RegSchedule::Kind::inverse_n: return "inverse_n";
    case RegSchedule::Kind::power: return "power";
  }
  return "?";
}

}  // namespace driftls
