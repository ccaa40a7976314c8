#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "driftls/errors.hpp"
#include "driftls/exact.hpp"
#include "driftls/linalg.hpp"
#include "driftls/rng.hpp"
#include "driftls/schedules.hpp"

namespace driftls {

// Features admitted into a buffer satisfy ||x|| <= 1 up to this slack.
inline constexpr double kNormSlack = 1e-12;

// Append-only history of samples with uniform random indexing.
class DataBuffer {
 public:
  explicit DataBuffer(Index d) : d_(d) {
    if (d < 1) throw ContractViolation("DataBuffer: dimension must be >= 1");
  }

  void append(Sample s) {
    detail::check_sample(s, d_, "DataBuffer::append");
    if (s.x.norm() > 1.0 + kNormSlack) {
      throw ContractViolation("DataBuffer::append: feature norm " + std::to_string(s.x.norm()) + " exceeds 1");
    }
    samples_.push_back(std::move(s));
  }

  // Uniform on {0, ..., size() - 1}.
  std::size_t draw(Rng& rng) const {
    if (samples_.empty()) throw ContractViolation("DataBuffer: cannot draw from an empty buffer");
    return static_cast<std::size_t>(rng.uniform_index(samples_.size()));
  }

  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  Index dim() const { return d_; }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  Index d_;
  std::vector<Sample> samples_;
};

// Streams (step, ||theta - target||) pairs to a consumer.
using TraceHook = std::function<void(std::size_t step, double err)>;

// SGD iterate for fOLS-GD / fRLS-GD with optional Polyak averaging.
struct TrackerState {
  Vec theta;
  std::size_t n_steps = 0;
  StepSchedule schedule;
  RegSchedule reg;
  std::optional<Vec> avg_theta;
  std::size_t avg_count = 0;
  std::size_t burn_in = 0;
  std::size_t lambda_len = 0;  // buffer length lambda_cache was evaluated at
  double lambda_cache = 0.0;

  static TrackerState make(Index d, StepSchedule schedule, RegSchedule reg = RegSchedule::zero()) {
    schedule.validate();
    reg.validate();
    return TrackerState{Vec::Zero(d), 0, schedule, reg, std::nullopt, 0, 0, 0, 0.0};
  }

  // Average the post-step iterates whose step index exceeds burn_in.
  void enable_averaging(std::size_t burn = 0) {
    burn_in = burn;
    avg_theta = Vec::Zero(theta.size());
    avg_count = 0;
  }

  // The averaged iterate once it has absorbed a step, else theta.
  const Vec& estimate() const { return (avg_theta && avg_count > 0) ? *avg_theta : theta; }
};

namespace detail {

inline void check_tracker(const Vec& theta, const DataBuffer& buf, const char* who) {
  if (buf.empty()) throw ContractViolation(std::string(who) + ": empty buffer");
  if (theta.size() != buf.dim()) throw ContractViolation(std::string(who) + ": dimension mismatch");
}

inline void after_step(TrackerState& st) {
  ++st.n_steps;
  if (st.avg_theta && st.n_steps > st.burn_in) {
    ++st.avg_count;
    *st.avg_theta += (st.theta - *st.avg_theta) / static_cast<double>(st.avg_count);
  }
}

}  // namespace detail

// theta <- theta + gamma_n (y_i - theta^T x_i) x_i, i uniform over the buffer.
inline void fols_step(TrackerState& st, const DataBuffer& buf, Rng& rng) {
  detail::check_tracker(st.theta, buf, "fols_step");
  const Sample& s = buf[buf.draw(rng)];
  const double gamma = st.schedule(st.n_steps + 1);
  const double resid = s.y - st.theta.dot(s.x);
  st.theta.noalias() += (gamma * resid) * s.x;
  detail::after_step(st);
}

// theta <- theta + gamma_n ((y_i - theta^T x_i) x_i - lambda_n theta), with
// lambda_n evaluated at the buffer length.
inline void frls_step(TrackerState& st, const DataBuffer& buf, Rng& rng) {
  detail::check_tracker(st.theta, buf, "frls_step");
  const Sample& s = buf[buf.draw(rng)];
  const double gamma = st.schedule(st.n_steps + 1);
  if (st.lambda_len != buf.size()) {
    st.lambda_len = buf.size();
    st.lambda_cache = st.reg(buf.size());
  }
  const double lambda = st.lambda_cache;
  const double resid = s.y - st.theta.dot(s.x);
  st.theta *= (1.0 - gamma * lambda);
  st.theta.noalias() += (gamma * resid) * s.x;
  detail::after_step(st);
}

// Per-sample gradient of 1/2 (y - theta^T x)^2 + (lambda/2) ||theta||^2 is
// -(y - theta^T x) x + lambda theta.

// SVRG with a snapshot anchor. full_grad holds the data part of the mean
// gradient at the anchor, -(1/N) sum (y_i - anchor^T x_i) x_i over the N
// samples present at the last reset; the lambda part is exact at every step
// because lambda * anchor cancels between the correction terms.
struct SvrgState {
  Vec theta;
  Vec anchor;
  Vec full_grad;
  std::size_t epoch_len = 0;
  std::size_t steps_in_epoch = 0;
  std::size_t epochs = 0;
  std::size_t anchor_len = 0;
  double epoch_factor = 2.0;
  bool anchored = false;

  static SvrgState make(Index d, double epoch_factor = 2.0) {
    SvrgState st;
    st.theta = Vec::Zero(d);
    st.anchor = Vec::Zero(d);
    st.full_grad = Vec::Zero(d);
    st.epoch_factor = epoch_factor;
    return st;
  }
};

inline Vec data_gradient(const Vec& theta, const DataBuffer& buf) {
  Vec g = Vec::Zero(theta.size());
  for (const Sample& s : buf.samples()) g.noalias() -= (s.y - theta.dot(s.x)) * s.x;
  return g / static_cast<double>(buf.size());
}

// Mean gradient of the regularised objective over the buffer.
inline Vec full_gradient(const Vec& theta, const DataBuffer& buf, double lambda) {
  return data_gradient(theta, buf) + lambda * theta;
}

inline void svrg_reset_anchor(SvrgState& st, const DataBuffer& buf) {
  detail::check_tracker(st.theta, buf, "svrg_reset_anchor");
  st.anchor = st.theta;
  st.full_grad = data_gradient(st.anchor, buf);
  st.anchor_len = buf.size();
  st.epoch_len = std::max<std::size_t>(1, static_cast<std::size_t>(st.epoch_factor * static_cast<double>(buf.size())));
  st.steps_in_epoch = 0;
  st.anchored = true;
  ++st.epochs;
}

// theta <- theta - gamma (f_i'(theta) - f_i'(anchor) + F'(anchor)); the anchor
// and its full gradient are refreshed every epoch_len steps.
inline void svrg_step(SvrgState& st, const DataBuffer& buf, double lambda, double gamma, Rng& rng) {
  detail::check_tracker(st.theta, buf, "svrg_step");
  if (!st.anchored || st.steps_in_epoch >= st.epoch_len) svrg_reset_anchor(st, buf);
  const Sample& s = buf[buf.draw(rng)];
  const double r_theta = s.y - st.theta.dot(s.x);
  const double r_anchor = s.y - st.anchor.dot(s.x);
  // v = -r_theta x + r_anchor x + full_grad + lambda theta
  st.theta *= (1.0 - gamma * lambda);
  st.theta.noalias() -= gamma * ((r_anchor - r_theta) * s.x + st.full_grad);
  ++st.steps_in_epoch;
}

// SAG: one stored gradient per buffer slot; the step uses their sum divided by
// the buffer length. Slots start at zero and grow with the buffer.
struct SagState {
  Vec theta;
  std::vector<Vec> grad_memory;
  Vec grad_sum;
  std::vector<bool> seen;
  std::size_t seen_count = 0;
  bool divide_by_seen = false;

  static SagState make(Index d, bool divide_by_seen = false) {
    SagState st;
    st.theta = Vec::Zero(d);
    st.grad_sum = Vec::Zero(d);
    st.divide_by_seen = divide_by_seen;
    return st;
  }

  void grow(std::size_t len) {
    while (grad_memory.size() < len) {
      grad_memory.emplace_back(Vec::Zero(theta.size()));
      seen.push_back(false);
    }
  }
};

inline void sag_step(SagState& st, const DataBuffer& buf, double lambda, double gamma, Rng& rng) {
  detail::check_tracker(st.theta, buf, "sag_step");
  st.grow(buf.size());
  const std::size_t i = buf.draw(rng);
  const Sample& s = buf[i];
  Vec& slot = st.grad_memory[i];
  st.grad_sum -= slot;
  slot.noalias() = lambda * st.theta - (s.y - st.theta.dot(s.x)) * s.x;
  st.grad_sum += slot;
  if (!st.seen[i]) {
    st.seen[i] = true;
    ++st.seen_count;
  }
  const double denom = st.divide_by_seen ? static_cast<double>(st.seen_count) : static_cast<double>(buf.size());
  st.theta.noalias() -= (gamma / denom) * st.grad_sum;
}

// Confidence tracker: phi settles (in expectation) at A_n^{-1} target_x where
// A_n is the unnormalised sum of x_i x_i^T over the buffer.
struct PhiState {
  Vec phi;
  Vec target_x;

  static PhiState make(Vec target_x) {
    PhiState st;
    st.phi = Vec::Zero(target_x.size());
    st.target_x = std::move(target_x);
    return st;
  }

  double confidence() const { return target_x.dot(phi); }
};

// phi <- phi + gamma (n^{-1} target_x - (phi^T x_i) x_i).
inline void phi_step(PhiState& st, const DataBuffer& buf, double gamma, Rng& rng) {
  detail::check_tracker(st.phi, buf, "phi_step");
  const Sample& s = buf[buf.draw(rng)];
  const double inv_n = 1.0 / static_cast<double>(buf.size());
  const double proj = st.phi.dot(s.x);
  st.phi.noalias() += (gamma * inv_n) * st.target_x;
  st.phi.noalias() -= (gamma * proj) * s.x;
}

}  // namespace driftls
