#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "driftls/errors.hpp"
#include "driftls/linalg.hpp"
#include "driftls/schedules.hpp"

namespace driftls {

// One observation (x_n, y_n).
struct Sample {
  Vec x;
  double y = 0.0;
};

inline constexpr std::size_t kDefaultRefactorEvery = 1000;

namespace detail {

inline void check_sample(const Sample& s, Index d, const char* who) {
  if (s.x.size() != d) {
    throw ContractViolation(std::string(who) + ": sample dimension " + std::to_string(s.x.size()) +
                            " does not match state dimension " + std::to_string(d));
  }
  if (!s.x.allFinite() || !std::isfinite(s.y)) {
    throw ContractViolation(std::string(who) + ": non-finite sample");
  }
}

// Maintained inverse of (A + shift I) under rank-1 growth of A, with a
// periodic rebuild from the running sum to bound round-off accumulation.
class IncrementalInverse {
 public:
  IncrementalInverse() = default;
  explicit IncrementalInverse(std::size_t refactor_every) : refactor_every_(refactor_every) {}

  bool ready() const { return inv_.has_value(); }
  const Mat& get() const { return *inv_; }

  void reset(Mat inv) {
    inv_ = std::move(inv);
    since_refactor_ = 0;
  }

  void clear() { inv_.reset(); }

  // source() yields the current A + shift I; called only at rebuilds.
  template <class Source>
  void update(const Vec& x, Source&& source) {
    sm_update_inplace(*inv_, x);
    ++since_refactor_;
    if (refactor_every_ > 0 && since_refactor_ >= refactor_every_) {
      Mat direct = inverse_spd(source());
      last_drift_ = (*inv_ - direct).norm() / direct.norm();
      inv_ = std::move(direct);
      since_refactor_ = 0;
      ++refactor_count_;
    }
  }

  // Relative Frobenius gap between the incremental and the rebuilt inverse
  // at the most recent checkpoint.
  double last_refactor_drift() const { return last_drift_; }
  std::size_t refactor_count() const { return refactor_count_; }

 private:
  std::optional<Mat> inv_;
  std::size_t refactor_every_ = kDefaultRefactorEvery;
  std::size_t since_refactor_ = 0;
  std::size_t refactor_count_ = 0;
  double last_drift_ = 0.0;
};

}  // namespace detail

// Running normal equations for ordinary least squares.
//
// The inverse of A_sum is created the moment the appended features span R^d
// (tracked by Gram-Schmidt on the incoming directions) and is kept current
// with Sherman-Morrison afterwards.
class OlsState {
 public:
  explicit OlsState(Index d, std::size_t refactor_every = kDefaultRefactorEvery, double rank_tol = 1e-9)
      : d_(d),
        a_sum_(Mat::Zero(d, d)),
        b_sum_(Vec::Zero(d)),
        span_(d, 0),
        inv_(refactor_every),
        rank_tol_(rank_tol) {
    if (d < 1) throw ContractViolation("OlsState: dimension must be >= 1");
  }

  void append(const Sample& s) {
    detail::check_sample(s, d_, "ols_append");
    a_sum_.noalias() += s.x * s.x.transpose();
    b_sum_.noalias() += s.y * s.x;
    ++n_;
    if (inv_.ready()) {
      inv_.update(s.x, [this] { return a_sum_; });
      return;
    }
    grow_span(s.x);
    if (span_.cols() == d_) {
      try {
        inv_.reset(inverse_spd(a_sum_));
      } catch (const SingularMatrix&) {
        // Numerically spanning but too ill-conditioned to factor; retry later.
      }
    }
  }

  bool invertible() const { return inv_.ready(); }

  Vec solution() const {
    if (!inv_.ready()) {
      throw NotReady("ols_solution: A_sum is not invertible yet (" + std::to_string(n_) + " samples, rank " +
                     std::to_string(span_.cols()) + " of " + std::to_string(d_) + ")");
    }
    return inv_.get() * b_sum_;
  }

  // x^T A_n^{-1} x with A_n the unnormalised sum.
  double confidence(const Vec& x) const {
    if (!inv_.ready()) throw NotReady("exact_confidence: A_sum is not invertible yet");
    if (x.size() != d_) throw ContractViolation("exact_confidence: dimension mismatch");
    return std::max(0.0, x.dot(inv_.get() * x));
  }

  Index dim() const { return d_; }
  std::size_t count() const { return n_; }
  Index rank() const { return span_.cols(); }
  const Mat& a_sum() const { return a_sum_; }
  const Vec& b_sum() const { return b_sum_; }
  const Mat& inverse() const {
    if (!inv_.ready()) throw NotReady("OlsState: inverse not available");
    return inv_.get();
  }
  double last_refactor_drift() const { return inv_.last_refactor_drift(); }
  std::size_t refactor_count() const { return inv_.refactor_count(); }

 private:
  void grow_span(const Vec& x) {
    const double xn = x.norm();
    if (xn == 0.0) return;
    Vec r = x;
    for (int pass = 0; pass < 2; ++pass) r -= span_ * (span_.transpose() * r);
    const double rn = r.norm();
    if (rn > rank_tol_ * xn) {
      span_.conservativeResize(Eigen::NoChange, span_.cols() + 1);
      span_.col(span_.cols() - 1) = r / rn;
    }
  }

  Index d_;
  std::size_t n_ = 0;
  Mat a_sum_;
  Vec b_sum_;
  Mat span_;
  detail::IncrementalInverse inv_;
  double rank_tol_;
};

// Factored regularised system (A_sum + n lambda_n I) at one sample count.
// Borrowing the maintained inverse when there is one; otherwise owns a
// Cholesky factor. Reuse it for many confidence queries within a round.
class RlsSystem {
 public:
  explicit RlsSystem(const Mat* inv) : inv_(inv) {}
  explicit RlsSystem(const Mat& regularised) : llt_(regularised) {
    if (llt_->info() != Eigen::Success) {
      throw SingularMatrix("rls: regularised system is not positive definite");
    }
  }

  Vec solve(const Vec& b) const { return inv_ ? Vec(*inv_ * b) : Vec(llt_->solve(b)); }

  double confidence(const Vec& x) const { return std::max(0.0, x.dot(solve(x))); }

 private:
  const Mat* inv_ = nullptr;
  std::optional<Eigen::LLT<Mat>> llt_;
};

// Adaptively regularised least squares: the target solves
// (A_bar_n + lambda_n I) theta = b_bar_n, i.e. (A_sum + n lambda_n I) theta = b_sum.
class RlsState {
 public:
  RlsState(Index d, RegSchedule reg, std::size_t refactor_every = kDefaultRefactorEvery)
      : d_(d), reg_(reg), a_sum_(Mat::Zero(d, d)), b_sum_(Vec::Zero(d)), inv_(refactor_every) {
    if (d < 1) throw ContractViolation("RlsState: dimension must be >= 1");
    reg_.validate();
    if (reg_.scaled_is_constant() && reg_.scaled_constant() > 0.0) {
      inv_.reset(Mat::Identity(d, d) / reg_.scaled_constant());
    }
  }

  void append(const Sample& s) {
    detail::check_sample(s, d_, "rls_append");
    a_sum_.noalias() += s.x * s.x.transpose();
    b_sum_.noalias() += s.y * s.x;
    ++n_;
    if (inv_.ready()) {
      const double shift = reg_.scaled_constant();
      inv_.update(s.x, [this, shift] { return Mat(a_sum_ + shift * Mat::Identity(d_, d_)); });
    }
  }

  double lambda() const { return reg_(n_); }

  RlsSystem system() const {
    if (n_ == 0) throw NotReady("rls: no samples yet");
    if (inv_.ready()) return RlsSystem(&inv_.get());
    return RlsSystem(regularised_sum());
  }

  Vec solution() const { return system().solve(b_sum_); }

  // x^T (A_sum + n lambda_n I)^{-1} x.
  double confidence(const Vec& x) const {
    if (x.size() != d_) throw ContractViolation("exact_confidence: dimension mismatch");
    return system().confidence(x);
  }

  Mat regularised_sum() const {
    return a_sum_ + static_cast<double>(n_) * lambda() * Mat::Identity(d_, d_);
  }

  Index dim() const { return d_; }
  std::size_t count() const { return n_; }
  const RegSchedule& schedule() const { return reg_; }
  const Mat& a_sum() const { return a_sum_; }
  const Vec& b_sum() const { return b_sum_; }
  bool maintains_inverse() const { return inv_.ready(); }
  double last_refactor_drift() const { return inv_.last_refactor_drift(); }

 private:
  Index d_;
  RegSchedule reg_;
  std::size_t n_ = 0;
  Mat a_sum_;
  Vec b_sum_;
  detail::IncrementalInverse inv_;
};

inline void ols_append(OlsState& st, const Sample& s) { st.append(s); }
inline Vec ols_solution(const OlsState& st) { return st.solution(); }
inline Vec rls_solution(const RlsState& st) { return st.solution(); }
inline double exact_confidence(const OlsState& st, const Vec& x) { return st.confidence(x); }
inline double exact_confidence(const RlsState& st, const Vec& x) { return st.confidence(x); }

// Debug snapshot (n, A_sum, b_sum). Not a stable format.
template <class State>
nlohmann::json snapshot_json(const State& st) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < st.a_sum().rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < st.a_sum().cols(); ++j) row.push_back(st.a_sum()(i, j));
    a.push_back(std::move(row));
  }
  nlohmann::json b = nlohmann::json::array();
  for (Index i = 0; i < st.b_sum().size(); ++i) b.push_back(st.b_sum()(i));
  return nlohmann::json{{"n", st.count()}, {"d", st.dim()}, {"A_sum", std::move(a)}, {"b_sum", std::move(b)}};
}

}  // namespace driftls
