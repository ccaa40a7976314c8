#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "driftls/errors.hpp"

namespace driftls {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Denominators at or below this trip NumericalDegeneracy in rank-1 updates.
inline constexpr double kShermanMorrisonFloor = 1e-12;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline bool is_symmetric(const Mat& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// In-place Sherman-Morrison: inv <- (A + x x^T)^{-1} given inv = A^{-1}.
inline void sm_update_inplace(Mat& inv, const Vec& x) {
  if (inv.rows() != x.size() || inv.cols() != x.size()) {
    throw ContractViolation("sm_update: dimension mismatch");
  }
  const Vec u = inv * x;
  const double denom = 1.0 + x.dot(u);
  if (!(denom > kShermanMorrisonFloor)) {
    throw NumericalDegeneracy("sm_update: denominator 1 + x'Bx = " + std::to_string(denom));
  }
  inv.noalias() -= (u / denom) * u.transpose();
}

inline Mat sm_update(Mat inv, const Vec& x) {
  sm_update_inplace(inv, x);
  return inv;
}

// Cholesky solve. Throws SingularMatrix when A is not numerically SPD.
inline Vec solve_spd(const Mat& a, const Vec& b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw ContractViolation("solve_spd: dimension mismatch");
  }
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("solve_spd: Cholesky factorization failed");
  }
  Vec x = llt.solve(b);
  if (!x.allFinite()) throw SingularMatrix("solve_spd: non-finite solution");
  return x;
}

inline Mat inverse_spd(const Mat& a) {
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("inverse_spd: Cholesky factorization failed");
  }
  Mat inv = llt.solve(Mat::Identity(a.rows(), a.cols()));
  return (inv + inv.transpose()) * 0.5;
}

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form.
// Returns (diagonal, off-diagonal).
inline std::pair<Vec, Vec> tridiagonalize(Mat a) {
  const Index n = a.rows();
  for (Index k = 0; k + 2 < n; ++k) {
    const Index m = n - k - 1;
    auto col = a.col(k).tail(m);
    const double norm = col.norm();
    if (norm == 0.0) continue;
    const double alpha = col(0) > 0 ? -norm : norm;
    Vec v = col;
    v(0) -= alpha;
    const double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    auto sub = a.bottomRightCorner(m, m);
    const Vec p = sub * v;
    const Vec w = p - v.dot(p) * v;
    sub.noalias() -= 2.0 * (v * w.transpose() + w * v.transpose());
    col.setZero();
    col(0) = alpha;
    a.row(k).tail(m) = col.transpose();
  }
  Vec diag = a.diagonal();
  Vec off = n > 1 ? Vec(a.diagonal(-1)) : Vec();
  return {diag, off};
}

// Number of eigenvalues of the tridiagonal matrix strictly below x (Sturm count).
inline Index sturm_count(const Vec& diag, const Vec& off, double x) {
  Index count = 0;
  double q = 1.0;
  const double tiny = std::numeric_limits<double>::min();
  for (Index i = 0; i < diag.size(); ++i) {
    const double b2 = i > 0 ? off(i - 1) * off(i - 1) : 0.0;
    q = diag(i) - x - (i > 0 ? b2 / q : 0.0);
    if (q == 0.0) q = -tiny;
    if (q < 0.0) ++count;
  }
  return count;
}

}  // namespace detail

// Smallest eigenvalue of a symmetric matrix by tridiagonalization and
// Sturm-sequence bisection.
inline double min_eigenvalue(const Mat& a) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw ContractViolation("min_eigenvalue: matrix must be square and non-empty");
  }
  if (!a.allFinite()) throw ContractViolation("min_eigenvalue: non-finite entries");
  if (!is_symmetric(a)) throw ContractViolation("min_eigenvalue: matrix is not symmetric");
  const Mat sym = (a + a.transpose()) * 0.5;
  if (sym.rows() == 1) return sym(0, 0);

  const auto [diag, off] = detail::tridiagonalize(sym);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < diag.size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off(i - 1));
    if (i + 1 < diag.size()) r += std::abs(off(i));
    lo = std::min(lo, diag(i) - r);
    hi = std::max(hi, diag(i) + r);
  }
  const double scale = std::max(std::abs(lo), std::abs(hi));
  const double eps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < 200 && hi - lo > 2.0 * eps * scale + std::numeric_limits<double>::min(); ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (detail::sturm_count(diag, off, mid) >= 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo + 0.5 * (hi - lo);
}

// A matrix together with its certified smallest eigenvalue.
struct SpdCert {
  Mat matrix;
  double min_eig = 0.0;
};

inline SpdCert certify_spd(Mat a) {
  const double lambda = min_eigenvalue(a);
  if (!(lambda > 0.0)) {
    throw SingularMatrix("certify_spd: smallest eigenvalue " + std::to_string(lambda) + " is not positive");
  }
  return SpdCert{std::move(a), lambda};
}

}  // namespace driftls
