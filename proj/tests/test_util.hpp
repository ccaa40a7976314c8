#pragma once

#include <Eigen/Dense>

#include "driftls/linalg.hpp"
#include "driftls/rng.hpp"

namespace testutil {

using driftls::Index;
using driftls::Mat;
using driftls::Rng;
using driftls::Vec;

inline Vec gaussian_vec(Index d, Rng& rng) {
  Vec v(d);
  for (Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

inline Mat gaussian_mat(Index r, Index c, Rng& rng) {
  Mat m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

// B^T B / d + floor * I.
inline Mat random_spd(Index d, Rng& rng, double floor = 0.1) {
  const Mat b = gaussian_mat(d, d, rng);
  Mat a = b.transpose() * b / static_cast<double>(d);
  a += floor * Mat::Identity(d, d);
  return 0.5 * (a + a.transpose());
}

inline Mat random_rotation(Index d, Rng& rng) {
  Eigen::HouseholderQR<Mat> qr(gaussian_mat(d, d, rng));
  return qr.householderQ() * Mat::Identity(d, d);
}

inline double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace testutil
