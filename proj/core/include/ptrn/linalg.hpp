#pragma once

#include <Eigen/Dense>
#include <algorithm>

namespace ptrn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Cosine similarity, clamped to [-1, 1]. Zero vectors compare as 0.
inline double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline Vec l2_normalized(const Vec& v) {
  const double n = v.norm();
  if (n < 1e-12) return Vec::Zero(v.size());
  return v / n;
}

// Row-wise L2 normalization; zero rows stay zero.
inline Mat l2_normalized_rows(const Mat& m) {
  Mat out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n >= 1e-12) out.row(i) /= n;
  }
  return out;
}

}  // namespace ptrn
