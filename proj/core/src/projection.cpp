#include "ptrn/projection.hpp"

#include <fstream>

#include "ptrn/errors.hpp"

namespace ptrn {

namespace {

// Top-k principal directions of centered data; throws below min_rank.
Mat pca_once(const Mat& centered, int k, int min_rank) {
  const Mat cov = centered.transpose() * centered / std::max<double>(1.0, centered.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
  if (solver.info() != Eigen::Success) throw StageError("projection", "eigendecomposition failed");
  const Vec evals = solver.eigenvalues();  // ascending
  const double tol = std::max(evals(evals.size() - 1), 0.0) * 1e-9 + 1e-300;
  int rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    if (evals(i) > tol) ++rank;
  if (rank < min_rank)
    throw StageError("projection", "degenerate covariance (rank " + std::to_string(rank) + " < " +
                                       std::to_string(min_rank) + ")");
  Mat dirs(cov.rows(), k);
  for (int j = 0; j < k; ++j) dirs.col(j) = solver.eigenvectors().col(evals.size() - 1 - j);
  return dirs;
}

}  // namespace

Mat pca_project(const Mat& points, int out_dims, int intermediate) {
  if (points.rows() < 3) throw ValidationError("projection: needs >= 3 samples");
  if (out_dims < 1) throw ValidationError("projection: out_dims >= 1 required");

  Mat centered = points.rowwise() - points.colwise().mean();
  const int stage1 =
      std::min<int>({intermediate, static_cast<int>(points.cols()), static_cast<int>(points.rows()) - 1});
  if (stage1 < out_dims) throw ValidationError("projection: too few samples or dimensions");

  if (stage1 < static_cast<int>(points.cols())) {
    const Mat dirs = pca_once(centered, stage1, out_dims);
    centered = centered * dirs;
    centered = centered.rowwise() - centered.colwise().mean().eval();
  }
  const Mat dirs = pca_once(centered, out_dims, out_dims);
  return centered * dirs;
}

std::vector<ProjectionPoint> projection_export(const EncoderModel& model,
                                               const std::vector<TokenSeq>& samples,
                                               const std::vector<int>& cls,
                                               const std::vector<int>& trigger_ids) {
  if (samples.size() != cls.size() || samples.size() != trigger_ids.size())
    throw ValidationError("projection: tag arrays must match sample count");
  const Mat reps = encode_batch(model, samples);
  const Mat xy = pca_project(reps, 2);
  std::vector<ProjectionPoint> points(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    points[i].x = xy(static_cast<Eigen::Index>(i), 0);
    points[i].y = xy(static_cast<Eigen::Index>(i), 1);
    points[i].cls = cls[i];
    points[i].trigger_id = trigger_ids[i];
  }
  return points;
}

void write_projection_csv(const std::string& path, const std::vector<ProjectionPoint>& points) {
  std::ofstream out(path);
  if (!out) throw StageError("projection", "cannot write: " + path);
  out << "x,y,class,trigger_id\n";
  out.precision(10);
  for (const auto& p : points)
    out << p.x << "," << p.y << "," << p.cls << "," << p.trigger_id << "\n";
}

}  // namespace ptrn
