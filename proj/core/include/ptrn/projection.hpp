#pragma once

#include <string>
#include <vector>

#include "ptrn/encoder.hpp"

namespace ptrn {

// Two-stage linear reduction: center, PCA to min(intermediate, d, n-1)
// components, then PCA again to out_dims. Throws StageError when the
// covariance rank is below out_dims.
Mat pca_project(const Mat& points, int out_dims = 2, int intermediate = 20);

struct ProjectionPoint {
  double x = 0.0;
  double y = 0.0;
  int cls = 0;         // 0 = clean, 1 = poisoned
  int trigger_id = -1; // -1 for clean points
};

// Encodes tagged samples and projects the representations to 2-D for
// external plotting.
std::vector<ProjectionPoint> projection_export(const EncoderModel& model,
                                               const std::vector<TokenSeq>& samples,
                                               const std::vector<int>& cls,
                                               const std::vector<int>& trigger_ids);

// CSV columns: x, y, class, trigger_id.
void write_projection_csv(const std::string& path, const std::vector<ProjectionPoint>& points);

}  // namespace ptrn
