#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "surfrann/common.hpp"

namespace surfrann {

// Static k-d tree over 3-D points (median split).
class KdTree {
public:
  explicit KdTree(const MatrixXd& points);
  // Indices of the k nearest neighbors of `query` (including an exact match).
  std::vector<int> nearest(const Vec3& query, int k) const;

private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int>& idx, int lo, int hi, int depth);
  const MatrixXd points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

enum class OrientationPolicy { OutwardFromCentroid, MstPropagation };

struct FittedFrame {
  Vec3 n = Vec3::Zero();
  double H = 0.0;
  double fit_residual = 0.0; // RMS height-field residual of the local fit
  bool ok = false;           // false: rank-deficient neighborhood
};

struct PointCloudSurface {
  MatrixXd points; // N x 3, deduplicated
  int duplicates_removed = 0;
  std::vector<FittedFrame> frames; // filled by fit_frames

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
};

// Per-point PCA plane + least-squares quadratic height field over the k
// nearest neighbors; normal and mean curvature from the graph's fundamental
// forms, sign convention H = 0.5 div(n) with the oriented normal.
std::vector<FittedFrame> fit_frames(PointCloudSurface& cloud, int k,
                                    OrientationPolicy policy = OrientationPolicy::OutwardFromCentroid);

PointCloudSurface load_cloud(const std::string& path);
PointCloudSurface make_cloud(const MatrixXd& points);

void save_frames_csv(const PointCloudSurface& cloud, std::ostream& out);

} // namespace surfrann
