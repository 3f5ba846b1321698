#include "surfrann/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <queue>
#include <unordered_set>

#include "surfrann/io.hpp"

namespace surfrann {

KdTree::KdTree(const MatrixXd& points) : points_(points) {
  std::vector<int> idx(points.rows());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points.rows());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  int axis = depth % 3;
  int mid = (lo + hi) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) { return points_(a, axis) < points_(b, axis); });
  Node node;
  node.point = idx[mid];
  node.axis = axis;
  int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  int left = build(idx, lo, mid, depth + 1);
  int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::vector<int> KdTree::nearest(const Vec3& query, int k) const {
  using Entry = std::pair<double, int>; // (squared distance, point index)
  std::priority_queue<Entry> heap;      // max-heap keeps the k best

  auto visit = [&](auto&& self, int node_id) -> void {
    if (node_id < 0) return;
    const Node& node = nodes_[node_id];
    Vec3 p = points_.row(node.point).transpose();
    double d2 = (p - query).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace(d2, node.point);
    } else if (d2 < heap.top().first) {
      heap.pop();
      heap.emplace(d2, node.point);
    }
    double delta = query[node.axis] - p[node.axis];
    int near = delta < 0 ? node.left : node.right;
    int far = delta < 0 ? node.right : node.left;
    self(self, near);
    if (static_cast<int>(heap.size()) < k || delta * delta < heap.top().first)
      self(self, far);
  };
  visit(visit, root_);

  std::vector<int> out(heap.size());
  for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

PointCloudSurface make_cloud(const MatrixXd& points) {
  if (points.cols() != 3) throw ConfigError("point cloud: expected N x 3 coordinates");
  PointCloudSurface cloud;
  std::unordered_set<std::string> seen;
  std::vector<int> keep;
  keep.reserve(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    // exact-duplicate detection on the bit patterns
    Vec3 row = points.row(i).transpose();
    std::string key(reinterpret_cast<const char*>(row.data()), 3 * sizeof(double));
    if (seen.insert(key).second) keep.push_back(static_cast<int>(i));
  }
  cloud.duplicates_removed = static_cast<int>(points.rows()) - static_cast<int>(keep.size());
  cloud.points.resize(keep.size(), 3);
  for (std::size_t i = 0; i < keep.size(); ++i) cloud.points.row(i) = points.row(keep[i]);
  return cloud;
}

PointCloudSurface load_cloud(const std::string& path) {
  return make_cloud(read_points_auto(path));
}

namespace {

struct LocalFit {
  Vec3 normal;    // graph "up" direction used for the height field
  double H;       // mean curvature w.r.t. that direction
  double residual;
  bool ok;
};

LocalFit fit_point(const MatrixXd& points, const std::vector<int>& neighbors, int center) {
  LocalFit fit{Vec3::UnitZ(), 0.0, 0.0, false};
  const int k = static_cast<int>(neighbors.size());
  Vec3 c = points.row(center).transpose();

  // PCA plane of the neighborhood
  Vec3 mean = Vec3::Zero();
  for (int j : neighbors) mean += points.row(j).transpose();
  mean /= k;
  Mat3 cov = Mat3::Zero();
  for (int j : neighbors) {
    Vec3 d = points.row(j).transpose() - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Vec3 up = eig.eigenvectors().col(0); // least-variance direction
  Vec3 t1 = eig.eigenvectors().col(2);
  Vec3 t2 = eig.eigenvectors().col(1);

  // h(s, t) = a s^2 + b s t + c t^2 + d s + e t + f in the tangent frame at the point
  MatrixXd A(k, 6);
  VectorXd h(k);
  for (int row = 0; row < k; ++row) {
    Vec3 d = points.row(neighbors[row]).transpose() - c;
    double s = d.dot(t1), t = d.dot(t2);
    A.row(row) << s * s, s * t, t * t, s, t, 1.0;
    h[row] = d.dot(up);
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
  if (qr.rank() < 6) return fit; // collinear / degenerate neighborhood
  VectorXd coef = qr.solve(h);
  fit.residual = std::sqrt((A * coef - h).squaredNorm() / k);

  double hs = coef[3], ht = coef[4];
  double hss = 2.0 * coef[0], hst = coef[1], htt = 2.0 * coef[2];
  double w2 = 1.0 + hs * hs + ht * ht;
  double w = std::sqrt(w2);

  // Upward unit normal of the graph and the matching divergence-convention
  // curvature: 2H = div(n) = -((1+ht^2)hss - 2 hs ht hst + (1+hs^2)htt) / w^3.
  Vec3 n = (-hs * t1 - ht * t2 + up) / w;
  fit.normal = n;
  fit.H = -((1.0 + ht * ht) * hss - 2.0 * hs * ht * hst + (1.0 + hs * hs) * htt) /
          (2.0 * w2 * w);
  fit.ok = true;
  return fit;
}

void orient_outward_from_centroid(const MatrixXd& points, std::vector<FittedFrame>& frames) {
  Vec3 centroid = points.colwise().mean().transpose();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!frames[i].ok) continue;
    Vec3 radial = points.row(i).transpose() - centroid;
    if (frames[i].n.dot(radial) < 0) {
      frames[i].n = -frames[i].n;
      frames[i].H = -frames[i].H;
    }
  }
}

void orient_by_propagation(const MatrixXd& points, const KdTree& tree, int k,
                           std::vector<FittedFrame>& frames) {
  const int n = static_cast<int>(points.rows());
  // Seed: the point farthest from the centroid, oriented radially outward.
  Vec3 centroid = points.colwise().mean().transpose();
  int seed = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    double d = (points.row(i).transpose() - centroid).squaredNorm();
    if (d > best && frames[i].ok) {
      best = d;
      seed = i;
    }
  }
  if (frames[seed].n.dot(points.row(seed).transpose() - centroid) < 0) {
    frames[seed].n = -frames[seed].n;
    frames[seed].H = -frames[seed].H;
  }

  // BFS through the kNN graph, flipping every newly reached normal to agree
  // with its predecessor.
  std::vector<char> visited(n, 0);
  std::queue<int> queue;
  queue.push(seed);
  visited[seed] = 1;
  while (!queue.empty()) {
    int i = queue.front();
    queue.pop();
    for (int j : tree.nearest(points.row(i).transpose(), k)) {
      if (visited[j] || !frames[j].ok) continue;
      visited[j] = 1;
      if (frames[j].n.dot(frames[i].n) < 0) {
        frames[j].n = -frames[j].n;
        frames[j].H = -frames[j].H;
      }
      queue.push(j);
    }
  }
}

} // namespace

std::vector<FittedFrame> fit_frames(PointCloudSurface& cloud, int k, OrientationPolicy policy) {
  const int n = static_cast<int>(cloud.points.rows());
  if (k < 6) throw ConfigError("fit_frames: quadratic fit needs k >= 6 neighbors");
  if (n < k)
    throw ConfigError("fit_frames: cloud has " + std::to_string(n) +
                      " points, fewer than k = " + std::to_string(k));

  KdTree tree(cloud.points);
  std::vector<FittedFrame> frames(n);
  for (int i = 0; i < n; ++i) {
    LocalFit fit = fit_point(cloud.points, tree.nearest(cloud.points.row(i).transpose(), k), i);
    frames[i].ok = fit.ok;
    frames[i].n = fit.normal;
    frames[i].H = fit.H;
    frames[i].fit_residual = fit.residual;
  }

  if (policy == OrientationPolicy::OutwardFromCentroid)
    orient_outward_from_centroid(cloud.points, frames);
  else
    orient_by_propagation(cloud.points, tree, k, frames);

  cloud.frames = frames;
  return frames;
}

void save_frames_csv(const PointCloudSurface& cloud, std::ostream& out) {
  out << "x,y,z,nx,ny,nz,H,residual\n";
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const FittedFrame& f = cloud.frames.at(i);
    out << cloud.points(i, 0) << ',' << cloud.points(i, 1) << ',' << cloud.points(i, 2)
        << ',' << f.n[0] << ',' << f.n[1] << ',' << f.n[2] << ',' << f.H << ','
        << f.fit_residual << '\n';
  }
}

} // namespace surfrann
