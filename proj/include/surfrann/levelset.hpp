#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "surfrann/common.hpp"

namespace surfrann {

// Implicit surface {phi = 0}. Gradient is required; the Hessian callback is
// optional and falls back to central differences of the gradient (flagged,
// since it caps curvature accuracy).
struct LevelSetSurface {
  std::string name;
  std::function<double(const Vec3&)> phi;
  std::function<Vec3(const Vec3&)> grad;
  std::function<Mat3(const Vec3&)> hess;
  Vec3 bbox_lo = Vec3::Constant(-1.0);
  Vec3 bbox_hi = Vec3::Constant(1.0);
  double grad_floor = 1e-8;

  bool has_hessian() const { return static_cast<bool>(hess); }
  double bbox_diagonal() const { return (bbox_hi - bbox_lo).norm(); }
};

// Normal, tangential projector and mean curvature at a surface point,
// with the convention H = 0.5 div(n) (unit sphere, outward gradient: H = +1).
struct SurfaceFrame {
  Vec3 n = Vec3::Zero();
  Mat3 P = Mat3::Identity();
  double H = 0.0;
  bool curvature_by_differences = false;
};

SurfaceFrame frame_at(const LevelSetSurface& surface, const Vec3& x);

// Embedding identities: grad_G u = P grad u,
// lap_G u = lap u - 2 H (grad u . n) - n^T hess(u) n.
Vec3 surface_gradient(const SurfaceFrame& frame, const Vec3& ambient_grad);
double surface_laplacian(const SurfaceFrame& frame, const AmbientJet& jet);

struct ProjectionReport {
  double ep_before = 0.0; // RMS |phi| of the input set
  double ep_after = 0.0;  // RMS |phi| of the output set
  int max_iterations_used = 0;
  std::vector<int> non_converged; // row indices
  VectorXd abs_phi_before;
  VectorXd abs_phi_after;
};

// Newton steps along the gradient: x <- x - phi(x) grad/|grad|^2 until
// |phi| <= tol or max_iter. Non-convergent points are listed, not dropped.
MatrixXd project_to_surface(const LevelSetSurface& surface, const MatrixXd& points,
                            double tol = 1e-13, int max_iter = 50,
                            ProjectionReport* report = nullptr);

double rms_levelset_residual(const LevelSetSurface& surface, const MatrixXd& points);

struct LevelSetSampleOptions {
  double band = -1.0;   // acceptance band on |phi|; default 1e-2 * bbox diagonal
  double tol = 1e-13;   // projection tolerance; <= 0 skips projection
  int max_iter = 50;
  std::uint64_t max_draws_factor = 200000; // abort threshold for acceptance rate
};

// Rejection sampling in the bounding box followed by projection onto the
// zero level set. Approximately uniform only; deterministic per seed.
MatrixXd sample_levelset(const LevelSetSurface& surface, int count, std::uint64_t seed,
                         const LevelSetSampleOptions& options = {});

} // namespace surfrann
