#include "surfrann/levelset.hpp"

#include <cmath>
#include <sstream>

#include "surfrann/rng.hpp"

namespace surfrann {

namespace {

Mat3 hessian_by_differences(const LevelSetSurface& s, const Vec3& x) {
  double h = 1e-5 * s.bbox_diagonal();
  Mat3 out;
  for (int k = 0; k < 3; ++k) {
    Vec3 p = x, m = x;
    p[k] += h;
    m[k] -= h;
    out.col(k) = (s.grad(p) - s.grad(m)) / (2.0 * h);
  }
  return 0.5 * (out + out.transpose());
}

} // namespace

SurfaceFrame frame_at(const LevelSetSurface& surface, const Vec3& x) {
  Vec3 g = surface.grad(x);
  double len = g.norm();
  if (!(len >= surface.grad_floor)) {
    std::ostringstream os;
    os << "level set '" << surface.name << "': |grad phi| = " << len << " below floor at ("
       << x[0] << ", " << x[1] << ", " << x[2] << ")";
    throw NumericalError(os.str());
  }
  SurfaceFrame f;
  f.n = g / len;
  f.P = Mat3::Identity() - f.n * f.n.transpose();
  Mat3 H;
  if (surface.has_hessian()) {
    H = surface.hess(x);
  } else {
    H = hessian_by_differences(surface, x);
    f.curvature_by_differences = true;
  }
  // div(grad phi / |grad phi|) = (lap phi - n^T hess(phi) n) / |grad phi|
  f.H = 0.5 * (H.trace() - f.n.dot(H * f.n)) / len;
  return f;
}

Vec3 surface_gradient(const SurfaceFrame& frame, const Vec3& ambient_grad) {
  return frame.P * ambient_grad;
}

double surface_laplacian(const SurfaceFrame& frame, const AmbientJet& jet) {
  return jet.hess.trace() - 2.0 * frame.H * jet.grad.dot(frame.n) -
         frame.n.dot(jet.hess * frame.n);
}

MatrixXd project_to_surface(const LevelSetSurface& surface, const MatrixXd& points,
                            double tol, int max_iter, ProjectionReport* report) {
  if (points.cols() != 3) throw ConfigError("project_to_surface: points must be N x 3");
  MatrixXd out = points;
  ProjectionReport local;
  local.abs_phi_before.resize(points.rows());
  local.abs_phi_after.resize(points.rows());

  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Vec3 x = points.row(i).transpose();
    double value = surface.phi(x);
    local.abs_phi_before[i] = std::abs(value);
    int iter = 0;
    while (std::abs(value) > tol && iter < max_iter) {
      Vec3 g = surface.grad(x);
      double g2 = g.squaredNorm();
      if (!(g2 >= surface.grad_floor * surface.grad_floor)) break;
      x -= value / g2 * g;
      value = surface.phi(x);
      ++iter;
    }
    local.max_iterations_used = std::max(local.max_iterations_used, iter);
    if (std::abs(value) > tol) local.non_converged.push_back(static_cast<int>(i));
    local.abs_phi_after[i] = std::abs(value);
    out.row(i) = x.transpose();
  }
  local.ep_before = std::sqrt(local.abs_phi_before.squaredNorm() / points.rows());
  local.ep_after = std::sqrt(local.abs_phi_after.squaredNorm() / points.rows());
  if (report) *report = local;
  return out;
}

double rms_levelset_residual(const LevelSetSurface& surface, const MatrixXd& points) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double v = surface.phi(points.row(i).transpose());
    sum += v * v;
  }
  return std::sqrt(sum / points.rows());
}

MatrixXd sample_levelset(const LevelSetSurface& surface, int count, std::uint64_t seed,
                         const LevelSetSampleOptions& options) {
  if (count < 1) throw ConfigError("sample_levelset: count must be >= 1");
  double band = options.band > 0 ? options.band : 1e-2 * surface.bbox_diagonal();

  CounterRng rng(seed);
  MatrixXd raw(count, 3);
  std::uint64_t draws = 0;
  const std::uint64_t max_draws =
      options.max_draws_factor * static_cast<std::uint64_t>(count);
  int accepted = 0;
  while (accepted < count) {
    if (++draws > max_draws)
      throw NumericalError("sample_levelset: acceptance rate below 1/" +
                           std::to_string(options.max_draws_factor) +
                           "; bounding box or band is misconfigured for '" + surface.name + "'");
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = rng.uniform(surface.bbox_lo[k], surface.bbox_hi[k]);
    if (std::abs(surface.phi(x)) <= band) raw.row(accepted++) = x.transpose();
  }
  if (options.tol <= 0) return raw;
  return project_to_surface(surface, raw, options.tol, options.max_iter);
}

} // namespace surfrann
