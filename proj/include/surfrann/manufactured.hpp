#pragma once

#include <cmath>
#include <functional>
#include <memory>

#include "surfrann/evolving.hpp"
#include "surfrann/levelset.hpp"

namespace surfrann {

// Manufactured solution family u = sin(x + shift) exp(cos(y - z)) with a
// closed-form ambient jet; shift = sin(t) in the time-dependent runs.
inline AmbientJet trig_exp_jet(const Vec3& p, double shift = 0.0) {
  double s = p[0] + shift;
  double d = p[1] - p[2];
  double e = std::exp(std::cos(d));
  double sn = std::sin(s), cs = std::cos(s);
  double sd = std::sin(d), cd = std::cos(d);

  AmbientJet jet;
  jet.value = sn * e;
  jet.grad = Vec3(cs * e, -sd * sn * e, sd * sn * e);
  double yy = sn * e * (sd * sd - cd);
  jet.hess(0, 0) = -sn * e;
  jet.hess(0, 1) = jet.hess(1, 0) = -cs * sd * e;
  jet.hess(0, 2) = jet.hess(2, 0) = cs * sd * e;
  jet.hess(1, 1) = yy;
  jet.hess(1, 2) = jet.hess(2, 1) = -yy;
  jet.hess(2, 2) = yy;
  return jet;
}

inline double trig_exp_value(const Vec3& p, double shift = 0.0) {
  return std::sin(p[0] + shift) * std::exp(std::cos(p[1] - p[2]));
}

// d/dt of sin(x + sin t) exp(cos(y - z)) at fixed x.
inline double trig_exp_dt(double t, const Vec3& p) {
  return std::cos(t) * std::cos(p[0] + std::sin(t)) * std::exp(std::cos(p[1] - p[2]));
}

// f = -lap_G u* for the stationary Laplace-Beltrami benchmarks.
inline std::function<double(const Vec3&)> laplace_beltrami_source(const LevelSetSurface& surface) {
  LevelSetSurface copy = surface;
  return [copy](const Vec3& x) {
    SurfaceFrame frame = frame_at(copy, x);
    return -surface_laplacian(frame, trig_exp_jet(x));
  };
}

// f = d_t u* - alpha lap_G u* on a static surface.
inline std::function<double(double, const Vec3&)> heat_source(const LevelSetSurface& surface,
                                                              double alpha = 1.0) {
  LevelSetSurface copy = surface;
  return [copy, alpha](double t, const Vec3& x) {
    SurfaceFrame frame = frame_at(copy, x);
    double shift = std::sin(t);
    return trig_exp_dt(t, x) - alpha * surface_laplacian(frame, trig_exp_jet(x, shift));
  };
}

// f = d_t u~ + v . grad u~ + u (div_G v) - lap_G u on the evolving surface,
// with the exact geometry supplied by a time-indexed level set.
inline std::function<double(double, const Vec3&)> evolving_source(
    const std::function<LevelSetSurface(double)>& surface_at, const VelocityField& velocity) {
  auto cache = std::make_shared<std::pair<double, LevelSetSurface>>(
      std::numeric_limits<double>::quiet_NaN(), LevelSetSurface{});
  auto vel = velocity;
  auto factory = surface_at;
  return [cache, vel, factory](double t, const Vec3& x) {
    if (!(cache->first == t)) *cache = {t, factory(t)};
    SurfaceFrame frame = frame_at(cache->second, x);
    AmbientJet jet = trig_exp_jet(x, std::sin(t));
    Mat3 dv = vel.jacobian(t, x);
    double div_g = dv.trace() - frame.n.dot(dv * frame.n);
    return trig_exp_dt(t, x) + vel.value(t, x).dot(jet.grad) + jet.value * div_g -
           surface_laplacian(frame, jet);
  };
}

} // namespace surfrann
