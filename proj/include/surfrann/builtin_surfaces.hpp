#pragma once

#include <optional>

#include "surfrann/atlas.hpp"
#include "surfrann/levelset.hpp"

namespace surfrann {

// --- parametric built-ins -------------------------------------------------

// Torus of ring radius R and tube radius r:
//   X = ((r cos xi1 + R) cos xi2, (r cos xi1 + R) sin xi2, r sin xi1),
// both coordinates periodic on [0, 2 pi].
Chart make_torus_chart(double ring_radius = 1.0, double tube_radius = 0.25);

// Single periodic chart plus the two seam interfaces (value and derivative
// compatibility across xi1 = 0|2pi and xi2 = 0|2pi).
Atlas make_torus_atlas(double ring_radius = 1.0, double tube_radius = 0.25);

// The same torus split along xi1 into [0, pi] and [pi, 2 pi]; exercises
// genuinely multi-chart interfaces.
Atlas make_torus_atlas_two_charts(double ring_radius = 1.0, double tube_radius = 0.25);

// X = (cos xi1, sin xi1, xi2) on [0, 2 pi] x [z_lo, z_hi]; flat metric.
Chart make_cylinder_chart(double z_lo = -1.0, double z_hi = 1.0);

// Unit-sphere band in spherical coordinates, theta (polar) in [theta_lo, theta_hi].
Chart make_spherical_cap_chart(double theta_lo, double theta_hi);

// Axis-scaled sphere chart: X = diag(a,b,c) * (sin t cos p, sin t sin p, cos t),
// theta in (0, pi), phi periodic. rotated = true uses poles on the x axis.
Chart make_ellipsoid_chart(const Vec3& semi_axes, bool rotated = false,
                           double theta_lo = 0.0, double theta_hi = M_PI);

// Open cup: flattened cap bottom (clamped just short of its pole) joined to a
// unit-cylinder side wall; one interface along the junction circle z = -1.
Atlas make_cup_atlas();

std::optional<Atlas> atlas_registry(const std::string& name);

// --- level-set built-ins ---------------------------------------------------

LevelSetSurface make_sphere_levelset(double radius = 1.0);
LevelSetSurface make_torus_levelset(double ring_radius = 1.0, double tube_radius = 0.25);
LevelSetSurface make_plane_levelset(); // phi = z, for flat-surface checks

// phi = (4x^2-1)^2 + (4y^2-1)^2 + (4z^2-1)^2 + 16(x^2+y^2-1)^2
//     + 16(x^2+z^2-1)^2 + 16(y^2+z^2-1)^2 - 16
LevelSetSurface make_cheese_levelset();

// phi = (x - t z)^2 + y^2 + z^2 - 1 (unit sphere sheared along x).
LevelSetSurface make_sheared_sphere_levelset(double t);

// phi = (x / (1.5 a))^2 + y^2 + (z / 0.5)^2 - 1 with a = sqrt(1 + 0.95 sin(pi t)).
LevelSetSurface make_oscillating_ellipsoid_levelset(double t);
double oscillating_ellipsoid_a(double t);
double oscillating_ellipsoid_a_dt(double t);

std::optional<LevelSetSurface> levelset_registry(const std::string& name);

} // namespace surfrann
