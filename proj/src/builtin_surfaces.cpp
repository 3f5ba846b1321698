#include "surfrann/builtin_surfaces.hpp"

#include <cmath>

namespace surfrann {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

Interface identity_interface(int chart_a, int chart_b, const EdgeSegment& edge,
                             const Vec2& shift) {
  Interface e;
  e.chart_a = chart_a;
  e.chart_b = chart_b;
  e.edge_a = edge;
  e.map_ab = [shift](const Vec2& xi) -> Vec2 { return xi + shift; };
  e.map_ab_jacobian = [](const Vec2&) { return Mat2::Identity(); };
  return e;
}

} // namespace

Chart make_torus_chart(double ring_radius, double tube_radius) {
  const double R = ring_radius, r = tube_radius;
  Chart c;
  c.name = "torus";
  c.lo = Vec2(0.0, 0.0);
  c.hi = Vec2(kTwoPi, kTwoPi);
  c.periodic = {true, true};
  c.position = [R, r](const Vec2& xi) {
    double ring = r * std::cos(xi[0]) + R;
    return Vec3(ring * std::cos(xi[1]), ring * std::sin(xi[1]), r * std::sin(xi[0]));
  };
  c.tangents = [R, r](const Vec2& xi) {
    double c1 = std::cos(xi[0]), s1 = std::sin(xi[0]);
    double c2 = std::cos(xi[1]), s2 = std::sin(xi[1]);
    double ring = r * c1 + R;
    Mat32 t;
    t.col(0) = Vec3(-r * s1 * c2, -r * s1 * s2, r * c1);
    t.col(1) = Vec3(-ring * s2, ring * c2, 0.0);
    return t;
  };
  c.second = [R, r](const Vec2& xi) {
    double c1 = std::cos(xi[0]), s1 = std::sin(xi[0]);
    double c2 = std::cos(xi[1]), s2 = std::sin(xi[1]);
    double ring = r * c1 + R;
    std::array<Vec3, 3> d2;
    d2[0] = Vec3(-r * c1 * c2, -r * c1 * s2, -r * s1);
    d2[1] = Vec3(r * s1 * s2, -r * s1 * c2, 0.0);
    d2[2] = Vec3(-ring * c2, -ring * s2, 0.0);
    return d2;
  };
  return c;
}

Atlas make_torus_atlas(double ring_radius, double tube_radius) {
  Atlas atlas;
  atlas.charts.push_back(make_torus_chart(ring_radius, tube_radius));
  atlas.interfaces.push_back(identity_interface(
      0, 0, EdgeSegment{0, kTwoPi, 0.0, kTwoPi, +1}, Vec2(-kTwoPi, 0.0)));
  atlas.interfaces.push_back(identity_interface(
      0, 0, EdgeSegment{1, kTwoPi, 0.0, kTwoPi, +1}, Vec2(0.0, -kTwoPi)));
  return atlas;
}

Atlas make_torus_atlas_two_charts(double ring_radius, double tube_radius) {
  Chart base = make_torus_chart(ring_radius, tube_radius);
  Chart a = base, b = base;
  a.name = "torus_half_a";
  a.hi[0] = M_PI;
  a.periodic = {false, true};
  b.name = "torus_half_b";
  b.lo[0] = M_PI;
  b.periodic = {false, true};

  Atlas atlas;
  atlas.charts = {a, b};
  // junction xi1 = pi, identical coordinates
  atlas.interfaces.push_back(identity_interface(
      0, 1, EdgeSegment{0, M_PI, 0.0, kTwoPi, +1}, Vec2(0.0, 0.0)));
  // junction xi1 = 0 on a <-> xi1 = 2 pi on b
  atlas.interfaces.push_back(identity_interface(
      0, 1, EdgeSegment{0, 0.0, 0.0, kTwoPi, -1}, Vec2(kTwoPi, 0.0)));
  // azimuthal seams of each half
  atlas.interfaces.push_back(identity_interface(
      0, 0, EdgeSegment{1, kTwoPi, 0.0, M_PI, +1}, Vec2(0.0, -kTwoPi)));
  atlas.interfaces.push_back(identity_interface(
      1, 1, EdgeSegment{1, kTwoPi, M_PI, kTwoPi, +1}, Vec2(0.0, -kTwoPi)));
  return atlas;
}

Chart make_cylinder_chart(double z_lo, double z_hi) {
  Chart c;
  c.name = "cylinder";
  c.lo = Vec2(0.0, z_lo);
  c.hi = Vec2(kTwoPi, z_hi);
  c.periodic = {true, false};
  c.position = [](const Vec2& xi) {
    return Vec3(std::cos(xi[0]), std::sin(xi[0]), xi[1]);
  };
  c.tangents = [](const Vec2& xi) {
    Mat32 t;
    t.col(0) = Vec3(-std::sin(xi[0]), std::cos(xi[0]), 0.0);
    t.col(1) = Vec3(0.0, 0.0, 1.0);
    return t;
  };
  c.second = [](const Vec2& xi) {
    std::array<Vec3, 3> d2;
    d2[0] = Vec3(-std::cos(xi[0]), -std::sin(xi[0]), 0.0);
    d2[1] = Vec3::Zero();
    d2[2] = Vec3::Zero();
    return d2;
  };
  return c;
}

Chart make_spherical_cap_chart(double theta_lo, double theta_hi) {
  Chart c;
  c.name = "spherical_cap";
  c.lo = Vec2(0.0, theta_lo);
  c.hi = Vec2(kTwoPi, theta_hi);
  c.periodic = {true, false};
  c.position = [](const Vec2& xi) {
    return Vec3(std::sin(xi[1]) * std::cos(xi[0]), std::sin(xi[1]) * std::sin(xi[0]),
                std::cos(xi[1]));
  };
  c.tangents = [](const Vec2& xi) {
    double cp = std::cos(xi[0]), sp = std::sin(xi[0]);
    double ct = std::cos(xi[1]), st = std::sin(xi[1]);
    Mat32 t;
    t.col(0) = Vec3(-st * sp, st * cp, 0.0);
    t.col(1) = Vec3(ct * cp, ct * sp, -st);
    return t;
  };
  c.second = [](const Vec2& xi) {
    double cp = std::cos(xi[0]), sp = std::sin(xi[0]);
    double ct = std::cos(xi[1]), st = std::sin(xi[1]);
    std::array<Vec3, 3> d2;
    d2[0] = Vec3(-st * cp, -st * sp, 0.0);
    d2[1] = Vec3(-ct * sp, ct * cp, 0.0);
    d2[2] = Vec3(-st * cp, -st * sp, -ct);
    return d2;
  };
  return c;
}

Chart make_ellipsoid_chart(const Vec3& semi_axes, bool rotated, double theta_lo,
                           double theta_hi) {
  Mat3 rot = Mat3::Identity();
  if (rotated) {
    // proper rotation taking the z pole to the x axis
    rot << 0, 0, 1, 0, 1, 0, -1, 0, 0;
  }
  Mat3 scale = semi_axes.asDiagonal();
  Mat3 map = scale * rot;

  Chart c;
  c.name = rotated ? "ellipsoid_rotated" : "ellipsoid";
  c.lo = Vec2(theta_lo, 0.0);
  c.hi = Vec2(theta_hi, kTwoPi);
  c.periodic = {false, true};
  c.position = [map](const Vec2& tp) {
    double st = std::sin(tp[0]), ct = std::cos(tp[0]);
    double sp = std::sin(tp[1]), cp = std::cos(tp[1]);
    return Vec3(map * Vec3(st * cp, st * sp, ct));
  };
  c.tangents = [map](const Vec2& tp) {
    double st = std::sin(tp[0]), ct = std::cos(tp[0]);
    double sp = std::sin(tp[1]), cp = std::cos(tp[1]);
    Mat32 t;
    t.col(0) = map * Vec3(ct * cp, ct * sp, -st);
    t.col(1) = map * Vec3(-st * sp, st * cp, 0.0);
    return t;
  };
  c.second = [map](const Vec2& tp) {
    double st = std::sin(tp[0]), ct = std::cos(tp[0]);
    double sp = std::sin(tp[1]), cp = std::cos(tp[1]);
    std::array<Vec3, 3> d2;
    d2[0] = map * Vec3(-st * cp, -st * sp, -ct);
    d2[1] = map * Vec3(-ct * sp, ct * cp, 0.0);
    d2[2] = map * Vec3(-st * cp, -st * sp, 0.0);
    return d2;
  };
  return c;
}

Atlas make_cup_atlas() {
  // Bottom: radius profile rho(z) = sqrt(1 - ((z+1)/0.1)^2) for z in
  // [-1.1, -1]. The profile has a pole at z = -1.1, so the domain is
  // clamped just short of it.
  Chart bottom;
  bottom.name = "cup_bottom";
  bottom.lo = Vec2(0.0, -1.0999);
  bottom.hi = Vec2(kTwoPi, -1.0);
  bottom.periodic = {true, false};
  auto profile = [](double z) {
    double s = (z + 1.0) / 0.1;
    return std::sqrt(1.0 - s * s);
  };
  auto profile_d1 = [profile](double z) { return -100.0 * (z + 1.0) / profile(z); };
  auto profile_d2 = [profile, profile_d1](double z) {
    double rho = profile(z), d1 = profile_d1(z);
    return -100.0 / rho + 100.0 * (z + 1.0) * d1 / (rho * rho);
  };
  bottom.position = [profile](const Vec2& xi) {
    double rho = profile(xi[1]);
    return Vec3(rho * std::cos(xi[0]), rho * std::sin(xi[0]), xi[1]);
  };
  bottom.tangents = [profile, profile_d1](const Vec2& xi) {
    double rho = profile(xi[1]), d1 = profile_d1(xi[1]);
    Mat32 t;
    t.col(0) = Vec3(-rho * std::sin(xi[0]), rho * std::cos(xi[0]), 0.0);
    t.col(1) = Vec3(d1 * std::cos(xi[0]), d1 * std::sin(xi[0]), 1.0);
    return t;
  };
  bottom.second = [profile, profile_d1, profile_d2](const Vec2& xi) {
    double rho = profile(xi[1]), d1 = profile_d1(xi[1]), dd = profile_d2(xi[1]);
    double cp = std::cos(xi[0]), sp = std::sin(xi[0]);
    std::array<Vec3, 3> d2;
    d2[0] = Vec3(-rho * cp, -rho * sp, 0.0);
    d2[1] = Vec3(-d1 * sp, d1 * cp, 0.0);
    d2[2] = Vec3(dd * cp, dd * sp, 0.0);
    return d2;
  };

  Chart side = make_cylinder_chart(-1.0, 1.0);
  side.name = "cup_side";

  Atlas atlas;
  atlas.charts = {bottom, side};
  // junction circle z = -1 (rho(-1) = 1 and rho'(-1) = 0, so the join is C^1)
  atlas.interfaces.push_back(identity_interface(
      0, 1, EdgeSegment{1, -1.0, 0.0, kTwoPi, +1}, Vec2(0.0, 0.0)));
  atlas.interfaces.push_back(identity_interface(
      0, 0, EdgeSegment{0, kTwoPi, -1.0999, -1.0, +1}, Vec2(-kTwoPi, 0.0)));
  atlas.interfaces.push_back(identity_interface(
      1, 1, EdgeSegment{0, kTwoPi, -1.0, 1.0, +1}, Vec2(-kTwoPi, 0.0)));
  return atlas;
}

std::optional<Atlas> atlas_registry(const std::string& name) {
  if (name == "torus") return make_torus_atlas();
  if (name == "torus_two_chart") return make_torus_atlas_two_charts();
  if (name == "cylinder") {
    Atlas a;
    a.charts.push_back(make_cylinder_chart());
    a.interfaces.push_back(identity_interface(
        0, 0, EdgeSegment{0, kTwoPi, -1.0, 1.0, +1}, Vec2(-kTwoPi, 0.0)));
    return a;
  }
  if (name == "spherical_cap") {
    Atlas a;
    a.charts.push_back(make_spherical_cap_chart(0.25 * M_PI, 0.75 * M_PI));
    a.interfaces.push_back(identity_interface(
        0, 0, EdgeSegment{0, kTwoPi, 0.25 * M_PI, 0.75 * M_PI, +1}, Vec2(-kTwoPi, 0.0)));
    return a;
  }
  if (name == "cup") return make_cup_atlas();
  return std::nullopt;
}

// --- level sets -------------------------------------------------------------

LevelSetSurface make_sphere_levelset(double radius) {
  LevelSetSurface s;
  s.name = "sphere";
  s.phi = [radius](const Vec3& x) { return x.squaredNorm() - radius * radius; };
  s.grad = [](const Vec3& x) { return Vec3(2.0 * x); };
  s.hess = [](const Vec3&) { return Mat3(2.0 * Mat3::Identity()); };
  s.bbox_lo = Vec3::Constant(-1.2 * radius);
  s.bbox_hi = Vec3::Constant(1.2 * radius);
  return s;
}

LevelSetSurface make_torus_levelset(double ring_radius, double tube_radius) {
  const double R = ring_radius, r = tube_radius;
  LevelSetSurface s;
  s.name = "torus";
  s.phi = [R, r](const Vec3& x) {
    double rho = std::hypot(x[0], x[1]);
    return (rho - R) * (rho - R) + x[2] * x[2] - r * r;
  };
  s.grad = [R](const Vec3& x) {
    double rho = std::hypot(x[0], x[1]);
    double f = 2.0 * (1.0 - R / rho);
    return Vec3(f * x[0], f * x[1], 2.0 * x[2]);
  };
  s.hess = [R](const Vec3& x) {
    double rho = std::hypot(x[0], x[1]);
    double rho3 = rho * rho * rho;
    Mat3 h = Mat3::Zero();
    h(0, 0) = 2.0 * (1.0 - R / rho) + 2.0 * R * x[0] * x[0] / rho3;
    h(1, 1) = 2.0 * (1.0 - R / rho) + 2.0 * R * x[1] * x[1] / rho3;
    h(0, 1) = h(1, 0) = 2.0 * R * x[0] * x[1] / rho3;
    h(2, 2) = 2.0;
    return h;
  };
  s.bbox_lo = Vec3(-1.5, -1.5, -0.5);
  s.bbox_hi = Vec3(1.5, 1.5, 0.5);
  return s;
}

LevelSetSurface make_plane_levelset() {
  LevelSetSurface s;
  s.name = "plane";
  s.phi = [](const Vec3& x) { return x[2]; };
  s.grad = [](const Vec3&) { return Vec3(0.0, 0.0, 1.0); };
  s.hess = [](const Vec3&) { return Mat3(Mat3::Zero()); };
  return s;
}

LevelSetSurface make_cheese_levelset() {
  LevelSetSurface s;
  s.name = "cheese";
  s.phi = [](const Vec3& p) {
    double x = p[0], y = p[1], z = p[2];
    auto sq = [](double v) { return v * v; };
    return sq(4 * x * x - 1) + sq(4 * y * y - 1) + sq(4 * z * z - 1) +
           16 * sq(x * x + y * y - 1) + 16 * sq(x * x + z * z - 1) +
           16 * sq(y * y + z * z - 1) - 16;
  };
  s.grad = [](const Vec3& p) {
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
      double a = p[i], b = p[(i + 1) % 3], c = p[(i + 2) % 3];
      g[i] = 16 * a * (4 * a * a - 1) + 64 * a * (a * a + b * b - 1) +
             64 * a * (a * a + c * c - 1);
    }
    return g;
  };
  s.hess = [](const Vec3& p) {
    Mat3 h;
    for (int i = 0; i < 3; ++i) {
      double a = p[i], b = p[(i + 1) % 3], c = p[(i + 2) % 3];
      h(i, i) = 16 * (4 * a * a - 1) + 128 * a * a + 64 * (a * a + b * b - 1) +
                64 * (a * a + c * c - 1) + 256 * a * a;
      for (int j = i + 1; j < 3; ++j) {
        h(i, j) = 128 * p[i] * p[j];
        h(j, i) = h(i, j);
      }
    }
    return h;
  };
  s.bbox_lo = Vec3::Constant(-1.5);
  s.bbox_hi = Vec3::Constant(1.5);
  return s;
}

LevelSetSurface make_sheared_sphere_levelset(double t) {
  LevelSetSurface s;
  s.name = "sheared_sphere";
  s.phi = [t](const Vec3& p) {
    double u = p[0] - t * p[2];
    return u * u + p[1] * p[1] + p[2] * p[2] - 1.0;
  };
  s.grad = [t](const Vec3& p) {
    double u = p[0] - t * p[2];
    return Vec3(2 * u, 2 * p[1], 2 * p[2] - 2 * t * u);
  };
  s.hess = [t](const Vec3&) {
    Mat3 h;
    h << 2, 0, -2 * t, 0, 2, 0, -2 * t, 0, 2 + 2 * t * t;
    return h;
  };
  double reach = 1.0 + std::abs(t);
  s.bbox_lo = Vec3(-1.1 * reach, -1.1, -1.1);
  s.bbox_hi = Vec3(1.1 * reach, 1.1, 1.1);
  return s;
}

double oscillating_ellipsoid_a(double t) { return std::sqrt(1.0 + 0.95 * std::sin(M_PI * t)); }

double oscillating_ellipsoid_a_dt(double t) {
  return 0.95 * M_PI * std::cos(M_PI * t) / (2.0 * oscillating_ellipsoid_a(t));
}

LevelSetSurface make_oscillating_ellipsoid_levelset(double t) {
  double ax = 1.5 * oscillating_ellipsoid_a(t);
  LevelSetSurface s;
  s.name = "oscillating_ellipsoid";
  s.phi = [ax](const Vec3& p) {
    double u = p[0] / ax;
    return u * u + p[1] * p[1] + 4.0 * p[2] * p[2] - 1.0;
  };
  s.grad = [ax](const Vec3& p) { return Vec3(2 * p[0] / (ax * ax), 2 * p[1], 8 * p[2]); };
  s.hess = [ax](const Vec3&) {
    return Mat3(Vec3(2 / (ax * ax), 2.0, 8.0).asDiagonal());
  };
  s.bbox_lo = Vec3(-1.1 * ax, -1.1, -0.55);
  s.bbox_hi = Vec3(1.1 * ax, 1.1, 0.55);
  return s;
}

std::optional<LevelSetSurface> levelset_registry(const std::string& name) {
  if (name == "sphere") return make_sphere_levelset();
  if (name == "torus") return make_torus_levelset();
  if (name == "cheese") return make_cheese_levelset();
  if (name == "plane") return make_plane_levelset();
  return std::nullopt;
}

} // namespace surfrann
