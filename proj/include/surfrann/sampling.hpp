#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "surfrann/chart.hpp"

namespace surfrann {

enum class PointRole { Interior, Initial, Boundary, Interface };

const char* role_name(PointRole role);
PointRole role_from_name(const std::string& name);

// One tagged collocation record. Spatial payload is either a chart parameter
// pair (chart >= 0) or an embedded point (chart == -1). Records without a
// time component carry t = NaN.
struct CollocationRecord {
  PointRole role = PointRole::Interior;
  double t = std::numeric_limits<double>::quiet_NaN();
  int chart = -1;
  Vec2 xi = Vec2::Zero();
  Vec3 x = Vec3::Zero();
  double weight = 1.0;

  bool has_time() const { return !std::isnan(t); }
};

struct CollocationSet {
  std::vector<CollocationRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t count(PointRole role) const;
  CollocationSet filtered(PointRole role) const;

  void save_csv(std::ostream& out) const;
  static CollocationSet load_csv(std::istream& in);
};

// Tensor grid on the chart's parameter rectangle; endpoints included except
// on periodic axes, where the seam point would duplicate its partner.
std::vector<Vec2> grid_on_chart(const Chart& chart, int n1, int n2);

// Fibonacci lattice on the unit sphere, optionally scaled per axis to an
// ellipsoid (axis scaling keeps the points exactly on the ellipsoid).
// The seed applies a deterministic rotation about z so different seeds give
// distinct, equally uniform sets.
MatrixXd fibonacci_sphere(int count, std::uint64_t seed = 0);
MatrixXd fibonacci_surface(const Vec3& semi_axes, int count, std::uint64_t seed = 0);

// Uniform time grid on [t0, t1] including both endpoints.
VectorXd uniform_time_grid(double t0, double t1, int count);

// Tag every (time, spatial record) pair with the given role.
CollocationSet spacetime_product(const VectorXd& times, const CollocationSet& spatial,
                                 PointRole role = PointRole::Interior);

// Sample `count` records without replacement, deterministic per seed.
// Subsetting never crosses role boundaries: all records must share one role.
CollocationSet random_subset(const CollocationSet& set, std::size_t count,
                             std::uint64_t seed);

} // namespace surfrann
