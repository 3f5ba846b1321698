#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "surfrann/chart.hpp"

namespace surfrann {

// Axis-aligned edge segment of a rectangular parameter domain:
// { xi : xi[axis] = fixed, xi[1-axis] in [lo, hi] }.
// outward_sign is the sign of the outward unit normal along `axis`.
struct EdgeSegment {
  int axis = 0;
  double fixed = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  int outward_sign = +1;

  Vec2 point(double s) const; // s in [0,1], uniform by arc length
  Vec2 outward_normal() const;
  double length() const { return hi - lo; }
};

// Interface between two charts (possibly the same chart for periodic seams).
// Mismatches are measured on side a; map_ab carries edge-a points into the
// domain of chart b and extends to a neighborhood so the chain rule applies.
struct Interface {
  int chart_a = 0;
  int chart_b = 0;
  EdgeSegment edge_a;
  std::function<Vec2(const Vec2&)> map_ab;
  std::function<Mat2(const Vec2&)> map_ab_jacobian;
};

struct Atlas {
  std::vector<Chart> charts;
  std::vector<Interface> interfaces;
};

// Patchwise-defined scalar function (a "broken" function): value and
// parameter-space gradient per chart.
struct BrokenFn {
  std::function<double(int chart, const Vec2&)> value;
  std::function<Vec2(int chart, const Vec2&)> grad;
};

// Value / normal-derivative mismatch of a broken function at one edge point.
struct MismatchSample {
  Vec2 xi;        // on edge_a
  double value;   // delta^0
  double normal;  // delta^n
};

std::vector<MismatchSample> interface_mismatch(const Atlas& atlas, int interface_index,
                                               const BrokenFn& fn,
                                               const std::vector<double>& edge_params);

// Uniform edge parameters (midpoint offsets so seam corners are not doubled).
std::vector<double> uniform_edge_params(int count);

// sum_i integral_{D_i} f_i sqrt(g_i) dxi by tensor Gauss-Legendre.
double surface_integral(const Atlas& atlas,
                        const std::function<double(int chart, const Vec2&, const Vec3&)>& integrand,
                        int order = 16);

double atlas_area(const Atlas& atlas, int order = 16);

// Area-weighted mean over the atlas.
double surface_mean(const Atlas& atlas,
                    const std::function<double(int chart, const Vec2&)>& fn, int order = 16);

// Global mean-zero projector: subtracts the area-weighted mean from every patch.
BrokenFn mean_zero_shift(const Atlas& atlas, const BrokenFn& fn, int order = 16);

// Consistency probe: max over sampled edge points of |X_a(xi) - X_b(map(xi))|.
double interface_identification_error(const Atlas& atlas, int samples_per_edge = 17);

} // namespace surfrann
