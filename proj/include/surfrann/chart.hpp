#pragma once

#include <array>
#include <functional>
#include <string>

#include "surfrann/common.hpp"

namespace surfrann {

// One parametric patch X : D -> R^3 on an axis-aligned rectangle D.
// `second` (the three distinct second partials X_11, X_12, X_22) may be
// empty; metric derivatives then fall back to central differences and the
// MetricData is flagged.
struct Chart {
  std::string name;
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();
  std::array<bool, 2> periodic{false, false};

  std::function<Vec3(const Vec2&)> position;
  std::function<Mat32(const Vec2&)> tangents; // columns X_1, X_2
  std::function<std::array<Vec3, 3>(const Vec2&)> second;

  bool has_second() const { return static_cast<bool>(second); }
  Vec2 extent() const { return hi - lo; }
  // Wrap periodic coordinates into [lo, hi); non-periodic coordinates pass through.
  Vec2 wrap(const Vec2& xi) const;
  bool contains(const Vec2& xi, double tol = 1e-9) const;
};

// Pointwise first-fundamental-form data plus the drift coefficients of the
// chart operator in non-divergence form:
//   G u = -g^{ab} d_ab u - b^b d_b u,  b^b = (1/sqrt g) d_a(sqrt g g^{ab}).
struct MetricData {
  Mat2 g = Mat2::Zero();
  Mat2 g_inv = Mat2::Zero();
  double det_g = 0.0;
  double sqrt_g = 0.0;
  std::array<Mat2, 2> dg{Mat2::Zero(), Mat2::Zero()}; // d_1 g, d_2 g
  Vec2 drift = Vec2::Zero();                          // b^1, b^2
  bool used_finite_difference = false;
};

MetricData metric_at(const Chart& chart, const Vec2& xi);

// Jet of a chart-domain function at xi.
struct ChartJet {
  double value = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
};

// G u at a point, from the metric and the function jet.
double chart_operator_apply(const MetricData& metric, const ChartJet& jet);
inline double chart_operator_apply(const Chart& chart, const Vec2& xi, const ChartJet& jet) {
  return chart_operator_apply(metric_at(chart, xi), jet);
}

// Pull an ambient jet back through the chart:
//   d_a (u o X) = grad_u . X_a
//   d_ab (u o X) = X_a^T hess_u X_b + grad_u . X_ab
ChartJet pullback_jet(const Chart& chart, const Vec2& xi, const AmbientJet& ambient);

// Unit normal of the chart (X_1 x X_2 normalized).
Vec3 chart_normal(const Chart& chart, const Vec2& xi);

} // namespace surfrann
