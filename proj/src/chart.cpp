#include "surfrann/chart.hpp"

#include <cmath>
#include <sstream>

namespace surfrann {

Vec2 Chart::wrap(const Vec2& xi) const {
  Vec2 out = xi;
  for (int k = 0; k < 2; ++k) {
    if (!periodic[k]) continue;
    double span = hi[k] - lo[k];
    double t = std::fmod(out[k] - lo[k], span);
    if (t < 0) t += span;
    out[k] = lo[k] + t;
  }
  return out;
}

bool Chart::contains(const Vec2& xi, double tol) const {
  Vec2 w = wrap(xi);
  for (int k = 0; k < 2; ++k)
    if (w[k] < lo[k] - tol || w[k] > hi[k] + tol) return false;
  return true;
}

namespace {

std::array<Vec3, 3> second_by_differences(const Chart& chart, const Vec2& xi) {
  // Central differences of the analytic tangents.
  std::array<Vec3, 3> d2;
  Vec2 h = 1e-6 * chart.extent();
  for (int k = 0; k < 2; ++k) {
    Vec2 p = xi, m = xi;
    p[k] += h[k];
    m[k] -= h[k];
    Mat32 tp = chart.tangents(chart.wrap(p));
    Mat32 tm = chart.tangents(chart.wrap(m));
    Mat32 dt = (tp - tm) / (2.0 * h[k]);
    if (k == 0) {
      d2[0] = dt.col(0); // X_11
      d2[1] = dt.col(1); // X_12
    } else {
      d2[2] = dt.col(1); // X_22
    }
  }
  return d2;
}

} // namespace

MetricData metric_at(const Chart& chart, const Vec2& xi_in) {
  Vec2 xi = chart.wrap(xi_in);
  Mat32 t = chart.tangents(xi);

  MetricData m;
  m.g = t.transpose() * t;
  m.det_g = m.g.determinant();
  if (!(m.det_g > 1e-14)) {
    std::ostringstream os;
    os << "degenerate chart metric on '" << chart.name << "' at xi = (" << xi[0] << ", "
       << xi[1] << "): det g = " << m.det_g;
    throw NumericalError(os.str());
  }
  m.sqrt_g = std::sqrt(m.det_g);
  m.g_inv = m.g.inverse();

  std::array<Vec3, 3> d2;
  if (chart.has_second()) {
    d2 = chart.second(xi);
  } else {
    d2 = second_by_differences(chart, xi);
    m.used_finite_difference = true;
  }
  const Vec3& x11 = d2[0];
  const Vec3& x12 = d2[1];
  const Vec3& x22 = d2[2];

  // d_c g_ab = X_ac . X_b + X_a . X_bc
  auto dX = [&](int a, int c) -> const Vec3& {
    // derivative of tangent a with respect to coordinate c
    if (a == 0 && c == 0) return x11;
    if (a == 1 && c == 1) return x22;
    return x12;
  };
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        m.dg[c](a, b) = dX(a, c).dot(t.col(b)) + t.col(a).dot(dX(b, c));

  // b^b = sum_a [ (d_a sqrt g / sqrt g) g^{ab} + d_a g^{ab} ]
  //     = sum_a [ 0.5 tr(g^-1 d_a g) g^{ab} - (g^-1 d_a g g^-1)_{ab} ]
  m.drift.setZero();
  for (int a = 0; a < 2; ++a) {
    double tr = (m.g_inv * m.dg[a]).trace();
    Mat2 dinv = -m.g_inv * m.dg[a] * m.g_inv;
    for (int b = 0; b < 2; ++b) m.drift[b] += 0.5 * tr * m.g_inv(a, b) + dinv(a, b);
  }
  return m;
}

double chart_operator_apply(const MetricData& metric, const ChartJet& jet) {
  double principal = (metric.g_inv.array() * jet.hess.array()).sum();
  return -principal - metric.drift.dot(jet.grad);
}

ChartJet pullback_jet(const Chart& chart, const Vec2& xi_in, const AmbientJet& ambient) {
  Vec2 xi = chart.wrap(xi_in);
  Mat32 t = chart.tangents(xi);
  std::array<Vec3, 3> d2 =
      chart.has_second() ? chart.second(xi) : second_by_differences(chart, xi);

  ChartJet jet;
  jet.value = ambient.value;
  jet.grad = t.transpose() * ambient.grad;
  Mat2 h = t.transpose() * ambient.hess * t;
  h(0, 0) += ambient.grad.dot(d2[0]);
  h(0, 1) += ambient.grad.dot(d2[1]);
  h(1, 0) = h(0, 1);
  h(1, 1) += ambient.grad.dot(d2[2]);
  jet.hess = 0.5 * (h + h.transpose());
  return jet;
}

Vec3 chart_normal(const Chart& chart, const Vec2& xi) {
  Mat32 t = chart.tangents(chart.wrap(xi));
  Vec3 n = t.col(0).cross(t.col(1));
  double len = n.norm();
  if (!(len > 1e-14))
    throw NumericalError("chart normal undefined: tangents are collinear on '" + chart.name + "'");
  return n / len;
}

} // namespace surfrann
