#include "surfrann/atlas.hpp"

#include <cmath>
#include <sstream>

#include "surfrann/quadrature.hpp"

namespace surfrann {

Vec2 EdgeSegment::point(double s) const {
  Vec2 xi;
  xi[axis] = fixed;
  xi[1 - axis] = lo + s * (hi - lo);
  return xi;
}

Vec2 EdgeSegment::outward_normal() const {
  Vec2 nu = Vec2::Zero();
  nu[axis] = static_cast<double>(outward_sign);
  return nu;
}

std::vector<double> uniform_edge_params(int count) {
  std::vector<double> s(count);
  for (int i = 0; i < count; ++i) s[i] = (i + 0.5) / count;
  return s;
}

std::vector<MismatchSample> interface_mismatch(const Atlas& atlas, int interface_index,
                                               const BrokenFn& fn,
                                               const std::vector<double>& edge_params) {
  const Interface& e = atlas.interfaces.at(interface_index);
  const Chart& cb = atlas.charts.at(e.chart_b);
  Vec2 nu = e.edge_a.outward_normal();

  std::vector<MismatchSample> out;
  out.reserve(edge_params.size());
  for (double s : edge_params) {
    Vec2 xi = e.edge_a.point(s);
    Vec2 xj = e.map_ab(xi);
    if (!cb.contains(xj, 1e-7)) {
      std::ostringstream os;
      os << "interface " << interface_index << ": transition map sends (" << xi[0] << ", "
         << xi[1] << ") outside chart '" << cb.name << "'";
      throw NumericalError(os.str());
    }
    Mat2 dphi = e.map_ab_jacobian(xi);
    MismatchSample m;
    m.xi = xi;
    m.value = fn.value(e.chart_a, xi) - fn.value(e.chart_b, xj);
    // delta^n = nu . grad v_a(xi) - nu . (DPhi^T grad v_b(Phi xi))
    m.normal = nu.dot(fn.grad(e.chart_a, xi)) - nu.dot(dphi.transpose() * fn.grad(e.chart_b, xj));
    out.push_back(m);
  }
  return out;
}

double surface_integral(const Atlas& atlas,
                        const std::function<double(int, const Vec2&, const Vec3&)>& integrand,
                        int order) {
  double total = 0.0;
  for (size_t i = 0; i < atlas.charts.size(); ++i) {
    const Chart& c = atlas.charts[i];
    QuadratureRule q1 = gauss_legendre_on(order, c.lo[0], c.hi[0]);
    QuadratureRule q2 = gauss_legendre_on(order, c.lo[1], c.hi[1]);
    for (Eigen::Index a = 0; a < q1.nodes.size(); ++a) {
      for (Eigen::Index b = 0; b < q2.nodes.size(); ++b) {
        Vec2 xi(q1.nodes[a], q2.nodes[b]);
        MetricData m = metric_at(c, xi);
        total += q1.weights[a] * q2.weights[b] * m.sqrt_g *
                 integrand(static_cast<int>(i), xi, c.position(xi));
      }
    }
  }
  return total;
}

double atlas_area(const Atlas& atlas, int order) {
  return surface_integral(atlas, [](int, const Vec2&, const Vec3&) { return 1.0; }, order);
}

double surface_mean(const Atlas& atlas, const std::function<double(int, const Vec2&)>& fn,
                    int order) {
  double area = atlas_area(atlas, order);
  double total = surface_integral(
      atlas, [&](int i, const Vec2& xi, const Vec3&) { return fn(i, xi); }, order);
  return total / area;
}

BrokenFn mean_zero_shift(const Atlas& atlas, const BrokenFn& fn, int order) {
  double mean = surface_mean(
      atlas, [&](int i, const Vec2& xi) { return fn.value(i, xi); }, order);
  BrokenFn shifted;
  shifted.value = [fn, mean](int i, const Vec2& xi) { return fn.value(i, xi) - mean; };
  shifted.grad = fn.grad;
  return shifted;
}

double interface_identification_error(const Atlas& atlas, int samples_per_edge) {
  double worst = 0.0;
  for (const Interface& e : atlas.interfaces) {
    const Chart& ca = atlas.charts.at(e.chart_a);
    const Chart& cb = atlas.charts.at(e.chart_b);
    for (double s : uniform_edge_params(samples_per_edge)) {
      Vec2 xi = e.edge_a.point(s);
      Vec2 xj = cb.wrap(e.map_ab(xi));
      worst = std::max(worst, (ca.position(ca.wrap(xi)) - cb.position(xj)).norm());
    }
  }
  return worst;
}

} // namespace surfrann
