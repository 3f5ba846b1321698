#include "surfrann/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace surfrann {

namespace {

// Newton iteration on P_n with the Chebyshev-angle initial guess.
QuadratureRule compute_rule(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

} // namespace

const QuadratureRule& gauss_legendre(int order) {
  if (order < 1) throw ConfigError("quadrature order must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_rule(order)).first;
  return it->second;
}

QuadratureRule gauss_legendre_on(int order, double a, double b) {
  const QuadratureRule& base = gauss_legendre(order);
  QuadratureRule rule;
  rule.nodes = 0.5 * (b - a) * base.nodes.array() + 0.5 * (a + b);
  rule.weights = 0.5 * (b - a) * base.weights;
  return rule;
}

} // namespace surfrann
