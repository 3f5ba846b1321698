#pragma once

#include "surfrann/common.hpp"

namespace surfrann {

struct QuadratureRule {
  VectorXd nodes;
  VectorXd weights;
};

// Gauss-Legendre rule on [-1, 1]; cached per order.
const QuadratureRule& gauss_legendre(int order);

// Same rule mapped to [a, b].
QuadratureRule gauss_legendre_on(int order, double a, double b);

} // namespace surfrann
