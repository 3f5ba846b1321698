#pragma once

#include <cmath>

namespace surfrann {

enum class ActivationKind { HyperbolicTangent };

// Value and first three derivatives of the activation at z.
struct ActivationJet {
  double value;
  double d1;
  double d2;
  double d3;
};

// tanh derivative chain: d1 = 1 - v^2, d2 = -2 v d1, d3 = -2 d1^2 - 2 v d2.
inline ActivationJet activation_jet(ActivationKind kind, double z) {
  (void)kind; // single member for now
  ActivationJet j;
  j.value = std::tanh(z);
  j.d1 = 1.0 - j.value * j.value;
  j.d2 = -2.0 * j.value * j.d1;
  j.d3 = -2.0 * j.d1 * j.d1 - 2.0 * j.value * j.d2;
  return j;
}

inline const char* activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::HyperbolicTangent: return "tanh";
  }
  return "unknown";
}

} // namespace surfrann
