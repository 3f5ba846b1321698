#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "surfrann/activation.hpp"
#include "surfrann/common.hpp"

namespace surfrann {

// Axis-aligned anchor sampling box, one interval per input coordinate.
// Zero-extent intervals pin that coordinate's anchor (e.g. a time anchor
// fixed at t = 0); negative extent is rejected.
struct AnchorBox {
  VectorXd lo;
  VectorXd hi;

  static AnchorBox cube(int dim, double a, double b);
};

// Feature values and input derivatives at a single point: values psi (M),
// grad row m = d1_m * w_m, hess[m] = d2_m * w_m w_m^T (symmetric exactly).
struct FeatureJet {
  VectorXd values;              // M
  MatrixXd grad;                // M x d
  std::vector<Mat3> hess_xyz;   // only for d == 3 convenience paths
  std::vector<MatrixXd> hess;   // M of d x d
};

// Elementwise activation tables over a batch of points; the building block
// for all residual-row assembly.
struct FeatureTables {
  MatrixXd value; // N x M  rho(z)
  MatrixXd d1;    // N x M  rho'(z)
  MatrixXd d2;    // N x M  rho''(z)
};

// Value/gradient/Hessian of the linear combination u = c . psi at each point.
struct CombinationJet {
  VectorXd values;            // N
  MatrixXd grad;              // N x d
  std::vector<MatrixXd> hess; // N of d x d
};

// One hidden layer of random features: w drawn i.i.d. uniform per-coordinate
// on [-r_k, r_k], anchors B uniform on the anchor box, and b = -(w .* B^T) 1
// so each feature is centered on its own anchor point. Immutable once built;
// all evaluation is const and thread-safe.
class FeatureLayer {
public:
  FeatureLayer() = default; // empty layer; fill via make() or load()

  static FeatureLayer make(int input_dim, int width, const VectorXd& r_per_coord,
                           const AnchorBox& box, std::uint64_t seed,
                           ActivationKind activation = ActivationKind::HyperbolicTangent);

  int input_dim() const { return static_cast<int>(weights_.cols()); }
  int width() const { return static_cast<int>(weights_.rows()); }
  std::uint64_t seed() const { return seed_; }
  ActivationKind activation() const { return activation_; }

  const MatrixXd& weights() const { return weights_; } // M x d
  const VectorXd& biases() const { return biases_; }   // M
  const MatrixXd& anchors() const { return anchors_; } // M x d
  const VectorXd& ranges() const { return ranges_; }
  const AnchorBox& anchor_box() const { return box_; }

  // z = w x + b for a batch of points (N x d) -> N x M.
  MatrixXd pre_activation(const MatrixXd& points) const;
  FeatureTables tables(const MatrixXd& points) const;

  FeatureJet jet_at(const VectorXd& point) const;
  std::vector<FeatureJet> eval_jet(const MatrixXd& points) const;

  CombinationJet eval_linear_combination(const VectorXd& coeffs,
                                         const MatrixXd& points) const;

  // Scalar value of u = c . psi at one point.
  double combine_value(const VectorXd& coeffs, const VectorXd& point) const;

  void save(std::ostream& out) const;
  static FeatureLayer load(std::istream& in);

private:
  std::uint64_t seed_ = 0;
  ActivationKind activation_ = ActivationKind::HyperbolicTangent;
  VectorXd ranges_;
  AnchorBox box_;
  MatrixXd weights_;
  MatrixXd anchors_;
  VectorXd biases_;
};

} // namespace surfrann
