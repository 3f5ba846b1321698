#pragma once

#include <array>
#include <memory>
#include <optional>

#include "surfrann/assembly.hpp"
#include "surfrann/feature_layer.hpp"

namespace surfrann {

// --- velocity fields ----------------------------------------------------------

struct VelocityField {
  std::string id;
  std::function<Vec3(double, const Vec3&)> value;
  std::function<Mat3(double, const Vec3&)> jacobian; // J_ij = d v_i / d x_j
  bool affine = false; // v(t, x) = affine_matrix(t) x + affine_offset(t)
  std::function<Mat3(double)> affine_matrix;
  std::function<Vec3(double)> affine_offset;

  double divergence(double t, const Vec3& x) const { return jacobian(t, x).trace(); }
};

VelocityField make_zero_velocity();
VelocityField make_shear_velocity();                 // v = (z, 0, 0)
VelocityField make_oscillating_ellipsoid_velocity(); // v = (a'(t)/a(t) x, 0, 0)
VelocityField make_uniform_expansion_velocity(double rate = 1.0); // v = rate x
VelocityField make_rotation_velocity();              // v = (-y, x, 0)
std::optional<VelocityField> velocity_registry(const std::string& id);

// --- initial surfaces -----------------------------------------------------------

// Axis-scaled sphere with two rotated spherical charts; queries near one
// chart's poles are answered by the other, whose poles sit on a different axis.
class SphereLikeSurface {
public:
  explicit SphereLikeSurface(const Vec3& semi_axes);

  const Vec3& semi_axes() const { return semi_axes_; }
  bool is_closed() const { return true; }
  double volume() const; // 4/3 pi a b c

  // tp = (theta, phi), theta polar in (0, pi), phi periodic.
  Vec3 position(int chart, const Vec2& tp) const;
  Mat32 tangents(int chart, const Vec2& tp) const;
  std::array<Vec3, 3> second(int chart, const Vec2& tp) const;

  // Chart selection plus parameter inversion for a point on the surface.
  std::pair<int, Vec2> param_of(const Vec3& x0) const;

  MatrixXd sample_fibonacci(int count, std::uint64_t seed = 0) const;

private:
  Vec3 semi_axes_;
  std::array<Mat3, 2> rot_;
};

// --- flow maps -------------------------------------------------------------------

struct FlowJet {
  Vec3 x = Vec3::Zero();
  Vec3 x_dt = Vec3::Zero();
  Mat3 deformation = Mat3::Identity();          // F_ij = d x_i / d x0_j
  std::array<Mat3, 3> hess{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

// x(t, X0) with the derivatives needed to rebuild surface geometry.
class FlowMap {
public:
  virtual ~FlowMap() = default;
  virtual Vec3 map(double t, const Vec3& x0) const = 0;
  virtual Vec3 map_dt(double t, const Vec3& x0) const = 0;
  virtual Mat3 map_dx0(double t, const Vec3& x0) const = 0; // F_ij = d x_i / d x0_j
  // Component Hessians d^2 x_i / d x0 d x0.
  virtual std::array<Mat3, 3> map_d2x0(double t, const Vec3& x0) const = 0;

  virtual FlowJet full_jet(double t, const Vec3& x0) const {
    return FlowJet{map(t, x0), map_dt(t, x0), map_dx0(t, x0), map_d2x0(t, x0)};
  }
};

class AnalyticFlowMap : public FlowMap {
public:
  std::function<Vec3(double, const Vec3&)> position;
  std::function<Vec3(double, const Vec3&)> velocity;
  std::function<Mat3(double, const Vec3&)> deformation; // linear maps: constant in x0

  Vec3 map(double t, const Vec3& x0) const override { return position(t, x0); }
  Vec3 map_dt(double t, const Vec3& x0) const override { return velocity(t, x0); }
  Mat3 map_dx0(double t, const Vec3& x0) const override { return deformation(t, x0); }
  std::array<Mat3, 3> map_d2x0(double, const Vec3&) const override {
    return {Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
  }
};

AnalyticFlowMap make_identity_flow();
AnalyticFlowMap make_shear_flow(); // x = x0 + t z0
AnalyticFlowMap make_oscillating_ellipsoid_flow(); // x = a(t)/a(0) x0

// --- learned flow maps -------------------------------------------------------------

struct FlowComponentSpec {
  int width = 500;
  double r_t = 1.0;
  double r_x = 1.0;
  // Anchor interval per initial coordinate; empty: min/max of the data.
  std::optional<std::array<Vec2, 3>> anchor_intervals;
};

struct FlowLearnOptions {
  double beta = 100.0;
  SolveOptions solver;
  bool force_full_inputs = false; // keep all three spatial inputs per component
  int max_iterations = 50;        // Gauss-Newton cap (nonlinear velocities)
  double tolerance = 1e-12;       // relative residual decrease
  double damping_init = 1e-6;
};

struct FlowFitReport {
  double ode_rms = 0.0;
  double initial_rms = 0.0;
  int iterations = 0; // 0 for the one-shot linear path
  bool used_linear_path = false;
  bool converged = true;
  std::vector<double> residual_history;
  std::array<int, 3> input_dims{0, 0, 0};
  double solve_seconds = 0.0;
};

class LearnedFlowMap : public FlowMap {
public:
  struct Component {
    FeatureLayer layer;        // input (t, selected x0 coordinates)
    VectorXd coeffs;
    std::array<bool, 3> deps;  // which initial coordinates feed this net

    VectorXd inputs_of(double t, const Vec3& x0) const;
  };

  LearnedFlowMap(Component c1, Component c2, Component c3, std::string velocity_id);

  Vec3 map(double t, const Vec3& x0) const override;
  Vec3 map_dt(double t, const Vec3& x0) const override;
  Mat3 map_dx0(double t, const Vec3& x0) const override;
  std::array<Mat3, 3> map_d2x0(double t, const Vec3& x0) const override;
  FlowJet full_jet(double t, const Vec3& x0) const override; // single activation pass

  const Component& component(int i) const { return comp_[i]; }
  const std::string& velocity_id() const { return velocity_id_; }

  void save(std::ostream& out) const;
  static LearnedFlowMap load(std::istream& in);

private:
  std::array<Component, 3> comp_;
  std::string velocity_id_;
};

// Fit the three coordinate networks to the trajectory ODE. Affine velocities
// whose coupling graph is acyclic are solved component-by-component in
// dependency order; cyclic affine couplings are solved as one stacked linear
// system; anything else runs damped Gauss-Newton.
LearnedFlowMap learn_flow(const MatrixXd& initial_points, const VectorXd& times,
                          const VelocityField& velocity,
                          const std::array<FlowComponentSpec, 3>& specs,
                          std::uint64_t seed, const FlowLearnOptions& options = {},
                          FlowFitReport* report = nullptr);

// --- geometry on the evolving surface ------------------------------------------------

struct EvolvingFrame {
  Vec3 x = Vec3::Zero();
  Mat32 tangents = Mat32::Zero();
  Vec3 n = Vec3::Zero();
  double H = 0.0;
  double area_element = 0.0; // |t1 x t2|
  Vec3 v = Vec3::Zero();
  double surface_div_v = 0.0;
};

EvolvingFrame evolving_frame(const FlowMap& flow, const SphereLikeSurface& initial,
                             const VelocityField& velocity, double t, int chart,
                             const Vec2& tp);
EvolvingFrame evolving_frame_at(const FlowMap& flow, const SphereLikeSurface& initial,
                                const VelocityField& velocity, double t, const Vec3& x0);

// --- advection-diffusion on the evolving surface --------------------------------------

struct EvolvingPdeProblem {
  const FlowMap* flow = nullptr;
  const SphereLikeSurface* initial = nullptr;
  VelocityField velocity;
  std::function<double(double, const Vec3&)> f;
  std::function<double(const Vec3&)> u0;
  double beta = 100.0;
};

struct EvolvingSolveResult {
  FeatureLayer layer; // space-time net (t, x, y, z)
  VectorXd coeffs;
  SolveReport report;

  double value(double t, const Vec3& x) const {
    return spacetime_value(layer, coeffs, t, x);
  }
};

EvolvingSolveResult solve_evolving_pde(const EvolvingPdeProblem& problem,
                                       const MatrixXd& initial_points, const VectorXd& times,
                                       int width, double r_t, double r_x,
                                       const AnchorBox& anchor_box, std::uint64_t seed,
                                       const SolveOptions& solver = {});

// --- conservation diagnostics ----------------------------------------------------------

struct ConservationSample {
  double t = 0.0;
  double volume = 0.0;
  double volume_rel_err = 0.0;
  double mass = 0.0;
  double mass_rel_err = 0.0;
};

// V(t) = (1/3) oint x . n ds and m(t) = oint u ds on the reconstructed surface,
// by tensor Gauss-Legendre over the polar chart. Pure post-processing.
std::vector<ConservationSample> conservation_report(
    const FlowMap& flow, const SphereLikeSurface& initial, const VectorXd& times,
    const std::function<double(double, const Vec3&)>* u = nullptr, int order = 32,
    double reference_volume = -1.0, double reference_mass = -1.0);

} // namespace surfrann
