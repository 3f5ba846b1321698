#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surfrann/atlas.hpp"
#include "surfrann/feature_layer.hpp"
#include "surfrann/levelset.hpp"
#include "surfrann/pointcloud.hpp"
#include "surfrann/sampling.hpp"

namespace surfrann {

// --- linear system ----------------------------------------------------------

enum class RowGroupKind { Interior, Interface, Initial, Boundary };

// Contiguous block of rows sharing a role. `weight` is already folded into
// A and rhs; `measure` is the parameter-domain measure behind the block
// (|D_i|, edge length, ...) used by the empirical-loss diagnostic.
struct RowGroup {
  RowGroupKind kind = RowGroupKind::Interior;
  int begin = 0;
  int end = 0;
  double weight = 1.0;
  double measure = 1.0;
  int source = -1; // chart index or interface index

  int rows() const { return end - begin; }
};

struct LeastSquaresSystem {
  MatrixXd A;
  VectorXd rhs;
  std::vector<RowGroup> groups;
};

void write_system(const std::string& path, const LeastSquaresSystem& system);
LeastSquaresSystem read_system(const std::string& path);

// --- dense minimum-norm least-squares solve ----------------------------------

struct SolveOptions {
  // Singular values below rcond * sigma_max are truncated.
  // Negative: machine epsilon * max(rows, cols).
  double rcond = -1.0;
};

struct SolveReport {
  VectorXd coefficients;
  double residual_norm = 0.0; // ||A c - rhs||_2 recomputed against the input
  int effective_rank = 0;
  double sigma_max = 0.0;
  double truncation_threshold = 0.0;
  double rcond_used = 0.0;
  double wall_seconds = 0.0;
};

// Truncated-SVD pseudoinverse solve (LAPACK dgelsd); tall systems are first
// reduced by a Householder QR so the SVD runs on the n x n triangle.
SolveReport solve(const LeastSquaresSystem& system, const SolveOptions& options = {});

// --- static Laplace-Beltrami on an atlas -------------------------------------

enum class AtlasMode { Penalized, GlobalAnsatz };

struct AtlasProblem {
  const Atlas* atlas = nullptr;
  AtlasMode mode = AtlasMode::GlobalAnsatz;
  // Penalized: one 2-input layer per chart. Global: exactly one 3-input layer.
  std::vector<FeatureLayer> layers;
  std::function<double(const Vec3&)> f;
  double eta = 1.0;
  int edge_points_per_interface = -1; // default 2 sqrt(N_col)
  // Global-ansatz mismatch rows vanish identically; include them only to
  // check that they do not move the solution.
  bool include_mismatch_rows_global = false;
};

LeastSquaresSystem assemble_static_atlas(const AtlasProblem& problem,
                                         const CollocationSet& interior);

// Solution evaluators for a solved atlas problem.
BrokenFn atlas_solution(const AtlasProblem& problem, const VectorXd& coeffs);
std::function<double(const Vec3&)> global_solution(const AtlasProblem& problem,
                                                   const VectorXd& coeffs);

struct StaticAtlasDiagnostics {
  double empirical_loss = 0.0;   // J-hat: measure-weighted mean squared residuals
  double population_loss = 0.0;  // quadrature estimate of the continuous loss
  double mismatch_norm_sq = 0.0; // ||B v||_Z^2 (without eta)
};

StaticAtlasDiagnostics atlas_diagnostics(const AtlasProblem& problem,
                                         const LeastSquaresSystem& system,
                                         const VectorXd& coeffs, int order = 32);

// --- static Laplace-Beltrami through the embedding identities ----------------

using FrameProvider = std::function<SurfaceFrame(const Vec3&)>;

FrameProvider levelset_frame_provider(const LevelSetSurface& surface);
// Frames fitted per cloud point, looked up by exact coordinates.
FrameProvider cloud_frame_provider(const PointCloudSurface& cloud);

enum class FrameFailurePolicy { Error, SkipRow };

struct EmbeddingAssemblyReport {
  std::vector<int> skipped_rows;
};

// Rows: -(lap psi - 2H grad psi . n - n^T hess psi n) = f(X).
LeastSquaresSystem assemble_static_levelset(const FeatureLayer& layer,
                                            const FrameProvider& frames,
                                            const std::function<double(const Vec3&)>& f,
                                            const MatrixXd& points,
                                            FrameFailurePolicy policy = FrameFailurePolicy::Error,
                                            EmbeddingAssemblyReport* report = nullptr);

// --- heat equation ------------------------------------------------------------

// Space-time layer (t, x, y, z); interior rows d_t psi + alpha * (-lap_G psi),
// initial rows beta * psi(0, X). Geometry is static.
LeastSquaresSystem assemble_heat_embedding(const FeatureLayer& layer,
                                           const FrameProvider& frames,
                                           const std::function<double(double, const Vec3&)>& f,
                                           const std::function<double(const Vec3&)>& u0,
                                           const CollocationSet& collocation,
                                           double beta, double alpha = 1.0);

struct RobinBc {
  double value_coef = 1.0;
  double conormal_coef = 1.0;
  std::function<double(double, const Vec3&)> rhs;
};

// Global space-time ansatz on an atlas: interior rows d_t u + alpha G_i u = f,
// initial rows beta u(0, .), optional Robin rows u + d_mu u = g on boundary
// records (co-normal computed from the chart).
LeastSquaresSystem assemble_heat_atlas(const FeatureLayer& layer, const Atlas& atlas,
                                       const std::function<double(double, const Vec3&)>& f,
                                       const std::function<double(const Vec3&)>& u0,
                                       const CollocationSet& collocation, double beta,
                                       double alpha = 1.0, const RobinBc* robin = nullptr);

// Space-time network evaluation u(t, X) for a 4-input layer.
double spacetime_value(const FeatureLayer& layer, const VectorXd& coeffs, double t,
                       const Vec3& x);
VectorXd spacetime_values(const FeatureLayer& layer, const VectorXd& coeffs,
                          const VectorXd& times, const MatrixXd& points);

// --- error metrics -------------------------------------------------------------

enum class ConstantFix { None, ReferencePoint, MeanZero };

struct ErrorMetric {
  double value = 0.0;
  bool absolute_fallback = false; // ||u_exact|| = 0: absolute error reported
};

// Relative discrete l2 error with optional constant-mode removal.
// ReferencePoint: u~ = u_num - u_num[ref] + u_exact[ref].
// MeanZero: subtract the supplied means, or the discrete sample means.
ErrorMetric relative_l2_error(const VectorXd& u_num, const VectorXd& u_exact,
                              ConstantFix fix = ConstantFix::None, int reference_index = 0,
                              std::optional<std::pair<double, double>> means = std::nullopt);

} // namespace surfrann
