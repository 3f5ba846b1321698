#include "surfrann/assembly.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "surfrann/quadrature.hpp"

namespace surfrann {

namespace {

constexpr int kChunk = 4096;

// Columns of the weight matrix acting on spatial coordinates. A 4-input
// layer is a space-time layer with the time column first.
MatrixXd spatial_weights(const FeatureLayer& layer) {
  if (layer.input_dim() == 4) return layer.weights().rightCols(3);
  if (layer.input_dim() == 3) return layer.weights();
  throw ConfigError("expected a 3- or 4-input feature layer, got input_dim = " +
                    std::to_string(layer.input_dim()));
}

// -(lap - 2H grad.n - n^T hess n) applied featurewise over a chunk:
//   rows = -D2 .* (S - Q^2) + 2 diag(H) (D1 .* Q)
// with S_m = |w_m|^2 and Q = normals * W^T.
void negative_surface_laplacian_rows(const FeatureTables& t, const MatrixXd& q,
                                     const VectorXd& sq_norms, const VectorXd& curvature,
                                     MatrixXd& out) {
  out = -(t.d2.array() * ((-q.array().square()).rowwise() + sq_norms.transpose().array()))
            .matrix();
  VectorXd two_h = 2.0 * curvature;
  out.array() += (t.d1.array() * q.array()).colwise() * two_h.array();
}

struct GroupBuilder {
  std::vector<RowGroup> groups;
  int cursor = 0;

  void add(RowGroupKind kind, int rows, double weight, double measure, int source) {
    groups.push_back(RowGroup{kind, cursor, cursor + rows, weight, measure, source});
    cursor += rows;
  }
};

} // namespace

// --- frame providers ---------------------------------------------------------

FrameProvider levelset_frame_provider(const LevelSetSurface& surface) {
  LevelSetSurface copy = surface;
  return [copy](const Vec3& x) { return frame_at(copy, x); };
}

FrameProvider cloud_frame_provider(const PointCloudSurface& cloud) {
  if (cloud.frames.size() != cloud.size())
    throw ConfigError("cloud_frame_provider: run fit_frames first");
  auto index = std::make_shared<std::unordered_map<std::string, int>>();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3 p = cloud.points.row(i).transpose();
    (*index)[std::string(reinterpret_cast<const char*>(p.data()), 3 * sizeof(double))] =
        static_cast<int>(i);
  }
  auto frames = std::make_shared<std::vector<FittedFrame>>(cloud.frames);
  return [index, frames](const Vec3& x) {
    auto it = index->find(std::string(reinterpret_cast<const char*>(x.data()), 3 * sizeof(double)));
    if (it == index->end())
      throw NumericalError("cloud frames: query point is not a cloud point");
    const FittedFrame& f = frames->at(it->second);
    if (!f.ok) throw NumericalError("cloud frames: rank-deficient fit at the query point");
    SurfaceFrame frame;
    frame.n = f.n;
    frame.P = Mat3::Identity() - f.n * f.n.transpose();
    frame.H = f.H;
    return frame;
  };
}

// --- static level-set assembly -------------------------------------------------

LeastSquaresSystem assemble_static_levelset(const FeatureLayer& layer,
                                            const FrameProvider& frames,
                                            const std::function<double(const Vec3&)>& f,
                                            const MatrixXd& points, FrameFailurePolicy policy,
                                            EmbeddingAssemblyReport* report) {
  if (layer.input_dim() != 3)
    throw ConfigError("assemble_static_levelset: layer must have 3 inputs");
  if (points.cols() != 3) throw ConfigError("assemble_static_levelset: points must be N x 3");

  const int n_total = static_cast<int>(points.rows());
  const int m = layer.width();
  const MatrixXd& w = layer.weights();
  VectorXd sq = w.rowwise().squaredNorm();

  // Resolve frames first so skipped rows are known before sizing the system.
  std::vector<SurfaceFrame> resolved;
  std::vector<int> keep;
  EmbeddingAssemblyReport local;
  resolved.reserve(n_total);
  keep.reserve(n_total);
  for (int i = 0; i < n_total; ++i) {
    try {
      resolved.push_back(frames(points.row(i).transpose()));
      keep.push_back(i);
    } catch (const NumericalError&) {
      if (policy == FrameFailurePolicy::Error) throw;
      local.skipped_rows.push_back(i);
    }
  }
  if (report) *report = local;

  const int n = static_cast<int>(keep.size());
  if (n == 0) throw NumericalError("assemble_static_levelset: every frame failed");

  LeastSquaresSystem system;
  system.A.resize(n, m);
  system.rhs.resize(n);
  for (int begin = 0; begin < n; begin += kChunk) {
    int len = std::min(kChunk, n - begin);
    MatrixXd pts(len, 3), normals(len, 3);
    VectorXd curvature(len);
    for (int i = 0; i < len; ++i) {
      pts.row(i) = points.row(keep[begin + i]);
      normals.row(i) = resolved[begin + i].n.transpose();
      curvature[i] = resolved[begin + i].H;
      system.rhs[begin + i] = f(pts.row(i).transpose());
    }
    FeatureTables t = layer.tables(pts);
    MatrixXd q = normals * w.transpose();
    MatrixXd rows;
    negative_surface_laplacian_rows(t, q, sq, curvature, rows);
    system.A.middleRows(begin, len) = rows;
  }

  GroupBuilder gb;
  gb.add(RowGroupKind::Interior, n, 1.0, 1.0, -1);
  system.groups = gb.groups;
  return system;
}

// --- heat on a static embedded surface ------------------------------------------

LeastSquaresSystem assemble_heat_embedding(const FeatureLayer& layer,
                                           const FrameProvider& frames,
                                           const std::function<double(double, const Vec3&)>& f,
                                           const std::function<double(const Vec3&)>& u0,
                                           const CollocationSet& collocation, double beta,
                                           double alpha) {
  if (layer.input_dim() != 4)
    throw ConfigError("assemble_heat_embedding: layer must have 4 inputs (t, x, y, z)");
  CollocationSet interior = collocation.filtered(PointRole::Interior);
  CollocationSet initial = collocation.filtered(PointRole::Initial);
  if (initial.size() == 0)
    throw ConfigError("assemble_heat_embedding: no initial rows; the problem is ill-posed");
  for (const auto& r : collocation.records)
    if (r.role == PointRole::Boundary)
      throw ConfigError("assemble_heat_embedding: boundary roles are not supported on "
                        "closed level-set surfaces");

  const int ni = static_cast<int>(interior.size());
  const int n0 = static_cast<int>(initial.size());
  const int m = layer.width();
  MatrixXd wx = spatial_weights(layer);
  VectorXd wt = layer.weights().col(0);
  VectorXd sq = wx.rowwise().squaredNorm();

  LeastSquaresSystem system;
  system.A.resize(ni + n0, m);
  system.rhs.resize(ni + n0);

  for (int begin = 0; begin < ni; begin += kChunk) {
    int len = std::min(kChunk, ni - begin);
    MatrixXd pts(len, 4), normals(len, 3);
    VectorXd curvature(len);
    for (int i = 0; i < len; ++i) {
      const CollocationRecord& r = interior.records[begin + i];
      pts(i, 0) = r.t;
      pts.block<1, 3>(i, 1) = r.x.transpose();
      SurfaceFrame frame = frames(r.x);
      normals.row(i) = frame.n.transpose();
      curvature[i] = frame.H;
      system.rhs[begin + i] = f(r.t, r.x);
    }
    FeatureTables t = layer.tables(pts);
    MatrixXd q = normals * wx.transpose();
    MatrixXd rows;
    negative_surface_laplacian_rows(t, q, sq, curvature, rows);
    rows = alpha * rows + (t.d1.array().rowwise() * wt.transpose().array()).matrix();
    system.A.middleRows(begin, len) = rows;
  }

  for (int begin = 0; begin < n0; begin += kChunk) {
    int len = std::min(kChunk, n0 - begin);
    MatrixXd pts(len, 4);
    for (int i = 0; i < len; ++i) {
      const CollocationRecord& r = initial.records[begin + i];
      pts(i, 0) = 0.0;
      pts.block<1, 3>(i, 1) = r.x.transpose();
      system.rhs[ni + begin + i] = beta * u0(r.x);
    }
    FeatureTables t = layer.tables(pts);
    system.A.middleRows(ni + begin, len) = beta * t.value;
  }

  GroupBuilder gb;
  gb.add(RowGroupKind::Interior, ni, 1.0, 1.0, -1);
  gb.add(RowGroupKind::Initial, n0, beta, 1.0, -1);
  system.groups = gb.groups;
  return system;
}

// --- atlas assembly ---------------------------------------------------------------

namespace {

struct ColumnLayout {
  std::vector<int> offset; // per chart
  int total = 0;
};

ColumnLayout column_layout(const AtlasProblem& p) {
  ColumnLayout layout;
  if (p.mode == AtlasMode::GlobalAnsatz) {
    if (p.layers.size() != 1 || p.layers[0].input_dim() != 3)
      throw ConfigError("global-ansatz atlas problem needs exactly one 3-input layer");
    layout.offset.assign(p.atlas->charts.size(), 0);
    layout.total = p.layers[0].width();
  } else {
    if (p.layers.size() != p.atlas->charts.size())
      throw ConfigError("penalized atlas problem needs one layer per chart");
    int off = 0;
    for (const FeatureLayer& layer : p.layers) {
      if (layer.input_dim() != 2)
        throw ConfigError("penalized atlas layers must have 2 inputs");
      layout.offset.push_back(off);
      off += layer.width();
    }
    layout.total = off;
  }
  return layout;
}

int default_edge_points(const AtlasProblem& p, std::size_t n_col) {
  if (p.edge_points_per_interface > 0) return p.edge_points_per_interface;
  return std::max(4, static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(n_col)))));
}

// Chart-operator rows for the global ansatz: features live on embedded
// coordinates and are pulled back through the chart.
void global_interior_rows(const FeatureLayer& layer, const Chart& chart,
                          const std::vector<const CollocationRecord*>& records,
                          MatrixXd& rows, VectorXd& rhs,
                          const std::function<double(const Vec3&)>& f, double alpha,
                          const VectorXd* wt) {
  const int len = static_cast<int>(records.size());
  const int m = layer.width();
  MatrixXd wx = spatial_weights(layer);
  const bool spacetime = wt != nullptr;

  MatrixXd pts(len, spacetime ? 4 : 3);
  MatrixXd t1(len, 3), t2(len, 3), x11(len, 3), x12(len, 3), x22(len, 3);
  VectorXd g11(len), g12(len), g22(len), b1(len), b2(len);
  for (int i = 0; i < len; ++i) {
    const CollocationRecord& r = *records[i];
    Vec2 xi = chart.wrap(r.xi);
    Vec3 x = chart.position(xi);
    if (spacetime) {
      pts(i, 0) = r.t;
      pts.block<1, 3>(i, 1) = x.transpose();
    } else {
      pts.row(i) = x.transpose();
    }
    Mat32 tan = chart.tangents(xi);
    std::array<Vec3, 3> d2 = chart.has_second()
                                 ? chart.second(xi)
                                 : std::array<Vec3, 3>{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    if (!chart.has_second())
      throw ConfigError("global-ansatz assembly requires analytic chart second derivatives");
    t1.row(i) = tan.col(0).transpose();
    t2.row(i) = tan.col(1).transpose();
    x11.row(i) = d2[0].transpose();
    x12.row(i) = d2[1].transpose();
    x22.row(i) = d2[2].transpose();
    MetricData metric = metric_at(chart, xi);
    g11[i] = metric.g_inv(0, 0);
    g12[i] = metric.g_inv(0, 1);
    g22[i] = metric.g_inv(1, 1);
    b1[i] = metric.drift[0];
    b2[i] = metric.drift[1];
    rhs[i] = spacetime ? 0.0 : f(x);
  }

  FeatureTables t = layer.tables(pts);
  MatrixXd p1 = t1 * wx.transpose();
  MatrixXd p2 = t2 * wx.transpose();
  MatrixXd h11 = x11 * wx.transpose();
  MatrixXd h12 = x12 * wx.transpose();
  MatrixXd h22 = x22 * wx.transpose();

  VectorXd g12x2 = 2.0 * g12;
  Eigen::ArrayXXd principal = p1.array().square().colwise() * g11.array() +
                              (p1.array() * p2.array()).colwise() * g12x2.array() +
                              p2.array().square().colwise() * g22.array();
  Eigen::ArrayXXd first = h11.array().colwise() * g11.array() +
                          h12.array().colwise() * g12x2.array() +
                          h22.array().colwise() * g22.array() +
                          p1.array().colwise() * b1.array() +
                          p2.array().colwise() * b2.array();
  rows = (-(t.d2.array() * principal) - t.d1.array() * first).matrix() * alpha;
  if (spacetime)
    rows.array() += t.d1.array().rowwise() * wt->transpose().array();
  (void)m;
}

void penalized_interior_rows(const FeatureLayer& layer, const Chart& chart,
                             const std::vector<const CollocationRecord*>& records,
                             MatrixXd& rows, VectorXd& rhs,
                             const std::function<double(const Vec3&)>& f) {
  const int len = static_cast<int>(records.size());
  const MatrixXd& w = layer.weights();
  VectorXd w1sq = w.col(0).array().square();
  VectorXd w12 = (w.col(0).array() * w.col(1).array()).matrix();
  VectorXd w2sq = w.col(1).array().square();

  MatrixXd pts(len, 2);
  VectorXd g11(len), g12(len), g22(len), b1(len), b2(len);
  for (int i = 0; i < len; ++i) {
    const CollocationRecord& r = *records[i];
    Vec2 xi = chart.wrap(r.xi);
    pts.row(i) = xi.transpose();
    MetricData metric = metric_at(chart, xi);
    g11[i] = metric.g_inv(0, 0);
    g12[i] = metric.g_inv(0, 1);
    g22[i] = metric.g_inv(1, 1);
    b1[i] = metric.drift[0];
    b2[i] = metric.drift[1];
    rhs[i] = f(chart.position(xi));
  }
  FeatureTables t = layer.tables(pts);
  MatrixXd principal = g11 * w1sq.transpose() + 2.0 * (g12 * w12.transpose()) +
                       g22 * w2sq.transpose();
  MatrixXd first = b1 * w.col(0).transpose() + b2 * w.col(1).transpose();
  rows = -(t.d2.array() * principal.array()).matrix() -
         (t.d1.array() * first.array()).matrix();
}

} // namespace

LeastSquaresSystem assemble_static_atlas(const AtlasProblem& problem,
                                         const CollocationSet& interior) {
  if (!problem.atlas) throw ConfigError("atlas problem: atlas pointer not set");
  const Atlas& atlas = *problem.atlas;
  ColumnLayout layout = column_layout(problem);

  // bucket interior records per chart
  std::vector<std::vector<const CollocationRecord*>> per_chart(atlas.charts.size());
  for (const auto& r : interior.records) {
    if (r.role != PointRole::Interior) continue;
    if (r.chart < 0 || r.chart >= static_cast<int>(atlas.charts.size()))
      throw ConfigError("atlas assembly: record references unknown chart " +
                        std::to_string(r.chart));
    per_chart[r.chart].push_back(&r);
  }
  std::size_t n_interior = 0;
  for (const auto& v : per_chart) n_interior += v.size();
  if (n_interior == 0) throw ConfigError("atlas assembly: no interior records");

  const bool emit_mismatch =
      problem.mode == AtlasMode::Penalized || problem.include_mismatch_rows_global;
  const int edge_pts = default_edge_points(problem, n_interior);
  const int n_mismatch =
      emit_mismatch ? static_cast<int>(atlas.interfaces.size()) * edge_pts * 2 : 0;

  LeastSquaresSystem system;
  system.A = MatrixXd::Zero(static_cast<int>(n_interior) + n_mismatch, layout.total);
  system.rhs = VectorXd::Zero(system.A.rows());

  GroupBuilder gb;
  for (std::size_t ci = 0; ci < atlas.charts.size(); ++ci) {
    const auto& records = per_chart[ci];
    if (records.empty()) continue;
    const Chart& chart = atlas.charts[ci];
    const FeatureLayer& layer =
        problem.mode == AtlasMode::GlobalAnsatz ? problem.layers[0] : problem.layers[ci];

    for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
      std::size_t len = std::min<std::size_t>(kChunk, records.size() - begin);
      std::vector<const CollocationRecord*> slice(records.begin() + begin,
                                                  records.begin() + begin + len);
      MatrixXd rows;
      VectorXd rhs(static_cast<int>(len));
      if (problem.mode == AtlasMode::GlobalAnsatz)
        global_interior_rows(layer, chart, slice, rows, rhs, problem.f, 1.0, nullptr);
      else
        penalized_interior_rows(layer, chart, slice, rows, rhs, problem.f);
      system.A.block(gb.cursor + static_cast<int>(begin), layout.offset[ci],
                     static_cast<int>(len), layer.width()) = rows;
      system.rhs.segment(gb.cursor + static_cast<int>(begin), static_cast<int>(len)) = rhs;
    }
    double measure = chart.extent().prod();
    gb.add(RowGroupKind::Interior, static_cast<int>(records.size()), 1.0, measure,
           static_cast<int>(ci));
  }

  if (emit_mismatch) {
    const double sqrt_eta = std::sqrt(problem.eta);
    for (std::size_t ei = 0; ei < atlas.interfaces.size(); ++ei) {
      const Interface& e = atlas.interfaces[ei];
      const Chart& ca = atlas.charts[e.chart_a];
      const Chart& cb = atlas.charts[e.chart_b];
      Vec2 nu = e.edge_a.outward_normal();
      int row = gb.cursor;
      for (double s : uniform_edge_params(edge_pts)) {
        Vec2 xa = e.edge_a.point(s);
        Vec2 xb = e.map_ab(xa);
        Mat2 dphi = e.map_ab_jacobian(xa);
        Vec2 nu_b = dphi * nu;

        if (problem.mode == AtlasMode::Penalized) {
          const FeatureLayer& la = problem.layers[e.chart_a];
          const FeatureLayer& lb = problem.layers[e.chart_b];
          FeatureTables ta = la.tables(xa.transpose());
          FeatureTables tb = lb.tables(xb.transpose());
          // value mismatch
          system.A.block(row, layout.offset[e.chart_a], 1, la.width()) +=
              sqrt_eta * ta.value.row(0);
          system.A.block(row, layout.offset[e.chart_b], 1, lb.width()) -=
              sqrt_eta * tb.value.row(0);
          // normal-derivative mismatch, chain-rule consistent on side b
          system.A.block(row + 1, layout.offset[e.chart_a], 1, la.width()) +=
              sqrt_eta *
              (ta.d1.row(0).array() * (la.weights() * nu).transpose().array()).matrix();
          system.A.block(row + 1, layout.offset[e.chart_b], 1, lb.width()) -=
              sqrt_eta *
              (tb.d1.row(0).array() * (lb.weights() * nu_b).transpose().array()).matrix();
        } else {
          const FeatureLayer& layer = problem.layers[0];
          Vec3 pa = ca.position(ca.wrap(xa));
          Vec3 pb = cb.position(cb.wrap(xb));
          FeatureTables ta = layer.tables(pa.transpose());
          FeatureTables tb = layer.tables(pb.transpose());
          system.A.row(row) += sqrt_eta * (ta.value.row(0) - tb.value.row(0));
          Vec3 da = ca.tangents(ca.wrap(xa)) * nu;
          Vec3 db = cb.tangents(cb.wrap(xb)) * nu_b;
          system.A.row(row + 1) +=
              sqrt_eta * ((ta.d1.row(0).array() * (layer.weights() * da).transpose().array()) -
                          (tb.d1.row(0).array() * (layer.weights() * db).transpose().array()))
                             .matrix();
        }
        row += 2;
      }
      gb.add(RowGroupKind::Interface, edge_pts * 2, sqrt_eta, e.edge_a.length(),
             static_cast<int>(ei));
    }
  }

  system.groups = gb.groups;
  return system;
}

std::function<double(const Vec3&)> global_solution(const AtlasProblem& problem,
                                                   const VectorXd& coeffs) {
  if (problem.mode != AtlasMode::GlobalAnsatz)
    throw ConfigError("global_solution: problem is not in global-ansatz mode");
  FeatureLayer layer = problem.layers[0];
  return [layer, coeffs](const Vec3& x) { return layer.combine_value(coeffs, x); };
}

BrokenFn atlas_solution(const AtlasProblem& problem, const VectorXd& coeffs) {
  const Atlas* atlas = problem.atlas;
  BrokenFn fn;
  if (problem.mode == AtlasMode::GlobalAnsatz) {
    FeatureLayer layer = problem.layers[0];
    fn.value = [atlas, layer, coeffs](int chart, const Vec2& xi) {
      return layer.combine_value(coeffs, atlas->charts[chart].position(xi));
    };
    fn.grad = [atlas, layer, coeffs](int chart, const Vec2& xi) -> Vec2 {
      const Chart& c = atlas->charts[chart];
      CombinationJet jet = layer.eval_linear_combination(coeffs, c.position(xi).transpose());
      return c.tangents(xi).transpose() * Vec3(jet.grad.row(0).transpose());
    };
  } else {
    std::vector<FeatureLayer> layers = problem.layers;
    std::vector<int> offsets;
    int off = 0;
    for (const auto& l : layers) {
      offsets.push_back(off);
      off += l.width();
    }
    auto coeff_of = [coeffs, offsets, layers](int chart) -> VectorXd {
      return coeffs.segment(offsets[chart], layers[chart].width());
    };
    fn.value = [layers, coeff_of](int chart, const Vec2& xi) {
      return layers[chart].combine_value(coeff_of(chart), xi);
    };
    fn.grad = [layers, coeff_of](int chart, const Vec2& xi) -> Vec2 {
      CombinationJet jet =
          layers[chart].eval_linear_combination(coeff_of(chart), xi.transpose());
      return jet.grad.row(0).transpose();
    };
  }
  return fn;
}

StaticAtlasDiagnostics atlas_diagnostics(const AtlasProblem& problem,
                                         const LeastSquaresSystem& system,
                                         const VectorXd& coeffs, int order) {
  const Atlas& atlas = *problem.atlas;
  StaticAtlasDiagnostics out;

  // Empirical loss from the assembled residual. Folded group weights are
  // exactly the square roots of the loss multipliers, so the weighted
  // residual squares are the loss terms directly.
  VectorXd residual = system.A * coeffs - system.rhs;
  for (const RowGroup& g : system.groups) {
    int pts = g.kind == RowGroupKind::Interface ? g.rows() / 2 : g.rows();
    if (pts == 0) continue;
    out.empirical_loss +=
        g.measure / pts * residual.segment(g.begin, g.rows()).squaredNorm();
  }

  // Population loss by tensor quadrature in parameter space.
  for (std::size_t ci = 0; ci < atlas.charts.size(); ++ci) {
    const Chart& chart = atlas.charts[ci];
    QuadratureRule q1 = gauss_legendre_on(order, chart.lo[0], chart.hi[0]);
    QuadratureRule q2 = gauss_legendre_on(order, chart.lo[1], chart.hi[1]);
    const FeatureLayer& layer =
        problem.mode == AtlasMode::GlobalAnsatz ? problem.layers[0] : problem.layers[ci];
    VectorXd c = coeffs;
    int offset = 0;
    if (problem.mode == AtlasMode::Penalized) {
      for (std::size_t k = 0; k < ci; ++k) offset += problem.layers[k].width();
      c = coeffs.segment(offset, layer.width());
    }
    for (Eigen::Index a = 0; a < q1.nodes.size(); ++a) {
      for (Eigen::Index b = 0; b < q2.nodes.size(); ++b) {
        Vec2 xi(q1.nodes[a], q2.nodes[b]);
        MetricData metric = metric_at(chart, xi);
        double gv;
        if (problem.mode == AtlasMode::GlobalAnsatz) {
          Vec3 x = chart.position(xi);
          CombinationJet jet = layer.eval_linear_combination(c, x.transpose());
          AmbientJet ambient{jet.values[0], jet.grad.row(0).transpose(), jet.hess[0]};
          gv = chart_operator_apply(metric, pullback_jet(chart, xi, ambient));
        } else {
          CombinationJet jet = layer.eval_linear_combination(c, xi.transpose());
          ChartJet cj{jet.values[0], jet.grad.row(0).transpose(), jet.hess[0]};
          gv = chart_operator_apply(metric, cj);
        }
        double res = gv - problem.f(chart.position(xi));
        out.population_loss += q1.weights[a] * q2.weights[b] * res * res;
      }
    }
  }

  BrokenFn v = atlas_solution(problem, coeffs);
  for (std::size_t ei = 0; ei < atlas.interfaces.size(); ++ei) {
    const Interface& e = atlas.interfaces[ei];
    QuadratureRule q = gauss_legendre_on(order, 0.0, 1.0);
    double edge_term = 0.0;
    for (Eigen::Index i = 0; i < q.nodes.size(); ++i) {
      auto samples = interface_mismatch(atlas, static_cast<int>(ei), v, {q.nodes[i]});
      const MismatchSample& ms = samples[0];
      edge_term += q.weights[i] * (ms.value * ms.value + ms.normal * ms.normal);
    }
    out.mismatch_norm_sq += edge_term * e.edge_a.length(); // d l = |edge| d s
  }
  out.population_loss += problem.eta * out.mismatch_norm_sq;
  return out;
}

// --- heat on an atlas (global space-time ansatz) ---------------------------------

LeastSquaresSystem assemble_heat_atlas(const FeatureLayer& layer, const Atlas& atlas,
                                       const std::function<double(double, const Vec3&)>& f,
                                       const std::function<double(const Vec3&)>& u0,
                                       const CollocationSet& collocation, double beta,
                                       double alpha, const RobinBc* robin) {
  if (layer.input_dim() != 4)
    throw ConfigError("assemble_heat_atlas: layer must have 4 inputs (t, x, y, z)");
  CollocationSet interior = collocation.filtered(PointRole::Interior);
  CollocationSet initial = collocation.filtered(PointRole::Initial);
  CollocationSet boundary = collocation.filtered(PointRole::Boundary);
  if (initial.size() == 0)
    throw ConfigError("assemble_heat_atlas: no initial rows; the problem is ill-posed");
  if (boundary.size() > 0 && robin == nullptr)
    throw ConfigError("assemble_heat_atlas: boundary records given without a Robin condition");

  const int m = layer.width();
  MatrixXd wx = spatial_weights(layer);
  VectorXd wt = layer.weights().col(0);

  std::vector<std::vector<const CollocationRecord*>> per_chart(atlas.charts.size());
  for (const auto& r : interior.records) per_chart.at(r.chart).push_back(&r);

  const int n_rows =
      static_cast<int>(interior.size() + initial.size() + boundary.size());
  LeastSquaresSystem system;
  system.A = MatrixXd::Zero(n_rows, m);
  system.rhs = VectorXd::Zero(n_rows);
  GroupBuilder gb;

  for (std::size_t ci = 0; ci < atlas.charts.size(); ++ci) {
    const auto& records = per_chart[ci];
    if (records.empty()) continue;
    const Chart& chart = atlas.charts[ci];
    for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
      std::size_t len = std::min<std::size_t>(kChunk, records.size() - begin);
      std::vector<const CollocationRecord*> slice(records.begin() + begin,
                                                  records.begin() + begin + len);
      MatrixXd rows;
      VectorXd rhs(static_cast<int>(len));
      global_interior_rows(layer, chart, slice, rows, rhs, nullptr, alpha, &wt);
      for (std::size_t i = 0; i < len; ++i) {
        const CollocationRecord& r = *slice[i];
        rhs[static_cast<int>(i)] = f(r.t, chart.position(chart.wrap(r.xi)));
      }
      system.A.middleRows(gb.cursor + static_cast<int>(begin), static_cast<int>(len)) = rows;
      system.rhs.segment(gb.cursor + static_cast<int>(begin), static_cast<int>(len)) = rhs;
    }
    gb.add(RowGroupKind::Interior, static_cast<int>(records.size()), 1.0,
           chart.extent().prod(), static_cast<int>(ci));
  }

  if (initial.size() > 0) {
    int base = gb.cursor;
    MatrixXd pts(static_cast<int>(initial.size()), 4);
    for (std::size_t i = 0; i < initial.size(); ++i) {
      const CollocationRecord& r = initial.records[i];
      Vec3 x = r.chart >= 0 ? atlas.charts[r.chart].position(atlas.charts[r.chart].wrap(r.xi))
                            : r.x;
      pts(static_cast<int>(i), 0) = 0.0;
      pts.block<1, 3>(static_cast<int>(i), 1) = x.transpose();
      system.rhs[base + static_cast<int>(i)] = beta * u0(x);
    }
    FeatureTables t = layer.tables(pts);
    system.A.middleRows(base, static_cast<int>(initial.size())) = beta * t.value;
    gb.add(RowGroupKind::Initial, static_cast<int>(initial.size()), beta, 1.0, -1);
  }

  if (boundary.size() > 0) {
    int base = gb.cursor;
    for (std::size_t i = 0; i < boundary.size(); ++i) {
      const CollocationRecord& r = boundary.records[i];
      const Chart& chart = atlas.charts.at(r.chart);
      Vec2 xi = r.xi;
      // locate the non-periodic domain edge this record sits on
      int axis = -1, sign = 0;
      for (int k = 0; k < 2; ++k) {
        if (chart.periodic[k]) continue;
        if (std::abs(xi[k] - chart.lo[k]) < 1e-10) { axis = k; sign = -1; }
        if (std::abs(xi[k] - chart.hi[k]) < 1e-10) { axis = k; sign = +1; }
      }
      if (axis < 0)
        throw ConfigError("assemble_heat_atlas: boundary record is not on a chart edge");
      Vec2 nu = Vec2::Zero();
      nu[axis] = sign;
      Vec2 tang = Vec2::Zero();
      tang[1 - axis] = 1.0;

      Mat32 tan = chart.tangents(xi);
      Vec3 x = chart.position(xi);
      Vec3 normal = chart_normal(chart, xi);
      Vec3 tau = tan * tang;
      Vec3 mu = normal.cross(tau).normalized();
      if (mu.dot(tan * nu) < 0) mu = -mu;

      MatrixXd pt(1, 4);
      pt(0, 0) = r.t;
      pt.block<1, 3>(0, 1) = x.transpose();
      FeatureTables t = layer.tables(pt);
      system.A.row(base + static_cast<int>(i)) =
          robin->value_coef * t.value.row(0) +
          robin->conormal_coef *
              (t.d1.row(0).array() * (wx * mu).transpose().array()).matrix();
      system.rhs[base + static_cast<int>(i)] = robin->rhs(r.t, x);
    }
    gb.add(RowGroupKind::Boundary, static_cast<int>(boundary.size()), 1.0, 1.0, -1);
  }

  system.groups = gb.groups;
  return system;
}

double spacetime_value(const FeatureLayer& layer, const VectorXd& coeffs, double t,
                       const Vec3& x) {
  Eigen::Matrix<double, 1, 4> p;
  p << t, x[0], x[1], x[2];
  return layer.combine_value(coeffs, p.transpose());
}

VectorXd spacetime_values(const FeatureLayer& layer, const VectorXd& coeffs,
                          const VectorXd& times, const MatrixXd& points) {
  const int n = static_cast<int>(points.rows());
  VectorXd out(n);
  for (int begin = 0; begin < n; begin += kChunk) {
    int len = std::min(kChunk, n - begin);
    MatrixXd pts(len, 4);
    pts.col(0) = times.segment(begin, len);
    pts.rightCols(3) = points.middleRows(begin, len);
    FeatureTables t = layer.tables(pts);
    out.segment(begin, len) = t.value * coeffs;
  }
  return out;
}

// --- error metrics ------------------------------------------------------------------

ErrorMetric relative_l2_error(const VectorXd& u_num, const VectorXd& u_exact, ConstantFix fix,
                              int reference_index,
                              std::optional<std::pair<double, double>> means) {
  if (u_num.size() != u_exact.size())
    throw ConfigError("relative_l2_error: size mismatch");
  if (u_num.size() == 0) throw ConfigError("relative_l2_error: empty samples");

  VectorXd num = u_num, exact = u_exact;
  switch (fix) {
    case ConstantFix::None:
      break;
    case ConstantFix::ReferencePoint:
      num.array() += exact[reference_index] - num[reference_index];
      break;
    case ConstantFix::MeanZero: {
      double mn = means ? means->first : num.mean();
      double me = means ? means->second : exact.mean();
      num.array() -= mn;
      exact.array() -= me;
      break;
    }
  }

  ErrorMetric metric;
  double denom = exact.norm();
  double err = (num - exact).norm();
  if (denom == 0.0) {
    metric.absolute_fallback = true;
    metric.value = err;
  } else {
    metric.value = err / denom;
  }
  return metric;
}

} // namespace surfrann
