#include "surfrann/evolving.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "surfrann/builtin_surfaces.hpp"
#include "surfrann/quadrature.hpp"
#include "surfrann/rng.hpp"
#include "surfrann/sampling.hpp"

namespace surfrann {

// --- velocity fields ------------------------------------------------------------

VelocityField make_zero_velocity() {
  VelocityField v;
  v.id = "zero";
  v.value = [](double, const Vec3&) { return Vec3(Vec3::Zero()); };
  v.jacobian = [](double, const Vec3&) { return Mat3(Mat3::Zero()); };
  v.affine = true;
  v.affine_matrix = [](double) { return Mat3(Mat3::Zero()); };
  v.affine_offset = [](double) { return Vec3(Vec3::Zero()); };
  return v;
}

VelocityField make_shear_velocity() {
  VelocityField v;
  v.id = "shear";
  Mat3 a = Mat3::Zero();
  a(0, 2) = 1.0;
  v.value = [](double, const Vec3& x) { return Vec3(x[2], 0.0, 0.0); };
  v.jacobian = [a](double, const Vec3&) { return a; };
  v.affine = true;
  v.affine_matrix = [a](double) { return a; };
  v.affine_offset = [](double) { return Vec3(Vec3::Zero()); };
  return v;
}

VelocityField make_oscillating_ellipsoid_velocity() {
  VelocityField v;
  v.id = "oscillating_ellipsoid";
  auto rate = [](double t) {
    return oscillating_ellipsoid_a_dt(t) / oscillating_ellipsoid_a(t);
  };
  v.value = [rate](double t, const Vec3& x) { return Vec3(rate(t) * x[0], 0.0, 0.0); };
  v.jacobian = [rate](double t, const Vec3&) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = rate(t);
    return j;
  };
  v.affine = true;
  v.affine_matrix = [rate](double t) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = rate(t);
    return j;
  };
  v.affine_offset = [](double) { return Vec3(Vec3::Zero()); };
  return v;
}

VelocityField make_uniform_expansion_velocity(double rate) {
  VelocityField v;
  v.id = "uniform_expansion";
  v.value = [rate](double, const Vec3& x) { return Vec3(rate * x); };
  v.jacobian = [rate](double, const Vec3&) { return Mat3(rate * Mat3::Identity()); };
  v.affine = true;
  v.affine_matrix = [rate](double) { return Mat3(rate * Mat3::Identity()); };
  v.affine_offset = [](double) { return Vec3(Vec3::Zero()); };
  return v;
}

VelocityField make_rotation_velocity() {
  VelocityField v;
  v.id = "rotation";
  Mat3 a = Mat3::Zero();
  a(0, 1) = -1.0;
  a(1, 0) = 1.0;
  v.value = [](double, const Vec3& x) { return Vec3(-x[1], x[0], 0.0); };
  v.jacobian = [a](double, const Vec3&) { return a; };
  v.affine = true;
  v.affine_matrix = [a](double) { return a; };
  v.affine_offset = [](double) { return Vec3(Vec3::Zero()); };
  return v;
}

std::optional<VelocityField> velocity_registry(const std::string& id) {
  if (id == "zero") return make_zero_velocity();
  if (id == "shear") return make_shear_velocity();
  if (id == "oscillating_ellipsoid") return make_oscillating_ellipsoid_velocity();
  if (id == "uniform_expansion") return make_uniform_expansion_velocity();
  if (id == "rotation") return make_rotation_velocity();
  return std::nullopt;
}

// --- initial surfaces -------------------------------------------------------------

SphereLikeSurface::SphereLikeSurface(const Vec3& semi_axes) : semi_axes_(semi_axes) {
  for (int k = 0; k < 3; ++k)
    if (!(semi_axes[k] > 0)) throw ConfigError("SphereLikeSurface: semi-axes must be positive");
  rot_[0] = Mat3::Identity();
  rot_[1] << 0, 0, 1, 0, 1, 0, -1, 0, 0; // proper rotation, z pole -> x axis
}

double SphereLikeSurface::volume() const {
  return 4.0 / 3.0 * M_PI * semi_axes_.prod();
}

namespace {
Vec3 sph_dir(const Vec2& tp) {
  return Vec3(std::sin(tp[0]) * std::cos(tp[1]), std::sin(tp[0]) * std::sin(tp[1]),
              std::cos(tp[0]));
}
} // namespace

Vec3 SphereLikeSurface::position(int chart, const Vec2& tp) const {
  return semi_axes_.asDiagonal() * (rot_.at(chart) * sph_dir(tp));
}

Mat32 SphereLikeSurface::tangents(int chart, const Vec2& tp) const {
  double st = std::sin(tp[0]), ct = std::cos(tp[0]);
  double sp = std::sin(tp[1]), cp = std::cos(tp[1]);
  Mat32 t;
  t.col(0) = semi_axes_.asDiagonal() * (rot_.at(chart) * Vec3(ct * cp, ct * sp, -st));
  t.col(1) = semi_axes_.asDiagonal() * (rot_.at(chart) * Vec3(-st * sp, st * cp, 0.0));
  return t;
}

std::array<Vec3, 3> SphereLikeSurface::second(int chart, const Vec2& tp) const {
  double st = std::sin(tp[0]), ct = std::cos(tp[0]);
  double sp = std::sin(tp[1]), cp = std::cos(tp[1]);
  Mat3 m = semi_axes_.asDiagonal() * rot_.at(chart);
  std::array<Vec3, 3> d2;
  d2[0] = m * Vec3(-st * cp, -st * sp, -ct);
  d2[1] = m * Vec3(-ct * sp, ct * cp, 0.0);
  d2[2] = m * Vec3(-st * cp, -st * sp, 0.0);
  return d2;
}

std::pair<int, Vec2> SphereLikeSurface::param_of(const Vec3& x0) const {
  Vec3 d = x0.cwiseQuotient(semi_axes_);
  double len = d.norm();
  if (!(len > 1e-12)) throw NumericalError("param_of: point at the origin");
  d /= len;
  int chart = std::abs(d[2]) <= 0.75 ? 0 : 1;
  Vec3 s = rot_.at(chart).transpose() * d;
  double theta = std::acos(std::clamp(s[2], -1.0, 1.0));
  double phi = std::atan2(s[1], s[0]);
  if (phi < 0) phi += 2.0 * M_PI;
  return {chart, Vec2(theta, phi)};
}

MatrixXd SphereLikeSurface::sample_fibonacci(int count, std::uint64_t seed) const {
  return fibonacci_surface(semi_axes_, count, seed);
}

// --- analytic flows ----------------------------------------------------------------

AnalyticFlowMap make_identity_flow() {
  AnalyticFlowMap f;
  f.position = [](double, const Vec3& x0) { return x0; };
  f.velocity = [](double, const Vec3&) { return Vec3(Vec3::Zero()); };
  f.deformation = [](double, const Vec3&) { return Mat3(Mat3::Identity()); };
  return f;
}

AnalyticFlowMap make_shear_flow() {
  AnalyticFlowMap f;
  f.position = [](double t, const Vec3& x0) {
    return Vec3(x0[0] + t * x0[2], x0[1], x0[2]);
  };
  f.velocity = [](double, const Vec3& x0) { return Vec3(x0[2], 0.0, 0.0); };
  f.deformation = [](double t, const Vec3&) {
    Mat3 m = Mat3::Identity();
    m(0, 2) = t;
    return m;
  };
  return f;
}

AnalyticFlowMap make_oscillating_ellipsoid_flow() {
  AnalyticFlowMap f;
  auto scale = [](double t) { return oscillating_ellipsoid_a(t) / oscillating_ellipsoid_a(0.0); };
  f.position = [scale](double t, const Vec3& x0) {
    return Vec3(scale(t) * x0[0], x0[1], x0[2]);
  };
  f.velocity = [](double t, const Vec3& x0) {
    return Vec3(oscillating_ellipsoid_a_dt(t) / oscillating_ellipsoid_a(0.0) * x0[0], 0.0, 0.0);
  };
  f.deformation = [scale](double t, const Vec3&) {
    Mat3 m = Mat3::Identity();
    m(0, 0) = scale(t);
    return m;
  };
  return f;
}

// --- learned flow map ----------------------------------------------------------------

VectorXd LearnedFlowMap::Component::inputs_of(double t, const Vec3& x0) const {
  VectorXd u(layer.input_dim());
  u[0] = t;
  int k = 1;
  for (int j = 0; j < 3; ++j)
    if (deps[j]) u[k++] = x0[j];
  return u;
}

LearnedFlowMap::LearnedFlowMap(Component c1, Component c2, Component c3,
                               std::string velocity_id)
    : comp_{std::move(c1), std::move(c2), std::move(c3)},
      velocity_id_(std::move(velocity_id)) {}

FlowJet LearnedFlowMap::full_jet(double t, const Vec3& x0) const {
  FlowJet jet;
  for (int i = 0; i < 3; ++i) {
    const Component& c = comp_[i];
    VectorXd u = c.inputs_of(t, x0);
    VectorXd z = c.layer.weights() * u + c.layer.biases();
    Eigen::ArrayXd v = z.array().tanh();
    Eigen::ArrayXd d1 = 1.0 - v.square();
    Eigen::ArrayXd d2 = -2.0 * v * d1;
    const MatrixXd& w = c.layer.weights();
    VectorXd cd1 = (c.coeffs.array() * d1).matrix();
    VectorXd cd2 = (c.coeffs.array() * d2).matrix();

    jet.x[i] = c.coeffs.dot(v.matrix());
    VectorXd grad_full = w.transpose() * cd1; // in reduced input coordinates
    jet.x_dt[i] = grad_full[0];
    MatrixXd hess_full = w.transpose() * cd2.asDiagonal() * w;

    jet.deformation.row(i).setZero();
    Mat3 hess3 = Mat3::Zero();
    int ka = 1;
    for (int a = 0; a < 3; ++a) {
      if (!c.deps[a]) continue;
      jet.deformation(i, a) = grad_full[ka];
      int kb = 1;
      for (int b = 0; b < 3; ++b) {
        if (!c.deps[b]) continue;
        hess3(a, b) = hess_full(ka, kb);
        ++kb;
      }
      ++ka;
    }
    jet.hess[i] = 0.5 * (hess3 + hess3.transpose());
  }
  return jet;
}

Vec3 LearnedFlowMap::map(double t, const Vec3& x0) const { return full_jet(t, x0).x; }
Vec3 LearnedFlowMap::map_dt(double t, const Vec3& x0) const { return full_jet(t, x0).x_dt; }
Mat3 LearnedFlowMap::map_dx0(double t, const Vec3& x0) const {
  return full_jet(t, x0).deformation;
}
std::array<Mat3, 3> LearnedFlowMap::map_d2x0(double t, const Vec3& x0) const {
  return full_jet(t, x0).hess;
}

void LearnedFlowMap::save(std::ostream& out) const {
  out << "surfrann-flow v1\n";
  out << "velocity " << velocity_id_ << '\n';
  for (int i = 0; i < 3; ++i) {
    const Component& c = comp_[i];
    out << "component " << i << " deps " << c.deps[0] << ' ' << c.deps[1] << ' '
        << c.deps[2] << '\n';
    c.layer.save(out);
    out << "coeffs " << c.coeffs.size() << '\n';
    out.precision(17);
    for (Eigen::Index k = 0; k < c.coeffs.size(); ++k) out << c.coeffs[k] << '\n';
  }
}

LearnedFlowMap LearnedFlowMap::load(std::istream& in) {
  std::string magic, version, key;
  in >> magic >> version;
  if (magic != "surfrann-flow" || version != "v1")
    throw ConfigError("flow file: unrecognized header");
  std::string velocity_id;
  in >> key >> velocity_id;
  if (key != "velocity") throw ConfigError("flow file: expected 'velocity'");

  std::vector<Component> comps;
  for (int i = 0; i < 3; ++i) {
    int index = -1;
    std::array<bool, 3> deps{};
    in >> key >> index;
    if (key != "component") throw ConfigError("flow file: expected 'component'");
    in >> key >> deps[0] >> deps[1] >> deps[2];
    if (key != "deps") throw ConfigError("flow file: expected 'deps'");
    FeatureLayer layer = FeatureLayer::load(in);
    Eigen::Index n = 0;
    in >> key >> n;
    if (key != "coeffs") throw ConfigError("flow file: expected 'coeffs'");
    VectorXd coeffs(n);
    for (Eigen::Index k = 0; k < n; ++k) in >> coeffs[k];
    comps.push_back(Component{std::move(layer), std::move(coeffs), deps});
  }
  if (!in) throw ConfigError("flow file: truncated");
  return LearnedFlowMap(comps[0], comps[1], comps[2], velocity_id);
}

// --- flow learning ---------------------------------------------------------------------

namespace {

constexpr int kChunk = 8192;

struct ComponentContext {
  FeatureLayer layer;
  std::array<bool, 3> deps{};
  int input_dim() const { return layer.input_dim(); }
};

// Interior record ordering: r = n * N_points + m.
struct FlowData {
  const MatrixXd* p0;
  const VectorXd* times;
  int n_points() const { return static_cast<int>(p0->rows()); }
  int n_times() const { return static_cast<int>(times->size()); }
  int n_interior() const { return n_points() * n_times(); }

  double time_of(int record) const { return (*times)[record / n_points()]; }
  Vec3 point_of(int record) const { return p0->row(record % n_points()).transpose(); }
};

MatrixXd component_inputs(const ComponentContext& c, const FlowData& data, int begin,
                          int len, bool at_time_zero) {
  MatrixXd u(len, c.input_dim());
  for (int i = 0; i < len; ++i) {
    int record = begin + i;
    Vec3 x0 = at_time_zero ? Vec3(data.p0->row(record).transpose()) : data.point_of(record);
    u(i, 0) = at_time_zero ? 0.0 : data.time_of(record);
    int k = 1;
    for (int j = 0; j < 3; ++j)
      if (c.deps[j]) u(i, k++) = x0[j];
  }
  return u;
}

// Dependency adjacency of the velocity coupling: adj[i][j] = v_i reads x_j.
std::array<std::array<bool, 3>, 3> coupling_graph(const VelocityField& v,
                                                  const FlowData& data) {
  std::array<std::array<bool, 3>, 3> adj{};
  int nt = std::min(data.n_times(), 17);
  int np = std::min(data.n_points(), 17);
  for (int a = 0; a <= nt; ++a) {
    double t = (*data.times)[std::min<int>(a * std::max(1, data.n_times() / std::max(1, nt)),
                                           data.n_times() - 1)];
    for (int b = 0; b < np; ++b) {
      Vec3 x = data.p0->row(b * std::max(1, data.n_points() / np)).transpose();
      Mat3 j = v.jacobian(t, x);
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
          if (std::abs(j(i, k)) > 1e-12) adj[i][k] = true;
    }
  }
  return adj;
}

std::array<std::array<bool, 3>, 3> transitive_closure(std::array<std::array<bool, 3>, 3> r) {
  for (int i = 0; i < 3; ++i) r[i][i] = true;
  for (int mid = 0; mid < 3; ++mid)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (r[i][mid] && r[mid][j]) r[i][j] = true;
  return r;
}

// Topological order of components under "i depends on j" (self-loops ignored);
// empty when the graph has a genuine cycle.
std::vector<int> topological_order(const std::array<std::array<bool, 3>, 3>& adj) {
  std::array<int, 3> indeg{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && adj[i][j]) ++indeg[i];
  std::vector<int> order;
  std::array<bool, 3> done{};
  for (int pass = 0; pass < 3; ++pass) {
    for (int i = 0; i < 3; ++i) {
      if (done[i] || indeg[i] != 0) continue;
      done[i] = true;
      order.push_back(i);
      for (int k = 0; k < 3; ++k)
        if (k != i && adj[k][i]) --indeg[k];
      break;
    }
  }
  if (order.size() != 3) return {};
  return order;
}

} // namespace

LearnedFlowMap learn_flow(const MatrixXd& initial_points, const VectorXd& times,
                          const VelocityField& velocity,
                          const std::array<FlowComponentSpec, 3>& specs, std::uint64_t seed,
                          const FlowLearnOptions& options, FlowFitReport* report) {
  if (initial_points.cols() != 3) throw ConfigError("learn_flow: initial points must be N x 3");
  if (initial_points.rows() < 1 || times.size() < 2)
    throw ConfigError("learn_flow: need initial points and at least two time samples");
  if (!velocity.value || !velocity.jacobian)
    throw ConfigError("learn_flow: velocity needs value and jacobian callbacks");

  FlowData data{&initial_points, &times};
  FlowFitReport local;
  auto wall0 = std::chrono::steady_clock::now();

  auto adj = coupling_graph(velocity, data);
  auto reach = transitive_closure(adj);

  std::array<ComponentContext, 3> ctx;
  for (int i = 0; i < 3; ++i) {
    std::array<bool, 3> deps{};
    for (int j = 0; j < 3; ++j) deps[j] = options.force_full_inputs || reach[i][j];
    int dim = 1;
    for (bool d : deps) dim += d;
    VectorXd r(dim);
    r[0] = specs[i].r_t;
    for (int k = 1; k < dim; ++k) r[k] = specs[i].r_x;
    AnchorBox box;
    box.lo.resize(dim);
    box.hi.resize(dim);
    box.lo[0] = times.minCoeff();
    box.hi[0] = times.maxCoeff();
    int k = 1;
    for (int j = 0; j < 3; ++j) {
      if (!deps[j]) continue;
      if (specs[i].anchor_intervals) {
        box.lo[k] = (*specs[i].anchor_intervals)[j][0];
        box.hi[k] = (*specs[i].anchor_intervals)[j][1];
      } else {
        box.lo[k] = initial_points.col(j).minCoeff();
        box.hi[k] = initial_points.col(j).maxCoeff();
      }
      ++k;
    }
    ctx[i].layer = FeatureLayer::make(dim, specs[i].width, r, box,
                                      CounterRng::derive_seed(seed, i));
    ctx[i].deps = deps;
    local.input_dims[i] = dim;
  }

  const int n_int = data.n_interior();
  const int n0 = data.n_points();
  const double beta = options.beta;
  std::array<VectorXd, 3> coeffs;

  auto interior_tables = [&](int comp, int begin, int len) {
    return ctx[comp].layer.tables(component_inputs(ctx[comp], data, begin, len, false));
  };

  // Values of an already-solved component at interior records [begin, begin+len).
  auto solved_values = [&](int comp, int begin, int len) -> VectorXd {
    FeatureTables t = interior_tables(comp, begin, len);
    return t.value * coeffs[comp];
  };

  std::vector<int> order;
  if (velocity.affine) order = topological_order(adj);

  if (velocity.affine && !order.empty()) {
    // Sequential linear path: each component is a linear least-squares fit
    // once its upstream components are known.
    local.used_linear_path = true;
    for (int i : order) {
      const FeatureLayer& layer = ctx[i].layer;
      const int m = layer.width();
      LeastSquaresSystem sys;
      sys.A.resize(n_int + n0, m);
      sys.rhs.resize(n_int + n0);
      VectorXd wt = layer.weights().col(0);

      for (int begin = 0; begin < n_int; begin += kChunk) {
        int len = std::min(kChunk, n_int - begin);
        FeatureTables t = interior_tables(i, begin, len);
        VectorXd aii(len);
        VectorXd rhs = VectorXd::Zero(len);
        std::array<VectorXd, 3> upstream;
        for (int j = 0; j < 3; ++j)
          if (j != i && adj[i][j]) upstream[j] = solved_values(j, begin, len);
        for (int r = 0; r < len; ++r) {
          double t_r = data.time_of(begin + r);
          Mat3 a = velocity.affine_matrix(t_r);
          aii[r] = a(i, i);
          double s = velocity.affine_offset(t_r)[i];
          for (int j = 0; j < 3; ++j)
            if (j != i && adj[i][j]) s += a(i, j) * upstream[j][r];
          rhs[r] = s;
        }
        MatrixXd rows = (t.d1.array().rowwise() * wt.transpose().array()).matrix();
        rows.array() -= t.value.array().colwise() * aii.array();
        sys.A.middleRows(begin, len) = rows;
        sys.rhs.segment(begin, len) = rhs;
      }
      FeatureTables t0 = ctx[i].layer.tables(component_inputs(ctx[i], data, 0, n0, true));
      sys.A.middleRows(n_int, n0) = beta * t0.value;
      sys.rhs.segment(n_int, n0) = beta * initial_points.col(i);

      SolveReport sr = solve(sys, options.solver);
      coeffs[i] = sr.coefficients;
    }
  } else {
    // Stacked path: all three coefficient blocks in one system. Affine
    // velocities need a single solve; anything else runs damped Gauss-Newton
    // on the same residual layout.
    std::array<int, 3> offset{};
    int total = 0;
    for (int i = 0; i < 3; ++i) {
      offset[i] = total;
      total += ctx[i].layer.width();
    }
    const int rows_total = 3 * n_int + 3 * n0;

    // value tables are reused by every iteration; keep them (stacked path is
    // intended for moderate sizes)
    std::array<FeatureTables, 3> ti, t0;
    std::array<MatrixXd, 3> dt_rows;
    for (int i = 0; i < 3; ++i) {
      ti[i] = interior_tables(i, 0, n_int);
      t0[i] = ctx[i].layer.tables(component_inputs(ctx[i], data, 0, n0, true));
      VectorXd wt = ctx[i].layer.weights().col(0);
      dt_rows[i] = (ti[i].d1.array().rowwise() * wt.transpose().array()).matrix();
    }

    auto map_values = [&](const VectorXd& c) {
      MatrixXd x(n_int, 3);
      for (int i = 0; i < 3; ++i)
        x.col(i) = ti[i].value * c.segment(offset[i], ctx[i].layer.width());
      return x;
    };
    auto residual_of = [&](const VectorXd& c) {
      VectorXd r(rows_total);
      MatrixXd x = map_values(c);
      for (int i = 0; i < 3; ++i) {
        VectorXd dt = dt_rows[i] * c.segment(offset[i], ctx[i].layer.width());
        for (int rec = 0; rec < n_int; ++rec) {
          Vec3 pos = x.row(rec).transpose();
          r[i * n_int + rec] = dt[rec] - velocity.value(data.time_of(rec), pos)[i];
        }
        VectorXd v0 = t0[i].value * c.segment(offset[i], ctx[i].layer.width());
        r.segment(3 * n_int + i * n0, n0) = beta * (v0 - initial_points.col(i));
      }
      return r;
    };
    auto jacobian_at = [&](const VectorXd& c) {
      MatrixXd j = MatrixXd::Zero(rows_total, total);
      MatrixXd x = map_values(c);
      for (int i = 0; i < 3; ++i) {
        j.block(i * n_int, offset[i], n_int, ctx[i].layer.width()) = dt_rows[i];
        for (int rec = 0; rec < n_int; ++rec) {
          Mat3 dv = velocity.jacobian(data.time_of(rec), x.row(rec).transpose());
          for (int k = 0; k < 3; ++k) {
            if (dv(i, k) == 0.0) continue;
            j.block(i * n_int + rec, offset[k], 1, ctx[k].layer.width()) -=
                dv(i, k) * ti[k].value.row(rec);
          }
        }
        j.block(3 * n_int + i * n0, offset[i], n0, ctx[i].layer.width()) =
            beta * t0[i].value;
      }
      return j;
    };

    VectorXd c = VectorXd::Zero(total);
    if (velocity.affine) {
      // residual is linear in c: one Gauss-Newton step from zero is exact
      LeastSquaresSystem sys;
      sys.A = jacobian_at(c);
      sys.rhs = -residual_of(c);
      SolveReport sr = solve(sys, options.solver);
      c = sr.coefficients;
      local.used_linear_path = true;
    } else {
      // start from the identity-map fit
      for (int i = 0; i < 3; ++i) {
        LeastSquaresSystem sys;
        sys.A.resize(n_int + n0, ctx[i].layer.width());
        sys.rhs.resize(n_int + n0);
        sys.A.topRows(n_int) = ti[i].value;
        VectorXd target(n_int);
        for (int rec = 0; rec < n_int; ++rec) target[rec] = data.point_of(rec)[i];
        sys.rhs.head(n_int) = target;
        sys.A.bottomRows(n0) = beta * t0[i].value;
        sys.rhs.tail(n0) = beta * initial_points.col(i);
        c.segment(offset[i], ctx[i].layer.width()) = solve(sys, options.solver).coefficients;
      }

      double lambda = options.damping_init;
      VectorXd r = residual_of(c);
      double norm = r.norm();
      local.residual_history.push_back(norm);
      local.converged = false;
      for (int iter = 0; iter < options.max_iterations; ++iter) {
        MatrixXd j = jacobian_at(c);
        bool accepted = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
          LeastSquaresSystem sys;
          sys.A.resize(rows_total + total, total);
          sys.rhs = VectorXd::Zero(rows_total + total);
          sys.A.topRows(rows_total) = j;
          sys.A.bottomRows(total) =
              std::sqrt(lambda) * MatrixXd::Identity(total, total);
          sys.rhs.head(rows_total) = -r;
          VectorXd delta = solve(sys, options.solver).coefficients;
          VectorXd c_next = c + delta;
          VectorXd r_next = residual_of(c_next);
          if (r_next.norm() < norm) {
            c = c_next;
            r = r_next;
            double prev = norm;
            norm = r_next.norm();
            local.residual_history.push_back(norm);
            lambda = std::max(lambda / 10.0, 1e-14);
            accepted = true;
            local.iterations = iter + 1;
            if (prev - norm < options.tolerance * std::max(prev, 1e-300)) {
              local.converged = true;
              iter = options.max_iterations; // double break
            }
            break;
          }
          lambda *= 10.0;
        }
        if (!accepted) break; // damping exhausted; residual already non-increasing
      }
      if (!local.converged && local.residual_history.size() >= 2) {
        double last = local.residual_history.back();
        double prev = local.residual_history[local.residual_history.size() - 2];
        local.converged = (prev - last) < options.tolerance * std::max(prev, 1e-300) ||
                          last < 1e-12;
      }
      if (!local.converged) {
        std::ostringstream os;
        os << "learn_flow: Gauss-Newton stagnated after " << local.iterations
           << " iterations; residual history:";
        for (double v : local.residual_history) os << ' ' << v;
        if (report) *report = local;
        throw NumericalError(os.str());
      }
    }
    for (int i = 0; i < 3; ++i) coeffs[i] = c.segment(offset[i], ctx[i].layer.width());
  }

  LearnedFlowMap model(
      LearnedFlowMap::Component{ctx[0].layer, coeffs[0], ctx[0].deps},
      LearnedFlowMap::Component{ctx[1].layer, coeffs[1], ctx[1].deps},
      LearnedFlowMap::Component{ctx[2].layer, coeffs[2], ctx[2].deps}, velocity.id);

  // residual report
  double ode_sq = 0.0;
  for (int begin = 0; begin < n_int; begin += kChunk) {
    int len = std::min(kChunk, n_int - begin);
    for (int r = 0; r < len; ++r) {
      double t_r = data.time_of(begin + r);
      Vec3 x0 = data.point_of(begin + r);
      FlowJet jet = model.full_jet(t_r, x0);
      ode_sq += (jet.x_dt - velocity.value(t_r, jet.x)).squaredNorm();
    }
  }
  local.ode_rms = std::sqrt(ode_sq / (3.0 * n_int));
  double init_sq = 0.0;
  for (int m = 0; m < n0; ++m) {
    Vec3 x0 = initial_points.row(m).transpose();
    init_sq += (model.map(0.0, x0) - x0).squaredNorm();
  }
  local.initial_rms = std::sqrt(init_sq / (3.0 * n0));
  local.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  if (report) *report = local;
  return model;
}

// --- evolving frames -----------------------------------------------------------------

EvolvingFrame evolving_frame(const FlowMap& flow, const SphereLikeSurface& initial,
                             const VelocityField& velocity, double t, int chart,
                             const Vec2& tp) {
  Vec3 x0 = initial.position(chart, tp);
  Mat32 dx0 = initial.tangents(chart, tp);
  std::array<Vec3, 3> d2x0 = initial.second(chart, tp);

  FlowJet jet = flow.full_jet(t, x0);

  EvolvingFrame fr;
  fr.x = jet.x;
  fr.tangents.col(0) = jet.deformation * dx0.col(0);
  fr.tangents.col(1) = jet.deformation * dx0.col(1);

  Vec3 cross = fr.tangents.col(0).cross(fr.tangents.col(1));
  fr.area_element = cross.norm();
  if (!(fr.area_element > 1e-14))
    throw NumericalError("evolving_frame: degenerate first fundamental form (pole?)");
  fr.n = cross / fr.area_element;

  double e = fr.tangents.col(0).squaredNorm();
  double f2 = fr.tangents.col(0).dot(fr.tangents.col(1));
  double g = fr.tangents.col(1).squaredNorm();

  // x_{,ab} = dx0_a^T Hess_i dx0_b + F_i . d2x0_ab, per embedded component i
  auto second_of = [&](int a, int b, int which) -> double {
    const Vec3& dza = dx0.col(a);
    const Vec3& dzb = dx0.col(b);
    const Vec3& chain = d2x0[a == 0 ? (b == 0 ? 0 : 1) : (b == 0 ? 1 : 2)];
    double out = dza.dot(jet.hess[which] * dzb);
    out += jet.deformation.row(which).dot(chain);
    return out;
  };
  double ii11 = 0.0, ii12 = 0.0, ii22 = 0.0;
  for (int i = 0; i < 3; ++i) {
    ii11 += second_of(0, 0, i) * fr.n[i];
    ii12 += second_of(0, 1, i) * fr.n[i];
    ii22 += second_of(1, 1, i) * fr.n[i];
  }
  // H = 0.5 div(n): minus the classical fundamental-form expression with
  // ii_ab = x_{,ab} . n
  fr.H = -(e * ii22 - 2.0 * f2 * ii12 + g * ii11) / (2.0 * (e * g - f2 * f2));

  if (velocity.value) {
    fr.v = velocity.value(t, fr.x);
    Mat3 dv = velocity.jacobian(t, fr.x);
    fr.surface_div_v = dv.trace() - fr.n.dot(dv * fr.n);
  }
  return fr;
}

EvolvingFrame evolving_frame_at(const FlowMap& flow, const SphereLikeSurface& initial,
                                const VelocityField& velocity, double t, const Vec3& x0) {
  auto [chart, tp] = initial.param_of(x0);
  return evolving_frame(flow, initial, velocity, t, chart, tp);
}

// --- evolving PDE solve ------------------------------------------------------------------

EvolvingSolveResult solve_evolving_pde(const EvolvingPdeProblem& problem,
                                       const MatrixXd& initial_points, const VectorXd& times,
                                       int width, double r_t, double r_x,
                                       const AnchorBox& anchor_box, std::uint64_t seed,
                                       const SolveOptions& solver) {
  if (!problem.flow || !problem.initial) throw ConfigError("evolving pde: flow/initial not set");
  const int n0 = static_cast<int>(initial_points.rows());
  const int nt = static_cast<int>(times.size());
  const int n_int = n0 * nt;

  VectorXd r(4);
  r << r_t, r_x, r_x, r_x;
  FeatureLayer layer = FeatureLayer::make(4, width, r, anchor_box, seed);
  MatrixXd wx = layer.weights().rightCols(3);
  VectorXd wt = layer.weights().col(0);
  VectorXd sq = wx.rowwise().squaredNorm();

  // chart parameters are time-independent; compute once per initial point
  std::vector<std::pair<int, Vec2>> params(n0);
  for (int m = 0; m < n0; ++m)
    params[m] = problem.initial->param_of(initial_points.row(m).transpose());

  LeastSquaresSystem sys;
  sys.A.resize(n_int + n0, width);
  sys.rhs.resize(n_int + n0);

  const int chunk = 4096;
  for (int begin = 0; begin < n_int; begin += chunk) {
    int len = std::min(chunk, n_int - begin);
    MatrixXd pts(len, 4), normals(len, 3), vel(len, 3);
    VectorXd curvature(len), divv(len);
    for (int i = 0; i < len; ++i) {
      int rec = begin + i;
      double t_r = times[rec / n0];
      int m = rec % n0;
      EvolvingFrame fr = evolving_frame(*problem.flow, *problem.initial, problem.velocity,
                                        t_r, params[m].first, params[m].second);
      pts(i, 0) = t_r;
      pts.block<1, 3>(i, 1) = fr.x.transpose();
      normals.row(i) = fr.n.transpose();
      vel.row(i) = fr.v.transpose();
      curvature[i] = fr.H;
      divv[i] = fr.surface_div_v;
      sys.rhs[begin + i] = problem.f(t_r, fr.x);
    }
    FeatureTables t = layer.tables(pts);
    MatrixXd q = normals * wx.transpose();

    // d_t psi + v . grad psi + (div_G v) psi - lap_G psi
    MatrixXd rows =
        -(t.d2.array() * ((-q.array().square()).rowwise() + sq.transpose().array())).matrix();
    VectorXd two_h = 2.0 * curvature;
    rows.array() += (t.d1.array() * q.array()).colwise() * two_h.array();
    rows.array() += t.d1.array().rowwise() * wt.transpose().array();
    rows.array() += t.d1.array() * (vel * wx.transpose()).array();
    rows.array() += t.value.array().colwise() * divv.array();
    sys.A.middleRows(begin, len) = rows;
  }

  MatrixXd pts0(n0, 4);
  pts0.col(0).setZero();
  pts0.rightCols(3) = initial_points;
  FeatureTables t0 = layer.tables(pts0);
  sys.A.bottomRows(n0) = problem.beta * t0.value;
  for (int m = 0; m < n0; ++m)
    sys.rhs[n_int + m] = problem.beta * problem.u0(initial_points.row(m).transpose());

  sys.groups.push_back(RowGroup{RowGroupKind::Interior, 0, n_int, 1.0, 1.0, -1});
  sys.groups.push_back(RowGroup{RowGroupKind::Initial, n_int, n_int + n0, problem.beta, 1.0, -1});

  EvolvingSolveResult result{layer, VectorXd(), SolveReport()};
  result.report = solve(sys, solver);
  result.coeffs = result.report.coefficients;
  return result;
}

// --- conservation -------------------------------------------------------------------------

std::vector<ConservationSample> conservation_report(
    const FlowMap& flow, const SphereLikeSurface& initial, const VectorXd& times,
    const std::function<double(double, const Vec3&)>* u, int order, double reference_volume,
    double reference_mass) {
  if (!initial.is_closed()) throw ConfigError("conservation_report: surface must be closed");
  QuadratureRule qt = gauss_legendre_on(order, 0.0, M_PI);
  QuadratureRule qp = gauss_legendre_on(order, 0.0, 2.0 * M_PI);

  double v0 = reference_volume > 0 ? reference_volume : initial.volume();
  double m0 = reference_mass;
  if (u && m0 < 0) {
    // mass at t = 0 on the exact initial geometry
    m0 = 0.0;
    for (Eigen::Index a = 0; a < qt.nodes.size(); ++a)
      for (Eigen::Index b = 0; b < qp.nodes.size(); ++b) {
        Vec2 tp(qt.nodes[a], qp.nodes[b]);
        Mat32 tan = initial.tangents(0, tp);
        double area = tan.col(0).cross(tan.col(1)).norm();
        m0 += qt.weights[a] * qp.weights[b] * area *
              (*u)(0.0, initial.position(0, tp));
      }
  }

  std::vector<ConservationSample> out;
  for (Eigen::Index n = 0; n < times.size(); ++n) {
    double t = times[n];
    double volume = 0.0, mass = 0.0;
    for (Eigen::Index a = 0; a < qt.nodes.size(); ++a) {
      for (Eigen::Index b = 0; b < qp.nodes.size(); ++b) {
        Vec2 tp(qt.nodes[a], qp.nodes[b]);
        Vec3 x0 = initial.position(0, tp);
        Mat32 dx0 = initial.tangents(0, tp);
        FlowJet jet = flow.full_jet(t, x0);
        Vec3 t1 = jet.deformation * dx0.col(0);
        Vec3 t2 = jet.deformation * dx0.col(1);
        Vec3 cross = t1.cross(t2);
        double w = qt.weights[a] * qp.weights[b];
        volume += w * jet.x.dot(cross) / 3.0;
        if (u) mass += w * (*u)(t, jet.x) * cross.norm();
      }
    }
    ConservationSample s;
    s.t = t;
    s.volume = volume;
    s.volume_rel_err = std::abs(volume - v0) / std::abs(v0);
    if (u) {
      s.mass = mass;
      s.mass_rel_err = std::abs(mass - m0) / std::abs(m0);
    }
    out.push_back(s);
  }
  return out;
}

} // namespace surfrann
