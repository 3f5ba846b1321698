#include "surfrann/feature_layer.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "surfrann/rng.hpp"

namespace surfrann {

AnchorBox AnchorBox::cube(int dim, double a, double b) {
  AnchorBox box;
  box.lo = VectorXd::Constant(dim, a);
  box.hi = VectorXd::Constant(dim, b);
  return box;
}

FeatureLayer FeatureLayer::make(int input_dim, int width, const VectorXd& r_per_coord,
                                const AnchorBox& box, std::uint64_t seed,
                                ActivationKind activation) {
  if (input_dim < 1 || input_dim > 4)
    throw ConfigError("feature layer: input_dim must be in [1,4], got " +
                      std::to_string(input_dim));
  if (width < 1)
    throw ConfigError("feature layer: width must be >= 1, got " + std::to_string(width));

  VectorXd r = r_per_coord;
  if (r.size() == 1 && input_dim > 1) r = VectorXd::Constant(input_dim, r_per_coord[0]);
  if (r.size() != input_dim)
    throw ConfigError("feature layer: weight range vector has size " +
                      std::to_string(r.size()) + ", expected " + std::to_string(input_dim));
  for (int k = 0; k < input_dim; ++k)
    if (!(r[k] > 0.0))
      throw ConfigError("feature layer: weight range r[" + std::to_string(k) +
                        "] must be positive");

  if (box.lo.size() != input_dim || box.hi.size() != input_dim)
    throw ConfigError("feature layer: anchor box dimension mismatch");
  for (int k = 0; k < input_dim; ++k)
    if (box.hi[k] < box.lo[k])
      throw ConfigError("feature layer: anchor box is empty on axis " + std::to_string(k));

  FeatureLayer layer;
  layer.seed_ = seed;
  layer.activation_ = activation;
  layer.ranges_ = r;
  layer.box_ = box;
  layer.weights_.resize(width, input_dim);
  layer.anchors_.resize(width, input_dim);

  CounterRng rng(seed);
  for (int m = 0; m < width; ++m)
    for (int k = 0; k < input_dim; ++k)
      layer.weights_(m, k) = rng.uniform(-r[k], r[k]);
  for (int m = 0; m < width; ++m)
    for (int k = 0; k < input_dim; ++k)
      layer.anchors_(m, k) = rng.uniform(box.lo[k], box.hi[k]);

  // b = -(w .* B^T) 1, i.e. each feature vanishes its pre-activation at its anchor.
  layer.biases_ = -(layer.weights_.array() * layer.anchors_.array()).rowwise().sum();
  return layer;
}

MatrixXd FeatureLayer::pre_activation(const MatrixXd& points) const {
  if (points.cols() != input_dim())
    throw ConfigError("feature layer: points have " + std::to_string(points.cols()) +
                      " columns, layer expects " + std::to_string(input_dim()));
  if (!points.allFinite())
    throw NumericalError("feature layer: non-finite evaluation points");
  MatrixXd z = points * weights_.transpose();
  z.rowwise() += biases_.transpose();
  return z;
}

FeatureTables FeatureLayer::tables(const MatrixXd& points) const {
  FeatureTables t;
  t.value = pre_activation(points);
  t.value = t.value.array().tanh();
  t.d1 = 1.0 - t.value.array().square();
  t.d2 = -2.0 * t.value.array() * t.d1.array();
  return t;
}

FeatureJet FeatureLayer::jet_at(const VectorXd& point) const {
  const int d = input_dim();
  const int m_count = width();
  MatrixXd pts = point.transpose();
  FeatureTables t = tables(pts);

  FeatureJet jet;
  jet.values = t.value.row(0);
  jet.grad = weights_.array().colwise() * t.d1.row(0).transpose().array();
  jet.hess.reserve(m_count);
  for (int m = 0; m < m_count; ++m) {
    VectorXd w = weights_.row(m);
    jet.hess.push_back(t.d2(0, m) * (w * w.transpose()));
  }
  if (d == 3) {
    jet.hess_xyz.reserve(m_count);
    for (int m = 0; m < m_count; ++m) jet.hess_xyz.push_back(jet.hess[m]);
  }
  return jet;
}

std::vector<FeatureJet> FeatureLayer::eval_jet(const MatrixXd& points) const {
  std::vector<FeatureJet> jets;
  jets.reserve(points.rows());
  for (Eigen::Index n = 0; n < points.rows(); ++n)
    jets.push_back(jet_at(points.row(n).transpose()));
  return jets;
}

CombinationJet FeatureLayer::eval_linear_combination(const VectorXd& coeffs,
                                                     const MatrixXd& points) const {
  if (coeffs.size() != width())
    throw ConfigError("linear combination: coefficient vector has size " +
                      std::to_string(coeffs.size()) + ", layer width is " +
                      std::to_string(width()));
  const int d = input_dim();
  FeatureTables t = tables(points);

  CombinationJet out;
  out.values = t.value * coeffs;
  // grad_n = sum_m c_m d1(n,m) w_m
  out.grad = (t.d1.array().rowwise() * coeffs.transpose().array()).matrix() * weights_;
  MatrixXd cd2 = (t.d2.array().rowwise() * coeffs.transpose().array()).matrix();
  out.hess.reserve(points.rows());
  for (Eigen::Index n = 0; n < points.rows(); ++n) {
    // sum_m c_m d2(n,m) w_m w_m^T
    MatrixXd h = weights_.transpose() * cd2.row(n).asDiagonal() * weights_;
    out.hess.push_back(0.5 * (h + h.transpose())); // kill rounding asymmetry
    (void)d;
  }
  return out;
}

double FeatureLayer::combine_value(const VectorXd& coeffs, const VectorXd& point) const {
  MatrixXd pts = point.transpose();
  VectorXd z = pre_activation(pts).row(0);
  return z.array().tanh().matrix().dot(coeffs);
}

namespace {
void write_vector(std::ostream& out, const char* tag, const VectorXd& v) {
  out << tag;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.precision(17);
    out << ' ' << v[i];
  }
  out << '\n';
}
VectorXd read_vector(std::istream& in, const char* tag, Eigen::Index n) {
  std::string key;
  in >> key;
  if (key != tag) throw ConfigError(std::string("layer file: expected '") + tag + "', got '" + key + "'");
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) in >> v[i];
  return v;
}
} // namespace

void FeatureLayer::save(std::ostream& out) const {
  out << "surfrann-layer v1\n";
  out << "seed " << seed_ << '\n';
  out << "activation " << activation_name(activation_) << '\n';
  out << "input_dim " << input_dim() << '\n';
  out << "width " << width() << '\n';
  write_vector(out, "r", ranges_);
  write_vector(out, "box_lo", box_.lo);
  write_vector(out, "box_hi", box_.hi);
  out.precision(17);
  out << "w\n";
  for (int m = 0; m < width(); ++m) {
    for (int k = 0; k < input_dim(); ++k) out << weights_(m, k) << (k + 1 == input_dim() ? '\n' : ' ');
  }
  out << "B\n";
  for (int m = 0; m < width(); ++m) {
    for (int k = 0; k < input_dim(); ++k) out << anchors_(m, k) << (k + 1 == input_dim() ? '\n' : ' ');
  }
  write_vector(out, "b", biases_);
}

FeatureLayer FeatureLayer::load(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "surfrann-layer" || version != "v1")
    throw ConfigError("layer file: unrecognized header '" + magic + " " + version + "'");

  FeatureLayer layer;
  std::string key, act;
  int d = 0, m_count = 0;
  in >> key >> layer.seed_;
  if (key != "seed") throw ConfigError("layer file: expected 'seed'");
  in >> key >> act;
  if (key != "activation") throw ConfigError("layer file: expected 'activation'");
  if (act != "tanh") throw ConfigError("layer file: unsupported activation '" + act + "'");
  layer.activation_ = ActivationKind::HyperbolicTangent;
  in >> key >> d;
  if (key != "input_dim") throw ConfigError("layer file: expected 'input_dim'");
  in >> key >> m_count;
  if (key != "width") throw ConfigError("layer file: expected 'width'");
  layer.ranges_ = read_vector(in, "r", d);
  layer.box_.lo = read_vector(in, "box_lo", d);
  layer.box_.hi = read_vector(in, "box_hi", d);

  in >> key;
  if (key != "w") throw ConfigError("layer file: expected 'w'");
  layer.weights_.resize(m_count, d);
  for (int m = 0; m < m_count; ++m)
    for (int k = 0; k < d; ++k) in >> layer.weights_(m, k);
  in >> key;
  if (key != "B") throw ConfigError("layer file: expected 'B'");
  layer.anchors_.resize(m_count, d);
  for (int m = 0; m < m_count; ++m)
    for (int k = 0; k < d; ++k) in >> layer.anchors_(m, k);
  layer.biases_ = read_vector(in, "b", m_count);
  if (!in) throw ConfigError("layer file: truncated");
  return layer;
}

} // namespace surfrann
