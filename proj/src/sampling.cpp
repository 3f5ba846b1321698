#include "surfrann/sampling.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "surfrann/rng.hpp"

namespace surfrann {

const char* role_name(PointRole role) {
  switch (role) {
    case PointRole::Interior: return "interior";
    case PointRole::Initial: return "initial";
    case PointRole::Boundary: return "boundary";
    case PointRole::Interface: return "interface";
  }
  return "unknown";
}

PointRole role_from_name(const std::string& name) {
  if (name == "interior") return PointRole::Interior;
  if (name == "initial") return PointRole::Initial;
  if (name == "boundary") return PointRole::Boundary;
  if (name == "interface") return PointRole::Interface;
  throw ConfigError("unknown collocation role '" + name + "'");
}

std::size_t CollocationSet::count(PointRole role) const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.role == role);
  return n;
}

CollocationSet CollocationSet::filtered(PointRole role) const {
  CollocationSet out;
  for (const auto& r : records)
    if (r.role == role) out.records.push_back(r);
  return out;
}

void CollocationSet::save_csv(std::ostream& out) const {
  out << "role,t,chart,xi1,xi2,x,y,z,weight\n";
  out.precision(17);
  for (const auto& r : records) {
    out << role_name(r.role) << ',';
    if (r.has_time()) out << r.t;
    out << ',' << r.chart << ',' << r.xi[0] << ',' << r.xi[1] << ',' << r.x[0] << ','
        << r.x[1] << ',' << r.x[2] << ',' << r.weight << '\n';
  }
}

CollocationSet CollocationSet::load_csv(std::istream& in) {
  CollocationSet set;
  std::string line;
  if (!std::getline(in, line) || line.rfind("role,", 0) != 0)
    throw ConfigError("collocation csv: missing header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9)
      throw ConfigError("collocation csv: line " + std::to_string(line_no) +
                        " has " + std::to_string(fields.size()) + " fields, expected 9");
    CollocationRecord r;
    r.role = role_from_name(fields[0]);
    r.t = fields[1].empty() ? std::numeric_limits<double>::quiet_NaN()
                            : std::stod(fields[1]);
    r.chart = std::stoi(fields[2]);
    r.xi = Vec2(std::stod(fields[3]), std::stod(fields[4]));
    r.x = Vec3(std::stod(fields[5]), std::stod(fields[6]), std::stod(fields[7]));
    r.weight = std::stod(fields[8]);
    set.records.push_back(r);
  }
  return set;
}

std::vector<Vec2> grid_on_chart(const Chart& chart, int n1, int n2) {
  if (n1 < 2 || n2 < 2) throw ConfigError("grid_on_chart: need at least 2 points per axis");
  auto axis_points = [&](int k, int n) {
    std::vector<double> pts(n);
    double span = chart.hi[k] - chart.lo[k];
    if (chart.periodic[k]) {
      for (int i = 0; i < n; ++i) pts[i] = chart.lo[k] + span * i / n;
    } else {
      for (int i = 0; i < n; ++i) pts[i] = chart.lo[k] + span * i / (n - 1);
    }
    return pts;
  };
  std::vector<double> a = axis_points(0, n1), b = axis_points(1, n2);
  std::vector<Vec2> grid;
  grid.reserve(static_cast<std::size_t>(n1) * n2);
  for (double u : a)
    for (double v : b) grid.emplace_back(u, v);
  return grid;
}

MatrixXd fibonacci_sphere(int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("fibonacci_sphere: count must be >= 1");
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  double spin = 0.0;
  if (seed != 0) {
    CounterRng rng(seed);
    spin = rng.uniform(0.0, 2.0 * M_PI);
  }
  MatrixXd pts(count, 3);
  for (int i = 0; i < count; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / count;
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden_angle * i + spin;
    pts.row(i) = Vec3(rho * std::cos(phi), rho * std::sin(phi), z).transpose();
  }
  return pts;
}

MatrixXd fibonacci_surface(const Vec3& semi_axes, int count, std::uint64_t seed) {
  for (int k = 0; k < 3; ++k)
    if (!(semi_axes[k] > 0)) throw ConfigError("fibonacci_surface: semi-axes must be positive");
  MatrixXd pts = fibonacci_sphere(count, seed);
  for (int k = 0; k < 3; ++k) pts.col(k) *= semi_axes[k];
  return pts;
}

VectorXd uniform_time_grid(double t0, double t1, int count) {
  if (count < 2) throw ConfigError("uniform_time_grid: need at least 2 samples");
  VectorXd t(count);
  for (int i = 0; i < count; ++i) t[i] = t0 + (t1 - t0) * i / (count - 1);
  return t;
}

CollocationSet spacetime_product(const VectorXd& times, const CollocationSet& spatial,
                                 PointRole role) {
  CollocationSet out;
  out.records.reserve(times.size() * spatial.records.size());
  for (Eigen::Index n = 0; n < times.size(); ++n) {
    for (const auto& s : spatial.records) {
      CollocationRecord r = s;
      r.role = role;
      r.t = times[n];
      out.records.push_back(r);
    }
  }
  return out;
}

CollocationSet random_subset(const CollocationSet& set, std::size_t count,
                             std::uint64_t seed) {
  if (count > set.size())
    throw ConfigError("random_subset: requested " + std::to_string(count) +
                      " of " + std::to_string(set.size()) + " records");
  for (const auto& r : set.records)
    if (r.role != set.records.front().role)
      throw ConfigError("random_subset: set mixes roles; subset within one role only");

  // partial Fisher-Yates over an index vector
  std::vector<std::size_t> idx(set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  CounterRng rng(seed);
  CollocationSet out;
  out.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.records.push_back(set.records[idx[i]]);
  }
  return out;
}

} // namespace surfrann
