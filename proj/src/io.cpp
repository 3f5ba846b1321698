#include "surfrann/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace surfrann {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

} // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MatrixXd read_xyz(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<Vec3> pts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line.substr(0, line.find('#'));
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(body);
    Vec3 p;
    if (!(ss >> p[0] >> p[1] >> p[2]))
      throw ConfigError(path + ": malformed XYZ line " + std::to_string(line_no));
    pts.push_back(p);
  }
  MatrixXd out(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(i) = pts[i].transpose();
  return out;
}

void write_xyz(const std::string& path, const MatrixXd& points) {
  std::ofstream out = open_output(path);
  out.precision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out << points(i, 0) << ' ' << points(i, 1) << ' ' << points(i, 2) << '\n';
}

MatrixXd read_ply(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw ConfigError(path + ": not a PLY file");

  long vertex_count = -1;
  int prop_index = 0;
  int ix = -1, iy = -1, iz = -1;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string kind;
      ss >> kind;
      if (kind != "ascii") throw ConfigError(path + ": only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      long count;
      ss >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (word == "property" && in_vertex_element) {
      std::string type, name;
      ss >> type >> name;
      if (name == "x") ix = prop_index;
      if (name == "y") iy = prop_index;
      if (name == "z") iz = prop_index;
      ++prop_index;
    } else if (word == "end_header") {
      break;
    }
  }
  if (vertex_count < 0 || ix < 0 || iy < 0 || iz < 0)
    throw ConfigError(path + ": PLY header lacks vertex x/y/z properties");

  MatrixXd pts(vertex_count, 3);
  for (long i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line))
      throw ConfigError(path + ": truncated vertex list at " + std::to_string(i));
    std::istringstream ss(line);
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (static_cast<int>(vals.size()) < prop_index)
      throw ConfigError(path + ": malformed vertex line " + std::to_string(i + 1));
    pts.row(i) = Vec3(vals[ix], vals[iy], vals[iz]).transpose();
  }
  return pts;
}

void write_ply(const std::string& path, const MatrixXd& points) {
  std::ofstream out = open_output(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.rows()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out << points(i, 0) << ' ' << points(i, 1) << ' ' << points(i, 2) << '\n';
}

MatrixXd read_points_auto(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == "ply" ? read_ply(path) : read_xyz(path);
}

void write_ep_report_csv(const std::string& path, const VectorXd& abs_phi_before,
                         const VectorXd& abs_phi_after) {
  std::ofstream out = open_output(path);
  out << "index,abs_phi_before,abs_phi_after\n";
  for (Eigen::Index i = 0; i < abs_phi_before.size(); ++i)
    out << i << ',' << format_double(abs_phi_before[i]) << ','
        << format_double(abs_phi_after[i]) << '\n';
}

void CsvTable::save(const std::string& path) const {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 == header.size() ? '\n' : ',');
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 == row.size() ? '\n' : ',');
}

CsvTable CsvTable::load(const std::string& path) {
  std::ifstream in = open_input(path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (first) {
      table.header = fields;
      first = false;
    } else {
      table.rows.push_back(fields);
    }
  }
  return table;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

void write_loglog_svg(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series, bool log_x) {
  const int width = 640, height = 480;
  const int ml = 70, mr = 20, mt = 40, mb = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto tx = [log_x](double v) { return log_x ? std::log10(v) : v; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.y[i] <= 0 || (log_x && s.x[i] <= 0)) continue;
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  auto px = [&](double v) { return ml + (tx(v) - xmin) / (xmax - xmin) * (width - ml - mr); };
  auto py = [&](double v) {
    return height - mb - (std::log10(v) - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  out << "<text x='" << width / 2 << "' y='" << height - 10
      << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
  out << "<text x='15' y='" << height / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 15 "
      << height / 2 << ")'>" << y_label << "</text>\n";
  out << "<rect x='" << ml << "' y='" << mt << "' width='" << width - ml - mr << "' height='"
      << height - mt - mb << "' fill='none' stroke='black'/>\n";

  // decade grid lines on y
  for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax)); ++e) {
    double y = height - mb - (e - ymin) / (ymax - ymin) * (height - mt - mb);
    out << "<line x1='" << ml << "' y1='" << y << "' x2='" << width - mr << "' y2='" << y
        << "' stroke='#dddddd'/>\n";
    out << "<text x='" << ml - 6 << "' y='" << y + 4 << "' text-anchor='end' font-size='10'>1e"
        << e << "</text>\n";
  }

  int color_index = 0;
  int legend_y = mt + 14;
  for (const auto& s : series) {
    const char* color = colors[color_index++ % 6];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.y[i] <= 0) continue;
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.y[i] <= 0) continue;
      out << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='3' fill='" << color
          << "'/>\n";
    }
    out << "<text x='" << width - mr - 6 << "' y='" << legend_y << "' text-anchor='end' font-size='11' fill='"
        << color << "'>" << s.label << "</text>\n";
    legend_y += 14;
  }
  out << "</svg>\n";
}

} // namespace surfrann
