#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "surfrann/common.hpp"

namespace surfrann {

// Whitespace-delimited XYZ text, one point per line; '#' starts a comment.
MatrixXd read_xyz(const std::string& path);
void write_xyz(const std::string& path, const MatrixXd& points);

// ASCII PLY with at least x/y/z vertex properties; faces are ignored.
MatrixXd read_ply(const std::string& path);
void write_ply(const std::string& path, const MatrixXd& points);

// Dispatch on extension (.ply -> PLY, anything else -> XYZ).
MatrixXd read_points_auto(const std::string& path);

// Level-set residual report: point index, |phi| before, |phi| after.
void write_ep_report_csv(const std::string& path, const VectorXd& abs_phi_before,
                         const VectorXd& abs_phi_after);

// Minimal CSV table with a fixed header; cells are preformatted strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void save(const std::string& path) const;
  static CsvTable load(const std::string& path);
  int column(const std::string& name) const; // -1 when absent
};

std::string format_double(double v);

// Log-log polyline plot written as a standalone SVG.
struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
void write_loglog_svg(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series, bool log_x = true);

} // namespace surfrann
