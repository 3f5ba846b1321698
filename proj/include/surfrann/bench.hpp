#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "surfrann/config.hpp"
#include "surfrann/evolving.hpp"

namespace surfrann {

// One table cell of an experiment run.
struct ResultRow {
  std::string experiment;
  int width = 0;
  long long n_col = 0;
  long long n0 = 0;
  std::uint64_t seed = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  double error_x = std::numeric_limits<double>::quiet_NaN();
  double error_n = std::numeric_limits<double>::quiet_NaN();
  double error_h = std::numeric_limits<double>::quiet_NaN();
  double t_sample = 0.0;
  double t_assemble = 0.0;
  double t_solve = 0.0;
  double t_evaluate = 0.0;
  double empirical_loss = std::numeric_limits<double>::quiet_NaN();
  int rank = 0;
  double residual = std::numeric_limits<double>::quiet_NaN();
};

struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<ConservationSample> conservation;
  std::map<std::string, double> scalars; // extra named diagnostics (E_p, peaks, ...)
  std::vector<std::string> artifacts;    // files written
};

// Execute an experiment described by a config. Known ids: ex1_torus,
// ex2_cheese, ex3_heat_cheese, ex4_cup, ex5_bunny, ex6_ellipsoid,
// ex7_droplet, plus `custom_static` for user-defined static runs.
// Files are written only when output.dir is set.
RunOutput run_experiment(const Config& config);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_conservation_csv(const std::string& path,
                            const std::vector<ConservationSample>& series);

// Per-cell ratio comparison of a results CSV against a reference CSV.
// A cell passes when result <= reference * 10^tolerance_orders. Rows are
// matched on the shared key columns (experiment, M, n_col, n0).
// Returns the number of failing cells; failures are logged with their keys.
int compare_tables(const std::string& result_csv, const std::string& reference_csv,
                   double tolerance_orders, std::ostream& log);

} // namespace surfrann
