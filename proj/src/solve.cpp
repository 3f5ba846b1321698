#include <lapacke.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "surfrann/assembly.hpp"

namespace surfrann {

namespace {

// Minimum-norm truncated-SVD solution of a (possibly rank-deficient) dense
// system with m >= n after QR reduction; s receives the singular values.
VectorXd gelsd_square(MatrixXd& a, VectorXd& b, double rcond, lapack_int* rank,
                      VectorXd& s) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int ldb = std::max(m, n);
  VectorXd bwork = VectorXd::Zero(ldb);
  bwork.head(m) = b;
  s.resize(std::min(m, n));
  lapack_int info = LAPACKE_dgelsd(LAPACK_COL_MAJOR, m, n, 1, a.data(), m, bwork.data(),
                                   ldb, s.data(), rcond, rank);
  if (info != 0)
    throw NumericalError("dgelsd failed to converge (info = " + std::to_string(info) + ")");
  return bwork.head(n);
}

} // namespace

SolveReport solve(const LeastSquaresSystem& system, const SolveOptions& options) {
  const Eigen::Index m = system.A.rows();
  const Eigen::Index n = system.A.cols();
  if (m < 1 || n < 1) throw ConfigError("solve: empty system");
  if (system.rhs.size() != m) throw ConfigError("solve: rhs length mismatch");
  if (!system.A.allFinite() || !system.rhs.allFinite())
    throw NumericalError("solve: non-finite entries in the assembled system (assembly bug)");

  double rcond = options.rcond;
  if (rcond < 0)
    rcond = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, n));

  auto t0 = std::chrono::steady_clock::now();

  MatrixXd work = system.A;
  VectorXd b = system.rhs;
  lapack_int rank = 0;
  VectorXd s;
  VectorXd c;

  if (m > (4 * n) / 3 && m > 64) {
    // Householder QR first; the SVD then runs on the n x n triangle. The
    // singular values and the minimum-norm solution agree with a direct SVD.
    VectorXd tau(std::min(m, n));
    lapack_int info = LAPACKE_dgeqrf(LAPACK_COL_MAJOR, static_cast<lapack_int>(m),
                                     static_cast<lapack_int>(n), work.data(),
                                     static_cast<lapack_int>(m), tau.data());
    if (info != 0) throw NumericalError("dgeqrf failed (info = " + std::to_string(info) + ")");
    info = LAPACKE_dormqr(LAPACK_COL_MAJOR, 'L', 'T', static_cast<lapack_int>(m), 1,
                          static_cast<lapack_int>(n), work.data(),
                          static_cast<lapack_int>(m), tau.data(), b.data(),
                          static_cast<lapack_int>(m));
    if (info != 0) throw NumericalError("dormqr failed (info = " + std::to_string(info) + ")");
    MatrixXd r = work.topRows(n).triangularView<Eigen::Upper>();
    VectorXd qtb = b.head(n);
    c = gelsd_square(r, qtb, rcond, &rank, s);
  } else {
    c = gelsd_square(work, b, rcond, &rank, s);
  }

  auto t1 = std::chrono::steady_clock::now();

  SolveReport report;
  report.coefficients = c;
  report.residual_norm = (system.A * c - system.rhs).norm();
  report.effective_rank = static_cast<int>(rank);
  report.sigma_max = s.size() > 0 ? s[0] : 0.0;
  report.truncation_threshold = rcond * report.sigma_max;
  report.rcond_used = rcond;
  report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return report;
}

void write_system(const std::string& path, const LeastSquaresSystem& system) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const char magic[8] = {'S', 'R', 'L', 'S', '1', '\n', 0, 0};
  out.write(magic, 8);
  std::int64_t rows = system.A.rows(), cols = system.A.cols(),
               ngroups = static_cast<std::int64_t>(system.groups.size());
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  out.write(reinterpret_cast<const char*>(&ngroups), 8);
  out.write(reinterpret_cast<const char*>(system.A.data()),
            static_cast<std::streamsize>(sizeof(double)) * rows * cols);
  out.write(reinterpret_cast<const char*>(system.rhs.data()),
            static_cast<std::streamsize>(sizeof(double)) * rows);
  for (const RowGroup& g : system.groups) {
    std::int32_t kind = static_cast<std::int32_t>(g.kind);
    std::int32_t fields[3] = {static_cast<std::int32_t>(g.begin),
                              static_cast<std::int32_t>(g.end),
                              static_cast<std::int32_t>(g.source)};
    out.write(reinterpret_cast<const char*>(&kind), 4);
    out.write(reinterpret_cast<const char*>(fields), 12);
    out.write(reinterpret_cast<const char*>(&g.weight), 8);
    out.write(reinterpret_cast<const char*>(&g.measure), 8);
  }
}

LeastSquaresSystem read_system(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 5) != "SRLS1") throw ConfigError(path + ": not a system dump");
  std::int64_t rows = 0, cols = 0, ngroups = 0;
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  in.read(reinterpret_cast<char*>(&ngroups), 8);
  LeastSquaresSystem system;
  system.A.resize(rows, cols);
  system.rhs.resize(rows);
  in.read(reinterpret_cast<char*>(system.A.data()),
          static_cast<std::streamsize>(sizeof(double)) * rows * cols);
  in.read(reinterpret_cast<char*>(system.rhs.data()),
          static_cast<std::streamsize>(sizeof(double)) * rows);
  for (std::int64_t i = 0; i < ngroups; ++i) {
    std::int32_t kind = 0, fields[3];
    RowGroup g;
    in.read(reinterpret_cast<char*>(&kind), 4);
    in.read(reinterpret_cast<char*>(fields), 12);
    in.read(reinterpret_cast<char*>(&g.weight), 8);
    in.read(reinterpret_cast<char*>(&g.measure), 8);
    g.kind = static_cast<RowGroupKind>(kind);
    g.begin = fields[0];
    g.end = fields[1];
    g.source = fields[2];
    system.groups.push_back(g);
  }
  if (!in) throw ConfigError(path + ": truncated system dump");
  return system;
}

} // namespace surfrann
