#pragma once

#include "maxsens/physics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace maxsens {

struct DepthSample {
  double d = 0.0;      // m
  double alpha = 0.0;  // m
  double ratio = 0.0;  // thresholded area ratio
  Vec3 eta = Vec3::Zero();
};

struct VolumeSample {
  double d = 0.0;
  double alpha = 0.0;
  double volume = 0.0;  // m^3
  double l2norm = 0.0;
  Vec3 eta = Vec3::Zero();
};

// p_theta(d) ~ ln(1/ratio - 1), coefficients lowest degree first.
struct DepthFit {
  std::array<double, 5> coeffs{};
  int used = 0;
  int excluded = 0;  // samples with ratio 0 or 1
  int rank = 0;
  double rms_residual = 0.0;  // in logit space
  bool degenerate = false;
  // Largest sub-interval of the sampled depths on which p_theta' keeps one
  // strict sign; `monotone_sign` is +1 (increasing) or -1 (decreasing).
  double d_lo = 0.0;
  double d_hi = 0.0;
  int monotone_sign = 0;
  bool monotone_on_full_range = false;

  double eval(double d) const;
  double derivative(double d) const;
  // 1 / (1 + e^{p_theta(d)})
  double ratio(double d) const;
};

// ln K(d) = c0 + c1 d + c2 d^2 with K(d) the per-depth slope of l2norm vs
// volume through the origin.
struct VolumeFit {
  std::array<double, 3> coeffs{};
  int degree = 2;         // lower when too few distinct depths
  bool fallback = false;  // degree < 2
  int samples = 0;
  double rms_residual = 0.0;  // in ln K space
  std::vector<std::array<double, 2>> k_per_depth;  // (d, K)

  double ln_k(double d) const;
  double k(double d) const;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
// Ordinary least squares y ~ slope x + intercept with the coefficient of
// determination.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

// Fewer than 5 usable samples is a fit error.
DepthFit fit_depth_curve(std::span<const DepthSample> samples, double theta);
// Fewer than 3 samples or a non-positive volume is an error.
VolumeFit fit_volume_constant(std::span<const VolumeSample> samples);

struct GridRow {
  double alpha = 0.0;
  std::vector<double> depths;
};

// alpha in {0.05, 0.1, 0.2, 0.3} R; d from alpha + 0.05 R to 0.9 R in steps of 0.1 R.
std::vector<GridRow> default_grid(double radius);

struct DatabaseConfig {
  Vec3 xhat = Vec3(-1.0, 0.0, 0.0);  // boundary point
  Vec3 tau = Vec3(1.0, 0.0, 0.0);    // inward unit direction
  std::string direction_set = "N1";
  std::vector<GridRow> grid;
  double theta = 0.2;
  double beta = 0.02;  // minimal distance between a sample ball and the boundary
  int jobs = 1;
};

struct DirectionDiagnostics {
  Vec3 eta = Vec3::Zero();
  int samples = 0;
  bool depth_fit_ok = false;
  std::array<double, 5> depth_coeffs{};
  double depth_rms = 0.0;
};

struct Database {
  int version = 1;
  double theta = 0.2;
  DepthFit depth;
  VolumeFit volume;
  std::vector<DepthSample> depth_samples;
  std::vector<VolumeSample> volume_samples;
  std::vector<DirectionDiagnostics> per_direction;

  // Provenance.
  std::uint64_t mesh_fingerprint = 0;
  double mesh_radius = 0.0;  // max vertex distance from the origin
  double boundary_area = 0.0;
  double omega = 0.0;
  std::vector<std::array<double, 3>> materials;  // (tag, eps, sigma)
  Vec3 xhat = Vec3::Zero();
  Vec3 tau = Vec3::Zero();
  std::string direction_set;
  std::vector<GridRow> grid;
  double beta = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

// Algorithm: per direction one forward solve, then one sensitivity solve in
// the conductivity direction (0, 1_B) per grid point, B = ball(xhat + d tau,
// alpha). Grid points violating the interior condition are a configuration
// error raised before any solve.
Database generate_database(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                           const DatabaseConfig& config, const ProgressFn& progress = {});
// Fits only; samples and provenance already filled in.
void fit_database(Database& db);

void save_database(const Database& db, const std::filesystem::path& path);
Database load_database(const std::filesystem::path& path);
std::string database_to_string(const Database& db);
Database database_from_string(const std::string& text, const std::string& source = "database");

double mesh_radius(const TetMesh& mesh);
// Compatibility error when radius or boundary area differ by more than 5%.
void check_compatible(const Database& db, const TetMesh& mesh);

}  // namespace maxsens
