#pragma once

#include "maxsens/database.hpp"
#include "maxsens/geometry2d.hpp"
#include "maxsens/trace.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace maxsens {

struct LocalizeConfig {
  double theta = 0.2;       // area-ratio threshold; must match the database
  double beta_frac = 0.5;   // raster binarization level, fraction of the max
  int raster_width = 360;
  double dbscan_eps_rad = 0.1;  // raster clustering radius (outlier removal)
  double cluster_eps_m = 0.0;   // boundary clustering radius; 0 = 2x mean boundary edge
  int min_pts = 5;
  int outlier_passes = 2;
  bool remove_outliers = false;
};

// (theta, phi) with theta = atan2(y, x) in [0, 2 pi) and phi the latitude.
Vec2 spherical_coords(const Vec3& x);
// |(theta, phi) - (theta, phi)_true| / |(theta, phi)_true|, theta difference
// wrapped to (-pi, pi].
double projection_error(const Vec3& truth, const Vec3& estimate);

struct Projection {
  Vec3 point = Vec3::Zero();  // on the boundary
  double theta = 0.0;
  double phi = 0.0;
  int white_pixels = 0;
  int hull_vertices = 0;
};

// Binarize at beta_frac * max, recenter the max pixel's column, convex hull of
// the white pixels, isobarycenter of the hull vertices, undo the shift and map
// to the boundary. No white pixel is a detection error.
Projection find_projection(const Raster& raster, const TetMesh& mesh, const LocalizeConfig& cfg);

struct DepthInversion {
  double d = 0.0;
  bool clamped = false;  // target outside the fitted range
};
// Solves 1/(1 + e^{p_theta(d)}) = ratio on the monotone interval.
DepthInversion invert_depth(double ratio, const Database& db);

struct VolumeEstimate {
  double volume = 0.0;
  double alpha_equiv = 0.0;  // radius of the ball with that volume
  bool no_perturbation = false;
};
VolumeEstimate estimate_volume(double l2norm, double d, const Database& db);

struct DirectionEstimate {
  Projection projection;
  double ratio = 0.0;
  DepthInversion depth;
  double l2norm = 0.0;
  VolumeEstimate volume;
};

struct Detection {
  Vec3 xhat = Vec3::Zero();
  double theta = 0.0;
  double phi = 0.0;
  double d = 0.0;
  Vec3 x0 = Vec3::Zero();
  double volume = 0.0;
  double alpha_equiv = 0.0;
  bool clamped = false;
  std::vector<DirectionEstimate> per_direction;
};

struct LocalizationResult {
  bool no_perturbation = false;
  std::vector<Detection> detections;
};

// One trace per incident direction, all on one mesh. Per-direction estimates
// are averaged: xhat as the normalized mean unit vector, d and volume
// arithmetically; x0 = xhat - d xhat / |xhat|.
LocalizationResult localize(const std::vector<BoundaryTrace>& traces, const Database& db,
                            const LocalizeConfig& cfg);
// Clusters first (cluster_masks on the averaged normalized modulus), then
// localizes each cluster with the same mask applied to every direction.
LocalizationResult localize_multiple(const std::vector<BoundaryTrace>& traces, const Database& db,
                                     const LocalizeConfig& cfg);

// kMidrange keeps the (m + M)/2 term of the noise model. On sign-skewed data
// that shift exceeds the signal itself, so kNone (zero-mean noise only) is
// offered for experiments that need the data to survive at small sigma.
enum class NoiseOffset { kMidrange, kNone };

// x_k + (M - m)/2 n_k + (m + M)/2 on real and imaginary parts separately,
// n_k ~ N(0, sigma_noise), m and M the min and max of the part.
ComplexVector add_noise(const ComplexVector& x, double sigma_noise, std::uint64_t seed,
                        NoiseOffset offset = NoiseOffset::kMidrange);
// add_noise applied to the boundary-edge coefficients of a field (the
// degrees of freedom of its tangential trace); interior coefficients are kept.
FieldSolution add_trace_noise(const FieldSolution& e, double sigma_noise, std::uint64_t seed,
                              NoiseOffset offset = NoiseOffset::kMidrange);

// Bright pixels (above median + 3 * 1.4826 * MAD) that are neither in the
// largest DBSCAN cluster of bright pixels nor within dbscan_eps_rad of its
// barycenter are set to the median; repeated outlier_passes times.
Raster remove_outliers(const Raster& raster, const LocalizeConfig& cfg);

// DBSCAN over the boundary vertices whose modulus reaches beta_frac * max.
// Every boundary vertex joins the cluster of its nearest thresholded
// clustered vertex; one mask per cluster. No cluster is a detection error.
std::vector<std::vector<bool>> cluster_masks(const TetMesh& mesh, const std::vector<double>& moduli,
                                             const LocalizeConfig& cfg);
std::vector<BoundaryTrace> cluster_traces(const BoundaryTrace& trace, const LocalizeConfig& cfg);

}  // namespace maxsens
