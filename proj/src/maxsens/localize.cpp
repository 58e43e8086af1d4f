#include "maxsens/localize.hpp"

#include "maxsens/dbscan.hpp"
#include "maxsens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace maxsens {

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lower + upper);
}

void require_same_mesh(const std::vector<BoundaryTrace>& traces) {
  if (traces.empty()) fail(ErrorCode::kInvalidArgument, "no traces to localize");
  const std::uint64_t fp = traces.front().mesh().fingerprint();
  for (const auto& t : traces) {
    if (t.mesh_ptr() != traces.front().mesh_ptr() && t.mesh().fingerprint() != fp)
      fail(ErrorCode::kCompatibility, "traces live on different meshes");
  }
}

double mean_boundary_edge(const TetMesh& mesh) {
  const auto verts = mesh.vertices();
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : mesh.boundary_faces()) {
    for (int k = 0; k < 3; ++k) {
      sum += (verts[f.vertices[k]] - verts[f.vertices[(k + 1) % 3]]).norm();
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

std::vector<double> part(const ComplexVector& x, bool imag, double sigma, NoiseOffset offset,
                         std::mt19937_64& rng) {
  const Eigen::Index n = x.size();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) v[k] = imag ? x[k].imag() : x[k].real();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double m = *lo;
  const double mx = *hi;
  std::normal_distribution<double> normal(0.0, sigma > 0.0 ? sigma : 1.0);
  const double shift = offset == NoiseOffset::kMidrange ? 0.5 * (m + mx) : 0.0;
  for (auto& e : v) {
    const double draw = sigma > 0.0 ? normal(rng) : 0.0;
    e = e + 0.5 * (mx - m) * draw + shift;
  }
  return v;
}

}  // namespace

Vec2 spherical_coords(const Vec3& x) {
  double theta = std::atan2(x.y(), x.x());
  if (theta < 0.0) theta += 2.0 * kPi;
  const double r = x.norm();
  const double phi = r > 0.0 ? std::asin(std::clamp(x.z() / r, -1.0, 1.0)) : 0.0;
  return Vec2(theta, phi);
}

double projection_error(const Vec3& truth, const Vec3& estimate) {
  const Vec2 a = spherical_coords(truth);
  const Vec2 b = spherical_coords(estimate);
  double dt = b.x() - a.x();
  dt = std::remainder(dt, 2.0 * kPi);
  const double n = a.norm();
  if (!(n > 0.0)) fail(ErrorCode::kInvalidArgument, "reference projection has zero spherical coordinates");
  return Vec2(dt, b.y() - a.y()).norm() / n;
}

Projection find_projection(const Raster& raster, const TetMesh& mesh, const LocalizeConfig& cfg) {
  if (!(cfg.beta_frac > 0.0 && cfg.beta_frac < 1.0))
    fail(ErrorCode::kInvalidArgument, "beta_frac must lie in (0, 1)");
  const double mx = raster.max();
  if (!(mx > 0.0)) fail(ErrorCode::kDetection, "raster has no positive value");
  const int w = raster.width();
  const int h = raster.height();
  const auto [imax, jmax] = raster.argmax();
  const int shift = w / 2 - imax;
  const double level = cfg.beta_frac * mx;
  std::vector<Vec2> white;
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      if (raster.at(i, j) >= level) white.emplace_back(double(((i + shift) % w + w) % w), double(j));
    }
  }
  if (white.empty()) fail(ErrorCode::kDetection, "no pixel above the binarization level");
  const auto hull = convex_hull(white);
  Vec2 bary = Vec2::Zero();
  for (const auto& p : hull) bary += p;
  bary /= static_cast<double>(hull.size());
  double ic = std::fmod(bary.x() - shift, static_cast<double>(w));
  if (ic < 0.0) ic += w;

  Projection out;
  out.theta = std::fmod(raster.theta(ic), 2.0 * kPi);
  out.phi = raster.phi(bary.y());
  out.point = boundary_point_along(mesh, Raster::direction(out.theta, out.phi));
  out.white_pixels = static_cast<int>(white.size());
  out.hull_vertices = static_cast<int>(hull.size());
  return out;
}

DepthInversion invert_depth(double ratio, const Database& db) {
  if (!(ratio > 0.0 && ratio < 1.0))
    fail(ErrorCode::kInvalidArgument, "area ratio must lie in (0, 1), got " + std::to_string(ratio));
  const DepthFit& f = db.depth;
  if (f.degenerate || f.monotone_sign == 0 || !(f.d_hi > f.d_lo))
    fail(ErrorCode::kInversion, "database depth law is degenerate; cannot invert");
  const double target = std::log(1.0 / ratio - 1.0);
  double lo = f.d_lo;
  double hi = f.d_hi;
  const double plo = f.eval(lo);
  const double phi = f.eval(hi);
  DepthInversion out;
  if (target < std::min(plo, phi) || target > std::max(plo, phi)) {
    out.clamped = true;
    out.d = std::abs(target - plo) < std::abs(target - phi) ? lo : hi;
    return out;
  }
  // g(d) = sign * (p(d) - target) increases on [lo, hi].
  const double s = f.monotone_sign;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double m = 0.5 * (lo + hi);
    if (s * (f.eval(m) - target) < 0.0) lo = m; else hi = m;
  }
  out.d = 0.5 * (lo + hi);
  return out;
}

VolumeEstimate estimate_volume(double l2norm, double d, const Database& db) {
  if (!(l2norm >= 0.0) || !std::isfinite(l2norm))
    fail(ErrorCode::kInvalidArgument, "trace norm must be finite and nonnegative");
  VolumeEstimate out;
  if (l2norm == 0.0) {
    out.no_perturbation = true;
    return out;
  }
  out.volume = l2norm / db.volume.k(d);
  out.alpha_equiv = std::cbrt(3.0 * out.volume / (4.0 * kPi));
  return out;
}

LocalizationResult localize(const std::vector<BoundaryTrace>& traces, const Database& db,
                            const LocalizeConfig& cfg) {
  require_same_mesh(traces);
  if (std::abs(cfg.theta - db.theta) > 1e-12) {
    fail(ErrorCode::kCompatibility, "localization threshold " + std::to_string(cfg.theta) +
                                        " differs from the database threshold " +
                                        std::to_string(db.theta));
  }
  LocalizationResult result;
  const TetMesh& mesh = traces.front().mesh();
  bool any = false;
  for (const auto& t : traces) any = any || t.max_modulus() > 0.0;
  if (!any) {
    result.no_perturbation = true;
    return result;
  }
  const EquirectProjector projector(mesh, cfg.raster_width);

  Detection det;
  Vec3 dir_sum = Vec3::Zero();
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const BoundaryTrace& trace = traces[k];
    if (!(trace.max_modulus() > 0.0)) continue;
    try {
      DirectionEstimate est;
      Raster raster = projector.rasterize(trace);
      if (cfg.remove_outliers) raster = remove_outliers(raster, cfg);
      est.projection = find_projection(raster, mesh, cfg);
      est.ratio = thresholded_area_ratio(trace, db.theta);
      est.depth = invert_depth(est.ratio, db);
      est.l2norm = l2_norm_gamma(trace);
      est.volume = estimate_volume(est.l2norm, est.depth.d, db);
      dir_sum += est.projection.point.normalized();
      det.d += est.depth.d;
      det.volume += est.volume.volume;
      det.clamped = det.clamped || est.depth.clamped;
      det.per_direction.push_back(est);
    } catch (const Error& e) {
      fail(e.code(), "direction " + std::to_string(k) + ": " + e.what());
    }
  }
  const double n = static_cast<double>(det.per_direction.size());
  det.d /= n;
  det.volume /= n;
  det.alpha_equiv = std::cbrt(3.0 * det.volume / (4.0 * kPi));
  const Vec3 unit = dir_sum.normalized();
  det.xhat = boundary_point_along(mesh, unit);
  const Vec2 sc = spherical_coords(det.xhat);
  det.theta = sc.x();
  det.phi = sc.y();
  det.x0 = det.xhat - det.d * det.xhat.normalized();
  result.detections.push_back(std::move(det));
  return result;
}

LocalizationResult localize_multiple(const std::vector<BoundaryTrace>& traces, const Database& db,
                                     const LocalizeConfig& cfg) {
  require_same_mesh(traces);
  const TetMesh& mesh = traces.front().mesh();
  std::vector<double> avg(mesh.boundary_vertices().size(), 0.0);
  int used = 0;
  for (const auto& t : traces) {
    const double mx = t.max_modulus();
    if (!(mx > 0.0)) continue;
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += t.moduli()[i] / mx;
    ++used;
  }
  LocalizationResult result;
  if (used == 0) {
    result.no_perturbation = true;
    return result;
  }
  const auto masks = cluster_masks(mesh, avg, cfg);
  for (const auto& mask : masks) {
    std::vector<BoundaryTrace> masked;
    masked.reserve(traces.size());
    for (const auto& t : traces) masked.push_back(t.masked(mask));
    const LocalizationResult r = localize(masked, db, cfg);
    for (const auto& d : r.detections) result.detections.push_back(d);
  }
  return result;
}

ComplexVector add_noise(const ComplexVector& x, double sigma_noise, std::uint64_t seed,
                        NoiseOffset offset) {
  if (x.size() == 0) fail(ErrorCode::kInvalidArgument, "cannot add noise to an empty vector");
  if (!(sigma_noise >= 0.0) || !std::isfinite(sigma_noise))
    fail(ErrorCode::kInvalidArgument, "noise level must be finite and nonnegative");
  std::mt19937_64 rng(seed);
  const auto re = part(x, false, sigma_noise, offset, rng);
  const auto im = part(x, true, sigma_noise, offset, rng);
  ComplexVector out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = Complex(re[k], im[k]);
  return out;
}

FieldSolution add_trace_noise(const FieldSolution& e, double sigma_noise, std::uint64_t seed,
                              NoiseOffset offset) {
  const std::vector<Index> edges = boundary_edges(e.mesh());
  ComplexVector trace_dofs(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t i = 0; i < edges.size(); ++i) trace_dofs[i] = e.coefficients()[edges[i]];
  const ComplexVector noisy = add_noise(trace_dofs, sigma_noise, seed, offset);
  ComplexVector out = e.coefficients();
  for (std::size_t i = 0; i < edges.size(); ++i) out[edges[i]] = noisy[i];
  return FieldSolution(e.mesh_ptr(), std::move(out));
}

Raster remove_outliers(const Raster& raster, const LocalizeConfig& cfg) {
  Raster out = raster;
  const double chord = 2.0 * std::sin(0.5 * cfg.dbscan_eps_rad);
  const double cos_eps = std::cos(cfg.dbscan_eps_rad);
  const int w = out.width();
  const int h = out.height();
  for (int pass = 0; pass < cfg.outlier_passes; ++pass) {
    const double med = median_of(out.values());
    std::vector<double> dev(out.values().size());
    for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = std::abs(out.values()[i] - med);
    const double cutoff = med + 3.0 * 1.4826 * median_of(dev);

    std::vector<std::pair<int, int>> bright;
    std::vector<Vec3> dirs;
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        if (out.at(i, j) > cutoff) {
          bright.emplace_back(i, j);
          dirs.push_back(out.pixel_direction(i, j));
        }
      }
    }
    if (bright.empty()) break;
    const auto labels = dbscan(dirs, chord, cfg.min_pts);
    const int nc = cluster_count(labels);
    std::vector<int> size(nc, 0);
    for (int l : labels) {
      if (l >= 0) ++size[l];
    }
    int main = -1;
    Vec3 center;
    if (nc > 0) {
      main = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
      center = Vec3::Zero();
      for (std::size_t b = 0; b < bright.size(); ++b) {
        if (labels[b] == main) center += dirs[b];
      }
      center.normalize();
    } else {
      const auto [i, j] = out.argmax();
      center = out.pixel_direction(i, j);
    }
    bool changed = false;
    for (std::size_t b = 0; b < bright.size(); ++b) {
      if (labels[b] == main && main >= 0) continue;
      if (dirs[b].dot(center) >= cos_eps) continue;
      out.at(bright[b].first, bright[b].second) = med;
      changed = true;
    }
    if (!changed) break;
  }
  return out;
}

std::vector<std::vector<bool>> cluster_masks(const TetMesh& mesh, const std::vector<double>& moduli,
                                             const LocalizeConfig& cfg) {
  const auto bverts = mesh.boundary_vertices();
  if (moduli.size() != bverts.size())
    fail(ErrorCode::kInvalidArgument, "modulus count does not match the boundary");
  const double mx = moduli.empty() ? 0.0 : *std::max_element(moduli.begin(), moduli.end());
  if (!(mx > 0.0)) fail(ErrorCode::kDetection, "trace has no positive modulus");
  const auto verts = mesh.vertices();
  std::vector<std::size_t> hot;
  std::vector<Vec3> pts;
  for (std::size_t s = 0; s < bverts.size(); ++s) {
    if (moduli[s] >= cfg.beta_frac * mx) {
      hot.push_back(s);
      pts.push_back(verts[bverts[s]]);
    }
  }
  const double eps = cfg.cluster_eps_m > 0.0 ? cfg.cluster_eps_m : 2.0 * mean_boundary_edge(mesh);
  const auto labels = dbscan(pts, eps, cfg.min_pts);
  const int nc = cluster_count(labels);
  if (nc == 0) fail(ErrorCode::kDetection, "no cluster found among the bright boundary vertices");

  // Order clusters by their peak modulus.
  std::vector<double> peak(nc, 0.0);
  for (std::size_t k = 0; k < hot.size(); ++k) {
    if (labels[k] >= 0) peak[labels[k]] = std::max(peak[labels[k]], moduli[hot[k]]);
  }
  std::vector<int> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return peak[a] > peak[b]; });
  std::vector<int> rank(nc);
  for (int r = 0; r < nc; ++r) rank[order[r]] = r;

  std::vector<std::vector<bool>> masks(nc, std::vector<bool>(bverts.size(), false));
  for (std::size_t s = 0; s < bverts.size(); ++s) {
    const Vec3& x = verts[bverts[s]];
    double best = std::numeric_limits<double>::infinity();
    int label = -1;
    for (std::size_t k = 0; k < hot.size(); ++k) {
      if (labels[k] < 0) continue;
      const double d = (pts[k] - x).squaredNorm();
      if (d < best) {
        best = d;
        label = labels[k];
      }
    }
    masks[rank[label]][s] = true;
  }
  return masks;
}

std::vector<BoundaryTrace> cluster_traces(const BoundaryTrace& trace, const LocalizeConfig& cfg) {
  std::vector<BoundaryTrace> out;
  for (const auto& mask : cluster_masks(trace.mesh(), trace.moduli(), cfg))
    out.push_back(trace.masked(mask));
  return out;
}

}  // namespace maxsens
