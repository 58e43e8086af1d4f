#include "maxsens/trace.hpp"

#include "maxsens/error.hpp"
#include "maxsens/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace maxsens {

BoundaryTrace::BoundaryTrace(std::shared_ptr<const TetMesh> mesh, std::vector<Vec3c> values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) fail(ErrorCode::kInvalidArgument, "trace needs a mesh");
  if (values_.size() != mesh_->boundary_vertices().size())
    fail(ErrorCode::kInvalidArgument, "trace length does not match the boundary vertex count");
  moduli_.reserve(values_.size());
  for (const auto& v : values_) moduli_.push_back(modulus(v));
}

double BoundaryTrace::max_modulus() const {
  return moduli_.empty() ? 0.0 : *std::max_element(moduli_.begin(), moduli_.end());
}

BoundaryTrace BoundaryTrace::scaled(Complex c) const {
  std::vector<Vec3c> v = values_;
  for (auto& x : v) x *= c;
  return BoundaryTrace(mesh_, std::move(v));
}

BoundaryTrace BoundaryTrace::masked(const std::vector<bool>& keep) const {
  if (keep.size() != values_.size())
    fail(ErrorCode::kInvalidArgument, "mask length does not match the trace");
  std::vector<Vec3c> v = values_;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!keep[i]) v[i].setZero();
  }
  return BoundaryTrace(mesh_, std::move(v));
}

BoundaryTrace tangential_trace(const FieldSolution& e) {
  const TetMesh& mesh = e.mesh();
  const auto bverts = mesh.boundary_vertices();
  const auto normals = mesh.boundary_vertex_normals();
  const auto verts = mesh.vertices();
  std::vector<Vec3c> sum(bverts.size(), Vec3c::Zero());
  std::vector<int> count(bverts.size(), 0);
  for (const auto& face : mesh.boundary_faces()) {
    const TetGeometry g = tet_geometry(mesh, face.tet);
    for (Index v : face.vertices) {
      const Index slot = mesh.boundary_slot(v);
      sum[slot] += e.value_in_tet(face.tet, g, g.barycentric(verts[v]));
      ++count[slot];
    }
  }
  std::vector<Vec3c> values(bverts.size());
  for (std::size_t s = 0; s < bverts.size(); ++s) {
    const Vec3c avg = count[s] > 0 ? Vec3c(sum[s] / static_cast<double>(count[s])) : Vec3c::Zero();
    values[s] = cross(avg, normals[s]);
  }
  return BoundaryTrace(e.mesh_ptr(), std::move(values));
}

Raster::Raster(int width, std::vector<double> values) : width_(width), values_(std::move(values)) {
  if (width_ <= 0 || width_ % 2 != 0)
    fail(ErrorCode::kInvalidArgument, "raster width must be positive and even");
  if (values_.size() != static_cast<std::size_t>(width_) * (width_ / 2))
    fail(ErrorCode::kInvalidArgument, "raster value count must be W * W/2");
}

double Raster::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::pair<int, int> Raster::argmax() const {
  const auto it = std::max_element(values_.begin(), values_.end());
  const auto k = static_cast<int>(it - values_.begin());
  return {k % width_, k / width_};
}

double Raster::theta(double i) const { return 2.0 * kPi * (i + 0.5) / width_; }
double Raster::phi(double j) const { return 0.5 * kPi - kPi * (j + 0.5) / height(); }

Vec3 Raster::direction(double theta, double phi) {
  return Vec3(std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi));
}

EquirectProjector::EquirectProjector(const TetMesh& mesh, int width) : width_(width) {
  if (width <= 0 || width % 2 != 0)
    fail(ErrorCode::kInvalidArgument, "raster width must be positive and even");
  const auto bverts = mesh.boundary_vertices();
  if (bverts.empty()) fail(ErrorCode::kInvalidArgument, "mesh has no boundary");
  const auto verts = mesh.vertices();
  std::vector<Vec3> dirs;
  dirs.reserve(bverts.size());
  for (Index v : bverts) {
    const double r = verts[v].norm();
    dirs.push_back(r > 0.0 ? Vec3(verts[v] / r) : Vec3::Zero());
  }
  const int height = width / 2;
  const Raster probe(width, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0));
  slots_.resize(static_cast<std::size_t>(width) * height);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      const Vec3 p = probe.pixel_direction(i, j);
      Index best = 0;
      double best_dot = -2.0;
      for (std::size_t s = 0; s < dirs.size(); ++s) {
        const double d = p.dot(dirs[s]);
        if (d > best_dot) {
          best_dot = d;
          best = static_cast<Index>(s);
        }
      }
      slots_[static_cast<std::size_t>(j) * width + i] = best;
    }
  }
}

Raster EquirectProjector::rasterize(const BoundaryTrace& trace) const {
  std::vector<double> v(slots_.size());
  const auto& m = trace.moduli();
  for (std::size_t p = 0; p < slots_.size(); ++p) v[p] = m[slots_[p]];
  return Raster(width_, std::move(v));
}

Raster rasterize_equirect(const BoundaryTrace& trace, int width) {
  return EquirectProjector(trace.mesh(), width).rasterize(trace);
}

double l2_norm_gamma(const BoundaryTrace& trace) {
  const TetMesh& mesh = trace.mesh();
  const TriangleRule& rule = triangle_rule_degree2();
  const auto& m = trace.moduli();
  double sum = 0.0;
  for (const auto& face : mesh.boundary_faces()) {
    const double a = m[mesh.boundary_slot(face.vertices[0])];
    const double b = m[mesh.boundary_slot(face.vertices[1])];
    const double c = m[mesh.boundary_slot(face.vertices[2])];
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const auto& mu = rule.points[q];
      const double v = mu[0] * a + mu[1] * b + mu[2] * c;
      sum += rule.weights[q] * face.area * v * v;
    }
  }
  return std::sqrt(sum);
}

double thresholded_area_ratio(const BoundaryTrace& trace, double theta) {
  if (!(theta > 0.0 && theta <= 1.0))
    fail(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1]");
  const double mx = trace.max_modulus();
  if (!(mx > 0.0)) fail(ErrorCode::kUndefinedRatio, "trace is identically zero");
  const TetMesh& mesh = trace.mesh();
  const auto& m = trace.moduli();
  const double level = theta * mx;
  double total = 0.0;
  double hot = 0.0;
  for (const auto& face : mesh.boundary_faces()) {
    const double mean = (m[mesh.boundary_slot(face.vertices[0])] +
                         m[mesh.boundary_slot(face.vertices[1])] +
                         m[mesh.boundary_slot(face.vertices[2])]) /
                        3.0;
    total += face.area;
    // Relative slack so that a face of three max-valued vertices counts at theta = 1.
    if (mean >= level * (1.0 - 1e-12)) hot += face.area;
  }
  return hot / total;
}

Vec3 boundary_point_along(const TetMesh& mesh, const Vec3& direction) {
  const Vec3 d = direction.normalized();
  const auto verts = mesh.vertices();
  double best_t = -1.0;
  for (const auto& face : mesh.boundary_faces()) {
    // Moller-Trumbore from the origin.
    const Vec3& a = verts[face.vertices[0]];
    const Vec3 e1 = verts[face.vertices[1]] - a;
    const Vec3 e2 = verts[face.vertices[2]] - a;
    const Vec3 p = d.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) continue;
    const Vec3 s = -a;
    const double u = s.dot(p) / det;
    if (u < -1e-12 || u > 1.0 + 1e-12) continue;
    const Vec3 q = s.cross(e1);
    const double v = d.dot(q) / det;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) continue;
    const double t = e2.dot(q) / det;
    if (t > 0.0 && t > best_t) best_t = t;
  }
  if (best_t > 0.0) return best_t * d;
  Index best = mesh.boundary_vertices()[0];
  double best_dot = -2.0;
  for (Index v : mesh.boundary_vertices()) {
    const double dd = verts[v].normalized().dot(d);
    if (dd > best_dot) {
      best_dot = dd;
      best = v;
    }
  }
  return verts[best];
}

void write_pgm(const Raster& raster, const std::filesystem::path& path, const std::string& comment) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "P2\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << raster.width() << ' ' << raster.height() << "\n255\n";
  const double mx = raster.max();
  for (int j = 0; j < raster.height(); ++j) {
    for (int i = 0; i < raster.width(); ++i) {
      const int level = mx > 0.0 ? static_cast<int>(std::lround(255.0 * raster.at(i, j) / mx)) : 0;
      out << level << (i + 1 == raster.width() ? '\n' : ' ');
    }
  }
}

void write_raster_csv(const Raster& raster, const std::filesystem::path& path,
                      const std::string& comment) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "theta,phi,modulus\n" << std::setprecision(17);
  for (int j = 0; j < raster.height(); ++j) {
    for (int i = 0; i < raster.width(); ++i)
      out << raster.theta(i) << ',' << raster.phi(j) << ',' << raster.at(i, j) << "\n";
  }
}

}  // namespace maxsens
