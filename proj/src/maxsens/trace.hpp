#pragma once

#include "maxsens/fem.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace maxsens {

// Tangential boundary values, one per boundary vertex (in the order of
// TetMesh::boundary_vertices()).
class BoundaryTrace {
 public:
  BoundaryTrace(std::shared_ptr<const TetMesh> mesh, std::vector<Vec3c> values);

  const TetMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const TetMesh>& mesh_ptr() const { return mesh_; }
  const std::vector<Vec3c>& values() const { return values_; }
  const std::vector<double>& moduli() const { return moduli_; }
  double max_modulus() const;

  BoundaryTrace scaled(Complex c) const;
  // Values kept where keep[slot] is true, zero elsewhere.
  BoundaryTrace masked(const std::vector<bool>& keep) const;

 private:
  std::shared_ptr<const TetMesh> mesh_;
  std::vector<Vec3c> values_;
  std::vector<double> moduli_;
};

// E x n at each boundary vertex: the field is averaged over the tets owning
// the vertex's boundary faces and crossed with the area-weighted normal.
BoundaryTrace tangential_trace(const FieldSolution& e);

// Equirectangular image, W x H with H = W / 2. Pixel (i, j) has its center at
// theta = 2 pi (i + 1/2) / W, phi = pi/2 - pi (j + 1/2) / H; row 0 is north.
class Raster {
 public:
  Raster(int width, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return width_ / 2; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(j) * width_ + i]; }
  double& at(int i, int j) { return values_[static_cast<std::size_t>(j) * width_ + i]; }
  double max() const;
  // Index (i, j) of the first pixel attaining the max.
  std::pair<int, int> argmax() const;

  double theta(double i) const;
  double phi(double j) const;
  static Vec3 direction(double theta, double phi);
  Vec3 pixel_direction(int i, int j) const { return direction(theta(i), phi(j)); }

 private:
  int width_;
  std::vector<double> values_;
};

// Pixel -> nearest boundary vertex (angular metric on normalized positions),
// cached per mesh and width.
class EquirectProjector {
 public:
  EquirectProjector(const TetMesh& mesh, int width);

  int width() const { return width_; }
  Raster rasterize(const BoundaryTrace& trace) const;
  // Boundary slot chosen for pixel (i, j).
  Index slot(int i, int j) const { return slots_[static_cast<std::size_t>(j) * width_ + i]; }

 private:
  int width_;
  std::vector<Index> slots_;
};

// Odd or non-positive width is an invalid argument.
Raster rasterize_equirect(const BoundaryTrace& trace, int width = 360);

// sqrt of the boundary integral of the squared modulus, with moduli
// interpolated linearly on each face and the degree-2 triangle rule.
double l2_norm_gamma(const BoundaryTrace& trace);

// Fraction of the boundary area covered by faces whose mean vertex modulus is
// at least theta times the max modulus. All-zero traces have no ratio.
double thresholded_area_ratio(const BoundaryTrace& trace, double theta);

// Point of the boundary hit by the ray from the origin along `direction`,
// falling back to the angularly nearest boundary vertex.
Vec3 boundary_point_along(const TetMesh& mesh, const Vec3& direction);

// ASCII PGM (P2), values scaled so the max maps to 255.
void write_pgm(const Raster& raster, const std::filesystem::path& path,
               const std::string& comment = {});
// theta,phi,modulus per pixel.
void write_raster_csv(const Raster& raster, const std::filesystem::path& path,
                      const std::string& comment = {});

}  // namespace maxsens
