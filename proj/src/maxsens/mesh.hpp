#pragma once

#include "maxsens/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace maxsens {

// Reference from a tet to one of its six edges. `sign` is +1 when the local
// edge direction (lower local vertex -> higher local vertex) agrees with the
// global orientation (lower global index -> higher global index).
struct EdgeRef {
  Index edge = 0;
  int sign = 1;
};

struct BoundaryFace {
  std::array<Index, 3> vertices{};
  Index tet = 0;
  Vec3 normal = Vec3::Zero();  // unit, outward
  double area = 0.0;
};

// Local vertex pairs of the six tet edges, in the order used by tet_edges.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdgeVertices{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

// Immutable tetrahedral mesh with derived connectivity. Construction
// reorients negatively oriented tets, derives globally oriented edges and
// the boundary from face adjacency.
class TetMesh {
 public:
  TetMesh(std::vector<Vec3> vertices, std::vector<std::array<Index, 4>> tets,
          std::vector<int> region_tags);

  std::span<const Vec3> vertices() const { return vertices_; }
  std::span<const std::array<Index, 4>> tets() const { return tets_; }
  std::span<const int> region_tags() const { return region_tags_; }
  std::span<const std::array<Index, 2>> edges() const { return edges_; }
  std::span<const std::array<EdgeRef, 6>> tet_edges() const { return tet_edges_; }
  std::span<const BoundaryFace> boundary_faces() const { return boundary_faces_; }
  // Sorted global indices of vertices on the boundary.
  std::span<const Index> boundary_vertices() const { return boundary_vertices_; }
  // Area-weighted unit outward normal per boundary vertex (parallel to
  // boundary_vertices()).
  std::span<const Vec3> boundary_vertex_normals() const { return boundary_normals_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_tets() const { return tets_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_interior_faces() const { return num_interior_faces_; }

  // Position of `vertex` in boundary_vertices(), or -1.
  Index boundary_slot(Index vertex) const { return boundary_slot_[vertex]; }

  double signed_volume(Index tet) const;
  Vec3 tet_centroid(Index tet) const;
  std::vector<int> distinct_region_tags() const;

  // 64-bit FNV-1a hash over coordinates, connectivity and tags.
  std::uint64_t fingerprint() const;

 private:
  void reorient();
  void build_edges();
  void build_faces();

  std::vector<Vec3> vertices_;
  std::vector<std::array<Index, 4>> tets_;
  std::vector<int> region_tags_;
  std::vector<std::array<Index, 2>> edges_;
  std::vector<std::array<EdgeRef, 6>> tet_edges_;
  std::vector<BoundaryFace> boundary_faces_;
  std::vector<Index> boundary_vertices_;
  std::vector<Vec3> boundary_normals_;
  std::vector<Index> boundary_slot_;
  std::size_t num_interior_faces_ = 0;
};

struct MeshStats {
  double h = 0.0;  // max element diameter (m)
  std::size_t num_edges = 0;
  std::size_t num_tets = 0;
  double boundary_area = 0.0;  // m^2
};

MeshStats mesh_stats(const TetMesh& mesh);

// Ball of `radius` from an n^3 cube lattice (6 tets per cell) mapped
// radially onto the ball. Lattice shells |p|_inf = const land on spheres, so
// `layer_radii` (strictly increasing, each in (0, radius)) pins the
// outermost shells to those radii; tets are tagged 0, 1, ... from the inside
// out by layer.
TetMesh build_ball_mesh(double radius, int n, std::span<const double> layer_radii = {});

// Seeded random vertex displacement of up to `amplitude` (m) per axis, used
// to break lattice symmetry in synthetic-data meshes. Vertices on any sphere
// of `sphere_radii` (origin-centred) move tangentially and stay on it. A tet
// losing orientation or more than 90% of its volume is an invalid-argument
// error.
TetMesh jitter_mesh(const TetMesh& mesh, double amplitude, std::uint64_t seed,
                    std::span<const double> sphere_radii);

// Gmsh ASCII 2.2 reader. Tetrahedra (type 4) become mesh cells, tagged with
// their first (physical) tag. Lower-dimensional elements are skipped.
TetMesh load_msh(const std::filesystem::path& path);
TetMesh parse_msh(std::istream& in, const std::string& source_name);

// Writes tets with their region tags as physical tags.
void write_msh(const TetMesh& mesh, const std::filesystem::path& path);

}  // namespace maxsens
