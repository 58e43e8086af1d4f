#include "maxsens/mesh.hpp"

#include "maxsens/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>
#include <sstream>
#include <utility>

namespace maxsens {

namespace {

// Faces opposite local vertex 0..3.
constexpr std::array<std::array<int, 3>, 4> kTetFaces{
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

class Fnv1a {
 public:
  template <typename T>
  void add(const T& value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (unsigned char b : bytes) {
      hash_ ^= b;
      hash_ *= 1099511628211ULL;
    }
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

}  // namespace

TetMesh::TetMesh(std::vector<Vec3> vertices, std::vector<std::array<Index, 4>> tets,
                 std::vector<int> region_tags)
    : vertices_(std::move(vertices)),
      tets_(std::move(tets)),
      region_tags_(std::move(region_tags)) {
  if (tets_.empty()) fail(ErrorCode::kInvalidArgument, "mesh has no tetrahedra");
  if (region_tags_.empty()) region_tags_.assign(tets_.size(), 0);
  if (region_tags_.size() != tets_.size())
    fail(ErrorCode::kInvalidArgument, "region tag count does not match tet count");
  const auto nv = static_cast<Index>(vertices_.size());
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    for (Index v : tets_[t]) {
      if (v < 0 || v >= nv)
        fail(ErrorCode::kInvalidArgument,
             "tet " + std::to_string(t) + " references missing vertex " + std::to_string(v));
    }
  }
  reorient();
  build_edges();
  build_faces();
}

void TetMesh::reorient() {
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    if (signed_volume(static_cast<Index>(t)) < 0.0) std::swap(tets_[t][2], tets_[t][3]);
  }
}

void TetMesh::build_edges() {
  std::vector<std::array<Index, 2>> all;
  all.reserve(tets_.size() * 6);
  for (const auto& tet : tets_) {
    for (const auto& [a, b] : kTetEdgeVertices) {
      all.push_back({std::min(tet[a], tet[b]), std::max(tet[a], tet[b])});
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  edges_ = std::move(all);

  tet_edges_.resize(tets_.size());
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    const auto& tet = tets_[t];
    for (int e = 0; e < 6; ++e) {
      const Index va = tet[kTetEdgeVertices[e][0]];
      const Index vb = tet[kTetEdgeVertices[e][1]];
      const std::array<Index, 2> key{std::min(va, vb), std::max(va, vb)};
      const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
      tet_edges_[t][e] = EdgeRef{static_cast<Index>(it - edges_.begin()), va < vb ? 1 : -1};
    }
  }
}

void TetMesh::build_faces() {
  struct FaceKey {
    std::array<Index, 3> sorted;
    Index tet;
    int local;
  };
  std::vector<FaceKey> faces;
  faces.reserve(tets_.size() * 4);
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    for (int f = 0; f < 4; ++f) {
      std::array<Index, 3> key{tets_[t][kTetFaces[f][0]], tets_[t][kTetFaces[f][1]],
                               tets_[t][kTetFaces[f][2]]};
      std::sort(key.begin(), key.end());
      faces.push_back({key, static_cast<Index>(t), f});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const FaceKey& a, const FaceKey& b) {
    return a.sorted != b.sorted ? a.sorted < b.sorted : a.tet < b.tet;
  });

  num_interior_faces_ = 0;
  std::size_t i = 0;
  while (i < faces.size()) {
    std::size_t j = i + 1;
    while (j < faces.size() && faces[j].sorted == faces[i].sorted) ++j;
    const std::size_t count = j - i;
    if (count == 1) {
      const auto& face = faces[i];
      const auto& local = kTetFaces[face.local];
      BoundaryFace bf;
      bf.tet = face.tet;
      bf.vertices = {tets_[face.tet][local[0]], tets_[face.tet][local[1]],
                     tets_[face.tet][local[2]]};
      const Vec3& a = vertices_[bf.vertices[0]];
      const Vec3& b = vertices_[bf.vertices[1]];
      const Vec3& c = vertices_[bf.vertices[2]];
      Vec3 n = (b - a).cross(c - a);
      bf.area = 0.5 * n.norm();
      if (bf.area > 0.0) n /= n.norm();
      const Vec3 outward = (a + b + c) / 3.0 - tet_centroid(face.tet);
      if (n.dot(outward) < 0.0) {
        n = -n;
        std::swap(bf.vertices[1], bf.vertices[2]);
      }
      bf.normal = n;
      boundary_faces_.push_back(bf);
    } else if (count == 2) {
      ++num_interior_faces_;
    } else {
      std::ostringstream msg;
      msg << "non-manifold face (" << faces[i].sorted[0] << ", " << faces[i].sorted[1] << ", "
          << faces[i].sorted[2] << ") shared by " << count << " tets";
      fail(ErrorCode::kInvalidArgument, msg.str());
    }
    i = j;
  }

  std::vector<Index> bv;
  bv.reserve(boundary_faces_.size() * 3);
  for (const auto& f : boundary_faces_) bv.insert(bv.end(), f.vertices.begin(), f.vertices.end());
  std::sort(bv.begin(), bv.end());
  bv.erase(std::unique(bv.begin(), bv.end()), bv.end());
  boundary_vertices_ = std::move(bv);

  boundary_slot_.assign(vertices_.size(), -1);
  for (std::size_t s = 0; s < boundary_vertices_.size(); ++s)
    boundary_slot_[boundary_vertices_[s]] = static_cast<Index>(s);

  boundary_normals_.assign(boundary_vertices_.size(), Vec3::Zero());
  for (const auto& f : boundary_faces_) {
    for (Index v : f.vertices) boundary_normals_[boundary_slot_[v]] += f.area * f.normal;
  }
  for (auto& n : boundary_normals_) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
}

double TetMesh::signed_volume(Index tet) const {
  const auto& t = tets_[tet];
  return tet_signed_volume(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]);
}

Vec3 TetMesh::tet_centroid(Index tet) const {
  const auto& t = tets_[tet];
  return 0.25 * (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]] + vertices_[t[3]]);
}

std::vector<int> TetMesh::distinct_region_tags() const {
  std::set<int> tags(region_tags_.begin(), region_tags_.end());
  return {tags.begin(), tags.end()};
}

std::uint64_t TetMesh::fingerprint() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(vertices_.size()));
  h.add(static_cast<std::uint64_t>(tets_.size()));
  for (const auto& v : vertices_) {
    h.add(v.x());
    h.add(v.y());
    h.add(v.z());
  }
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    for (Index v : tets_[t]) h.add(v);
    h.add(region_tags_[t]);
  }
  return h.value();
}

MeshStats mesh_stats(const TetMesh& mesh) {
  MeshStats s;
  const auto verts = mesh.vertices();
  for (const auto& tet : mesh.tets()) {
    for (const auto& [a, b] : kTetEdgeVertices) {
      s.h = std::max(s.h, (verts[tet[a]] - verts[tet[b]]).norm());
    }
  }
  s.num_edges = mesh.num_edges();
  s.num_tets = mesh.num_tets();
  for (const auto& f : mesh.boundary_faces()) s.boundary_area += f.area;
  return s;
}

TetMesh build_ball_mesh(double radius, int n, std::span<const double> layer_radii) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    fail(ErrorCode::kInvalidArgument, "ball radius must be positive");
  if (n < 2) fail(ErrorCode::kInvalidArgument, "ball lattice resolution must be at least 2");

  const int m = static_cast<int>(layer_radii.size());
  if (2 * m >= n)
    fail(ErrorCode::kInvalidArgument,
         "lattice resolution too small for " + std::to_string(m) + " layer interfaces");
  for (int j = 0; j < m; ++j) {
    const double r = layer_radii[j];
    if (!(r > 0.0 && r < radius) || (j > 0 && !(r > layer_radii[j - 1])))
      fail(ErrorCode::kInvalidArgument,
           "layer radii must be strictly increasing inside (0, radius)");
  }

  // Radial profile on lattice shells: shell level s in [0, 1] -> radius fraction.
  // Pinned shells s_j = 1 - 2j/n carry layer_radii[m - j] / radius.
  std::vector<double> knots_s{0.0};
  std::vector<double> knots_r{0.0};
  for (int j = m; j >= 1; --j) {
    knots_s.push_back(1.0 - 2.0 * j / n);
    knots_r.push_back(layer_radii[m - j] / radius);
  }
  knots_s.push_back(1.0);
  knots_r.push_back(1.0);
  auto profile = [&](double s) {
    for (std::size_t k = 1; k < knots_s.size(); ++k) {
      if (s <= knots_s[k] || k + 1 == knots_s.size()) {
        const double t = (s - knots_s[k - 1]) / (knots_s[k] - knots_s[k - 1]);
        return knots_r[k - 1] + t * (knots_r[k] - knots_r[k - 1]);
      }
    }
    return 1.0;
  };

  const int np = n + 1;
  auto lattice = [&](int i, int j, int k) {
    return Vec3(-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n, -1.0 + 2.0 * k / n);
  };
  auto id = [&](int i, int j, int k) { return static_cast<Index>((k * np + j) * np + i); };

  std::vector<Vec3> vertices(static_cast<std::size_t>(np) * np * np);
  for (int k = 0; k < np; ++k) {
    for (int j = 0; j < np; ++j) {
      for (int i = 0; i < np; ++i) {
        const Vec3 p = lattice(i, j, k);
        const double euclid = p.norm();
        Vec3 x = Vec3::Zero();
        if (euclid > 0.0) {
          const double s = p.lpNorm<Eigen::Infinity>();
          x = (radius * profile(s) / euclid) * p;
        }
        // Shell vertices land on the sphere up to rounding; snap the outer one.
        if (i == 0 || j == 0 || k == 0 || i == n || j == n || k == n) x *= radius / x.norm();
        vertices[id(i, j, k)] = x;
      }
    }
  }

  // Kuhn subdivision with the cell diagonal pointing away from the origin in
  // every octant; face diagonals then agree between neighbouring cells.
  static constexpr std::array<std::array<int, 3>, 6> kPerms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<std::array<Index, 4>> tets;
  std::vector<int> tags;
  tets.reserve(static_cast<std::size_t>(n) * n * n * 6);
  tags.reserve(tets.capacity());
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const std::array<int, 3> lo{i, j, k};
        std::array<int, 3> start{};
        std::array<int, 3> step{};
        for (int a = 0; a < 3; ++a) {
          const int twice_center = 2 * lo[a] + 1 - n;  // sign of the cell center
          step[a] = twice_center >= 0 ? 1 : -1;
          start[a] = step[a] > 0 ? lo[a] : lo[a] + 1;
        }
        for (const auto& perm : kPerms) {
          std::array<int, 3> c = start;
          std::array<Index, 4> tet{};
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[perm[s]] += step[perm[s]];
            tet[s + 1] = id(c[0], c[1], c[2]);
          }
          // Layer decided in lattice coordinates, before the radial map.
          Vec3 mean = Vec3::Zero();
          c = start;
          mean += lattice(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[perm[s]] += step[perm[s]];
            mean += lattice(c[0], c[1], c[2]);
          }
          mean *= 0.25;
          const double level = mean.lpNorm<Eigen::Infinity>();
          int tag = 0;
          for (int q = 1; q + 1 < static_cast<int>(knots_s.size()); ++q) {
            if (knots_s[q] < level) ++tag;
          }
          tets.push_back(tet);
          tags.push_back(tag);
        }
      }
    }
  }
  return TetMesh(std::move(vertices), std::move(tets), std::move(tags));
}

TetMesh jitter_mesh(const TetMesh& mesh, double amplitude, std::uint64_t seed,
                    std::span<const double> sphere_radii) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    fail(ErrorCode::kInvalidArgument, "jitter amplitude must be finite and nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<Vec3> verts(mesh.vertices().begin(), mesh.vertices().end());
  for (Vec3& x : verts) {
    const Vec3 delta(u(rng), u(rng), u(rng));
    const double r = x.norm();
    const auto on = std::find_if(sphere_radii.begin(), sphere_radii.end(),
                                 [&](double s) { return std::abs(r - s) <= 1e-9 * s; });
    if (on == sphere_radii.end()) {
      x += delta;
    } else {
      const Vec3 n = x / r;
      x = *on * (x + delta - n * n.dot(delta)).normalized();
    }
  }
  std::vector<std::array<Index, 4>> tets(mesh.tets().begin(), mesh.tets().end());
  for (std::size_t t = 0; t < tets.size(); ++t) {
    const auto& c = tets[t];
    const double v = (verts[c[1]] - verts[c[0]]).cross(verts[c[2]] - verts[c[0]]).dot(verts[c[3]] - verts[c[0]]) / 6.0;
    if (!(v > 0.1 * mesh.signed_volume(static_cast<Index>(t))))
      fail(ErrorCode::kInvalidArgument, "jitter amplitude too large: tet " + std::to_string(t) + " collapses");
  }
  return TetMesh(std::move(verts), std::move(tets),
                 std::vector<int>(mesh.region_tags().begin(), mesh.region_tags().end()));
}

}  // namespace maxsens
