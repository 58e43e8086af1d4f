#include "maxsens/fem.hpp"

#include "maxsens/error.hpp"
#include "maxsens/quadrature.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace maxsens {

namespace {

using Triplet = Eigen::Triplet<Complex, int>;

ComplexSparseMatrix from_triplets(Index n, const std::vector<Triplet>& triplets) {
  ComplexSparseMatrix::Storage m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return ComplexSparseMatrix(std::move(m));
}

bool edge_on_face(const std::array<Index, 4>& tet, int local_edge,
                  const std::array<Index, 3>& face) {
  const Index a = tet[kTetEdgeVertices[local_edge][0]];
  const Index b = tet[kTetEdgeVertices[local_edge][1]];
  auto on = [&](Index v) { return v == face[0] || v == face[1] || v == face[2]; };
  return on(a) && on(b);
}

}  // namespace

EdgeSpace::EdgeSpace(std::shared_ptr<const TetMesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) fail(ErrorCode::kInvalidArgument, "edge space needs a mesh");
}

std::array<double, 4> TetGeometry::barycentric(const Vec3& p) const {
  std::array<double, 4> l{};
  double rest = 1.0;
  for (int k = 1; k < 4; ++k) {
    l[k] = grad_lambda[k].dot(p - x[0]);
    rest -= l[k];
  }
  l[0] = rest;
  return l;
}

TetGeometry tet_geometry(const TetMesh& mesh, Index tet) {
  TetGeometry g;
  const auto& t = mesh.tets()[tet];
  const auto verts = mesh.vertices();
  for (int k = 0; k < 4; ++k) g.x[k] = verts[t[k]];
  Mat3 jac;
  jac.col(0) = g.x[1] - g.x[0];
  jac.col(1) = g.x[2] - g.x[0];
  jac.col(2) = g.x[3] - g.x[0];
  const double det = jac.determinant();
  double scale = 0.0;
  for (const auto& [a, b] : kTetEdgeVertices) scale = std::max(scale, (g.x[a] - g.x[b]).norm());
  if (!(std::abs(det) > 1e-12 * scale * scale * scale))
    fail(ErrorCode::kAssembly, "degenerate tetrahedron " + std::to_string(tet) + " (zero volume)");
  g.volume = det / 6.0;
  const Mat3 inv = jac.inverse();
  g.grad_lambda[1] = inv.row(0).transpose();
  g.grad_lambda[2] = inv.row(1).transpose();
  g.grad_lambda[3] = inv.row(2).transpose();
  g.grad_lambda[0] = -(g.grad_lambda[1] + g.grad_lambda[2] + g.grad_lambda[3]);
  return g;
}

std::array<Vec3, 6> whitney_values(const TetGeometry& g, const std::array<EdgeRef, 6>& edges,
                                   const std::array<double, 4>& lambda) {
  std::array<Vec3, 6> w;
  for (int e = 0; e < 6; ++e) {
    const int a = kTetEdgeVertices[e][0];
    const int b = kTetEdgeVertices[e][1];
    w[e] = edges[e].sign * (lambda[a] * g.grad_lambda[b] - lambda[b] * g.grad_lambda[a]);
  }
  return w;
}

std::array<Vec3, 6> whitney_curls(const TetGeometry& g, const std::array<EdgeRef, 6>& edges) {
  std::array<Vec3, 6> c;
  for (int e = 0; e < 6; ++e) {
    const int a = kTetEdgeVertices[e][0];
    const int b = kTetEdgeVertices[e][1];
    c[e] = (2.0 * edges[e].sign) * g.grad_lambda[a].cross(g.grad_lambda[b]);
  }
  return c;
}

ComplexSparseMatrix assemble_curl_curl(const EdgeSpace& space) {
  const TetMesh& mesh = space.mesh();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_tets() * 36);
  for (Index t = 0; t < static_cast<Index>(mesh.num_tets()); ++t) {
    const TetGeometry g = tet_geometry(mesh, t);
    const auto& edges = mesh.tet_edges()[t];
    const auto curls = whitney_curls(g, edges);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        triplets.emplace_back(edges[i].edge, edges[j].edge, g.volume * curls[i].dot(curls[j]));
      }
    }
  }
  return from_triplets(space.num_dofs(), triplets);
}

std::vector<Index> boundary_edges(const TetMesh& mesh) {
  std::vector<Index> out;
  for (const auto& face : mesh.boundary_faces()) {
    const auto& tet = mesh.tets()[face.tet];
    for (int e = 0; e < 6; ++e) {
      if (edge_on_face(tet, e, face.vertices)) out.push_back(mesh.tet_edges()[face.tet][e].edge);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ComplexSparseMatrix assemble_mass(const EdgeSpace& space, const std::map<int, Complex>& kappa) {
  const TetMesh& mesh = space.mesh();
  for (int tag : mesh.distinct_region_tags()) {
    if (!kappa.contains(tag))
      fail(ErrorCode::kConfiguration, "no material given for region tag " + std::to_string(tag));
  }
  const auto tags = mesh.region_tags();
  return assemble_mass(space, [&](Index t, const Vec3&) { return kappa.at(tags[t]); });
}

ComplexSparseMatrix assemble_mass(const EdgeSpace& space, const CoefficientFn& kappa,
                                  const TetFilter& filter, const RefineFn& refine) {
  const TetMesh& mesh = space.mesh();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_tets() * 36);
  for (Index t = 0; t < static_cast<Index>(mesh.num_tets()); ++t) {
    if (filter && !filter(t)) continue;
    const TetRule& rule = tet_rule_composite(refine ? refine(t) : 0);
    const TetGeometry g = tet_geometry(mesh, t);
    const auto& edges = mesh.tet_edges()[t];
    Eigen::Matrix<Complex, 6, 6> local = Eigen::Matrix<Complex, 6, 6>::Zero();
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const Complex c = kappa(t, x) * (rule.weights[q] * g.volume);
      if (c == Complex(0.0)) continue;
      const auto w = whitney_values(g, edges, rule.points[q]);
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) local(i, j) += c * w[i].dot(w[j]);
      }
    }
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) triplets.emplace_back(edges[i].edge, edges[j].edge, local(i, j));
    }
  }
  return from_triplets(space.num_dofs(), triplets);
}

ComplexVector assemble_neumann_rhs(const EdgeSpace& space, const BoundarySource& g) {
  const TetMesh& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule_degree4();
  ComplexVector rhs = ComplexVector::Zero(space.num_dofs());
  const auto verts = mesh.vertices();
  for (const auto& face : mesh.boundary_faces()) {
    const TetGeometry geo = tet_geometry(mesh, face.tet);
    const auto& tet = mesh.tets()[face.tet];
    const auto& edges = mesh.tet_edges()[face.tet];
    const Vec3c n = to_complex(face.normal);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const auto& mu = rule.points[q];
      const Vec3 x = mu[0] * verts[face.vertices[0]] + mu[1] * verts[face.vertices[1]] +
                     mu[2] * verts[face.vertices[2]];
      Vec3c value = g(x, face.normal);
      value -= n * n.transpose() * value;
      const auto w = whitney_values(geo, edges, geo.barycentric(x));
      const double weight = rule.weights[q] * face.area;
      for (int e = 0; e < 6; ++e) {
        if (!edge_on_face(tet, e, face.vertices)) continue;
        rhs[edges[e].edge] += weight * (value[0] * w[e][0] + value[1] * w[e][1] + value[2] * w[e][2]);
      }
    }
  }
  return rhs;
}

ComplexVector assemble_volume_rhs(const EdgeSpace& space, const VolumeSource& f,
                                  const TetFilter& filter, const RefineFn& refine) {
  const TetMesh& mesh = space.mesh();
  ComplexVector rhs = ComplexVector::Zero(space.num_dofs());
  for (Index t = 0; t < static_cast<Index>(mesh.num_tets()); ++t) {
    if (filter && !filter(t)) continue;
    const TetRule& rule = tet_rule_composite(refine ? refine(t) : 0);
    const TetGeometry g = tet_geometry(mesh, t);
    const auto& edges = mesh.tet_edges()[t];
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec3 x = g.point(rule.points[q]);
      const Vec3c value = f(t, x);
      if (value.isZero(0.0)) continue;
      const auto w = whitney_values(g, edges, rule.points[q]);
      const double weight = rule.weights[q] * g.volume;
      for (int e = 0; e < 6; ++e) {
        rhs[edges[e].edge] += weight * (value[0] * w[e][0] + value[1] * w[e][1] + value[2] * w[e][2]);
      }
    }
  }
  return rhs;
}

FieldSolution::FieldSolution(std::shared_ptr<const TetMesh> mesh, ComplexVector coefficients)
    : mesh_(std::move(mesh)), coefficients_(std::move(coefficients)) {
  if (!mesh_) fail(ErrorCode::kInvalidArgument, "field needs a mesh");
  if (coefficients_.size() != static_cast<Eigen::Index>(mesh_->num_edges()))
    fail(ErrorCode::kInvalidArgument, "field coefficient count does not match the edge count");
  if (!coefficients_.allFinite())
    fail(ErrorCode::kInvalidArgument, "field coefficients must be finite");
}

Vec3c FieldSolution::value_in_tet(Index tet, const TetGeometry& g,
                                  const std::array<double, 4>& lambda) const {
  const auto& edges = mesh_->tet_edges()[tet];
  const auto w = whitney_values(g, edges, lambda);
  Vec3c v = Vec3c::Zero();
  for (int e = 0; e < 6; ++e) v += coefficients_[edges[e].edge] * to_complex(w[e]);
  return v;
}

Vec3c FieldSolution::value_in_tet(Index tet, const Vec3& x) const {
  const TetGeometry g = tet_geometry(*mesh_, tet);
  return value_in_tet(tet, g, g.barycentric(x));
}

Vec3c FieldSolution::curl_in_tet(Index tet) const {
  const TetGeometry g = tet_geometry(*mesh_, tet);
  const auto& edges = mesh_->tet_edges()[tet];
  const auto c = whitney_curls(g, edges);
  Vec3c v = Vec3c::Zero();
  for (int e = 0; e < 6; ++e) v += coefficients_[edges[e].edge] * to_complex(c[e]);
  return v;
}

PointLocator::PointLocator(const TetMesh& mesh) : mesh_(&mesh) {
  const auto verts = mesh.vertices();
  Vec3 lo = verts[0];
  Vec3 hi = verts[0];
  for (const auto& v : verts) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 span = (hi - lo).cwiseMax(1e-12);
  const double target = std::max(1.0, std::cbrt(static_cast<double>(mesh.num_tets()) / 2.0));
  const double unit = std::cbrt(span.prod()) / target;
  for (int a = 0; a < 3; ++a) dims_[a] = std::clamp(static_cast<int>(std::ceil(span[a] / unit)), 1, 512);
  lo_ = lo;
  for (int a = 0; a < 3; ++a) cell_[a] = span[a] / dims_[a];
  cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
  for (Index t = 0; t < static_cast<Index>(mesh.num_tets()); ++t) {
    const auto& tet = mesh.tets()[t];
    Vec3 tlo = verts[tet[0]];
    Vec3 thi = verts[tet[0]];
    for (Index v : tet) {
      tlo = tlo.cwiseMin(verts[v]);
      thi = thi.cwiseMax(verts[v]);
    }
    std::array<int, 3> a{};
    std::array<int, 3> b{};
    for (int k = 0; k < 3; ++k) {
      a[k] = std::clamp(static_cast<int>(std::floor((tlo[k] - lo_[k]) / cell_[k])), 0, dims_[k] - 1);
      b[k] = std::clamp(static_cast<int>(std::floor((thi[k] - lo_[k]) / cell_[k])), 0, dims_[k] - 1);
    }
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i)
          cells_[(static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i].push_back(t);
  }
}

Index PointLocator::locate(const Vec3& x, double tolerance) const {
  std::array<int, 3> c{};
  for (int k = 0; k < 3; ++k) {
    const double u = (x[k] - lo_[k]) / cell_[k];
    if (u < -1e-9 * dims_[k] || u > dims_[k] * (1.0 + 1e-9)) return -1;
    c[k] = std::clamp(static_cast<int>(std::floor(u)), 0, dims_[k] - 1);
  }
  Index best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  for (Index t : cells_[(static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0]]) {
    const TetGeometry g = tet_geometry(*mesh_, t);
    const auto l = g.barycentric(x);
    const double m = std::min({l[0], l[1], l[2], l[3]});
    if (m > best_min) {
      best_min = m;
      best = t;
    }
  }
  return best_min >= -tolerance ? best : -1;
}

Vec3c evaluate_field(const FieldSolution& sol, const PointLocator& locator, const Vec3& point) {
  const Index t = locator.locate(point);
  if (t < 0) {
    fail(ErrorCode::kLocation, "point (" + std::to_string(point.x()) + ", " +
                                   std::to_string(point.y()) + ", " + std::to_string(point.z()) +
                                   ") lies outside the mesh");
  }
  return sol.value_in_tet(t, point);
}

Vec3c evaluate_field(const FieldSolution& sol, const Vec3& point) {
  const PointLocator locator(sol.mesh());
  return evaluate_field(sol, locator, point);
}

ComplexVector interpolate_edges(const TetMesh& mesh, const std::function<Vec3c(const Vec3&)>& v) {
  static const double g = std::sqrt(0.6);
  static const std::array<double, 3> s{0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)};
  static const std::array<double, 3> w{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  ComplexVector dofs(mesh.num_edges());
  const auto verts = mesh.vertices();
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Vec3& a = verts[mesh.edges()[e][0]];
    const Vec3& b = verts[mesh.edges()[e][1]];
    const Vec3c t = to_complex(b - a);
    Complex sum(0.0);
    for (int q = 0; q < 3; ++q) {
      const Vec3c value = v(a + s[q] * (b - a));
      sum += w[q] * (value[0] * t[0] + value[1] * t[1] + value[2] * t[2]);
    }
    dofs[static_cast<Eigen::Index>(e)] = sum;
  }
  return dofs;
}

ComplexVector gradient_dofs(const TetMesh& mesh, const ComplexVector& nodal) {
  ComplexVector dofs(mesh.num_edges());
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    dofs[static_cast<Eigen::Index>(e)] = nodal[mesh.edges()[e][1]] - nodal[mesh.edges()[e][0]];
  }
  return dofs;
}

}  // namespace maxsens
