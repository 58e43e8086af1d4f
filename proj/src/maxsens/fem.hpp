#pragma once

#include "maxsens/mesh.hpp"
#include "maxsens/types.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <map>
#include <memory>

namespace maxsens {

// Lowest-order Nedelec (first kind) space on a tet mesh: one dof per global
// edge, Whitney basis W_ab = l_a grad l_b - l_b grad l_a oriented from the
// lower to the higher global vertex index.
class EdgeSpace {
 public:
  explicit EdgeSpace(std::shared_ptr<const TetMesh> mesh);

  const TetMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const TetMesh>& mesh_ptr() const { return mesh_; }
  Index num_dofs() const { return static_cast<Index>(mesh_->num_edges()); }

 private:
  std::shared_ptr<const TetMesh> mesh_;
};

// Affine data of one tet.
struct TetGeometry {
  std::array<Vec3, 4> x;
  std::array<Vec3, 4> grad_lambda;
  double volume = 0.0;

  Vec3 point(const std::array<double, 4>& lambda) const {
    return lambda[0] * x[0] + lambda[1] * x[1] + lambda[2] * x[2] + lambda[3] * x[3];
  }
  std::array<double, 4> barycentric(const Vec3& p) const;
};

// Throws an assembly error naming the tet when its volume vanishes.
TetGeometry tet_geometry(const TetMesh& mesh, Index tet);

// Global-orientation Whitney functions of the six tet edges at a point.
std::array<Vec3, 6> whitney_values(const TetGeometry& g, const std::array<EdgeRef, 6>& edges,
                                   const std::array<double, 4>& lambda);
std::array<Vec3, 6> whitney_curls(const TetGeometry& g, const std::array<EdgeRef, 6>& edges);

class ComplexSparseMatrix {
 public:
  using Storage = Eigen::SparseMatrix<Complex, Eigen::RowMajor, int>;

  ComplexSparseMatrix() = default;
  explicit ComplexSparseMatrix(Storage data) : data_(std::move(data)) {}

  Index dimension() const { return static_cast<Index>(data_.rows()); }
  const Storage& data() const { return data_; }

  ComplexVector operator*(const ComplexVector& x) const { return data_ * x; }
  ComplexSparseMatrix operator+(const ComplexSparseMatrix& other) const {
    return ComplexSparseMatrix(Storage(data_ + other.data_));
  }
  ComplexSparseMatrix scaled(Complex factor) const {
    return ComplexSparseMatrix(Storage(factor * data_));
  }

 private:
  Storage data_;
};

// Complex scalar coefficient sampled per (tet, point).
using CoefficientFn = std::function<Complex(Index tet, const Vec3& x)>;
// Volume source sampled per (tet, point).
using VolumeSource = std::function<Vec3c(Index tet, const Vec3& x)>;
// Boundary source given the point and the unit outward face normal.
using BoundarySource = std::function<Vec3c(const Vec3& x, const Vec3& normal)>;
// Optional filter skipping tets that cannot meet a source's support.
using TetFilter = std::function<bool(Index tet)>;
// Optional per-tet composite quadrature level (see tet_rule_composite) for
// tets where the integrand jumps.
using RefineFn = std::function<int(Index tet)>;

ComplexSparseMatrix assemble_curl_curl(const EdgeSpace& space);

// Sorted global indices of the edges lying on boundary faces; their
// coefficients carry the tangential trace.
std::vector<Index> boundary_edges(const TetMesh& mesh);

// kappa is looked up by region tag; a missing tag is a configuration error.
ComplexSparseMatrix assemble_mass(const EdgeSpace& space, const std::map<int, Complex>& kappa);
ComplexSparseMatrix assemble_mass(const EdgeSpace& space, const CoefficientFn& kappa,
                                  const TetFilter& filter = {}, const RefineFn& refine = {});

// Entries int_Gamma g . phi_T over the boundary faces; g is projected onto the
// face tangent plane before integration.
ComplexVector assemble_neumann_rhs(const EdgeSpace& space, const BoundarySource& g);

// Entries int_Omega f . W_i with the degree-2 tet rule, or its composite
// version where refine asks for it.
ComplexVector assemble_volume_rhs(const EdgeSpace& space, const VolumeSource& f,
                                  const TetFilter& filter = {}, const RefineFn& refine = {});

class FieldSolution {
 public:
  FieldSolution(std::shared_ptr<const TetMesh> mesh, ComplexVector coefficients);

  const TetMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const TetMesh>& mesh_ptr() const { return mesh_; }
  const ComplexVector& coefficients() const { return coefficients_; }

  Vec3c value_in_tet(Index tet, const Vec3& x) const;
  Vec3c value_in_tet(Index tet, const TetGeometry& g, const std::array<double, 4>& lambda) const;
  Vec3c curl_in_tet(Index tet) const;

 private:
  std::shared_ptr<const TetMesh> mesh_;
  ComplexVector coefficients_;
};

// Uniform-grid point location over tet bounding boxes.
class PointLocator {
 public:
  explicit PointLocator(const TetMesh& mesh);
  // Containing tet, or -1.
  Index locate(const Vec3& x, double tolerance = 1e-10) const;

 private:
  const TetMesh* mesh_;
  Vec3 lo_;
  Vec3 cell_;
  std::array<int, 3> dims_{};
  std::vector<std::vector<Index>> cells_;
};

// Sum of coeff_i W_i at `point`; throws a location error outside the mesh.
Vec3c evaluate_field(const FieldSolution& sol, const Vec3& point);
Vec3c evaluate_field(const FieldSolution& sol, const PointLocator& locator, const Vec3& point);

// Edge moments int_e v . t ds (t = b - a, unnormalized) by 3-point Gauss.
ComplexVector interpolate_edges(const TetMesh& mesh, const std::function<Vec3c(const Vec3&)>& v);
// Edge dofs of grad q for a P1 nodal vector q.
ComplexVector gradient_dofs(const TetMesh& mesh, const ComplexVector& nodal);

}  // namespace maxsens
