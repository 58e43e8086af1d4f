#pragma once

#include "maxsens/fem.hpp"
#include "maxsens/solver.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace maxsens {

struct Material {
  double eps = 1e-8;    // F/m
  double sigma = 0.33;  // S/m
};

// Per-region materials at one angular frequency.
class Background {
 public:
  Background(std::map<int, Material> regions, double omega);

  static Background homogeneous(double eps = 1e-8, double sigma = 0.33, double omega = 1e6);
  // Brain (tag 0), skull (tag 1) and scalp (tag 2) at omega = 1e6.
  static Background three_layer();

  const std::map<int, Material>& regions() const { return regions_; }
  double omega() const { return omega_; }
  // Vacuum wavenumber omega sqrt(mu0 eps0), 1/m.
  double k() const;
  Complex kappa(int tag) const;
  std::map<int, Complex> kappa_map() const;
  // xi^2 = k^2 kappa; xi is the root with Im xi >= 0.
  Complex xi_squared(int tag) const;
  Complex xi(int tag) const;

  // Configuration error if a mesh tag has no material.
  void check_covers(const TetMesh& mesh) const;

 private:
  std::map<int, Material> regions_;
  double omega_;
};

// Ball (all semi-axes equal) or axis-aligned ellipsoid.
struct Shape {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3::Ones();

  static Shape ball(const Vec3& center, double radius);
  static Shape ellipsoid(const Vec3& center, double rx, double ry, double rz);

  bool is_ball() const { return semi_axes.minCoeff() == semi_axes.maxCoeff(); }
  bool contains(const Vec3& x) const;
  double volume() const;
  double bounding_radius() const { return semi_axes.maxCoeff(); }
};

// weight * characteristic function of a union of shapes; empty means zero.
struct Indicator {
  std::vector<Shape> shapes;
  double weight = 1.0;

  bool is_zero() const { return shapes.empty() || weight == 0.0; }
  double operator()(const Vec3& x) const;
  bool may_touch(const TetMesh& mesh, Index tet) const;
  // Composite quadrature level for a tet: for each shape whose bounding box
  // meets the tet without containing all its vertices, the halvings needed to
  // bring pieces below a quarter of that shape's smallest semi-axis (capped);
  // the max over shapes, 0 if none.
  int refine_level(const TetMesh& mesh, Index tet) const;
};

// Direction (rho_eps, rho_sigma) of a sensitivity solve.
struct SensitivityDirection {
  Indicator rho_eps;
  Indicator rho_sigma;

  bool is_zero() const { return rho_eps.is_zero() && rho_sigma.is_zero(); }
};

// eps -> eps + a_eps 1_B, sigma -> sigma + a_sigma 1_B with B a union of shapes.
struct PerturbationSpec {
  std::vector<Shape> shapes;
  double a_eps = 0.0;    // F/m
  double a_sigma = 0.0;  // S/m

  SensitivityDirection direction() const;
  double volume() const;
  // Invalid-argument error unless every shape keeps distance >= beta from the
  // boundary vertices and its center lies inside the mesh.
  void check_inside(const TetMesh& mesh, double beta) const;
};

struct DirectionSet {
  std::string name;
  std::vector<Vec3> directions;  // unit vectors
};

// "N1", "N6" or "N14"; nested with sizes 1, 6, 14.
DirectionSet direction_set(const std::string& name);

// Deterministic unit vector orthogonal to eta: normalize(eta x e) with e the
// first canonical basis vector not parallel to eta.
Vec3 orthogonal_unit(const Vec3& eta);

// g(x) = (i eta x eta_perp) e^{i eta.x} x n(x), the Neumann data of the
// plane wave eta_perp e^{i eta.x}. Zero eta is an invalid argument.
BoundarySource plane_wave_neumann(const Vec3& eta, const Background& bg);
BoundarySource plane_wave_neumann(const Vec3& eta, const Vec3& eta_perp);

// Operator curl curl - k^2 kappa on one mesh and background, factored once;
// forward and sensitivity solves reuse the factorization.
class MaxwellProblem {
 public:
  MaxwellProblem(std::shared_ptr<const TetMesh> mesh, Background bg, SolverOptions options = {});

  const EdgeSpace& space() const { return space_; }
  const TetMesh& mesh() const { return space_.mesh(); }
  const Background& background() const { return bg_; }
  const Factorization& factorization() const { return *factorization_; }
  const ComplexSparseMatrix& curl_curl() const { return curl_curl_; }

  FieldSolution solve_forward(const BoundarySource& g, const VolumeSource& f = {},
                              SolveReport* report = nullptr) const;
  // Homogeneous Neumann data, load (k^2/eps0)(rho_eps + i rho_sigma/omega) E.
  FieldSolution solve_sensitivity(const FieldSolution& e, const SensitivityDirection& dir,
                                  SolveReport* report = nullptr) const;
  // Needs a fresh factorization of the perturbed operator.
  FieldSolution solve_perturbed(const PerturbationSpec& pert, const BoundarySource& g,
                                SolveReport* report = nullptr) const;

  ComplexVector sensitivity_rhs(const FieldSolution& e, const SensitivityDirection& dir) const;

 private:
  Background bg_;
  EdgeSpace space_;
  SolverOptions options_;
  ComplexSparseMatrix curl_curl_;
  std::unique_ptr<Factorization> factorization_;
};

FieldSolution solve_forward(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                            const BoundarySource& g);
FieldSolution solve_sensitivity(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                                const FieldSolution& e, const SensitivityDirection& dir);
FieldSolution solve_perturbed(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                              const PerturbationSpec& pert, const BoundarySource& g);

// ||E||_{L2(Omega)} by the degree-2 rule.
double field_l2_norm(const FieldSolution& e);

}  // namespace maxsens
