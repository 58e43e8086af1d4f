#include "maxsens/physics.hpp"

#include "maxsens/error.hpp"
#include "maxsens/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace maxsens {

Background::Background(std::map<int, Material> regions, double omega)
    : regions_(std::move(regions)), omega_(omega) {
  if (!(omega_ > 0.0) || !std::isfinite(omega_))
    fail(ErrorCode::kInvalidArgument, "omega must be positive");
  if (regions_.empty()) fail(ErrorCode::kInvalidArgument, "background has no regions");
  for (const auto& [tag, m] : regions_) {
    if (!(m.eps > 0.0) || !std::isfinite(m.eps))
      fail(ErrorCode::kInvalidArgument, "region " + std::to_string(tag) + ": eps must be positive");
    if (m.sigma == 0.0)
      fail(ErrorCode::kInvalidArgument,
           "region " + std::to_string(tag) + ": sigma = 0 is unsupported");
    if (!(m.sigma > 0.0) || !std::isfinite(m.sigma))
      fail(ErrorCode::kInvalidArgument,
           "region " + std::to_string(tag) + ": sigma must be positive");
  }
}

Background Background::homogeneous(double eps, double sigma, double omega) {
  return Background({{0, Material{eps, sigma}}}, omega);
}

Background Background::three_layer() {
  return Background({{0, Material{8.854e-10, 0.33}},
                     {1, Material{3.542e-10, 0.04}},
                     {2, Material{8.854e-11, 0.33}}},
                    1e6);
}

double Background::k() const { return omega_ * std::sqrt(kMu0 * kEps0); }

Complex Background::kappa(int tag) const {
  const auto it = regions_.find(tag);
  if (it == regions_.end())
    fail(ErrorCode::kConfiguration, "no material given for region tag " + std::to_string(tag));
  return Complex(it->second.eps, it->second.sigma / omega_) / kEps0;
}

std::map<int, Complex> Background::kappa_map() const {
  std::map<int, Complex> out;
  for (const auto& [tag, m] : regions_) out[tag] = kappa(tag);
  return out;
}

Complex Background::xi_squared(int tag) const { return k() * k() * kappa(tag); }

Complex Background::xi(int tag) const {
  Complex x = std::sqrt(xi_squared(tag));
  if (x.imag() < 0.0) x = -x;
  return x;
}

void Background::check_covers(const TetMesh& mesh) const {
  for (int tag : mesh.distinct_region_tags()) {
    if (!regions_.contains(tag))
      fail(ErrorCode::kConfiguration, "no material given for region tag " + std::to_string(tag));
  }
}

Shape Shape::ball(const Vec3& center, double radius) {
  return ellipsoid(center, radius, radius, radius);
}

Shape Shape::ellipsoid(const Vec3& center, double rx, double ry, double rz) {
  if (!(rx > 0.0 && ry > 0.0 && rz > 0.0))
    fail(ErrorCode::kInvalidArgument, "shape semi-axes must be positive");
  if (!center.allFinite()) fail(ErrorCode::kInvalidArgument, "shape center must be finite");
  return Shape{center, Vec3(rx, ry, rz)};
}

bool Shape::contains(const Vec3& x) const {
  return (x - center).cwiseQuotient(semi_axes).squaredNorm() <= 1.0;
}

double Shape::volume() const { return 4.0 / 3.0 * kPi * semi_axes.prod(); }

double Indicator::operator()(const Vec3& x) const {
  for (const auto& s : shapes) {
    if (s.contains(x)) return weight;
  }
  return 0.0;
}

bool Indicator::may_touch(const TetMesh& mesh, Index tet) const {
  const auto verts = mesh.vertices();
  const auto& t = mesh.tets()[tet];
  Vec3 lo = verts[t[0]];
  Vec3 hi = lo;
  for (Index v : t) {
    lo = lo.cwiseMin(verts[v]);
    hi = hi.cwiseMax(verts[v]);
  }
  for (const auto& s : shapes) {
    const Vec3 slo = s.center - s.semi_axes;
    const Vec3 shi = s.center + s.semi_axes;
    if ((lo.array() <= shi.array()).all() && (slo.array() <= hi.array()).all()) return true;
  }
  return false;
}

int Indicator::refine_level(const TetMesh& mesh, Index tet) const {
  if (shapes.empty()) return 0;
  const auto verts = mesh.vertices();
  const auto& t = mesh.tets()[tet];
  Vec3 lo = verts[t[0]];
  Vec3 hi = lo;
  for (Index v : t) {
    lo = lo.cwiseMin(verts[v]);
    hi = hi.cwiseMax(verts[v]);
  }
  double diam = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) diam = std::max(diam, (verts[t[i]] - verts[t[j]]).norm());
  // Per shape, so a union of well-separated shapes is integrated exactly as
  // the shapes are one by one.
  int level = 0;
  for (const auto& s : shapes) {
    const Vec3 slo = s.center - s.semi_axes;
    const Vec3 shi = s.center + s.semi_axes;
    if (!((lo.array() <= shi.array()).all() && (slo.array() <= hi.array()).all())) continue;
    if (std::all_of(t.begin(), t.end(), [&](Index v) { return s.contains(verts[v]); })) continue;
    double d = diam;
    int l = 0;
    while (d > 0.25 * s.semi_axes.minCoeff() && l < kMaxCompositeLevel) {
      d *= 0.5;
      ++l;
    }
    level = std::max(level, l);
  }
  return level;
}

SensitivityDirection PerturbationSpec::direction() const {
  return SensitivityDirection{Indicator{shapes, a_eps}, Indicator{shapes, a_sigma}};
}

double PerturbationSpec::volume() const {
  double v = 0.0;
  for (const auto& s : shapes) v += s.volume();
  return v;
}

void PerturbationSpec::check_inside(const TetMesh& mesh, double beta) const {
  if (shapes.empty()) fail(ErrorCode::kInvalidArgument, "perturbation has no shape");
  if (!std::isfinite(a_eps) || !std::isfinite(a_sigma))
    fail(ErrorCode::kInvalidArgument, "perturbation amplitudes must be finite");
  const PointLocator locator(mesh);
  const auto verts = mesh.vertices();
  for (const auto& s : shapes) {
    if (locator.locate(s.center) < 0)
      fail(ErrorCode::kInvalidArgument, "perturbation center lies outside the mesh");
    double gap = std::numeric_limits<double>::infinity();
    for (Index v : mesh.boundary_vertices())
      gap = std::min(gap, (verts[v] - s.center).norm() - s.bounding_radius());
    if (gap < beta) {
      fail(ErrorCode::kInvalidArgument, "perturbation comes within " + std::to_string(gap) +
                                            " m of the boundary (need " + std::to_string(beta) +
                                            ")");
    }
  }
}

DirectionSet direction_set(const std::string& name) {
  std::vector<Vec3> dirs{Vec3(0, 1, 0)};
  if (name == "N6" || name == "N14") {
    dirs.insert(dirs.end(), {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0, 1),
                             Vec3(0, 0, -1)});
  }
  if (name == "N14") {
    for (int sx : {1, -1})
      for (int sy : {1, -1})
        for (int sz : {1, -1}) dirs.push_back(Vec3(sx, sy, sz).normalized());
  }
  if (name != "N1" && name != "N6" && name != "N14")
    fail(ErrorCode::kConfiguration, "unknown direction set '" + name + "' (use N1, N6 or N14)");
  return DirectionSet{name, dirs};
}

Vec3 orthogonal_unit(const Vec3& eta) {
  const double len = eta.norm();
  if (!(len > 0.0) || !std::isfinite(len))
    fail(ErrorCode::kInvalidArgument, "direction must be nonzero");
  const Vec3 u = eta / len;
  for (int a = 0; a < 3; ++a) {
    const Vec3 e = Vec3::Unit(a);
    const Vec3 c = u.cross(e);
    if (c.norm() > 1e-12) return c.normalized();
  }
  fail(ErrorCode::kInvalidArgument, "direction must be nonzero");
}

BoundarySource plane_wave_neumann(const Vec3& eta, const Vec3& eta_perp) {
  const double len = eta.norm();
  if (!(len > 0.0) || !std::isfinite(len))
    fail(ErrorCode::kInvalidArgument, "plane-wave direction must be nonzero");
  const Vec3 u = eta / len;
  const Vec3 p = eta_perp.normalized();
  if (std::abs(u.dot(p)) > 1e-12)
    fail(ErrorCode::kInvalidArgument, "eta_perp must be orthogonal to eta");
  const Vec3c curl = Complex(0.0, 1.0) * to_complex(u.cross(p));
  return [u, curl](const Vec3& x, const Vec3& n) -> Vec3c {
    const Complex phase = std::exp(Complex(0.0, u.dot(x)));
    return cross(Vec3c(phase * curl), n);
  };
}

BoundarySource plane_wave_neumann(const Vec3& eta, const Background&) {
  return plane_wave_neumann(eta, orthogonal_unit(eta));
}

MaxwellProblem::MaxwellProblem(std::shared_ptr<const TetMesh> mesh, Background bg,
                               SolverOptions options)
    : bg_(std::move(bg)), space_(std::move(mesh)), options_(options) {
  bg_.check_covers(space_.mesh());
  curl_curl_ = assemble_curl_curl(space_);
  const double k2 = bg_.k() * bg_.k();
  const ComplexSparseMatrix mass = assemble_mass(space_, bg_.kappa_map());
  factorization_ = std::make_unique<Factorization>(curl_curl_ + mass.scaled(-k2), options_);
}

FieldSolution MaxwellProblem::solve_forward(const BoundarySource& g, const VolumeSource& f,
                                            SolveReport* report) const {
  ComplexVector rhs = assemble_neumann_rhs(space_, g);
  if (f) rhs += assemble_volume_rhs(space_, f);
  return FieldSolution(space_.mesh_ptr(), factorization_->solve(rhs, report));
}

ComplexVector MaxwellProblem::sensitivity_rhs(const FieldSolution& e,
                                              const SensitivityDirection& dir) const {
  if (e.mesh_ptr() != space_.mesh_ptr() && e.mesh().fingerprint() != mesh().fingerprint())
    fail(ErrorCode::kInvalidArgument, "field and problem live on different meshes");
  if (dir.is_zero()) return ComplexVector::Zero(space_.num_dofs());
  const double scale = bg_.k() * bg_.k() / kEps0;
  const double omega = bg_.omega();
  const VolumeSource f = [&](Index t, const Vec3& x) -> Vec3c {
    const Complex c = scale * Complex(dir.rho_eps(x), dir.rho_sigma(x) / omega);
    if (c == Complex(0.0)) return Vec3c::Zero();
    return c * e.value_in_tet(t, x);
  };
  const TetFilter filter = [&](Index t) {
    return dir.rho_eps.may_touch(mesh(), t) || dir.rho_sigma.may_touch(mesh(), t);
  };
  const RefineFn refine = [&](Index t) {
    return std::max(dir.rho_eps.refine_level(mesh(), t), dir.rho_sigma.refine_level(mesh(), t));
  };
  return assemble_volume_rhs(space_, f, filter, refine);
}

FieldSolution MaxwellProblem::solve_sensitivity(const FieldSolution& e,
                                                const SensitivityDirection& dir,
                                                SolveReport* report) const {
  return FieldSolution(space_.mesh_ptr(), factorization_->solve(sensitivity_rhs(e, dir), report));
}

FieldSolution MaxwellProblem::solve_perturbed(const PerturbationSpec& pert, const BoundarySource& g,
                                              SolveReport* report) const {
  const SensitivityDirection dir = pert.direction();
  if (dir.is_zero()) return solve_forward(g, {}, report);
  const auto tags = mesh().region_tags();
  const auto kappa = bg_.kappa_map();
  const double omega = bg_.omega();
  const CoefficientFn coeff = [&](Index t, const Vec3& x) {
    return kappa.at(tags[t]) + Complex(dir.rho_eps(x), dir.rho_sigma(x) / omega) / kEps0;
  };
  const double k2 = bg_.k() * bg_.k();
  const RefineFn refine = [&](Index t) {
    return std::max(dir.rho_eps.refine_level(mesh(), t), dir.rho_sigma.refine_level(mesh(), t));
  };
  const Factorization f(curl_curl_ + assemble_mass(space_, coeff, {}, refine).scaled(-k2),
                        options_);
  return FieldSolution(space_.mesh_ptr(), f.solve(assemble_neumann_rhs(space_, g), report));
}

FieldSolution solve_forward(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                            const BoundarySource& g) {
  return MaxwellProblem(std::move(mesh), bg).solve_forward(g);
}

FieldSolution solve_sensitivity(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                                const FieldSolution& e, const SensitivityDirection& dir) {
  return MaxwellProblem(std::move(mesh), bg).solve_sensitivity(e, dir);
}

FieldSolution solve_perturbed(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                              const PerturbationSpec& pert, const BoundarySource& g) {
  return MaxwellProblem(std::move(mesh), bg).solve_perturbed(pert, g);
}

double field_l2_norm(const FieldSolution& e) {
  const TetMesh& mesh = e.mesh();
  const TetRule& rule = tet_rule_degree2();
  double sum = 0.0;
  for (Index t = 0; t < static_cast<Index>(mesh.num_tets()); ++t) {
    const TetGeometry g = tet_geometry(mesh, t);
    for (std::size_t q = 0; q < rule.points.size(); ++q)
      sum += rule.weights[q] * g.volume * e.value_in_tet(t, g, rule.points[q]).squaredNorm();
  }
  return std::sqrt(sum);
}

}  // namespace maxsens
