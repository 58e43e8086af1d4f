#include "maxsens/kernels.hpp"

#include "maxsens/error.hpp"
#include "maxsens/quadrature.hpp"

#include <cmath>

namespace maxsens {

namespace {

constexpr Complex kI(0.0, 1.0);

void require_nonzero(const Vec3& x, const char* what) {
  if (!(x.norm() > 0.0)) fail(ErrorCode::kSingularity, std::string(what) + " is singular at x = 0");
}

// Eight children of a tet through edge midpoints; the inner octahedron is
// cut along the 02-13 diagonal.
std::array<std::array<Vec3, 4>, 8> split_tet(const std::array<Vec3, 4>& v) {
  auto m = [&](int a, int b) -> Vec3 { return 0.5 * (v[a] + v[b]); };
  const Vec3 m01 = m(0, 1), m02 = m(0, 2), m03 = m(0, 3), m12 = m(1, 2), m13 = m(1, 3),
             m23 = m(2, 3);
  return {{{v[0], m01, m02, m03},
           {m01, v[1], m12, m13},
           {m02, m12, v[2], m23},
           {m03, m13, m23, v[3]},
           {m02, m13, m01, m03},
           {m02, m13, m03, m23},
           {m02, m13, m23, m12},
           {m02, m13, m12, m01}}};
}

double tet_volume(const std::array<Vec3, 4>& v) {
  return std::abs((v[1] - v[0]).dot((v[2] - v[0]).cross(v[3] - v[0]))) / 6.0;
}

double diameter(const std::array<Vec3, 4>& v) {
  double d = 0.0;
  for (const auto& [a, b] : kTetEdgeVertices) d = std::max(d, (v[a] - v[b]).norm());
  return d;
}

}  // namespace

Complex phi(const Vec3& x, Complex xi) {
  require_nonzero(x, "phi");
  const double r = x.norm();
  return std::exp(kI * xi * r) / (4.0 * kPi * r);
}

Mat3c green_dyadic(const Vec3& x, Complex xi) {
  require_nonzero(x, "green_dyadic");
  if (xi == Complex(0.0)) fail(ErrorCode::kInvalidArgument, "green_dyadic needs xi != 0");
  const double r = x.norm();
  const Complex e = std::exp(kI * xi * r) / (4.0 * kPi);
  const Complex a = -1.0 / r - kI / (xi * r * r) + 1.0 / (xi * xi * r * r * r);
  const Complex b = -1.0 / r - 3.0 * kI / (xi * r * r) + 3.0 / (xi * xi * r * r * r);
  const Vec3 u = x / r;
  Mat3c g = (-b) * (u * u.transpose()).cast<Complex>();
  g.diagonal().array() += a;
  return e * g;
}

Mat3c green_dyadic_derivative(const Vec3& x, Complex xi, int m) {
  require_nonzero(x, "green_dyadic_derivative");
  if (xi == Complex(0.0)) fail(ErrorCode::kInvalidArgument, "green_dyadic needs xi != 0");
  if (m < 0 || m > 2) fail(ErrorCode::kInvalidArgument, "derivative index must be 0, 1 or 2");
  const double r = x.norm();
  const double r2 = r * r, r3 = r2 * r, r4 = r3 * r;
  const Complex e = std::exp(kI * xi * r) / (4.0 * kPi);
  const Complex a = -1.0 / r - kI / (xi * r2) + 1.0 / (xi * xi * r3);
  const Complex b = -1.0 / r - 3.0 * kI / (xi * r2) + 3.0 / (xi * xi * r3);
  const Complex da = 1.0 / r2 + 2.0 * kI / (xi * r3) - 3.0 / (xi * xi * r4);
  const Complex db = 1.0 / r2 + 6.0 * kI / (xi * r3) - 9.0 / (xi * xi * r4);
  const double um = x[m] / r;
  Mat3c out;
  for (int j = 0; j < 3; ++j) {
    for (int l = 0; l < 3; ++l) {
      const double delta = j == l ? 1.0 : 0.0;
      const double p = x[j] * x[l] / r2;
      const double dp = ((m == j ? x[l] : 0.0) + (m == l ? x[j] : 0.0)) / r2 -
                        2.0 * x[j] * x[l] * x[m] / r4;
      out(j, l) = e * (kI * xi * um * (a * delta - b * p) + da * um * delta - db * um * p - b * dp);
    }
  }
  return out;
}

double BoundPolys::eval_p(double t) const {
  return ((p[3] * t + p[2]) * t + p[1]) * t + p[0];
}

double BoundPolys::eval_q(double t) const {
  return (((q[4] * t + q[3]) * t + q[2]) * t + q[1]) * t + q[0];
}

BoundPolys bound_polys(Complex xi) {
  const double s = std::abs(xi);
  if (!(s > 0.0)) fail(ErrorCode::kInvalidArgument, "bound polynomials need xi != 0");
  const double c = 1.0 / (4.0 * kPi);
  BoundPolys b;
  b.p = {0.0, 2.0 * c, 4.0 * c / s, 4.0 * c / (s * s)};
  b.q = {0.0, 2.0 * s * c, 8.0 * c, 18.0 * c / s, 18.0 * c / (s * s)};
  return b;
}

SupportQuadrature::SupportQuadrature(const FieldSolution& e, const PerturbationSpec& pert,
                                     double omega, int max_level)
    : pert_(pert) {
  if (pert.shapes.empty()) return;
  const TetMesh& mesh = e.mesh();
  const TetRule& rule = tet_rule_degree2();
  const SensitivityDirection dir = pert.direction();
  const Indicator support{pert.shapes, 1.0};
  double min_axis = pert.shapes.front().semi_axes.minCoeff();
  for (const auto& s : pert.shapes) min_axis = std::min(min_axis, s.semi_axes.minCoeff());
  const double scale = omega * omega * kMu0;

  for (Index t = 0; t < static_cast<Index>(mesh.num_tets()); ++t) {
    if (!support.may_touch(mesh, t)) continue;
    const TetGeometry g = tet_geometry(mesh, t);
    bool inside = false;
    for (const auto& s : pert.shapes) {
      if (s.contains(g.x[0]) && s.contains(g.x[1]) && s.contains(g.x[2]) && s.contains(g.x[3]))
        inside = true;
    }
    int level = 0;
    if (!inside) {
      const double target = min_axis / 4.0;
      double d = diameter(g.x);
      while (d > target && level < max_level) {
        d *= 0.5;
        ++level;
      }
    }
    std::vector<std::array<Vec3, 4>> pieces{g.x};
    for (int l = 0; l < level; ++l) {
      std::vector<std::array<Vec3, 4>> next;
      next.reserve(pieces.size() * 8);
      for (const auto& p : pieces) {
        for (const auto& c : split_tet(p)) next.push_back(c);
      }
      pieces.swap(next);
    }
    for (const auto& p : pieces) {
      const double vol = tet_volume(p);
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const auto& lam = rule.points[q];
        const Vec3 x = lam[0] * p[0] + lam[1] * p[1] + lam[2] * p[2] + lam[3] * p[3];
        const Complex f = scale * Complex(dir.rho_eps(x), dir.rho_sigma(x) / omega);
        if (support(x) > 0.0) support_volume_ += rule.weights[q] * vol;
        if (f == Complex(0.0)) continue;
        points_.push_back(x);
        values_.push_back(rule.weights[q] * vol * f * e.value_in_tet(t, g, g.barycentric(x)));
      }
    }
  }
}

Vec3c compute_T(const Vec3& z, const Vec3& normal, const SupportQuadrature& quad, Complex xi,
                double beta) {
  for (const auto& s : quad.perturbation().shapes) {
    const double gap = (z - s.center).norm() - s.bounding_radius();
    if (gap < beta) {
      fail(ErrorCode::kProximity, "boundary point is within " + std::to_string(gap) +
                                      " m of the perturbation (need " + std::to_string(beta) + ")");
    }
  }
  Vec3c sum = Vec3c::Zero();
  const auto& pts = quad.points();
  const auto& vals = quad.weighted_values();
  for (std::size_t q = 0; q < pts.size(); ++q) sum += green_dyadic(pts[q] - z, xi) * vals[q];
  return cross(Vec3c(-2.0 * sum), normal);
}

Vec3c compute_T(const Vec3& z, const Vec3& normal, const FieldSolution& e,
                const PerturbationSpec& pert, const Background& bg, double beta) {
  const SupportQuadrature quad(e, pert, bg.omega());
  const PointLocator locator(e.mesh());
  int tag = bg.regions().begin()->first;
  if (!pert.shapes.empty()) {
    const Index t = locator.locate(pert.shapes.front().center);
    if (t >= 0) tag = e.mesh().region_tags()[t];
  }
  return compute_T(z, normal, quad, bg.xi(tag), beta);
}

}  // namespace maxsens
