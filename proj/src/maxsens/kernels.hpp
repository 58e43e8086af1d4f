#pragma once

#include "maxsens/fem.hpp"
#include "maxsens/physics.hpp"

#include <array>
#include <vector>

namespace maxsens {

// Helmholtz fundamental solution e^{i xi |x|} / (4 pi |x|).
Complex phi(const Vec3& x, Complex xi);

// Dyadic Green's function -(Phi I + D^2 Phi / xi^2), the solution of
// curl curl G - xi^2 G = -delta I, in closed form:
//   G_jl = e^{i xi r}/(4 pi) [A delta_jl - B x_j x_l / r^2]
//   A = -1/r - i/(xi r^2) + 1/(xi^2 r^3),  B = -1/r - 3i/(xi r^2) + 3/(xi^2 r^3).
// The Hessian term enters with a minus sign; with a plus the PDE fails.
Mat3c green_dyadic(const Vec3& x, Complex xi);
// d/dx_m of green_dyadic.
Mat3c green_dyadic_derivative(const Vec3& x, Complex xi, int m);

// Coefficients in t = 1/|x|, lowest degree first, constant term zero.
struct BoundPolys {
  std::array<double, 4> p{};  // |G_jl(x)| <= p(1/|x|)
  std::array<double, 5> q{};  // |d_m G_jl(x)| <= q(1/|x|)

  double eval_p(double t) const;
  double eval_q(double t) const;
};

// p(t) = (2t + 4t^2/|xi| + 4t^3/|xi|^2) / (4 pi).
// q follows from |e^{i xi r}| <= 1, |d_m e^{i xi r}| <= |xi| and
// |d_m (x_j x_l / r^2)| <= 2/r applied term by term to the derivative of the
// closed form, with A' = 1/r^2 + 2i/(xi r^3) - 3/(xi^2 r^4) and
// B' = 1/r^2 + 6i/(xi r^3) - 9/(xi^2 r^4):
//   q(t) = (2|xi| t + 8t^2 + 18t^3/|xi| + 18t^4/|xi|^2) / (4 pi).
BoundPolys bound_polys(Complex xi);

// Quadrature of f E over the perturbation support, f = omega^2 mu0 (rho_eps +
// i rho_sigma / omega). Tets cut by a shape boundary are split uniformly
// (8 children per level) until the pieces are small against the smallest
// semi-axis; every piece uses the degree-2 rule with membership decided at
// its quadrature points.
class SupportQuadrature {
 public:
  SupportQuadrature(const FieldSolution& e, const PerturbationSpec& pert, double omega,
                    int max_level = 4);

  const std::vector<Vec3>& points() const { return points_; }
  // w_q f(x_q) E(x_q), already multiplied by the volume weight.
  const std::vector<Vec3c>& weighted_values() const { return values_; }
  const PerturbationSpec& perturbation() const { return pert_; }
  // Sum of weights whose point lies in the support.
  double support_volume() const { return support_volume_; }

 private:
  PerturbationSpec pert_;
  std::vector<Vec3> points_;
  std::vector<Vec3c> values_;
  double support_volume_ = 0.0;
};

// T(z) = -2 (int G(x - z) f(x) E(x) dx) x n(z). A point z closer than beta to
// the support is a proximity error.
Vec3c compute_T(const Vec3& z, const Vec3& normal, const SupportQuadrature& quad, Complex xi,
                double beta);
Vec3c compute_T(const Vec3& z, const Vec3& normal, const FieldSolution& e,
                const PerturbationSpec& pert, const Background& bg, double beta);

}  // namespace maxsens
