#include "helpers.hpp"
#include "maxsens/error.hpp"
#include "maxsens/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace maxsens;

namespace {

const Complex kXi(0.6, 0.35);

// Hessian of phi by central differences of phi itself, Richardson-extrapolated
// to fourth order.
Mat3c fd_hessian_raw(const Vec3& x, Complex xi, double h) {
  Mat3c hess;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const Vec3 ea = h * Vec3::Unit(a), eb = h * Vec3::Unit(b);
      hess(a, b) = (phi(x + ea + eb, xi) - phi(x + ea - eb, xi) - phi(x - ea + eb, xi) +
                    phi(x - ea - eb, xi)) / (4.0 * h * h);
    }
  return hess;
}

Mat3c fd_hessian(const Vec3& x, Complex xi, double h) {
  return (4.0 * fd_hessian_raw(x, xi, 0.5 * h) - fd_hessian_raw(x, xi, h)) / 3.0;
}

Vec3 random_point(std::mt19937_64& rng, double rmin, double rmax) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(rmin, rmax);
  return Vec3(n01(rng), n01(rng), n01(rng)).normalized() * u(rng);
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("fundamental solution values") {
    const Vec3 x(0, 0, 1);
    CHECK(std::abs(phi(x, 0.0) - 1.0 / (4.0 * std::numbers::pi)) < 1e-15);
    CHECK(phi(x, 0.0).real() == doctest::Approx(0.0795775).epsilon(1e-6));
    CHECK(phi(x, Complex(0, 1)).real() == doctest::Approx(0.029276).epsilon(1e-4));
    CHECK(std::abs(phi(x, Complex(0, 1)).imag()) < 1e-15);
    CHECK_THROWS_AS(phi(Vec3::Zero(), kXi), Error);
    CHECK_THROWS_AS(green_dyadic(Vec3::Zero(), kXi), Error);
    CHECK_THROWS_AS(green_dyadic(x, 0.0), Error);
  }

  TEST_CASE("phi solves the Helmholtz equation away from the origin") {
    const Vec3 x(0.3, -0.2, 0.4);
    const Complex lap = fd_hessian(x, kXi, 1e-2).trace();
    CHECK(std::abs(lap + kXi * kXi * phi(x, kXi)) < 1e-5 * std::abs(phi(x, kXi)));
  }

  TEST_CASE("dyadic is symmetric and even") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 50; ++k) {
      const Vec3 x = random_point(rng, 0.05, 2.0);
      const Mat3c g = green_dyadic(x, kXi);
      CHECK((g - g.transpose()).norm() <= 1e-14 * g.norm());
      CHECK((g - green_dyadic(-x, kXi)).norm() <= 1e-14 * g.norm());
    }
  }

  TEST_CASE("dyadic matches -(phi I + hess phi / xi^2)") {
    for (const Vec3& x : {Vec3(0.3, -0.2, 0.4), Vec3(0.0, 0.9, 0.1), Vec3(-1.2, 0.5, 0.7)}) {
      const Mat3c oracle =
          -(phi(x, kXi) * Mat3c::Identity() + fd_hessian(x, kXi, 1e-2) / (kXi * kXi));
      const Mat3c g = green_dyadic(x, kXi);
      CHECK((g - oracle).norm() <= 1e-5 * g.norm());
    }
  }

  TEST_CASE("columns of the dyadic are divergence free") {
    // Holds for -(phi I + hess/xi^2); the other sign leaves -2 grad phi.
    std::mt19937_64 rng(6);
    for (int k = 0; k < 20; ++k) {
      const Vec3 x = random_point(rng, 0.1, 1.5);
      Vec3c div = Vec3c::Zero();
      double scale = 0.0;
      for (int m = 0; m < 3; ++m) {
        const Mat3c d = green_dyadic_derivative(x, kXi, m);
        div += d.row(m).transpose();
        scale += d.norm();
      }
      CHECK(div.norm() <= 1e-12 * scale);
    }
  }

  TEST_CASE("derivative matches finite differences") {
    std::mt19937_64 rng(7);
    const double h = 1e-5;
    for (int k = 0; k < 10; ++k) {
      const Vec3 x = random_point(rng, 0.2, 1.5);
      for (int m = 0; m < 3; ++m) {
        const Vec3 e = h * Vec3::Unit(m);
        const Mat3c fd = (green_dyadic(x + e, kXi) - green_dyadic(x - e, kXi)) / (2.0 * h);
        const Mat3c d = green_dyadic_derivative(x, kXi, m);
        CHECK((d - fd).norm() <= 1e-6 * d.norm());
      }
    }
  }

  TEST_CASE("bound polynomials") {
    const BoundPolys b = bound_polys(Complex(0.6, 0.8));  // |xi| = 1
    CHECK(b.eval_p(1.0) == doctest::Approx(10.0 / (4.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(b.eval_q(1.0) == doctest::Approx(46.0 / (4.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(b.p[0] == 0.0);
    CHECK(b.q[0] == 0.0);
    for (std::size_t i = 1; i < b.p.size(); ++i) CHECK(b.p[i] > 0.0);
    for (std::size_t i = 1; i < b.q.size(); ++i) CHECK(b.q[i] > 0.0);
    CHECK_THROWS_AS(bound_polys(0.0), Error);

    std::mt19937_64 rng(8);
    const BoundPolys bx = bound_polys(kXi);
    for (int k = 0; k < 200; ++k) {
      const Vec3 x = random_point(rng, 0.01, 3.0);
      const double t = 1.0 / x.norm();
      CHECK(green_dyadic(x, kXi).cwiseAbs().maxCoeff() <= bx.eval_p(t));
      for (int m = 0; m < 3; ++m)
        CHECK(green_dyadic_derivative(x, kXi, m).cwiseAbs().maxCoeff() <= bx.eval_q(t));
    }
  }

  TEST_CASE("boundary term T") {
    auto mesh = testing::ball(8);
    const Background bg = Background::homogeneous();
    const MaxwellProblem prob(mesh, bg);
    const auto e = prob.solve_forward(plane_wave_neumann(Vec3(0, 1, 0), bg));
    const Vec3 z(1, 0, 0), n(1, 0, 0);
    const Vec3 c(-0.3, 0.05, 0.0);

    auto t_for = [&](double radius, double a_sigma) {
      return compute_T(z, n, e, PerturbationSpec{{Shape::ball(c, radius)}, 0.0, a_sigma}, bg, 0.1);
    };
    CHECK(t_for(0.1, 0.0).norm() == 0.0);
    const Vec3c t1 = t_for(0.1, 1.0);
    CHECK(t1.norm() > 0.0);
    CHECK((t_for(0.1, -2.5) + 2.5 * t1).norm() <= 1e-12 * t1.norm());
    CHECK(std::abs(t1.dot(n.cast<Complex>())) <= 1e-12 * t1.norm());
    // Small inclusions: T scales with the volume.
    const double ratio = t_for(0.2, 1.0).norm() / t1.norm();
    CHECK(ratio > 8.0 * 0.8);
    CHECK(ratio < 8.0 * 1.2);

    const SupportQuadrature q(e, PerturbationSpec{{Shape::ball(c, 0.2)}, 0.0, 1.0}, bg.omega());
    const double vol = 4.0 / 3.0 * std::numbers::pi * 0.008;
    CHECK(std::abs(q.support_volume() - vol) < 0.05 * vol);

    try {
      compute_T(Vec3(-0.6, 0, 0), n, e, PerturbationSpec{{Shape::ball(c, 0.2)}, 0.0, 1.0}, bg, 0.2);
      FAIL("expected a proximity error");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::kProximity);
    }
  }
}
