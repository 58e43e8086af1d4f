#include "maxsens/quadrature.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace maxsens;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Mean of prod lambda_i^a_i over the reference tet: 3! prod a_i! / (|a| + 3)!.
double tet_moment(const std::array<int, 4>& a) {
  const int s = a[0] + a[1] + a[2] + a[3];
  return 6.0 * factorial(a[0]) * factorial(a[1]) * factorial(a[2]) * factorial(a[3]) /
         factorial(s + 3);
}

double tri_moment(const std::array<int, 3>& a) {
  const int s = a[0] + a[1] + a[2];
  return 2.0 * factorial(a[0]) * factorial(a[1]) * factorial(a[2]) / factorial(s + 2);
}

double apply(const TetRule& r, const std::array<int, 4>& a) {
  double sum = 0.0;
  for (std::size_t q = 0; q < r.points.size(); ++q) {
    double v = r.weights[q];
    for (int i = 0; i < 4; ++i) v *= std::pow(r.points[q][i], a[i]);
    sum += v;
  }
  return sum;
}

double apply(const TriangleRule& r, const std::array<int, 3>& a) {
  double sum = 0.0;
  for (std::size_t q = 0; q < r.points.size(); ++q) {
    double v = r.weights[q];
    for (int i = 0; i < 3; ++i) v *= std::pow(r.points[q][i], a[i]);
    sum += v;
  }
  return sum;
}

bool tet_exact_to(const TetRule& r, int degree, double tol) {
  for (int a = 0; a <= degree; ++a)
    for (int b = 0; a + b <= degree; ++b)
      for (int c = 0; a + b + c <= degree; ++c)
        for (int d = 0; a + b + c + d <= degree; ++d) {
          const std::array<int, 4> e{a, b, c, d};
          if (std::abs(apply(r, e) - tet_moment(e)) > tol) return false;
        }
  return true;
}

}  // namespace

TEST_SUITE("quadrature") {
  TEST_CASE("degree-2 tet rule") {
    const auto& r = tet_rule_degree2();
    CHECK(r.points.size() == 4);
    CHECK(tet_exact_to(r, 2, 1e-14));
    CHECK_FALSE(tet_exact_to(r, 3, 1e-14));
  }

  TEST_CASE("composite rules stay exact for degree 2 and converge beyond") {
    for (int level = 0; level <= kMaxCompositeLevel; ++level) {
      const auto& r = tet_rule_composite(level);
      CHECK(r.points.size() == 4 * static_cast<std::size_t>(std::pow(8, level)));
      double w = 0.0;
      for (double x : r.weights) w += x;
      CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(tet_exact_to(r, 2, 1e-13));
    }
    // Degree-3 and degree-4 errors fall like h^3 once past level 1.
    for (const std::array<int, 4> e : {std::array<int, 4>{4, 0, 0, 0}, std::array<int, 4>{3, 1, 0, 0}}) {
      const double e2 = std::abs(apply(tet_rule_composite(2), e) - tet_moment(e));
      const double e3 = std::abs(apply(tet_rule_composite(3), e) - tet_moment(e));
      const double e4 = std::abs(apply(tet_rule_composite(4), e) - tet_moment(e));
      CHECK(e2 / e3 > 5.0);
      CHECK(e3 / e4 > 5.0);
    }
    CHECK(&tet_rule_composite(kMaxCompositeLevel + 3) == &tet_rule_composite(kMaxCompositeLevel));
  }

  TEST_CASE("indicator integral improves with composite level") {
    // Volume fraction of {lambda_0 > 1/2} is 1/8.
    double prev = 1.0;
    for (int level = 0; level <= 4; ++level) {
      const auto& r = tet_rule_composite(level);
      double v = 0.0;
      for (std::size_t q = 0; q < r.points.size(); ++q)
        if (r.points[q][0] > 0.5 + 1e-12) v += r.weights[q];
      const double err = std::abs(v - 0.125);
      if (level > 0) CHECK(err <= prev);
      prev = err;
    }
    CHECK(prev < 0.02);
  }

  TEST_CASE("collapsed rule exact to degree 2n - 3") {
    for (int n = 2; n <= 5; ++n) CHECK(tet_exact_to(tet_rule_collapsed(n), 2 * n - 3, 1e-13));
  }

  TEST_CASE("triangle rules") {
    const auto& r2 = triangle_rule_degree2();
    const auto& r4 = triangle_rule_degree4();
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; a + b <= 4; ++b)
        for (int c = 0; a + b + c <= 4; ++c) {
          const std::array<int, 3> e{a, b, c};
          CHECK(apply(r4, e) == doctest::Approx(tri_moment(e)).epsilon(1e-12));
          if (a + b + c <= 2) CHECK(apply(r2, e) == doctest::Approx(tri_moment(e)).epsilon(1e-12));
        }
  }

  TEST_CASE("gauss legendre on [0, 1]") {
    std::vector<double> x, w;
    gauss_legendre_unit(4, x, w);
    for (int k = 0; k <= 7; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], k);
      CHECK(s == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }
}
