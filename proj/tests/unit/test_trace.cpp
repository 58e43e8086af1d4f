#include "helpers.hpp"
#include "maxsens/error.hpp"
#include "maxsens/trace.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace maxsens;

namespace {

BoundaryTrace constant_trace(std::shared_ptr<const TetMesh> mesh, const Vec3c& v) {
  return BoundaryTrace(mesh, std::vector<Vec3c>(mesh->boundary_vertices().size(), v));
}

Index most_negative_x(const TetMesh& m) {
  Index best = 0;
  const auto bv = m.boundary_vertices();
  for (std::size_t s = 0; s < bv.size(); ++s)
    if (m.vertices()[bv[s]].x() < m.vertices()[bv[best]].x()) best = static_cast<Index>(s);
  return best;
}

}  // namespace

TEST_SUITE("trace") {
  TEST_CASE("zero field has zero trace; trace is linear") {
    auto mesh = testing::ball(6);
    const FieldSolution zero(mesh, ComplexVector::Zero(mesh->num_edges()));
    const auto zt = tangential_trace(zero);
    for (const auto& v : zt.values()) CHECK(v.norm() == 0.0);

    const ComplexVector x = interpolate_edges(*mesh, [](const Vec3& p) -> Vec3c {
      return Vec3c(Complex(p.y(), 1.0), Complex(0.0, p.z()), Complex(p.x() * p.x(), 0.0));
    });
    const Complex c(-0.3, 2.0);
    const auto t1 = tangential_trace(FieldSolution(mesh, x));
    const auto t2 = tangential_trace(FieldSolution(mesh, c * x));
    const auto t3 = t1.scaled(c);
    for (std::size_t s = 0; s < t1.values().size(); ++s)
      CHECK((t2.values()[s] - t3.values()[s]).norm() <= 1e-13 * (1.0 + t2.values()[s].norm()));
  }

  TEST_CASE("constant field trace approaches E x n") {
    auto mesh = testing::ball(12);
    const Vec3c e0(1.0, 0.0, 0.0);
    const ComplexVector x = interpolate_edges(*mesh, [&](const Vec3&) { return e0; });
    const auto t = tangential_trace(FieldSolution(mesh, x));
    const auto bv = mesh->boundary_vertices();
    double worst = 0.0;
    for (std::size_t s = 0; s < bv.size(); ++s) {
      const Vec3 n = mesh->vertices()[bv[s]].normalized();
      worst = std::max(worst, (t.values()[s] - cross(e0, n)).norm());
    }
    CHECK(worst < 0.1);
  }

  TEST_CASE("trace size must match boundary vertices") {
    auto mesh = testing::ball(3);
    CHECK_THROWS_AS(BoundaryTrace(mesh, std::vector<Vec3c>(3)), Error);
  }

  TEST_CASE("raster dimensions and pixel centers") {
    auto mesh = testing::ball(4);
    const auto r = rasterize_equirect(constant_trace(mesh, Vec3c(1, 0, 0)), 360);
    CHECK(r.width() == 360);
    CHECK(r.height() == 180);
    CHECK(r.values().size() == 360u * 180u);
    CHECK(r.theta(0) == doctest::Approx(std::numbers::pi / 360.0));
    CHECK(r.phi(0) == doctest::Approx(std::numbers::pi / 2 - std::numbers::pi / 360.0));
    CHECK((Raster::direction(0.0, 0.0) - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK((Raster::direction(1.0, std::numbers::pi / 2) - Vec3(0, 0, 1)).norm() < 1e-15);
    CHECK_THROWS_AS(rasterize_equirect(constant_trace(mesh, Vec3c(1, 0, 0)), 359), Error);
    CHECK_THROWS_AS(rasterize_equirect(constant_trace(mesh, Vec3c(1, 0, 0)), 0), Error);
  }

  TEST_CASE("hot vertex lands near theta = pi, phi = 0") {
    auto mesh = testing::ball(8);
    std::vector<Vec3c> vals(mesh->boundary_vertices().size(), Vec3c::Zero());
    const Index hot = most_negative_x(*mesh);
    vals[hot] = Vec3c(0, 1, 0);
    const BoundaryTrace trace(mesh, vals);
    const EquirectProjector proj(*mesh, 360);
    const Raster r = proj.rasterize(trace);
    CHECK(r.max() == doctest::Approx(1.0));
    const auto [i, j] = r.argmax();
    CHECK(proj.slot(i, j) == hot);
    CHECK(std::abs(r.theta(i) - std::numbers::pi) < 0.3);
    CHECK(std::abs(r.phi(j)) < 0.3);
    // The pixel nearest the exact direction maps to the hot vertex.
    CHECK(proj.slot(179, 89) == hot);
  }

  TEST_CASE("raster max invariant under complex scaling of the trace") {
    auto mesh = testing::ball(6);
    std::vector<Vec3c> vals;
    for (Index v : mesh->boundary_vertices()) {
      const Vec3 p = mesh->vertices()[v];
      vals.emplace_back(Complex(p.x() + 2.0, p.y()), Complex(0, p.z() * p.z()), 0.5);
    }
    const BoundaryTrace t(mesh, vals);
    const Complex c = std::polar(2.5, 0.7);
    const Raster a = rasterize_equirect(t);
    const Raster b = rasterize_equirect(t.scaled(c));
    CHECK(b.max() == doctest::Approx(2.5 * a.max()).epsilon(1e-13));
    CHECK(a.argmax() == b.argmax());
  }

  TEST_CASE("l2 norm over the boundary") {
    auto mesh = testing::ball(12);
    CHECK(l2_norm_gamma(constant_trace(mesh, Vec3c::Zero())) == 0.0);
    const double unit = l2_norm_gamma(constant_trace(mesh, Vec3c(0, Complex(0, 1), 0)));
    CHECK(std::abs(unit - std::sqrt(4.0 * std::numbers::pi)) < 0.02 * std::sqrt(4.0 * std::numbers::pi));
    CHECK(unit == doctest::Approx(std::sqrt(mesh_stats(*mesh).boundary_area)).epsilon(1e-12));
    const double three = l2_norm_gamma(constant_trace(mesh, Vec3c(0, Complex(0, 3), 0)));
    CHECK(three == doctest::Approx(3.0 * unit).epsilon(1e-13));
  }

  TEST_CASE("thresholded area ratio") {
    auto mesh = testing::ball(8);
    std::vector<Vec3c> vals;
    for (Index v : mesh->boundary_vertices()) {
      const double x = mesh->vertices()[v].x();
      vals.emplace_back(std::exp(-4.0 * (x + 1.0)), 0, 0);
    }
    const BoundaryTrace t(mesh, vals);
    CHECK(thresholded_area_ratio(t, 1e-6) == doctest::Approx(1.0));
    double prev = 1.0;
    for (double th = 0.05; th <= 1.0; th += 0.05) {
      const double r = thresholded_area_ratio(t, th);
      CHECK(r <= prev + 1e-15);
      CHECK(r >= 0.0);
      prev = r;
    }
    CHECK(thresholded_area_ratio(t, 0.5) < 0.5);
    CHECK_THROWS_AS(thresholded_area_ratio(constant_trace(mesh, Vec3c::Zero()), 0.5), Error);
  }

  TEST_CASE("boundary point along a ray") {
    auto mesh = testing::ball(8);
    const Vec3 p = boundary_point_along(*mesh, Vec3(-1, 0, 0));
    CHECK(p.norm() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(p.normalized().dot(Vec3(-1, 0, 0)) > 0.999);
  }

  TEST_CASE("pgm and csv output") {
    std::vector<double> vals(8 * 4, 0.0);
    vals[5] = 2.0;
    vals[6] = 1.0;
    const Raster r(8, vals);
    const auto dir = std::filesystem::temp_directory_path();
    write_pgm(r, dir / "maxsens_unit.pgm", "probe");
    std::ifstream pgm(dir / "maxsens_unit.pgm");
    std::string magic, comment;
    int w = 0, h = 0, maxv = 0;
    pgm >> magic;
    std::getline(pgm, comment);
    std::getline(pgm, comment);
    pgm >> w >> h >> maxv;
    CHECK(magic == "P2");
    CHECK(comment == "# probe");
    CHECK(w == 8);
    CHECK(h == 4);
    CHECK(maxv == 255);
    std::vector<int> px(32);
    for (int& x : px) pgm >> x;
    CHECK(px[5] == 255);
    CHECK(px[6] == 128);
    CHECK(px[0] == 0);

    write_raster_csv(r, dir / "maxsens_unit.csv");
    std::ifstream csv(dir / "maxsens_unit.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "theta,phi,modulus");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 32);
    std::filesystem::remove(dir / "maxsens_unit.pgm");
    std::filesystem::remove(dir / "maxsens_unit.csv");
    CHECK_THROWS_AS(write_pgm(r, "/nonexistent/dir/x.pgm"), Error);
  }
}
