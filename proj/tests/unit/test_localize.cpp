#include "helpers.hpp"
#include "maxsens/error.hpp"
#include "maxsens/fem.hpp"
#include "maxsens/localize.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <optional>
#include <set>

using namespace maxsens;

namespace {

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Depth law p(d) = -2 + 5 d and K(d) = 3.
Database synthetic_db() {
  Database db;
  db.theta = 0.2;
  std::vector<DepthSample> ds;
  for (int i = 0; i < 9; ++i) {
    const double d = 0.1 + 0.1 * i;
    ds.push_back({d, 0.1, 1.0 / (1.0 + std::exp(-2.0 + 5.0 * d)), Vec3(0, 1, 0)});
  }
  db.depth = fit_depth_curve(ds, db.theta);
  std::vector<VolumeSample> vs;
  for (double d : {0.2, 0.5, 0.8})
    for (double v : {1e-3, 2e-3}) vs.push_back({d, 0.1, v, 3.0 * v, Vec3(0, 1, 0)});
  db.volume = fit_volume_constant(vs);
  return db;
}

Raster blank(int width, double value = 0.0) {
  return Raster(width, std::vector<double>(static_cast<std::size_t>(width) * (width / 2), value));
}

// Modulus bump centered on the boundary direction c.
BoundaryTrace bump(std::shared_ptr<const TetMesh> mesh, const std::vector<Vec3>& centers) {
  std::vector<Vec3c> vals;
  for (Index v : mesh->boundary_vertices()) {
    const Vec3 x = mesh->vertices()[v].normalized();
    double m = 0.0;
    for (const Vec3& c : centers) m += std::exp(-5.0 * (x - c).squaredNorm());
    vals.emplace_back(0, m, 0);
  }
  return BoundaryTrace(mesh, vals);
}

}  // namespace

TEST_SUITE("localize") {
  TEST_CASE("spherical coordinates and projection error") {
    const Vec2 a = spherical_coords(Vec3(-1, 0, 0));
    CHECK(a.x() == doctest::Approx(std::numbers::pi));
    CHECK(a.y() == doctest::Approx(0.0));
    const Vec2 b = spherical_coords(Vec3(0, -1, 0));
    CHECK(b.x() == doctest::Approx(1.5 * std::numbers::pi));
    CHECK(spherical_coords(Vec3(0, 0, 2)).y() == doctest::Approx(std::numbers::pi / 2));
    CHECK(projection_error(Vec3(-1, 0, 0), Vec3(-1, 0, 0)) == 0.0);
    // Wrapped: theta 0.05 versus 2 pi - 0.05 differ by 0.1.
    const Vec3 t(std::cos(0.05), std::sin(0.05), 0.3);
    const Vec3 e(std::cos(-0.05), std::sin(-0.05), 0.3);
    const Vec2 st = spherical_coords(t);
    CHECK(projection_error(t, e) == doctest::Approx(0.1 / st.norm()).epsilon(1e-9));
  }

  TEST_CASE("find_projection on a symmetric hot block") {
    auto mesh = testing::ball(8);
    LocalizeConfig cfg;
    Raster r = blank(360);
    for (int i : {179, 180})
      for (int j : {89, 90}) r.at(i, j) = 1.0;
    const Projection p = find_projection(r, *mesh, cfg);
    CHECK(p.white_pixels == 4);
    CHECK(p.theta == doctest::Approx(std::numbers::pi).epsilon(1e-12));
    CHECK(std::abs(p.phi) < 1e-12);
    CHECK(p.point.normalized().dot(Vec3(-1, 0, 0)) > 1.0 - 1e-12);

    // Scaling the raster changes nothing.
    for (double& v : r.values()) v *= 7.5;
    CHECK((find_projection(r, *mesh, cfg).point - p.point).norm() < 1e-14);
  }

  TEST_CASE("find_projection across the theta = 0 seam") {
    auto mesh = testing::ball(8);
    Raster r = blank(360);
    for (int i : {358, 359, 0, 1})
      for (int j : {89, 90}) r.at(i, j) = 1.0;
    const Projection p = find_projection(r, *mesh, LocalizeConfig{});
    CHECK(p.point.normalized().dot(Vec3(1, 0, 0)) > 1.0 - 1e-12);
    CHECK(code_of([&] { find_projection(blank(360), *mesh, LocalizeConfig{}); }) ==
          ErrorCode::kDetection);
  }

  TEST_CASE("depth inversion") {
    const Database db = synthetic_db();
    CHECK(db.depth.monotone_sign == 1);
    for (double d : {0.15, 0.5, 0.85}) {
      const DepthInversion inv = invert_depth(1.0 / (1.0 + std::exp(-2.0 + 5.0 * d)), db);
      CHECK(inv.d == doctest::Approx(d).epsilon(1e-9));
      CHECK_FALSE(inv.clamped);
    }
    const DepthInversion deep = invert_depth(1.0 / (1.0 + std::exp(-2.0 + 5.0 * 3.0)), db);
    CHECK(deep.clamped);
    CHECK(deep.d == doctest::Approx(db.depth.d_hi));
    CHECK(code_of([&] { invert_depth(0.0, db); }) == ErrorCode::kInvalidArgument);
    Database flat = db;
    flat.depth.degenerate = true;
    CHECK(code_of([&] { invert_depth(0.3, flat); }) == ErrorCode::kInversion);
  }

  TEST_CASE("volume estimate") {
    const Database db = synthetic_db();
    const VolumeEstimate v = estimate_volume(0.03, 0.4, db);
    CHECK(v.volume == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(4.0 / 3.0 * std::numbers::pi * std::pow(v.alpha_equiv, 3) == doctest::Approx(0.01));
    CHECK(estimate_volume(0.0, 0.4, db).no_perturbation);
    CHECK(code_of([&] { estimate_volume(-1.0, 0.4, db); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("noise model") {
    ComplexVector x(5);
    for (int i = 0; i < 5; ++i) x[i] = Complex(0.25 * i, 0.0);
    // sigma 0: only the midrange shift (0.5 on the real part, 0 on the imaginary).
    const ComplexVector s = add_noise(x, 0.0, 1);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(s[i] - (x[i] + 0.5)) < 1e-15);
    CHECK((add_noise(x, 0.0, 1, NoiseOffset::kNone) - x).norm() == 0.0);
    const ComplexVector c = ComplexVector::Constant(4, Complex(2.0, -1.0));
    CHECK((add_noise(c, 0.3, 2) - 2.0 * c).norm() < 1e-15);
    CHECK((add_noise(x, 0.1, 9) - add_noise(x, 0.1, 9)).norm() == 0.0);
    CHECK((add_noise(x, 0.1, 9) - add_noise(x, 0.1, 10)).norm() > 0.0);

    const int n = 100000;
    ComplexVector big(n);
    for (int i = 0; i < n; ++i) big[i] = Complex(static_cast<double>(i) / (n - 1), 0.0);
    const double sigma = 0.2;
    const ComplexVector y = add_noise(big, sigma, 3, NoiseOffset::kNone);
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = (y[i] - big[i]).real();
      mean += r;
      sq += r * r;
      CHECK(y[i].imag() == 0.0);
    }
    mean /= n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(sd - 0.5 * sigma) < 0.02 * 0.5 * sigma);
    CHECK(std::abs(mean) < 5.0 * 0.5 * sigma / std::sqrt(n));
  }

  TEST_CASE("trace noise touches boundary edges only") {
    auto mesh = testing::ball(5);
    const ComplexVector x = interpolate_edges(*mesh, [](const Vec3& p) -> Vec3c {
      return Vec3c(Complex(p.y(), 0.5), Complex(1.0, p.z()), 0.0);
    });
    const FieldSolution e(mesh, x);
    const FieldSolution noisy = add_trace_noise(e, 0.05, 4);
    const auto be = boundary_edges(*mesh);
    const std::set<Index> on(be.begin(), be.end());
    int changed = 0;
    for (Index i = 0; i < static_cast<Index>(x.size()); ++i) {
      if (on.count(i)) {
        changed += noisy.coefficients()[i] != x[i];
      } else {
        CHECK(noisy.coefficients()[i] == x[i]);
      }
    }
    CHECK(changed == static_cast<int>(be.size()));
  }

  TEST_CASE("outlier removal") {
    const int w = 72;
    Raster clean = blank(w, 0.01);
    for (int i = 30; i < 35; ++i)
      for (int j = 16; j < 21; ++j) clean.at(i, j) = 1.0;
    LocalizeConfig cfg;
    cfg.min_pts = 3;  // blob corners have only two direct neighbours
    const Raster c2 = remove_outliers(clean, cfg);
    CHECK(c2.values() == clean.values());

    Raster spiky = clean;
    spiky.at(60, 5) = 2.0;
    const Raster out = remove_outliers(spiky, cfg);
    CHECK(out.at(60, 5) == doctest::Approx(0.01));
    CHECK(out.at(32, 18) == 1.0);
    CHECK(remove_outliers(out, cfg).values() == out.values());
  }

  TEST_CASE("clustering separates two caps") {
    auto mesh = testing::ball(12);
    const BoundaryTrace t = bump(mesh, {Vec3(-1, 0, 0), Vec3(0, 1, 0)});
    const auto parts = cluster_traces(t, LocalizeConfig{});
    REQUIRE(parts.size() == 2);
    std::vector<Vec3> peaks;
    for (const auto& p : parts) {
      std::size_t best = 0;
      for (std::size_t s = 0; s < p.moduli().size(); ++s)
        if (p.moduli()[s] > p.moduli()[best]) best = s;
      peaks.push_back(mesh->vertices()[mesh->boundary_vertices()[best]].normalized());
    }
    CHECK(peaks[0].dot(peaks[1]) < 0.5);
    // Every slot belongs to exactly one cluster.
    for (std::size_t s = 0; s < t.moduli().size(); ++s)
      CHECK(parts[0].moduli()[s] + parts[1].moduli()[s] == doctest::Approx(t.moduli()[s]));
    CHECK(cluster_traces(bump(mesh, {Vec3(0, 0, 1)}), LocalizeConfig{}).size() == 1);
  }

  TEST_CASE("zero traces mean no perturbation") {
    auto mesh = testing::ball(5);
    const BoundaryTrace zero(mesh, std::vector<Vec3c>(mesh->boundary_vertices().size(), Vec3c::Zero()));
    const Database db = synthetic_db();
    CHECK(localize({zero, zero}, db, LocalizeConfig{}).no_perturbation);
    CHECK(localize_multiple({zero}, db, LocalizeConfig{}).no_perturbation);
    LocalizeConfig other;
    other.theta = 0.3;
    CHECK(code_of([&] { localize({bump(mesh, {Vec3(1, 0, 0)})}, db, other); }) ==
          ErrorCode::kCompatibility);
  }
}
