#include "helpers.hpp"
#include "maxsens/error.hpp"
#include "maxsens/fem.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <random>

using namespace maxsens;

namespace {

Eigen::MatrixXcd dense(const ComplexSparseMatrix& m) { return Eigen::MatrixXcd(m.data()); }

// Barycentric gradients of the (single) tet, by direct inversion.
std::array<Vec3, 4> gradients(const TetMesh& m) {
  const auto& t = m.tets()[0];
  const auto v = m.vertices();
  Mat3 j;
  j.col(0) = v[t[1]] - v[t[0]];
  j.col(1) = v[t[2]] - v[t[0]];
  j.col(2) = v[t[3]] - v[t[0]];
  const Mat3 inv = j.inverse();
  std::array<Vec3, 4> g;
  for (int k = 1; k < 4; ++k) g[k] = inv.row(k - 1).transpose();
  g[0] = -(g[1] + g[2] + g[3]);
  // Keyed by global vertex index.
  std::array<Vec3, 4> out;
  for (int k = 0; k < 4; ++k) out[t[k]] = g[k];
  return out;
}

double volume(const TetMesh& m) { return m.signed_volume(0); }

}  // namespace

TEST_SUITE("fem") {
  TEST_CASE("single-tet curl-curl block: symmetric, PSD, rank 3") {
    auto mesh = std::make_shared<TetMesh>(testing::regular_tet());
    const EdgeSpace space(mesh);
    const Eigen::MatrixXcd a = dense(assemble_curl_curl(space));
    REQUIRE(a.rows() == 6);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.imag().cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.real());
    const auto ev = es.eigenvalues();
    int rank = 0;
    for (int i = 0; i < 6; ++i) {
      CHECK(ev[i] > -1e-12);
      if (ev[i] > 1e-10 * ev.maxCoeff()) ++rank;
    }
    CHECK(rank == 3);
  }

  TEST_CASE("curl-curl annihilates discrete gradients") {
    auto mesh = testing::ball(5);
    const ComplexSparseMatrix a = assemble_curl_curl(EdgeSpace(mesh));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    ComplexVector q(mesh->num_vertices());
    for (auto& v : q) v = Complex(n01(rng), n01(rng));
    const ComplexVector g = gradient_dofs(*mesh, q);
    for (std::size_t e = 0; e < mesh->num_edges(); ++e) {
      const auto& ed = mesh->edges()[e];
      CHECK(std::abs(g[e] - (q[ed[1]] - q[ed[0]])) < 1e-14);
    }
    CHECK((a * g).norm() <= 1e-12 * (a.data().norm() * g.norm()));
  }

  TEST_CASE("single-tet mass matrix matches the closed form") {
    auto mesh = std::make_shared<TetMesh>(testing::regular_tet());
    const Eigen::MatrixXcd m = dense(assemble_mass(EdgeSpace(mesh), std::map<int, Complex>{{0, 1.0}}));
    const auto g = gradients(*mesh);
    const double vol = volume(*mesh);
    auto ll = [&](Index p, Index q) { return vol * (p == q ? 2.0 : 1.0) / 20.0; };
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        const auto [a, b] = mesh->edges()[i];
        const auto [c, d] = mesh->edges()[j];
        const double exact = ll(a, c) * g[b].dot(g[d]) - ll(a, d) * g[b].dot(g[c]) -
                             ll(b, c) * g[a].dot(g[d]) + ll(b, d) * g[a].dot(g[c]);
        CHECK(std::abs(m(i, j) - exact) < 1e-13);
      }
  }

  TEST_CASE("mass linearity and region additivity") {
    const std::vector<double> radii{0.6};
    auto mesh = std::make_shared<TetMesh>(build_ball_mesh(1.0, 4, radii));
    const EdgeSpace space(mesh);
    const Complex c(2.5, -0.75);
    const auto m1 = dense(assemble_mass(space, std::map<int, Complex>{{0, 1.0}, {1, 1.0}}));
    const auto mc = dense(assemble_mass(space, std::map<int, Complex>{{0, c}, {1, c}}));
    CHECK((mc - c * m1).cwiseAbs().maxCoeff() < 1e-14 * m1.cwiseAbs().maxCoeff());

    const auto both = dense(assemble_mass(space, std::map<int, Complex>{{0, 1.0}, {1, 2.0}}));
    const auto tags = mesh->region_tags();
    const CoefficientFn only0 = [&](Index t, const Vec3&) { return Complex(tags[t] == 0 ? 1.0 : 0.0); };
    const CoefficientFn only1 = [&](Index t, const Vec3&) { return Complex(tags[t] == 1 ? 2.0 : 0.0); };
    const Eigen::MatrixXcd sum = dense(assemble_mass(space, only0)) + dense(assemble_mass(space, only1));
    CHECK((both - sum).cwiseAbs().maxCoeff() < 1e-14 * both.cwiseAbs().maxCoeff());

    CHECK_THROWS_AS(assemble_mass(space, std::map<int, Complex>{{0, 1.0}}), Error);
  }

  TEST_CASE("mass positivity") {
    auto mesh = testing::ball(4);
    const auto m = assemble_mass(EdgeSpace(mesh), std::map<int, Complex>{{0, 1.0}});
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 5; ++trial) {
      ComplexVector x(m.dimension());
      for (auto& v : x) v = n01(rng);
      CHECK(x.dot(m * x).real() > 0.0);
    }
  }

  TEST_CASE("assembly is deterministic") {
    auto mesh = testing::ball(4);
    const EdgeSpace space(mesh);
    const auto a = dense(assemble_curl_curl(space));
    const auto b = dense(assemble_curl_curl(space));
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("degenerate tet names the tet") {
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    try {
      auto mesh = std::make_shared<TetMesh>(v, std::vector<std::array<Index, 4>>{{0, 1, 2, 3}},
                                            std::vector<int>{0});
      assemble_curl_curl(EdgeSpace(mesh));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::kAssembly || e.code() == ErrorCode::kInvalidArgument));
      CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
  }

  TEST_CASE("neumann load: zero, linear, analytic on one tet") {
    auto mesh = std::make_shared<TetMesh>(testing::regular_tet());
    const EdgeSpace space(mesh);
    CHECK(assemble_neumann_rhs(space, [](const Vec3&, const Vec3&) { return Vec3c::Zero().eval(); })
              .norm() == 0.0);

    const Vec3 v(0.3, -1.2, 0.7);
    const BoundarySource g = [&](const Vec3&, const Vec3& n) -> Vec3c {
      return n.cross(v.cross(n)).cast<Complex>();
    };
    const ComplexVector b = assemble_neumann_rhs(space, g);
    const auto grads = gradients(*mesh);
    ComplexVector exact = ComplexVector::Zero(6);
    for (const auto& f : mesh->boundary_faces()) {
      const Vec3 gf = f.normal.cross(v.cross(f.normal));
      auto on_face = [&](Index p) {
        return std::find(f.vertices.begin(), f.vertices.end(), p) != f.vertices.end() ? f.area / 3.0
                                                                                        : 0.0;
      };
      for (std::size_t e = 0; e < 6; ++e) {
        const auto [a, bb] = mesh->edges()[e];
        exact[e] += gf.dot(on_face(a) * grads[bb] - on_face(bb) * grads[a]);
      }
    }
    CHECK((b - exact).norm() < 1e-13);
    const Complex c(0.0, 3.0);
    const BoundarySource gc = [&](const Vec3& x, const Vec3& n) -> Vec3c { return c * g(x, n); };
    CHECK((assemble_neumann_rhs(space, gc) - c * b).norm() < 1e-13);
  }

  TEST_CASE("volume load: zero, outside support, constant on one tet") {
    auto mesh = std::make_shared<TetMesh>(testing::regular_tet());
    const EdgeSpace space(mesh);
    CHECK(assemble_volume_rhs(space, [](Index, const Vec3&) { return Vec3c::Zero().eval(); }).norm() == 0.0);
    const VolumeSource outside = [](Index, const Vec3& x) -> Vec3c {
      return x.norm() > 10.0 ? Vec3c(1, 1, 1) : Vec3c::Zero().eval();
    };
    CHECK(assemble_volume_rhs(space, outside).norm() == 0.0);

    const Vec3c f(Complex(1.0, 0.5), Complex(-2.0, 0.0), Complex(0.0, 1.0));
    const ComplexVector b = assemble_volume_rhs(space, [&](Index, const Vec3&) { return f; });
    const auto grads = gradients(*mesh);
    const double vol = volume(*mesh);
    for (std::size_t e = 0; e < 6; ++e) {
      const auto [a, bb] = mesh->edges()[e];
      const Vec3c w = (vol / 4.0 * (grads[bb] - grads[a])).cast<Complex>();
      CHECK(std::abs(b[e] - (w.transpose() * f)(0)) < 1e-13);
    }
  }

  TEST_CASE("field evaluation: zero, patch test, linearity, outside") {
    auto mesh = testing::ball(4);
    const FieldSolution zero(mesh, ComplexVector::Zero(mesh->num_edges()));
    CHECK(evaluate_field(zero, Vec3(0.1, 0.2, -0.3)).norm() == 0.0);

    const Vec3c v(Complex(1.0, -2.0), Complex(0.5, 0.0), Complex(-0.25, 3.0));
    const ComplexVector dofs = interpolate_edges(*mesh, [&](const Vec3&) { return v; });
    const FieldSolution cst(mesh, dofs);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.55, 0.55);
    const PointLocator loc(*mesh);
    for (int i = 0; i < 50; ++i) {
      const Vec3 x(u(rng), u(rng), u(rng));
      CHECK((evaluate_field(cst, loc, x) - v).norm() < 1e-12);
    }
    const Vec3c w(Complex(0.0, 1.0), Complex(2.0, 0.0), Complex(1.0, 1.0));
    const ComplexVector dofs_w = interpolate_edges(*mesh, [&](const Vec3& x) {
      return (w * x.x()).eval();
    });
    const Complex a(0.5, -1.5);
    const FieldSolution combo(mesh, a * dofs + dofs_w);
    const FieldSolution fw(mesh, dofs_w);
    const Vec3 x(0.2, -0.1, 0.3);
    CHECK((evaluate_field(combo, x) - (a * evaluate_field(cst, x) + evaluate_field(fw, x))).norm() <
          1e-12);

    try {
      evaluate_field(cst, Vec3(2.0, 0.0, 0.0));
      FAIL("expected a location error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kLocation);
    }
  }

  TEST_CASE("whitney curls are constant and match the closed form") {
    auto mesh = std::make_shared<TetMesh>(testing::regular_tet());
    const TetGeometry geo = tet_geometry(*mesh, 0);
    const auto curls = whitney_curls(geo, mesh->tet_edges()[0]);
    const auto grads = gradients(*mesh);
    for (int k = 0; k < 6; ++k) {
      const auto [a, b] = mesh->edges()[mesh->tet_edges()[0][k].edge];
      const Vec3 exact = 2.0 * grads[a].cross(grads[b]);
      CHECK((curls[k] - exact).norm() < 1e-12);
    }
  }

  TEST_CASE("boundary edges are the edges of boundary faces") {
    auto mesh = testing::ball(3);
    const auto be = boundary_edges(*mesh);
    CHECK(std::is_sorted(be.begin(), be.end()));
    for (Index e : be) {
      const auto& ed = mesh->edges()[e];
      CHECK(mesh->boundary_slot(ed[0]) >= 0);
      CHECK(mesh->boundary_slot(ed[1]) >= 0);
    }
    // Euler on a closed triangulated surface: E = 3F / 2.
    CHECK(be.size() * 2 == mesh->boundary_faces().size() * 3);
  }
}
