#include "helpers.hpp"
#include "maxsens/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

using namespace maxsens;

namespace {

const char* kSingleTet =
    "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
    "$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
    "$Elements\n1\n1 4 2 7 1 1 2 3 4\n$EndElements\n";

const char* kTwoTets =
    "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
    "$Nodes\n5\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n5 1 1 1\n$EndNodes\n"
    "$Elements\n3\n"
    "1 2 2 9 9 1 2 3\n"  // surface element, ignored
    "2 4 2 3 1 1 2 3 4\n"
    "3 4 2 5 1 2 3 4 5\n$EndElements\n";

void check_invariants(const TetMesh& m) {
  CHECK(4 * m.num_tets() == 2 * m.num_interior_faces() + m.boundary_faces().size());
  for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) CHECK(m.signed_volume(t) > 0.0);
  for (const auto& e : m.edges()) CHECK(e[0] < e[1]);
  // Divergence theorem with F(x) = x / 3.
  double flux = 0.0;
  for (const auto& f : m.boundary_faces()) {
    const Vec3 c = (m.vertices()[f.vertices[0]] + m.vertices()[f.vertices[1]] +
                    m.vertices()[f.vertices[2]]) / 3.0;
    flux += f.normal.dot(c) * f.area / 3.0;
    CHECK(f.normal.dot(c - m.tet_centroid(f.tet)) > 0.0);
  }
  double vol = 0.0;
  for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) vol += m.signed_volume(t);
  CHECK(flux == doctest::Approx(vol).epsilon(1e-10));
}

std::string parse_error_line(const std::string& text) {
  try {
    testing::parse(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    return e.what();
  }
  FAIL("no parse error");
  return {};
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("ball boundary vertices lie on the sphere") {
    const TetMesh m = build_ball_mesh(1.0, 2);
    for (Index v : m.boundary_vertices()) CHECK(std::abs(m.vertices()[v].norm() - 1.0) < 1e-12);
    check_invariants(m);
  }

  TEST_CASE("ball volume and area converge") {
    const TetMesh m = build_ball_mesh(1.0, 16);
    double vol = 0.0;
    for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) vol += m.signed_volume(t);
    const double pi = std::numbers::pi;
    CHECK(std::abs(vol - 4.0 * pi / 3.0) / (4.0 * pi / 3.0) < 0.02);
    CHECK(std::abs(mesh_stats(m).boundary_area - 4.0 * pi) / (4.0 * pi) < 0.02);
    check_invariants(m);
  }

  TEST_CASE("ball volume error shrinks with n") {
    const double exact = 4.0 * std::numbers::pi / 3.0;
    double prev = 1e300;
    for (int n : {4, 8, 12}) {
      const TetMesh m = build_ball_mesh(1.0, n);
      double vol = 0.0;
      for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) vol += m.signed_volume(t);
      CHECK(std::abs(vol - exact) < prev);
      prev = std::abs(vol - exact);
    }
  }

  TEST_CASE("bad ball parameters") {
    CHECK_THROWS_AS(build_ball_mesh(0.0, 4), Error);
    CHECK_THROWS_AS(build_ball_mesh(1.0, 1), Error);
    const std::vector<double> bad{0.9, 0.5};
    CHECK_THROWS_AS(build_ball_mesh(1.0, 8, bad), Error);
  }

  TEST_CASE("layered ball tags shells and pins interfaces") {
    const std::vector<double> radii{0.87, 0.92};
    const TetMesh m = build_ball_mesh(1.0, 10, radii);
    const auto tags = m.distinct_region_tags();
    CHECK(tags == std::vector<int>{0, 1, 2});
    for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) {
      const double r = m.tet_centroid(t).norm();
      const int tag = m.region_tags()[t];
      if (tag == 0) CHECK(r < 0.87);
      if (tag == 2) CHECK(r > 0.92 * 0.97);
    }
    check_invariants(m);
  }

  TEST_CASE("tet_edges signs follow the global orientation") {
    const TetMesh m = build_ball_mesh(1.0, 3);
    for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) {
      const auto& tet = m.tets()[t];
      for (int k = 0; k < 6; ++k) {
        const auto [a, b] = kTetEdgeVertices[k];
        const auto& ref = m.tet_edges()[t][k];
        const auto& e = m.edges()[ref.edge];
        const Index va = tet[a], vb = tet[b];
        CHECK(((e[0] == va && e[1] == vb) || (e[0] == vb && e[1] == va)));
        CHECK(ref.sign == (va < vb ? 1 : -1));
      }
    }
  }

  TEST_CASE("construction is deterministic") {
    const TetMesh a = build_ball_mesh(1.0, 5);
    const TetMesh b(std::vector<Vec3>(a.vertices().begin(), a.vertices().end()),
                    std::vector<std::array<Index, 4>>(a.tets().begin(), a.tets().end()),
                    std::vector<int>(a.region_tags().begin(), a.region_tags().end()));
    CHECK(a.fingerprint() == b.fingerprint());
    REQUIRE(a.num_edges() == b.num_edges());
    for (std::size_t t = 0; t < a.num_tets(); ++t)
      for (int k = 0; k < 6; ++k) CHECK(a.tet_edges()[t][k].sign == b.tet_edges()[t][k].sign);
  }

  TEST_CASE("negatively oriented input is reoriented") {
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    const TetMesh m(v, {{0, 2, 1, 3}}, {0});
    CHECK(m.signed_volume(0) == doctest::Approx(1.0 / 6.0));
    check_invariants(m);
  }

  TEST_CASE("mesh_stats of a regular tet") {
    const MeshStats s = mesh_stats(testing::regular_tet());
    CHECK(s.h == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.num_edges == 6);
    CHECK(s.num_tets == 1);
    CHECK(s.boundary_area == doctest::Approx(std::sqrt(3.0)));  // 4 * sqrt(3)/4
  }

  TEST_CASE("jitter keeps sphere vertices on their spheres") {
    const std::vector<double> radii{0.87, 0.92};
    const TetMesh base = build_ball_mesh(1.0, 10, radii);
    const std::vector<double> spheres{0.87, 0.92, 1.0};
    const TetMesh m = jitter_mesh(base, 0.3 / 10, 3, spheres);
    CHECK(m.fingerprint() != base.fingerprint());
    for (std::size_t i = 0; i < base.num_vertices(); ++i) {
      const double r0 = base.vertices()[i].norm();
      for (double s : spheres)
        if (std::abs(r0 - s) <= 1e-9 * s) CHECK(std::abs(m.vertices()[i].norm() - s) < 1e-12);
    }
    check_invariants(m);
    const TetMesh again = jitter_mesh(base, 0.3 / 10, 3, spheres);
    CHECK(again.fingerprint() == m.fingerprint());
    CHECK_THROWS_AS(jitter_mesh(base, 0.5, 3, spheres), Error);
  }
}

TEST_SUITE("msh") {
  TEST_CASE("single tet") {
    const TetMesh m = testing::parse(kSingleTet);
    CHECK(m.num_tets() == 1);
    CHECK(m.num_edges() == 6);
    CHECK(m.boundary_faces().size() == 4);
    CHECK(m.region_tags()[0] == 7);  // physical tag, not elementary
  }

  TEST_CASE("two tets share one face; surface elements ignored") {
    const TetMesh m = testing::parse(kTwoTets);
    CHECK(m.num_tets() == 2);
    CHECK(m.num_interior_faces() == 1);
    CHECK(m.boundary_faces().size() == 6);
    check_invariants(m);
  }

  TEST_CASE("missing physical tags default to region 0") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
        "$Elements\n1\n1 4 0 1 2 3 4\n$EndElements\n";
    CHECK(testing::parse(text).region_tags()[0] == 0);
  }

  TEST_CASE("whitespace tolerant") {
    const std::string text =
        "$MeshFormat\r\n2.2   0 8 \r\n$EndMeshFormat\r\n"
        "$Nodes\n 4\n1\t0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
        "$Elements\n1\n1 4 2 7 1   1 2 3 4\n$EndElements\n";
    CHECK(testing::parse(text).num_tets() == 1);
  }

  TEST_CASE("non-tet volume element is rejected") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n8\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n5 1 1 0\n6 1 0 1\n7 0 1 1\n8 1 1 1\n"
        "$EndNodes\n$Elements\n1\n1 5 2 1 1 1 2 5 3 4 6 8 7\n$EndElements\n";
    const std::string msg = parse_error_line(text);
    CHECK(msg.find("test.msh:17:") != std::string::npos);
  }

  TEST_CASE("dangling vertex reference") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
        "$Elements\n1\n1 4 2 7 1 1 2 3 9\n$EndElements\n";
    const std::string msg = parse_error_line(text);
    CHECK(msg.find("test.msh:13:") != std::string::npos);
  }

  TEST_CASE("malformed headers") {
    parse_error_line("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
    parse_error_line("$Nodes\n");
    parse_error_line(
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n"
        "$EndNodes\n");
    parse_error_line(
        "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n");
  }

  TEST_CASE("write then load reproduces the mesh") {
    const std::vector<double> radii{0.6};
    const TetMesh m = build_ball_mesh(1.0, 4, radii);
    const auto path = std::filesystem::temp_directory_path() / "maxsens_unit_roundtrip.msh";
    write_msh(m, path);
    const TetMesh back = load_msh(path);
    CHECK(back.fingerprint() == m.fingerprint());
    std::filesystem::remove(path);
  }

  TEST_CASE("missing file is an io error naming the path") {
    try {
      load_msh("/nonexistent/mesh.msh");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIo);
      CHECK(std::string(e.what()).find("/nonexistent/mesh.msh") != std::string::npos);
    }
  }
}
