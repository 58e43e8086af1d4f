#pragma once

#include "maxsens/mesh.hpp"

#include <memory>
#include <sstream>
#include <string>

namespace testing {

inline std::shared_ptr<const maxsens::TetMesh> ball(int n, double radius = 1.0) {
  return std::make_shared<maxsens::TetMesh>(maxsens::build_ball_mesh(radius, n));
}

// Regular tetrahedron with unit edges.
inline maxsens::TetMesh regular_tet() {
  using maxsens::Vec3;
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<Vec3> v{Vec3(1, 0, -s) * 0.5, Vec3(-1, 0, -s) * 0.5, Vec3(0, 1, s) * 0.5,
                      Vec3(0, -1, s) * 0.5};
  return maxsens::TetMesh(v, {{0, 1, 2, 3}}, {0});
}

inline maxsens::TetMesh parse(const std::string& text) {
  std::istringstream in(text);
  return maxsens::parse_msh(in, "test.msh");
}

}  // namespace testing
