#pragma once

#include <array>
#include <vector>

namespace maxsens {

// Barycentric rule on a tetrahedron; weights sum to 1 (multiply by volume).
struct TetRule {
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;
};

// Barycentric rule on a triangle; weights sum to 1 (multiply by area).
struct TriangleRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};

// 4-point rule, exact for degree 2.
const TetRule& tet_rule_degree2();

// Degree-2 rule on each of the 8^level equal-volume pieces obtained by
// repeated midpoint subdivision; level 0 is tet_rule_degree2(). Levels above
// kMaxCompositeLevel are clamped.
inline constexpr int kMaxCompositeLevel = 4;
const TetRule& tet_rule_composite(int level);

// Collapsed Gauss-Legendre (Duffy) rule with n^3 points, exact for
// polynomials of degree 2n - 3 or better. Used for error norms.
TetRule tet_rule_collapsed(int n);

// 3-point interior rule, exact for degree 2.
const TriangleRule& triangle_rule_degree2();

// 6-point Dunavant rule, exact for degree 4 (covers the degree-3 loads).
const TriangleRule& triangle_rule_degree4();

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace maxsens
