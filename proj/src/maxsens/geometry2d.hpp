#pragma once

#include <Eigen/Core>

#include <vector>

namespace maxsens {

using Vec2 = Eigen::Vector2d;

// Graham scan. Returns the hull vertices counter-clockwise starting from the
// lowest (then leftmost) point, without collinear points. Degenerate inputs
// give one or two points.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

}  // namespace maxsens
