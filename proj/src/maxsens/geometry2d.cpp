#include "maxsens/geometry2d.hpp"

#include <algorithm>
#include <cmath>

namespace maxsens {

namespace {

double orient(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  if (points.empty()) return {};
  const auto pivot_it = std::min_element(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.y() < b.y() || (a.y() == b.y() && a.x() < b.x());
  });
  std::iter_swap(points.begin(), pivot_it);
  const Vec2 pivot = points.front();

  // Polar order around the pivot; ties by distance so the farthest survives.
  std::sort(points.begin() + 1, points.end(), [&](const Vec2& a, const Vec2& b) {
    const double o = orient(pivot, a, b);
    if (o != 0.0) return o > 0.0;
    return (a - pivot).squaredNorm() < (b - pivot).squaredNorm();
  });

  std::vector<Vec2> hull;
  hull.reserve(points.size());
  for (const Vec2& p : points) {
    if (!hull.empty() && p == hull.back()) continue;
    while (hull.size() >= 2 && orient(hull[hull.size() - 2], hull.back(), p) <= 0.0) hull.pop_back();
    hull.push_back(p);
  }
  return hull;
}

}  // namespace maxsens
