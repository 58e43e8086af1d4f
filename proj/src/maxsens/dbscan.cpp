#include "maxsens/dbscan.hpp"

#include "maxsens/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

namespace maxsens {

namespace {

constexpr int kUnvisited = -2;

struct CellKey {
  long long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

class SpatialHash {
 public:
  SpatialHash(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(i);
  }

  // Indices within eps of point i (including i), ascending.
  std::vector<std::size_t> neighbors(std::size_t i, double eps) const {
    std::vector<std::size_t> out;
    const CellKey c = key(points_[i]);
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            if ((points_[j] - points_[i]).norm() <= eps) out.push_back(j);
          }
        }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  CellKey key(const Vec3& p) const {
    return CellKey{static_cast<long long>(std::floor(p.x() / cell_)),
                   static_cast<long long>(std::floor(p.y() / cell_)),
                   static_cast<long long>(std::floor(p.z() / cell_))};
  }

  const std::vector<Vec3>& points_;
  double cell_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

}  // namespace

std::vector<int> dbscan(const std::vector<Vec3>& points, double eps, int min_pts) {
  if (!(eps > 0.0)) fail(ErrorCode::kInvalidArgument, "DBSCAN eps must be positive");
  if (min_pts < 1) fail(ErrorCode::kInvalidArgument, "DBSCAN min_pts must be at least 1");
  std::vector<int> labels(points.size(), kUnvisited);
  const SpatialHash grid(points, eps);
  int cluster = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != kUnvisited) continue;
    const auto seeds = grid.neighbors(i, eps);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (labels[j] == kNoise) labels[j] = cluster;  // border point
      if (labels[j] != kUnvisited) continue;
      labels[j] = cluster;
      const auto more = grid.neighbors(j, eps);
      if (static_cast<int>(more.size()) >= min_pts) queue.insert(queue.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  return labels;
}

int cluster_count(const std::vector<int>& labels) {
  int n = 0;
  for (int l : labels) n = std::max(n, l + 1);
  return n;
}

}  // namespace maxsens
