#pragma once

#include "maxsens/types.hpp"

#include <vector>

namespace maxsens {

inline constexpr int kNoise = -1;

// DBSCAN with Euclidean distance in 3D. Labels are cluster ids 0, 1, ... in
// order of discovery (by point index) or kNoise. A point is a core point when
// at least min_pts points, itself included, lie within eps.
std::vector<int> dbscan(const std::vector<Vec3>& points, double eps, int min_pts);

// Number of clusters in a label vector.
int cluster_count(const std::vector<int>& labels);

}  // namespace maxsens
