#include "maxsens/quadrature.hpp"

#include "maxsens/types.hpp"

#include <algorithm>
#include <cmath>

namespace maxsens {

const TetRule& tet_rule_degree2() {
  static const TetRule rule = [] {
    const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    TetRule r;
    r.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
    r.weights = {0.25, 0.25, 0.25, 0.25};
    return r;
  }();
  return rule;
}

namespace {

using Bary = std::array<double, 4>;

Bary mid(const Bary& a, const Bary& b) {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2]), 0.5 * (a[3] + b[3])};
}

// Eight equal-volume children through the edge midpoints; the inner
// octahedron is cut along the 02-13 diagonal.
std::array<std::array<Bary, 4>, 8> split(const std::array<Bary, 4>& v) {
  const Bary m01 = mid(v[0], v[1]), m02 = mid(v[0], v[2]), m03 = mid(v[0], v[3]),
             m12 = mid(v[1], v[2]), m13 = mid(v[1], v[3]), m23 = mid(v[2], v[3]);
  return {{{v[0], m01, m02, m03},
           {m01, v[1], m12, m13},
           {m02, m12, v[2], m23},
           {m03, m13, m23, v[3]},
           {m02, m13, m01, m03},
           {m02, m13, m03, m23},
           {m02, m13, m23, m12},
           {m02, m13, m12, m01}}};
}

TetRule build_composite(int level) {
  std::vector<std::array<Bary, 4>> pieces{
      {Bary{1, 0, 0, 0}, Bary{0, 1, 0, 0}, Bary{0, 0, 1, 0}, Bary{0, 0, 0, 1}}};
  for (int l = 0; l < level; ++l) {
    std::vector<std::array<Bary, 4>> next;
    next.reserve(pieces.size() * 8);
    for (const auto& p : pieces) {
      for (const auto& c : split(p)) next.push_back(c);
    }
    pieces.swap(next);
  }
  const TetRule& base = tet_rule_degree2();
  const double share = 1.0 / static_cast<double>(pieces.size());
  TetRule r;
  r.points.reserve(pieces.size() * base.points.size());
  for (const auto& p : pieces) {
    for (std::size_t q = 0; q < base.points.size(); ++q) {
      Bary x{0, 0, 0, 0};
      for (int k = 0; k < 4; ++k)
        for (int c = 0; c < 4; ++c) x[c] += base.points[q][k] * p[k][c];
      r.points.push_back(x);
      r.weights.push_back(base.weights[q] * share);
    }
  }
  return r;
}

}  // namespace

const TetRule& tet_rule_composite(int level) {
  static const std::array<TetRule, kMaxCompositeLevel + 1> rules = [] {
    std::array<TetRule, kMaxCompositeLevel + 1> out;
    for (int l = 0; l <= kMaxCompositeLevel; ++l) out[l] = build_composite(l);
    return out;
  }();
  return rules[std::clamp(level, 0, kMaxCompositeLevel)];
}

const TriangleRule& triangle_rule_degree2() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    const double a = 2.0 / 3.0;
    const double b = 1.0 / 6.0;
    r.points = {{a, b, b}, {b, a, b}, {b, b, a}};
    r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return r;
  }();
  return rule;
}

const TriangleRule& triangle_rule_degree4() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    const double a1 = 0.44594849091596488632;
    const double w1 = 0.22338158967801146570;
    const double a2 = 0.091576213509770743460;
    const double w2 = 0.10995174365532186764;
    const double b1 = 1.0 - 2.0 * a1;
    const double b2 = 1.0 - 2.0 * a2;
    r.points = {{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1},
                {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}};
    r.weights = {w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

TetRule tet_rule_collapsed(int n) {
  std::vector<double> x;
  std::vector<double> w;
  gauss_legendre_unit(n, x, w);
  TetRule r;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double u = x[i];
        const double v = x[j];
        const double s = x[k];
        const double l1 = u;
        const double l2 = v * (1.0 - u);
        const double l3 = s * (1.0 - u) * (1.0 - v);
        r.points.push_back({1.0 - l1 - l2 - l3, l1, l2, l3});
        r.weights.push_back(6.0 * w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
      }
    }
  }
  return r;
}

}  // namespace maxsens
