#pragma once

// Independent point-in-polygon oracle (even-odd ray casting) plus the seeded
// random-case generator shared by the pip-check CLI and the test suite.
// Deliberately does NOT call pip_residuals / point_in_polygon: the whole
// point is to cross-check the linear-residual predicate against a method
// with a different failure mode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flexcouple/geometry.hpp"
#include "flexcouple/rng.hpp"

namespace flexcouple {

// Even-odd rule with a horizontal ray toward +x. Exact boundary hits are
// undefined here; the generator below keeps test points away from edges.
inline bool raycast_point_in_polygon(const Point2& p,
                                     const std::vector<Point2>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[j];
    const Point2& b = poly[i];
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_int = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (x_int > p.x) inside = !inside;
    }
  }
  return inside;
}

// Strict convex hull, CCW (monotone chain, collinear points dropped).
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2& a, const Point2& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return {};
  std::vector<Point2> h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

struct PipCase {
  std::vector<Point2> polygon;  // strictly convex, CCW
  Point2 point;
};

// One random case: convex hull of 4-12 points in a box of random scale and
// offset, then a query point from the inflated bounding box. Points landing
// within 1e-9 * edge_length of any edge line are resampled: the two
// predicates may legitimately disagree inside float rounding of an exact
// boundary, which is not the disagreement this oracle exists to catch.
inline PipCase random_pip_case(UniformRng& rng) {
  PipCase pc;
  while (true) {
    const double scale = std::pow(10.0, rng.range(-2.0, 0.5));
    const Point2 center{rng.range(-3.0, 3.0), rng.range(-3.0, 3.0)};
    const int n_pts = 4 + static_cast<int>(rng.next() * 9.0);
    std::vector<Point2> cloud(static_cast<std::size_t>(n_pts));
    for (auto& p : cloud)
      p = {center.x + scale * rng.range(-1.0, 1.0),
           center.y + scale * rng.range(-1.0, 1.0)};
    pc.polygon = convex_hull(std::move(cloud));
    if (pc.polygon.size() >= 3) break;
  }
  double lo_x = pc.polygon[0].x, hi_x = lo_x, lo_y = pc.polygon[0].y, hi_y = lo_y;
  for (const auto& v : pc.polygon) {
    lo_x = std::min(lo_x, v.x); hi_x = std::max(hi_x, v.x);
    lo_y = std::min(lo_y, v.y); hi_y = std::max(hi_y, v.y);
  }
  const double pad_x = 0.25 * (hi_x - lo_x), pad_y = 0.25 * (hi_y - lo_y);
  while (true) {
    pc.point = {rng.range(lo_x - pad_x, hi_x + pad_x),
                rng.range(lo_y - pad_y, hi_y + pad_y)};
    bool clear = true;
    const std::size_t n = pc.polygon.size();
    for (std::size_t k = 0; k < n && clear; ++k) {
      const Point2& a = pc.polygon[k];
      const Point2& b = pc.polygon[(k + 1) % n];
      const double r = (b - a).cross(pc.point - a);
      if (std::abs(r) < 1e-9 * (b - a).norm()) clear = false;
    }
    if (clear) break;
  }
  return pc;
}

}  // namespace flexcouple
