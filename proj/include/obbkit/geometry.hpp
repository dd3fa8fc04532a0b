// Copyright 2026 The obbkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// \file
/// Oriented boxes in the long-edge convention, their polygon form, and exact
/// rotated IoU by convex clipping. A Monte-Carlo estimator is provided as an
/// independent cross-check of the exact route.

#ifndef OBBKIT__GEOMETRY_HPP_
#define OBBKIT__GEOMETRY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "obbkit/error.hpp"
#include "obbkit/random.hpp"

namespace obbkit
{

inline constexpr double kPi = std::numbers::pi;

/// Vertices closer than this after clipping are merged.
inline constexpr double kMergeEps = 1e-9;

struct Point2
{
  double x{0.0};
  double y{0.0};

  friend constexpr Point2 operator+(Point2 a, Point2 b) {return {a.x + b.x, a.y + b.y};}
  friend constexpr Point2 operator-(Point2 a, Point2 b) {return {a.x - b.x, a.y - b.y};}
  friend constexpr Point2 operator*(Point2 a, double s) {return {a.x * s, a.y * s};}
  friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

constexpr double cross(Point2 a, Point2 b) {return a.x * b.y - a.y * b.x;}
constexpr double dot(Point2 a, Point2 b) {return a.x * b.x + a.y * b.y;}
inline double norm(Point2 a) {return std::hypot(a.x, a.y);}

/// Five-parameter rotated rectangle. After normalize_obb: w >= h > 0 and
/// theta in [-pi/4, 3pi/4) is the direction of the long edge.
struct OrientedBox
{
  double cx{0.0};
  double cy{0.0};
  double w{0.0};
  double h{0.0};
  double theta{0.0};

  double area() const {return w * h;}
  friend constexpr bool operator==(const OrientedBox &, const OrientedBox &) = default;
};

/// Four vertices in counter-clockwise order (positive signed area).
struct ConvexQuad
{
  std::array<Point2, 4> vertices{};
};

/// Shoelace signed area; positive for counter-clockwise order.
inline double signed_area(std::span<const Point2> poly)
{
  const std::size_t n = poly.size();
  if (n < 3) {
    return 0.0;
  }
  double acc = 0.0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    acc += cross(poly[j], poly[i]);
  }
  return 0.5 * acc;
}

inline double quad_area(const ConvexQuad & q)
{
  return std::max(0.0, signed_area(q.vertices));
}

/// Reduce an angle modulo `period` into [lo, lo + period).
inline double wrap_angle(double theta, double lo, double period)
{
  double r = theta - period * std::floor((theta - lo) / period);
  if (r >= lo + period) {
    r -= period;
  }
  if (r < lo) {
    r = lo;
  }
  return r;
}

/// Reduce theta modulo pi into the long-edge range [-pi/4, 3pi/4).
inline double wrap_long_edge_angle(double theta)
{
  return wrap_angle(theta, -kPi / 4.0, kPi);
}

/// Bring an arbitrary five-parameter box into the long-edge convention.
/// Squares keep their angle reduced modulo pi/2 into [-pi/4, pi/4).
inline OrientedBox normalize_obb(const OrientedBox & raw)
{
  if (!std::isfinite(raw.cx) || !std::isfinite(raw.cy) || !std::isfinite(raw.w) ||
    !std::isfinite(raw.h) || !std::isfinite(raw.theta))
  {
    throw InvalidInput("normalize_obb: non-finite box parameter");
  }
  if (raw.w <= 0.0 || raw.h <= 0.0) {
    throw InvalidInput("normalize_obb: box dimensions must be positive");
  }
  OrientedBox box = raw;
  if (box.w < box.h) {
    std::swap(box.w, box.h);
    box.theta += kPi / 2.0;
  }
  if (box.w == box.h) {
    box.theta = wrap_angle(box.theta, -kPi / 4.0, kPi / 2.0);
  } else {
    box.theta = wrap_long_edge_angle(box.theta);
  }
  return box;
}

/// Corners in CCW order starting at local (-w/2, -h/2).
inline ConvexQuad obb_to_polygon(const OrientedBox & box)
{
  const double c = std::cos(box.theta);
  const double s = std::sin(box.theta);
  const double hw = 0.5 * box.w;
  const double hh = 0.5 * box.h;
  constexpr std::array<std::array<double, 2>, 4> signs{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  ConvexQuad q;
  for (std::size_t i = 0; i < 4; ++i) {
    const double lx = signs[i][0] * hw;
    const double ly = signs[i][1] * hh;
    q.vertices[i] = {box.cx + lx * c - ly * s, box.cy + lx * s + ly * c};
  }
  return q;
}

/// Inclusive containment test for a CCW convex polygon.
inline bool point_in_convex(std::span<const Point2> poly, Point2 p, double eps = 0.0)
{
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (cross(poly[i] - poly[j], p - poly[j]) < -eps) {
      return false;
    }
  }
  return true;
}

inline bool point_in_box(const OrientedBox & box, Point2 p, double eps = 0.0)
{
  const ConvexQuad q = obb_to_polygon(box);
  return point_in_convex(q.vertices, p, eps);
}

/// Andrew's monotone chain; CCW, collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts)
{
  std::sort(
    pts.begin(), pts.end(), [](Point2 a, Point2 b) {
      return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) {
    return pts;
  }
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2 & p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) {
      --k;
    }
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0; ) {
    const Point2 p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) {
      --k;
    }
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

/// Minimum-area enclosing rectangle of a quadrilateral (rotating calipers over
/// the hull edges). Vertex order of the input does not matter.
inline OrientedBox quad_to_obb(const ConvexQuad & quad)
{
  for (const Point2 & p : quad.vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidInput("quad_to_obb: non-finite vertex");
    }
  }
  const std::vector<Point2> hull =
    convex_hull({quad.vertices.begin(), quad.vertices.end()});
  if (hull.size() < 3) {
    throw DegenerateInput("quad_to_obb: collinear or coincident vertices");
  }
  const double hull_area = signed_area(hull);
  double scale = 0.0;
  for (const Point2 & p : hull) {
    scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  }
  if (hull_area <= 1e-12 * std::max(1.0, scale * scale)) {
    throw DegenerateInput("quad_to_obb: zero-area quadrilateral");
  }

  double best_area = std::numeric_limits<double>::infinity();
  OrientedBox best;
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 edge = hull[(i + 1) % n] - hull[i];
    const double len = norm(edge);
    if (len <= 0.0) {
      continue;
    }
    const Point2 u{edge.x / len, edge.y / len};
    const Point2 v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity();
    double umax = -umin;
    double vmin = umin;
    double vmax = -umin;
    for (const Point2 & p : hull) {
      const double pu = dot(p, u);
      const double pv = dot(p, v);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      const double mu = 0.5 * (umin + umax);
      const double mv = 0.5 * (vmin + vmax);
      best.cx = mu * u.x + mv * v.x;
      best.cy = mu * u.y + mv * v.y;
      best.w = umax - umin;
      best.h = vmax - vmin;
      best.theta = std::atan2(u.y, u.x);
    }
  }
  return normalize_obb(best);
}

namespace detail
{

inline Point2 segment_line_intersection(Point2 p, Point2 q, Point2 a, Point2 b)
{
  const Point2 d = q - p;
  const Point2 e = b - a;
  const double denom = cross(d, e);
  if (denom == 0.0) {
    return p;
  }
  const double t = cross(a - p, e) / denom;
  return p + d * t;
}

inline void merge_close_vertices(std::vector<Point2> & poly)
{
  std::vector<Point2> out;
  out.reserve(poly.size());
  for (const Point2 & p : poly) {
    if (out.empty() || norm(p - out.back()) >= kMergeEps) {
      out.push_back(p);
    }
  }
  while (out.size() > 1 && norm(out.front() - out.back()) < kMergeEps) {
    out.pop_back();
  }
  poly = std::move(out);
}

}  // namespace detail

/// Sutherland-Hodgman clip of `subject` against the CCW convex `clip`.
inline std::vector<Point2> clip_convex(
  std::span<const Point2> subject, std::span<const Point2> clip)
{
  std::vector<Point2> out(subject.begin(), subject.end());
  std::vector<Point2> in;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % m];
    in.swap(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 prev = in[(i + n - 1) % n];
      const Point2 cur = in[i];
      const bool cur_in = cross(b - a, cur - a) >= 0.0;
      const bool prev_in = cross(b - a, prev - a) >= 0.0;
      if (cur_in) {
        if (!prev_in) {
          out.push_back(detail::segment_line_intersection(prev, cur, a, b));
        }
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(detail::segment_line_intersection(prev, cur, a, b));
      }
    }
    detail::merge_close_vertices(out);
  }
  return out;
}

inline double polygon_intersection_area(const ConvexQuad & a, const ConvexQuad & b)
{
  const std::vector<Point2> poly = clip_convex(a.vertices, b.vertices);
  if (poly.size() < 3) {
    return 0.0;
  }
  return std::max(0.0, signed_area(poly));
}

inline double rotated_iou(const OrientedBox & a, const OrientedBox & b)
{
  const double reach = 0.5 * (std::hypot(a.w, a.h) + std::hypot(b.w, b.h));
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) >= reach) {
    return 0.0;
  }
  const ConvexQuad qa = obb_to_polygon(a);
  const ConvexQuad qb = obb_to_polygon(b);
  const double inter = polygon_intersection_area(qa, qb);
  const double uni = quad_area(qa) + quad_area(qb) - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Rejection-sampling IoU estimate over the bounding box of both boxes.
/// Deterministic for a fixed seed.
inline double mc_iou_oracle(
  const OrientedBox & a, const OrientedBox & b, std::uint64_t samples, std::uint64_t seed)
{
  if (samples == 0) {
    throw InvalidInput("mc_iou_oracle: samples must be >= 1");
  }
  const ConvexQuad qa = obb_to_polygon(a);
  const ConvexQuad qb = obb_to_polygon(b);
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = xmin;
  double xmax = -xmin;
  double ymax = -xmin;
  for (const ConvexQuad * q : {&qa, &qb}) {
    for (const Point2 & p : q->vertices) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  // Containment in each box's own frame: |u| <= w/2 and |v| <= h/2.
  struct Frame
  {
    double cx, cy, c, s, hw, hh;
    bool contains(double x, double y) const
    {
      const double dx = x - cx;
      const double dy = y - cy;
      return std::abs(dx * c + dy * s) <= hw && std::abs(dy * c - dx * s) <= hh;
    }
  };
  const Frame fa{a.cx, a.cy, std::cos(a.theta), std::sin(a.theta), 0.5 * a.w, 0.5 * a.h};
  const Frame fb{b.cx, b.cy, std::cos(b.theta), std::sin(b.theta), 0.5 * b.w, 0.5 * b.h};
  Rng rng(seed);
  std::uint64_t in_a = 0;
  std::uint64_t in_b = 0;
  std::uint64_t in_both = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double x = rng.uniform(xmin, xmax);
    const double y = rng.uniform(ymin, ymax);
    const bool ia = fa.contains(x, y);
    const bool ib = fb.contains(x, y);
    in_a += ia;
    in_b += ib;
    in_both += ia & ib;
  }
  const std::uint64_t uni = in_a + in_b - in_both;
  if (uni == 0) {
    return 0.0;
  }
  return static_cast<double>(in_both) / static_cast<double>(uni);
}

inline double center_distance(const OrientedBox & a, const OrientedBox & b)
{
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

/// Long over short edge; >= 1 for normalized boxes.
inline double aspect_ratio(const OrientedBox & box) {return box.w / box.h;}

}  // namespace obbkit

#endif  // OBBKIT__GEOMETRY_HPP_
