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

#ifndef OBBKIT_TESTS__TEST_UTIL_HPP_
#define OBBKIT_TESTS__TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>

#include "obbkit/geometry.hpp"
#include "obbkit/random.hpp"
#include "obbkit/sampling.hpp"

namespace obbkit::test
{

/// Normalized box with center in [-range, range]^2 and edges in [min_edge, max_edge].
inline OrientedBox random_box(Rng & rng, double range = 10.0, double min_edge = 0.5,
  double max_edge = 8.0)
{
  const OrientedBox raw{
    rng.uniform(-range, range), rng.uniform(-range, range),
    rng.uniform(min_edge, max_edge), rng.uniform(min_edge, max_edge),
    rng.uniform(-kPi, kPi)};
  return normalize_obb(raw);
}

/// Second box placed near the first so that overlap is likely.
inline OrientedBox random_neighbor(Rng & rng, const OrientedBox & a)
{
  const double r = 0.5 * std::hypot(a.w, a.h);
  const OrientedBox raw{
    a.cx + rng.uniform(-r, r), a.cy + rng.uniform(-r, r),
    a.w * rng.uniform(0.4, 1.6), a.h * rng.uniform(0.4, 1.6), rng.uniform(-kPi, kPi)};
  return normalize_obb(raw);
}

/// Largest distance from a vertex of one quad to the nearest vertex of the other.
inline double vertex_set_distance(const ConvexQuad & a, const ConvexQuad & b)
{
  double worst = 0.0;
  for (const ConvexQuad * p : {&a, &b}) {
    const ConvexQuad * q = p == &a ? &b : &a;
    for (const Point2 & v : p->vertices) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point2 & u : q->vertices) {
        best = std::min(best, norm(v - u));
      }
      worst = std::max(worst, best);
    }
  }
  return worst;
}

/// Bilinear sample by summing tent weights over every grid cell.
inline double tent_sample(const FeatureGrid & grid, Point2 p, std::size_t c)
{
  double v = 0.0;
  for (std::size_t y = 0; y < grid.height(); ++y) {
    for (std::size_t x = 0; x < grid.width(); ++x) {
      const double wx = std::max(0.0, 1.0 - std::abs(p.x - static_cast<double>(x)));
      const double wy = std::max(0.0, 1.0 - std::abs(p.y - static_cast<double>(y)));
      v += wx * wy * grid.at(x, y, c);
    }
  }
  return v;
}

/// Deformable response computed straight from image-space sample points:
/// point i lands at refined_i / stride and uses the kernel row/column picked
/// by its local sign pattern.
inline double direct_deformable(
  const FeatureGrid & grid, const Kernel3x3 & k, const PatternPoints & refined, double stride)
{
  static constexpr int kSx[9] = {0, 1, -1, -1, 1, 1, 0, -1, 0};
  static constexpr int kSy[9] = {0, 1, 1, -1, -1, 0, 1, 0, -1};
  double acc = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const std::size_t row = static_cast<std::size_t>(kSy[i] + 1);
    const std::size_t col = static_cast<std::size_t>(kSx[i] + 1);
    const Point2 q{refined[i].x / stride, refined[i].y / stride};
    for (std::size_t c = 0; c < grid.channels(); ++c) {
      acc += k.at(row * 3 + col, c) * tent_sample(grid, q, c);
    }
  }
  return acc;
}

inline FeatureGrid random_grid(Rng & rng, std::size_t w, std::size_t h, std::size_t ch)
{
  std::vector<double> v(w * h * ch);
  for (double & x : v) {
    x = rng.uniform(-1.0, 1.0);
  }
  return FeatureGrid(w, h, ch, std::move(v));
}

inline Kernel3x3 random_kernel(Rng & rng, std::size_t ch)
{
  std::vector<double> v(9 * ch);
  for (double & x : v) {
    x = rng.uniform(-1.0, 1.0);
  }
  return Kernel3x3(ch, std::move(v));
}

}  // namespace obbkit::test

#endif  // OBBKIT_TESTS__TEST_UTIL_HPP_
